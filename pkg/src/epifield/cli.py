"""Command-line driver wiring the modules into reproducible pipelines.

Subcommands: synth, merge, sample, train, reconstruct, evaluate, export-epi.
Every run writes a provenance file (resolved arguments, seed, library
versions, produced artifacts; no timestamps) so a pipeline can be rerun to
byte-identical outputs.  Exit codes: 0 success, 2 usage, 3 missing input,
4 invalid data, 1 unexpected failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .lightfield import (
    ManifestError,
    extract_epi,
    load_lightfield,
    merge_lightfields,
    save_lightfield,
    write_epi_png,
)
from .metrics import evaluate_reconstruction, l1_error_map, save_error_map_png
from .network import NetworkConfig, load_weights, save_weights
from .reconstruct import (
    nearest_copy_lightfield,
    network_reconstruct_lightfield,
    shear_reconstruct_lightfield,
    zero_fill_lightfield,
)
from .sampling import (
    SamplingPattern,
    apply_pattern,
    build_training_set,
    load_sparse_lightfield,
    save_sparse_lightfield,
    save_training_set,
)
from .shear import DisparityMap
from .synth import load_scene_config, render_dense_lightfield
from .training import TrainConfig, train

EXIT_MISSING_INPUT = 3
EXIT_BAD_DATA = 4


def _library_versions() -> dict[str, str]:
    import PIL
    import scipy
    import torch

    return {
        "epifield": __version__,
        "numpy": np.__version__,
        "torch": torch.__version__,
        "scipy": scipy.__version__,
        "pillow": PIL.__version__,
    }


def _write_provenance(path: Path, command: str, args: dict, extra: dict | None = None) -> None:
    record = {
        "tool": "epifield",
        "command": command,
        "args": {k: v for k, v in sorted(args.items())},
        "versions": _library_versions(),
    }
    if extra:
        record.update(extra)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(record, fh, indent=1, sort_keys=True)


def _arg_dict(ns: argparse.Namespace) -> dict:
    out = {}
    for k, v in vars(ns).items():
        if k == "func":
            continue
        out[k] = str(v) if isinstance(v, Path) else v
    return out


def cmd_synth(ns: argparse.Namespace) -> int:
    scene, camera, grid, view_step = load_scene_config(ns.scene)
    lf = render_dense_lightfield(scene, camera, grid, view_step)
    save_lightfield(lf, ns.out)
    _write_provenance(Path(ns.out) / "provenance.json", "synth", _arg_dict(ns))
    print(f"rendered {grid[0]}x{grid[1]} views of {grid[2]}x{grid[3]} px -> {ns.out}")
    return 0


def cmd_merge(ns: argparse.Namespace) -> int:
    chain = [load_lightfield(p) for p in ns.inputs]
    merged = merge_lightfields(chain, overlap=ns.overlap)
    save_lightfield(merged, ns.out)
    _write_provenance(
        Path(ns.out) / "provenance.json",
        "merge",
        _arg_dict(ns),
        {"merged_views": merged.nu},
    )
    print(f"merged {len(chain)} fields at overlap {ns.overlap} -> {merged.nu} views")
    return 0


def cmd_sample(ns: argparse.Namespace) -> int:
    pattern = SamplingPattern.from_name(ns.pattern)
    dense = load_lightfield(ns.input)
    sparse, kept = apply_pattern(dense, pattern)
    save_sparse_lightfield(sparse, ns.out)
    _write_provenance(
        Path(ns.out) / "provenance.json",
        "sample",
        _arg_dict(ns),
        {"kept_subfields": kept, "input_subfield_count": len(kept)},
    )
    print(f"pattern {pattern.name}: kept {len(kept)} input sub-light-fields of {dense.nu // 9}")
    return 0


def _load_net_config(path: str | None) -> NetworkConfig:
    if path is None:
        return NetworkConfig()
    with open(path) as fh:
        return NetworkConfig.from_dict(json.load(fh))


def _load_train_config(path: str | None, seed: int) -> TrainConfig:
    if path is None:
        return TrainConfig(seed=seed)
    with open(path) as fh:
        raw = json.load(fh)
    raw.pop("seed", None)
    for key in ("brightness_range", "noise_sigma_range"):
        if key in raw:
            raw[key] = tuple(raw[key])
    return TrainConfig(seed=seed, **raw)


def cmd_train(ns: argparse.Namespace) -> int:
    pattern = SamplingPattern.from_name(ns.pattern)
    fields = [load_lightfield(p) for p in ns.inputs]
    pairs = build_training_set(fields, pattern, crop_width=ns.crop_width, stride=ns.stride)
    if ns.save_dataset:
        save_training_set(pairs, ns.save_dataset, pattern)
    net_cfg = _load_net_config(ns.net_config)
    train_cfg = _load_train_config(ns.train_config, ns.seed)
    result = train(pairs, net_cfg, train_cfg)
    out = Path(ns.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_weights(result.net, out)
    if ns.loss_csv:
        result.save_loss_csv(ns.loss_csv)
    _write_provenance(
        out.with_suffix(out.suffix + ".provenance.json"),
        "train",
        _arg_dict(ns),
        {"pairs": len(pairs), "iterations": int(result.losses.size)},
    )
    print(
        f"trained pattern {pattern.name} on {len(pairs)} pairs for "
        f"{result.losses.size} iterations; final loss {result.losses[-1]:.6g}"
    )
    return 0


def cmd_reconstruct(ns: argparse.Namespace) -> int:
    pattern = SamplingPattern.from_name(ns.pattern)
    sparse = load_sparse_lightfield(ns.input, pattern)
    if ns.method == "network":
        if not ns.weights:
            raise ValueError("--method network needs --weights")
        net = load_weights(ns.weights)
        recon = network_reconstruct_lightfield(sparse, net, pattern)
    elif ns.method == "shear":
        if ns.disparity is None:
            raise ValueError("--method shear needs --disparity")
        recon = shear_reconstruct_lightfield(sparse, DisparityMap(ns.disparity), pattern)
    elif ns.method == "nearest-copy":
        recon = nearest_copy_lightfield(sparse, pattern)
    else:  # zero-fill
        recon = zero_fill_lightfield(sparse)
    save_lightfield(recon, ns.out)
    _write_provenance(Path(ns.out) / "provenance.json", "reconstruct", _arg_dict(ns))
    print(f"reconstructed {recon.nu} views with method {ns.method} -> {ns.out}")
    return 0


def cmd_evaluate(ns: argparse.Namespace) -> int:
    pattern = SamplingPattern.from_name(ns.pattern)
    recon = load_lightfield(ns.recon)
    truth = load_lightfield(ns.truth)
    mask = pattern.reconstructed_view_mask(truth.nu)
    report = evaluate_reconstruction(
        recon, truth, mask, method=ns.method, pattern=pattern.name
    )
    out = Path(ns.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.csv").write_text(report.to_csv())
    (out / "report.txt").write_text(report.to_text())
    if ns.error_maps:
        for u in np.flatnonzero(mask):
            for v in range(truth.nv):
                err, _ = l1_error_map(recon.samples[u, v], truth.samples[u, v])
                save_error_map_png(
                    err.T, out / f"error_u{u:03d}_v{v:03d}.png", scale=ns.error_scale
                )
    _write_provenance(
        out / "provenance.json",
        "evaluate",
        _arg_dict(ns),
        {"mean_psnr_db": report.mean_psnr, "mean_ssim": report.mean_ssim},
    )
    print(report.to_text(), end="")
    return 0


def cmd_export_epi(ns: argparse.Namespace) -> int:
    lf = load_lightfield(ns.input)
    epi = extract_epi(lf, ns.view_column, ns.pixel_row)
    out = Path(ns.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_epi_png(epi, out)
    _write_provenance(
        out.with_suffix(out.suffix + ".provenance.json"), "export-epi", _arg_dict(ns)
    )
    print(f"exported EPI (v={ns.view_column}, t={ns.pixel_row}) -> {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="epifield",
        description="Dense light field reconstruction from sparse sampling",
    )
    parser.add_argument("--version", action="version", version=f"epifield {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="render a dense light field from a scene config")
    p.add_argument("--scene", required=True, help="scene config JSON")
    p.add_argument("--out", required=True, help="output field directory")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("merge", help="fuse overlapping light fields along u")
    p.add_argument("--inputs", nargs="+", required=True, help="field manifests, in order")
    p.add_argument("--overlap", type=int, required=True, help="shared views per junction")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_merge)

    p = sub.add_parser("sample", help="apply a sparse sampling pattern")
    p.add_argument("--input", required=True, help="dense field manifest")
    p.add_argument("--pattern", required=True, help="A, B, or C")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("train", help="build a training set and fit the network")
    p.add_argument("--inputs", nargs="+", required=True, help="dense field manifests")
    p.add_argument("--pattern", required=True)
    p.add_argument("--out", required=True, help="output weight container (.epiw)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--crop-width", type=int, default=64)
    p.add_argument("--stride", type=int, default=16)
    p.add_argument("--net-config", help="network config JSON (default: full architecture)")
    p.add_argument("--train-config", help="training config JSON")
    p.add_argument("--loss-csv", help="write per-iteration loss history here")
    p.add_argument("--save-dataset", help="also persist the window pairs here")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("reconstruct", help="fill the gaps of a sparse field")
    p.add_argument("--input", required=True, help="sparse field manifest")
    p.add_argument("--pattern", required=True)
    p.add_argument(
        "--method",
        required=True,
        choices=["network", "shear", "zero-fill", "nearest-copy"],
    )
    p.add_argument("--weights", help="weight container for --method network")
    p.add_argument("--disparity", type=float, help="constant disparity for --method shear")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_reconstruct)

    p = sub.add_parser("evaluate", help="score a reconstruction against ground truth")
    p.add_argument("--recon", required=True)
    p.add_argument("--truth", required=True)
    p.add_argument("--pattern", required=True)
    p.add_argument("--method", default="", help="label recorded in the report")
    p.add_argument("--out", required=True, help="report directory")
    p.add_argument("--error-maps", action="store_true", help="write per-view L1 maps")
    p.add_argument("--error-scale", type=float, default=4.0)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("export-epi", help="export one (v, t) EPI as a PNG")
    p.add_argument("--input", required=True)
    p.add_argument("--view-column", "-v", type=int, required=True, help="v index")
    p.add_argument("--pixel-row", "-t", type=int, required=True, help="t index")
    p.add_argument("--out", required=True, help="output PNG path")
    p.set_defaults(func=cmd_export_epi)
    return parser


def main(argv: list[str] | None = None) -> int:
    threads = os.environ.get("EPIFIELD_NUM_THREADS")
    if threads:
        import torch

        torch.set_num_threads(int(threads))
    parser = build_parser()
    ns = parser.parse_args(argv)
    try:
        return ns.func(ns)
    except FileNotFoundError as exc:
        print(f"epifield {ns.command}: missing input: {exc}", file=sys.stderr)
        return EXIT_MISSING_INPUT
    except (ManifestError, ValueError, IndexError) as exc:
        print(f"epifield {ns.command}: {exc}", file=sys.stderr)
        return EXIT_BAD_DATA
    except Exception as exc:  # pragma: no cover - defensive
        print(f"epifield {ns.command}: unexpected failure: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
