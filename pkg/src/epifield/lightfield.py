"""4D light field container, manifest I/O, EPI slicing, and overlap merging.

A light field is stored as a dense float32 grid ``samples[u, v, s, t]`` of
RGB triples in [0, 1], where (u, v) selects a view and (s, t) a pixel.  The
camera rig translates along the u axis, so the 2D slice with v and t held
fixed (rows = u-views, columns = s-pixels) is an epipolar plane image (EPI)
in which every scene point traces a straight line.

Values live in [0, 1] throughout; 8-bit quantization happens only at file
boundaries (PNG views referenced from a JSON manifest).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from PIL import Image

MANIFEST_NAME = "manifest.json"


class ManifestError(ValueError):
    """Malformed manifest or a view file that does not match it."""


@dataclass(frozen=True)
class CameraModel:
    """View-array camera intrinsics.

    Attributes:
        focal: Interval between view plane and image plane, in pixels per
            unit lateral world offset at unit depth.  A point at depth Z
            shifts by ``focal / Z`` pixels per unit of view translation.
        disparity_scale: Constant tying disparity to depth, ``d =
            disparity_scale / Z``.
    """

    focal: float = 1.0
    disparity_scale: float = 1.0

    def __post_init__(self) -> None:
        if not self.focal > 0:
            raise ValueError(f"focal must be positive, got {self.focal}")
        if not self.disparity_scale > 0:
            raise ValueError(
                f"disparity_scale must be positive, got {self.disparity_scale}"
            )

    def disparity(self, depth: float) -> float:
        """Disparity of a point at the given depth (0 for depth = inf)."""
        if not depth > 0:
            raise ValueError(f"depth must be positive, got {depth}")
        return self.disparity_scale / depth


@dataclass
class LightField:
    """Dense 4D sample grid with view-step metadata.

    Attributes:
        samples: float32 array of shape (nu, nv, ns, nt, 3), values in [0, 1].
        view_step: world-space distance between adjacent views along u (and v).
        camera: intrinsics shared by every view.
    """

    samples: np.ndarray
    view_step: float = 1.0
    camera: CameraModel = field(default_factory=CameraModel)

    def __post_init__(self) -> None:
        self.samples = np.asarray(self.samples, dtype=np.float32)
        if self.samples.ndim != 5 or self.samples.shape[-1] != 3:
            raise ValueError(
                f"samples must have shape (nu, nv, ns, nt, 3), got {self.samples.shape}"
            )
        if min(self.samples.shape[:4]) < 1:
            raise ValueError(f"all dimensions must be >= 1, got {self.samples.shape}")
        if not self.view_step > 0:
            raise ValueError(f"view_step must be positive, got {self.view_step}")
        lo, hi = float(self.samples.min()), float(self.samples.max())
        if not (0.0 <= lo and hi <= 1.0):
            raise ValueError(f"sample values must lie in [0, 1], got range [{lo}, {hi}]")

    @property
    def nu(self) -> int:
        return self.samples.shape[0]

    @property
    def nv(self) -> int:
        return self.samples.shape[1]

    @property
    def ns(self) -> int:
        return self.samples.shape[2]

    @property
    def nt(self) -> int:
        return self.samples.shape[3]

    @property
    def dims(self) -> tuple[int, int, int, int]:
        return self.samples.shape[:4]

    def view_image(self, u: int, v: int) -> np.ndarray:
        """Return view (u, v) as an image array of shape (nt, ns, 3)."""
        return np.ascontiguousarray(self.samples[u, v].transpose(1, 0, 2))


@dataclass
class EPI:
    """Epipolar plane image: one (v, t) fiber of a light field.

    ``pixels[u, s]`` holds the RGB sample of view u at column s.  ``row_valid``
    marks rows backed by real data; rows from missing views are all-zero and
    flagged False.
    """

    pixels: np.ndarray
    row_valid: np.ndarray | None = None

    def __post_init__(self) -> None:
        self.pixels = np.asarray(self.pixels, dtype=np.float32)
        if self.pixels.ndim != 3 or self.pixels.shape[-1] != 3:
            raise ValueError(f"pixels must have shape (nu, ns, 3), got {self.pixels.shape}")
        if self.pixels.shape[0] < 1 or self.pixels.shape[1] < 1:
            raise ValueError(f"EPI must be at least 1x1, got {self.pixels.shape}")
        if self.row_valid is None:
            self.row_valid = np.ones(self.pixels.shape[0], dtype=bool)
        else:
            self.row_valid = np.asarray(self.row_valid, dtype=bool)
            if self.row_valid.shape != (self.pixels.shape[0],):
                raise ValueError(
                    f"row_valid must have shape ({self.pixels.shape[0]},), "
                    f"got {self.row_valid.shape}"
                )
            if np.any(self.pixels[~self.row_valid]):
                raise ValueError("invalid EPI rows must be all-zero")

    @property
    def nu(self) -> int:
        return self.pixels.shape[0]

    @property
    def ns(self) -> int:
        return self.pixels.shape[1]


@dataclass
class Manifest:
    """Index of a light field stored on disk as one PNG per view.

    ``view_paths[u][v]`` names the image of view (u, v), relative to the
    manifest's directory.  ``u_valid`` is optional sparse-field metadata:
    views of u-rows flagged False are stored as black images.
    """

    view_paths: list[list[str]]
    ns: int
    nt: int
    view_step: float
    camera: CameraModel
    u_valid: list[bool] | None = None

    @property
    def nu(self) -> int:
        return len(self.view_paths)

    @property
    def nv(self) -> int:
        return len(self.view_paths[0]) if self.view_paths else 0

    def to_dict(self) -> dict:
        d = {
            "ns": self.ns,
            "nt": self.nt,
            "view_step": self.view_step,
            "camera": {
                "focal": self.camera.focal,
                "disparity_scale": self.camera.disparity_scale,
            },
            "views": self.view_paths,
        }
        if self.u_valid is not None:
            d["u_valid"] = [bool(x) for x in self.u_valid]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "Manifest":
        try:
            views = d["views"]
            cam = CameraModel(
                focal=float(d["camera"]["focal"]),
                disparity_scale=float(d["camera"]["disparity_scale"]),
            )
            m = cls(
                view_paths=views,
                ns=int(d["ns"]),
                nt=int(d["nt"]),
                view_step=float(d["view_step"]),
                camera=cam,
                u_valid=[bool(x) for x in d["u_valid"]] if "u_valid" in d else None,
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ManifestError(f"malformed manifest: {exc}") from exc
        if not m.view_paths or not all(isinstance(row, list) for row in m.view_paths):
            raise ManifestError("malformed manifest: views must be a 2D list")
        nv = len(m.view_paths[0])
        for u, row in enumerate(m.view_paths):
            if len(row) != nv:
                raise ManifestError(
                    f"malformed manifest: view grid is ragged at u={u} "
                    f"({len(row)} entries, expected {nv})"
                )
        return m


def to_uint8(values: np.ndarray) -> np.ndarray:
    """Quantize [0, 1] float samples to 8-bit."""
    return np.round(np.clip(values, 0.0, 1.0) * 255.0).astype(np.uint8)


def from_uint8(values: np.ndarray) -> np.ndarray:
    """Map 8-bit samples back to float32 in [0, 1]."""
    return values.astype(np.float32) / np.float32(255.0)


def save_lightfield(lf: LightField, out_dir: str | Path) -> Manifest:
    """Write a light field as one 8-bit RGB PNG per view plus a manifest.

    Args:
        lf: field to store.
        out_dir: target directory; created if absent.

    Returns:
        The manifest that was written to ``out_dir / manifest.json``.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    view_paths: list[list[str]] = []
    for u in range(lf.nu):
        row = []
        for v in range(lf.nv):
            name = f"view_u{u:03d}_v{v:03d}.png"
            img = to_uint8(lf.view_image(u, v))
            Image.fromarray(img, mode="RGB").save(out_dir / name)
            row.append(name)
        view_paths.append(row)
    manifest = Manifest(
        view_paths=view_paths,
        ns=lf.ns,
        nt=lf.nt,
        view_step=lf.view_step,
        camera=lf.camera,
    )
    with open(out_dir / MANIFEST_NAME, "w") as fh:
        json.dump(manifest.to_dict(), fh, indent=1, sort_keys=True)
    return manifest


def load_manifest(manifest_path: str | Path) -> tuple[Manifest, Path]:
    """Read and validate a manifest; returns it with its base directory."""
    manifest_path = Path(manifest_path)
    if manifest_path.is_dir():
        manifest_path = manifest_path / MANIFEST_NAME
    if not manifest_path.exists():
        raise FileNotFoundError(f"manifest not found: {manifest_path}")
    try:
        with open(manifest_path) as fh:
            raw = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ManifestError(f"malformed manifest {manifest_path}: {exc}") from exc
    return Manifest.from_dict(raw), manifest_path.parent


def load_lightfield(manifest_path: str | Path) -> LightField:
    """Load a light field from a manifest written by :func:`save_lightfield`.

    Raises:
        FileNotFoundError: manifest missing.
        ManifestError: malformed manifest, a missing view file, or a view
            image whose size disagrees with the manifest; the message names
            the offending (u, v).
    """
    manifest, base = load_manifest(manifest_path)
    nu, nv = manifest.nu, manifest.nv
    samples = np.zeros((nu, nv, manifest.ns, manifest.nt, 3), dtype=np.float32)
    for u in range(nu):
        for v in range(nv):
            path = base / manifest.view_paths[u][v]
            if not path.exists():
                raise ManifestError(f"missing image for view ({u}, {v}): {path}")
            with Image.open(path) as img:
                arr = np.asarray(img.convert("RGB"))
            if arr.shape != (manifest.nt, manifest.ns, 3):
                raise ManifestError(
                    f"size mismatch for view ({u}, {v}): image is "
                    f"{arr.shape[1]}x{arr.shape[0]}, manifest says "
                    f"{manifest.ns}x{manifest.nt}"
                )
            samples[u, v] = from_uint8(arr).transpose(1, 0, 2)
    return LightField(samples, view_step=manifest.view_step, camera=manifest.camera)


def extract_epi(lf: LightField, v: int, t: int) -> EPI:
    """Cut the (v, t) fiber of a light field: rows are u-views, columns s-pixels."""
    if not 0 <= v < lf.nv:
        raise IndexError(f"view column v={v} out of range [0, {lf.nv})")
    if not 0 <= t < lf.nt:
        raise IndexError(f"pixel row t={t} out of range [0, {lf.nt})")
    return EPI(pixels=np.ascontiguousarray(lf.samples[:, v, :, t, :]))


def assemble_lightfield(
    epis: Sequence[Sequence[EPI]],
    view_step: float = 1.0,
    camera: CameraModel | None = None,
) -> LightField:
    """Inverse of :func:`extract_epi`: stack a complete (v, t) grid of EPIs.

    ``epis[v][t]`` must all share the same (nu, ns).
    """
    if not epis or not epis[0]:
        raise ValueError("EPI grid must contain at least one entry")
    nv, nt = len(epis), len(epis[0])
    for v, row in enumerate(epis):
        if len(row) != nt:
            raise ValueError(f"missing EPI entries at v={v}: got {len(row)}, expected {nt}")
    first = epis[0][0]
    nu, ns = first.nu, first.ns
    samples = np.empty((nu, nv, ns, nt, 3), dtype=np.float32)
    for v in range(nv):
        for t in range(nt):
            epi = epis[v][t]
            if epi.pixels.shape != (nu, ns, 3):
                raise ValueError(
                    f"EPI at (v={v}, t={t}) has shape {epi.pixels.shape[:2]}, "
                    f"expected ({nu}, {ns})"
                )
            samples[:, v, :, t, :] = epi.pixels
    return LightField(samples, view_step=view_step, camera=camera or CameraModel())


def merge_lightfields(chain: Sequence[LightField], overlap: int) -> LightField:
    """Fuse an ordered chain of light fields that share views along u.

    Consecutive fields overlap by ``overlap`` u-views; every u-column covered
    by more than one field is fused by per-pixel averaging, the rest are
    copied verbatim.  The merged view count is
    ``sum(nu_i) - overlap * (len(chain) - 1)``.
    """
    if not chain:
        raise ValueError("merge needs at least one light field")
    head = chain[0]
    for i, lf in enumerate(chain):
        if lf.dims[1:] != head.dims[1:]:
            raise ValueError(
                f"field {i} has (nv, ns, nt) = {lf.dims[1:]}, expected {head.dims[1:]}"
            )
        if lf.view_step != head.view_step or lf.camera != head.camera:
            raise ValueError(f"field {i} disagrees on view_step or camera")
        if overlap >= lf.nu:
            raise ValueError(f"overlap {overlap} must be smaller than nu={lf.nu} (field {i})")
    if overlap < 0:
        raise ValueError(f"overlap must be non-negative, got {overlap}")

    total_nu = sum(lf.nu for lf in chain) - overlap * (len(chain) - 1)
    # Accumulate in float64 so that averaging n identical float32 views
    # returns them bit-exactly for any n.
    acc = np.zeros((total_nu,) + head.dims[1:] + (3,), dtype=np.float64)
    count = np.zeros(total_nu, dtype=np.int64)
    offset = 0
    for lf in chain:
        acc[offset : offset + lf.nu] += lf.samples
        count[offset : offset + lf.nu] += 1
        offset += lf.nu - overlap
    merged = (acc / count[:, None, None, None, None]).astype(np.float32)
    return LightField(merged, view_step=head.view_step, camera=head.camera)


def write_epi_png(epi: EPI, path: str | Path) -> None:
    """Export an EPI as an 8-bit PNG (image rows = u-views, columns = s)."""
    Image.fromarray(to_uint8(epi.pixels), mode="RGB").save(Path(path))


def subfield_count(lf_or_nu: LightField | int, subfield_size: int = 9) -> int:
    """Number of whole sub-light-fields along u (nu must be a multiple)."""
    nu = lf_or_nu.nu if isinstance(lf_or_nu, LightField) else int(lf_or_nu)
    if nu % subfield_size != 0:
        raise ValueError(f"nu={nu} is not a multiple of the sub-field size {subfield_size}")
    return nu // subfield_size
