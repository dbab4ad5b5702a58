"""Sparse sampling patterns and EPI window extraction around blank bands.

A dense field of ``n`` adjacent 9-view sub-light-fields is sparsified by
keeping every (gap+1)-th sub-light-field and zeroing the views in between.
Each kept/gap/kept stretch of an EPI forms a window: two valid 9-row bands
around a blank band of ``gap * 9`` all-zero rows.  Windows are the unit of
work for both the learned and the shear reconstructors.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from .lightfield import (
    EPI,
    LightField,
    Manifest,
    from_uint8,
    load_manifest,
    load_lightfield,
    save_lightfield,
    subfield_count,
    to_uint8,
    MANIFEST_NAME,
)

PATTERN_GAPS = {"A": 2, "B": 3, "C": 4}


@dataclass(frozen=True)
class SamplingPattern:
    """Sparse layout: ``gap`` sub-light-fields to reconstruct between inputs.

    Kept sub-light-field indices are the multiples of ``gap + 1``; the
    sub-light-field angular size is fixed at 9 views.
    """

    gap: int
    subfield_size: int = 9

    def __post_init__(self) -> None:
        if self.gap not in (2, 3, 4):
            raise ValueError(f"gap must be one of 2, 3, 4, got {self.gap}")
        if self.subfield_size != 9:
            raise ValueError(f"sub-light-field size is fixed at 9, got {self.subfield_size}")

    @classmethod
    def from_name(cls, name: str) -> "SamplingPattern":
        key = name.strip().upper()
        if key not in PATTERN_GAPS:
            raise ValueError(f"unknown pattern {name!r}; choose one of A, B, C")
        return cls(gap=PATTERN_GAPS[key])

    @property
    def name(self) -> str:
        return {v: k for k, v in PATTERN_GAPS.items()}[self.gap]

    @property
    def window_height(self) -> int:
        """Rows per window: two input bands plus the blank band."""
        return (2 + self.gap) * self.subfield_size

    def kept_subfields(self, n_subfields: int) -> list[int]:
        """Indices of input sub-light-fields within ``n_subfields``."""
        return list(range(0, n_subfields, self.gap + 1))

    def input_view_mask(self, nu: int) -> np.ndarray:
        """Boolean u-mask of views that belong to kept sub-light-fields."""
        n_sub = subfield_count(nu, self.subfield_size)
        mask = np.zeros(nu, dtype=bool)
        for idx in self.kept_subfields(n_sub):
            mask[idx * self.subfield_size : (idx + 1) * self.subfield_size] = True
        return mask

    def reconstructed_view_mask(self, nu: int) -> np.ndarray:
        """Boolean u-mask of gap views between the first and last kept input.

        Trailing sub-light-fields with no input on their right are excluded.
        """
        n_sub = subfield_count(nu, self.subfield_size)
        kept = self.kept_subfields(n_sub)
        mask = np.zeros(nu, dtype=bool)
        last = kept[-1]
        mask[: (last + 1) * self.subfield_size] = ~self.input_view_mask(nu)[
            : (last + 1) * self.subfield_size
        ]
        return mask

    def window_spans(self, nu: int) -> list[tuple[int, int]]:
        """(start, stop) u-row ranges of the windows tiling each gap once."""
        n_sub = subfield_count(nu, self.subfield_size)
        kept = self.kept_subfields(n_sub)
        spans = []
        for left in kept[:-1]:
            start = left * self.subfield_size
            spans.append((start, start + self.window_height))
        return spans


@dataclass
class EPIWindow:
    """A kept/blank/kept stretch of an EPI.

    Rows [0, a) and [(1+gap)*a, (2+gap)*a) are the input bands (a = 9);
    the middle ``gap * a`` rows are the blank band, all-zero on the sparse
    side of a training pair.
    """

    pixels: np.ndarray
    gap: int
    subfield_size: int = 9

    def __post_init__(self) -> None:
        self.pixels = np.asarray(self.pixels, dtype=np.float32)
        expected = (2 + self.gap) * self.subfield_size
        if self.pixels.ndim != 3 or self.pixels.shape[-1] != 3:
            raise ValueError(f"window pixels must be (h, w, 3), got {self.pixels.shape}")
        if self.pixels.shape[0] != expected:
            raise ValueError(
                f"window height {self.pixels.shape[0]} does not match "
                f"(2 + gap) * {self.subfield_size} = {expected}"
            )

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def blank_rows(self) -> slice:
        a = self.subfield_size
        return slice(a, (1 + self.gap) * a)

    @property
    def row_valid(self) -> np.ndarray:
        valid = np.ones(self.height, dtype=bool)
        valid[self.blank_rows] = False
        return valid


@dataclass
class SparseLightField:
    """A light field whose gap u-views are zeroed, plus the validity mask."""

    field: LightField
    u_valid: np.ndarray
    pattern: SamplingPattern

    def __post_init__(self) -> None:
        self.u_valid = np.asarray(self.u_valid, dtype=bool)
        if self.u_valid.shape != (self.field.nu,):
            raise ValueError(
                f"u_valid must have shape ({self.field.nu},), got {self.u_valid.shape}"
            )
        if np.any(self.field.samples[~self.u_valid]):
            raise ValueError("views of invalid u-rows must be all-zero")

    def epi(self, v: int, t: int) -> EPI:
        """Sparse EPI of the (v, t) fiber with its row-validity mask."""
        pixels = np.ascontiguousarray(self.field.samples[:, v, :, t, :])
        return EPI(pixels=pixels, row_valid=self.u_valid.copy())


def apply_pattern(
    dense: LightField, pattern: SamplingPattern
) -> tuple[SparseLightField, list[int]]:
    """Zero out every view not belonging to a kept sub-light-field.

    Returns:
        The sparse field (kept views copied bit-exactly, the rest exactly
        zero and flagged invalid) and the kept sub-light-field indices.
    """
    n_sub = subfield_count(dense.nu, pattern.subfield_size)
    kept = pattern.kept_subfields(n_sub)
    mask = pattern.input_view_mask(dense.nu)
    samples = np.zeros_like(dense.samples)
    samples[mask] = dense.samples[mask]
    sparse = SparseLightField(
        field=LightField(samples, view_step=dense.view_step, camera=dense.camera),
        u_valid=mask,
        pattern=pattern,
    )
    return sparse, kept


def windows(sparse_epi: EPI, pattern: SamplingPattern) -> list[EPIWindow]:
    """Cut one window per adjacent input pair out of a sparse EPI.

    The EPI's row mask must match the pattern layout exactly.
    """
    if not np.array_equal(sparse_epi.row_valid, pattern.input_view_mask(sparse_epi.nu)):
        raise ValueError("EPI row mask does not match the sampling pattern layout")
    out = []
    for start, stop in pattern.window_spans(sparse_epi.nu):
        out.append(
            EPIWindow(pixels=sparse_epi.pixels[start:stop].copy(), gap=pattern.gap)
        )
    return out


def build_training_set(
    dense_fields: list[LightField],
    pattern: SamplingPattern,
    crop_width: int = 64,
    stride: int = 16,
) -> list[tuple[EPIWindow, EPIWindow]]:
    """Emit (incomplete, intact) window pairs from dense ground-truth fields.

    For every (v, t) fiber and every window position, the sparse window
    (blank band zeroed) is paired with the matching rows of the dense EPI,
    cropped to ``crop_width`` columns at the given stride.  Input bands of a
    pair are bit-identical by construction.
    """
    pairs: list[tuple[EPIWindow, EPIWindow]] = []
    for lf in dense_fields:
        if crop_width > lf.ns:
            raise ValueError(f"crop width {crop_width} exceeds EPI width {lf.ns}")
        sparse, _ = apply_pattern(lf, pattern)
        spans = pattern.window_spans(lf.nu)
        offsets = range(0, lf.ns - crop_width + 1, stride)
        for v in range(lf.nv):
            for t in range(lf.nt):
                dense_epi = lf.samples[:, v, :, t, :]
                sparse_epi = sparse.field.samples[:, v, :, t, :]
                for start, stop in spans:
                    for s0 in offsets:
                        cut = (slice(start, stop), slice(s0, s0 + crop_width))
                        pairs.append(
                            (
                                EPIWindow(sparse_epi[cut].copy(), gap=pattern.gap),
                                EPIWindow(dense_epi[cut].copy(), gap=pattern.gap),
                            )
                        )
    return pairs


def save_training_set(
    pairs: list[tuple[EPIWindow, EPIWindow]], out_dir: str | Path, pattern: SamplingPattern
) -> None:
    """Persist pairs as PNG images plus an index file.

    Each pair becomes ``pair_NNNNNN_in.png`` / ``pair_NNNNNN_gt.png``;
    ``index.json`` records the pattern and the file list.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    entries = []
    for i, (incomplete, intact) in enumerate(pairs):
        name_in = f"pair_{i:06d}_in.png"
        name_gt = f"pair_{i:06d}_gt.png"
        Image.fromarray(to_uint8(incomplete.pixels), "RGB").save(out_dir / name_in)
        Image.fromarray(to_uint8(intact.pixels), "RGB").save(out_dir / name_gt)
        entries.append({"incomplete": name_in, "intact": name_gt})
    index = {
        "pattern": pattern.name,
        "gap": pattern.gap,
        "subfield_size": pattern.subfield_size,
        "pairs": entries,
    }
    with open(out_dir / "index.json", "w") as fh:
        json.dump(index, fh, indent=1, sort_keys=True)


def load_training_set(
    in_dir: str | Path,
) -> tuple[list[tuple[EPIWindow, EPIWindow]], SamplingPattern]:
    """Load a training set written by :func:`save_training_set`."""
    in_dir = Path(in_dir)
    with open(in_dir / "index.json") as fh:
        index = json.load(fh)
    pattern = SamplingPattern(gap=int(index["gap"]))
    pairs = []
    for entry in index["pairs"]:
        arrays = []
        for key in ("incomplete", "intact"):
            with Image.open(in_dir / entry[key]) as img:
                arrays.append(from_uint8(np.asarray(img.convert("RGB"))))
        pairs.append(
            (
                EPIWindow(arrays[0], gap=pattern.gap),
                EPIWindow(arrays[1], gap=pattern.gap),
            )
        )
    return pairs, pattern


def save_sparse_lightfield(sparse: SparseLightField, out_dir: str | Path) -> Manifest:
    """Write a sparse field like a dense one, recording the u-mask in the manifest."""
    manifest = save_lightfield(sparse.field, out_dir)
    manifest.u_valid = [bool(x) for x in sparse.u_valid]
    out_dir = Path(out_dir)
    with open(out_dir / MANIFEST_NAME, "w") as fh:
        json.dump(manifest.to_dict(), fh, indent=1, sort_keys=True)
    return manifest


def load_sparse_lightfield(
    manifest_path: str | Path, pattern: SamplingPattern
) -> SparseLightField:
    """Load a sparse field saved by :func:`save_sparse_lightfield`.

    The stored u-mask must match the pattern layout for the field's size.
    """
    manifest, _ = load_manifest(manifest_path)
    lf = load_lightfield(manifest_path)
    if manifest.u_valid is None:
        raise ValueError(f"manifest at {manifest_path} carries no u_valid mask")
    mask = np.asarray(manifest.u_valid, dtype=bool)
    expected = pattern.input_view_mask(lf.nu)
    if not np.array_equal(mask, expected):
        raise ValueError(
            f"stored u-mask does not match pattern {pattern.name} for nu={lf.nu}"
        )
    # Force gap views to exactly zero: 8-bit decode already guarantees it,
    # but the invariant is cheap to enforce.
    samples = lf.samples.copy()
    samples[~mask] = 0.0
    field = LightField(samples, view_step=lf.view_step, camera=lf.camera)
    return SparseLightField(field=field, u_valid=mask, pattern=pattern)
