"""Classical disparity-consistency reconstruction of blank EPI bands.

Every scene point at disparity d traces an EPI line of slope
``disparity_slope(camera, d, view_step)``; given the disparity, a blank row
can be filled by resampling a known row along those lines.  On synthetic
constant-disparity scenes with integer slopes this is exact, which makes it
a trustworthy oracle for the learned reconstructor, and with disparity 0 it
degenerates to a nearest-row copy baseline.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .lightfield import CameraModel
from .sampling import EPIWindow
from .synth import disparity_slope


@dataclass
class DisparityMap:
    """Per-pixel disparity d(s, t), or a single constant.

    ``values`` is either a scalar or an (ns, nt) array in the units of the
    camera model (``d = disparity_scale / depth``).
    """

    values: float | np.ndarray

    def __post_init__(self) -> None:
        if np.isscalar(self.values):
            self.values = float(self.values)
            if not np.isfinite(self.values):
                raise ValueError(f"disparity must be finite, got {self.values}")
        else:
            self.values = np.asarray(self.values, dtype=np.float64)
            if self.values.ndim != 2:
                raise ValueError(f"disparity map must be 2D (ns, nt), got {self.values.shape}")
            if not np.all(np.isfinite(self.values)):
                raise ValueError("disparity map contains non-finite values")

    @property
    def constant(self) -> bool:
        return np.isscalar(self.values) or isinstance(self.values, float)

    def for_columns(self, ns: int, t: int | None = None) -> np.ndarray:
        """Disparity per EPI column for fiber ``t`` (broadcast if constant)."""
        if self.constant:
            return np.full(ns, self.values, dtype=np.float64)
        if t is None:
            raise ValueError("per-pixel disparity map needs the fiber index t")
        if self.values.shape[0] != ns:
            raise ValueError(f"disparity map has {self.values.shape[0]} columns, EPI has {ns}")
        return self.values[:, t]


def _nearest_valid_rows(row_valid: np.ndarray) -> np.ndarray:
    """For every row, the index of the nearest valid row (ties toward smaller index)."""
    valid_idx = np.flatnonzero(row_valid)
    if valid_idx.size == 0:
        raise ValueError("window has no valid rows to shear from")
    rows = np.arange(row_valid.size)
    dist = np.abs(rows[:, None] - valid_idx[None, :])
    # argmin returns the first minimum, and valid_idx is ascending, so ties
    # break toward the top band.
    return valid_idx[np.argmin(dist, axis=1)]


def _resample_row(
    row: np.ndarray, shifts: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Linearly resample an EPI row at columns ``s + shifts[s]``.

    Returns the resampled row and a per-column in-range mask; out-of-range
    samples are edge-clamped.
    """
    ns = row.shape[0]
    x = np.arange(ns, dtype=np.float64) + shifts
    in_range = (x >= 0.0) & (x <= ns - 1)
    xc = np.clip(x, 0.0, ns - 1)
    x0 = np.floor(xc).astype(np.int64)
    x1 = np.minimum(x0 + 1, ns - 1)
    frac = (xc - x0).astype(np.float32)
    out = (1.0 - frac)[:, None] * row[x0] + frac[:, None] * row[x1]
    return out.astype(np.float32), in_range


def shear_reconstruct(
    window: EPIWindow,
    disp: DisparityMap,
    camera: CameraModel,
    view_step: float = 1.0,
    t: int | None = None,
) -> tuple[EPIWindow, np.ndarray]:
    """Fill the blank band of a window by shearing the nearest valid rows.

    Each blank row m is resampled from the nearest valid row i at columns
    ``s + slope * (i - m)`` with the signed EPI slope derived from the
    disparity; ties between equally near rows go to the top band.

    Args:
        window: sparse window (valid bands, zeroed blank band).
        disp: constant or per-pixel disparity.
        camera: intrinsics defining the disparity-to-slope conversion.
        view_step: world distance between adjacent u-views.
        t: fiber index, required for per-pixel disparity maps.

    Returns:
        (filled, sample_valid): the filled window, and a (height, width)
        bool mask that is False where a blank-row sample fell outside the
        EPI and was edge-clamped.
    """
    row_valid = window.row_valid
    nearest = _nearest_valid_rows(row_valid)
    d_cols = disp.for_columns(window.width, t)
    slope = disparity_slope(camera, 1.0, view_step) * d_cols  # per-column signed slope

    pixels = window.pixels.copy()
    sample_valid = np.ones((window.height, window.width), dtype=bool)
    for m in np.flatnonzero(~row_valid):
        i = nearest[m]
        shifts = slope * (i - m)
        pixels[m], sample_valid[m] = _resample_row(window.pixels[i], shifts)
    return EPIWindow(pixels, gap=window.gap, subfield_size=window.subfield_size), sample_valid


def interior_margin(disp: DisparityMap, pattern_gap: int, subfield_size: int = 9) -> int:
    """Columns near each EPI edge that shearing may leave invalid.

    The farthest blank row is ``ceil(gap * a / 2)`` rows from its nearest
    band, so samples shift by at most ``|slope| * that`` columns.
    """
    if disp.constant:
        dmax = abs(float(disp.values))
    else:
        dmax = float(np.max(np.abs(disp.values)))
    max_dist = int(np.ceil(pattern_gap * subfield_size / 2))
    return int(np.ceil(dmax * max_dist))
