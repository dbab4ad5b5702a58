"""Quantitative evaluation: PSNR, SSIM, L1 error maps, per-scene reports.

Conventions (recorded in every report header so numbers are self-describing):
PSNR uses per-channel RGB MSE against a peak of 1.0 in the float domain and
caps exact matches at 99 dB; SSIM uses an 11x11 Gaussian window (sigma 1.5),
K1=0.01, K2=0.03, dynamic range 1.0, weighted moments without sample
correction, computed on luma (0.299 R + 0.587 G + 0.114 B) over the
fully-supported interior.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np
from PIL import Image
from scipy.ndimage import correlate1d

from .lightfield import LightField, to_uint8

PSNR_CAP_DB = 99.0

CONVENTIONS = {
    "psnr_peak": 1.0,
    "psnr_cap_db": PSNR_CAP_DB,
    "psnr_domain": "per-channel RGB MSE",
    "ssim_window": 11,
    "ssim_sigma": 1.5,
    "ssim_k1": 0.01,
    "ssim_k2": 0.03,
    "ssim_range": 1.0,
    "luma": "0.299R+0.587G+0.114B",
}

_LUMA_WEIGHTS = np.array([0.299, 0.587, 0.114])


class PsnrResult(NamedTuple):
    db: float
    exact: bool


def psnr(a: np.ndarray, b: np.ndarray, peak: float = 1.0) -> PsnrResult:
    """Peak signal-to-noise ratio in dB; exact matches cap at 99 dB.

    Returns:
        (db, exact): ``exact`` is True when the MSE is exactly zero.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    mse = float(np.mean((a - b) ** 2))
    if mse == 0.0:
        return PsnrResult(PSNR_CAP_DB, True)
    return PsnrResult(min(10.0 * math.log10(peak * peak / mse), PSNR_CAP_DB), False)


def _gaussian_window(size: int = 11, sigma: float = 1.5) -> np.ndarray:
    half = (size - 1) / 2.0
    x = np.arange(size, dtype=np.float64) - half
    g = np.exp(-(x**2) / (2.0 * sigma**2))
    return g / g.sum()


def _filter_valid(img: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    """Separable correlation, cropped to the fully-supported interior."""
    r = (kernel.size - 1) // 2
    out = correlate1d(img, kernel, axis=0, mode="constant")
    out = correlate1d(out, kernel, axis=1, mode="constant")
    return out[r:-r, r:-r]


def to_luma(img: np.ndarray) -> np.ndarray:
    """Collapse an (H, W, 3) image to luma; 2D input passes through."""
    img = np.asarray(img, dtype=np.float64)
    if img.ndim == 2:
        return img
    if img.ndim == 3 and img.shape[-1] == 3:
        return img @ _LUMA_WEIGHTS
    raise ValueError(f"expected (H, W) or (H, W, 3) image, got {img.shape}")


def ssim(a: np.ndarray, b: np.ndarray) -> float:
    """Mean structural similarity over luma.

    Uses the Gaussian-weighted moments of the 11x11, sigma 1.5 window with
    K1=0.01, K2=0.03 and dynamic range 1.0, averaged over the pixels whose
    window lies fully inside the image.
    """
    if np.asarray(a).shape != np.asarray(b).shape:
        raise ValueError(f"shape mismatch: {np.asarray(a).shape} vs {np.asarray(b).shape}")
    x = to_luma(a)
    y = to_luma(b)
    win = 11
    if min(x.shape) < win:
        raise ValueError(f"image {x.shape} is smaller than the {win}x{win} SSIM window")
    kernel = _gaussian_window(win, 1.5)
    c1 = (0.01 * 1.0) ** 2
    c2 = (0.03 * 1.0) ** 2

    mu_x = _filter_valid(x, kernel)
    mu_y = _filter_valid(y, kernel)
    sig_x = _filter_valid(x * x, kernel) - mu_x * mu_x
    sig_y = _filter_valid(y * y, kernel) - mu_y * mu_y
    sig_xy = _filter_valid(x * y, kernel) - mu_x * mu_y

    num = (2.0 * mu_x * mu_y + c1) * (2.0 * sig_xy + c2)
    den = (mu_x * mu_x + mu_y * mu_y + c1) * (sig_x + sig_y + c2)
    return float(np.mean(num / den))


def l1_error_map(a: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, dict[str, float]]:
    """Per-pixel mean-absolute-channel error and its summary statistics.

    Returns:
        (map, stats): map[i, j] is the channel-mean of |a - b|; stats holds
        the map's mean, max, and 95th percentile.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    err = np.abs(a - b)
    if err.ndim == 3:
        err = err.mean(axis=-1)
    stats = {
        "mean": float(err.mean()),
        "max": float(err.max()),
        "p95": float(np.percentile(err, 95)),
    }
    return err, stats


def save_error_map_png(err_map: np.ndarray, path: str | Path, scale: float = 1.0) -> None:
    """Write an error map as a grayscale PNG (values scaled then clipped)."""
    img = to_uint8(np.asarray(err_map, dtype=np.float64) * scale)
    Image.fromarray(img, mode="L").save(Path(path))


@dataclass
class ViewScore:
    """Metrics of one reconstructed view."""

    u: int
    v: int
    psnr_db: float
    psnr_exact: bool
    ssim: float
    l1_mean: float
    l1_max: float
    l1_p95: float


@dataclass
class EvalReport:
    """Per-view metrics over reconstructed views, plus their means."""

    method: str
    pattern: str
    rows: list[ViewScore]
    conventions: dict = field(default_factory=lambda: dict(CONVENTIONS))

    @property
    def mean_psnr(self) -> float:
        return float(np.mean([r.psnr_db for r in self.rows]))

    @property
    def mean_ssim(self) -> float:
        return float(np.mean([r.ssim for r in self.rows]))

    def to_csv(self) -> str:
        lines = [f"# method={self.method}", f"# pattern={self.pattern}"]
        for key in sorted(self.conventions):
            lines.append(f"# {key}={self.conventions[key]}")
        lines.append("u,v,psnr_db,psnr_exact,ssim,l1_mean,l1_max,l1_p95")
        for r in self.rows:
            lines.append(
                f"{r.u},{r.v},{r.psnr_db:.6f},{int(r.psnr_exact)},{r.ssim:.6f},"
                f"{r.l1_mean:.6f},{r.l1_max:.6f},{r.l1_p95:.6f}"
            )
        lines.append(f"mean,,{self.mean_psnr:.6f},,{self.mean_ssim:.6f},,,")
        return "\n".join(lines) + "\n"

    def to_text(self) -> str:
        head = (
            f"method {self.method}, pattern {self.pattern}: "
            f"{len(self.rows)} reconstructed views\n"
            f"mean PSNR {self.mean_psnr:.2f} dB, mean SSIM {self.mean_ssim:.4f}\n"
        )
        body = "".join(
            f"  view (u={r.u}, v={r.v}): PSNR {r.psnr_db:.2f} dB"
            + (" (exact)" if r.psnr_exact else "")
            + f", SSIM {r.ssim:.4f}, L1 mean {r.l1_mean:.5f}\n"
            for r in self.rows
        )
        return head + body


def evaluate_reconstruction(
    recon: LightField,
    truth: LightField,
    view_mask: np.ndarray,
    method: str = "",
    pattern: str = "",
) -> EvalReport:
    """Score a reconstruction against ground truth over the masked u-views.

    Args:
        recon / truth: fields of identical dimensions.
        view_mask: bool per u-view; True marks reconstructed (gap) views.
        method / pattern: labels recorded in the report.
    """
    if recon.dims != truth.dims:
        raise ValueError(f"dimension mismatch: {recon.dims} vs {truth.dims}")
    view_mask = np.asarray(view_mask, dtype=bool)
    if view_mask.shape != (recon.nu,):
        raise ValueError(f"view mask must have shape ({recon.nu},), got {view_mask.shape}")
    if not view_mask.any():
        raise ValueError("view mask marks no reconstructed views")
    rows = []
    for u in np.flatnonzero(view_mask):
        for v in range(recon.nv):
            img_r = recon.samples[u, v]
            img_t = truth.samples[u, v]
            p = psnr(img_r, img_t)
            s = ssim(img_r, img_t)
            _, l1 = l1_error_map(img_r, img_t)
            rows.append(
                ViewScore(
                    u=int(u),
                    v=int(v),
                    psnr_db=p.db,
                    psnr_exact=p.exact,
                    ssim=s,
                    l1_mean=l1["mean"],
                    l1_max=l1["max"],
                    l1_p95=l1["p95"],
                )
            )
    return EvalReport(method=method, pattern=pattern, rows=rows)
