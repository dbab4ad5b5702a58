"""Shared fixtures and independent oracles used across the test suite."""

from __future__ import annotations

import numpy as np

from epifield import CameraModel, LightField, SceneLayer, SceneSpec
from epifield.synth import texture_smooth_noise


def random_lightfield(
    rng: np.random.Generator,
    dims: tuple[int, int, int, int] = (9, 9, 16, 16),
    view_step: float = 1.0,
    camera: CameraModel | None = None,
) -> LightField:
    samples = rng.random(dims + (3,), dtype=np.float32)
    return LightField(samples, view_step=view_step, camera=camera or CameraModel())


def quantized_lightfield(rng: np.random.Generator, dims=(9, 9, 16, 16)) -> LightField:
    """A field whose samples already sit exactly on the 8-bit lattice."""
    q = rng.integers(0, 256, size=dims + (3,), dtype=np.uint8)
    return LightField(q.astype(np.float32) / np.float32(255.0))


def single_plane_scene(
    slope: float,
    camera: CameraModel,
    ns: int,
    nt: int,
    max_views: int,
    rng: np.random.Generator,
    smoothness: float = 2.0,
) -> SceneSpec:
    """One textured plane whose EPI lines have the requested |slope| px/view.

    The texture is oversized so every view stays inside its extent.
    """
    depth = camera.focal / slope if slope > 0 else np.inf
    # content drifts toward higher texture columns as u grows, so the spare
    # width sits on the right; a 2 px margin guards the left edge
    travel = int(np.ceil(slope * max_views)) + 4
    tex = texture_smooth_noise(
        (ns + travel, nt + 2), rng, smoothness=smoothness, lo=0.2, hi=1.0
    )
    layer = SceneLayer(depth=depth, texture=tex, offset_s=-2.0, offset_t=-1.0)
    return SceneSpec(layers=[layer], background=(0.0, 0.0, 0.0))


def track_feature_columns(epi_pixels: np.ndarray) -> np.ndarray:
    """Sub-pixel column of the brightest feature in every EPI row.

    Independent of the renderer: intensity centroid over the luma of each
    row, restricted to pixels near the row maximum.
    """
    luma = epi_pixels @ np.array([0.299, 0.587, 0.114])
    cols = np.arange(luma.shape[1])
    centers = []
    for row in luma:
        w = np.clip(row - row.max() * 0.5, 0.0, None)
        centers.append(float((w * cols).sum() / w.sum()))
    return np.array(centers)


def fit_line_slope(values: np.ndarray) -> float:
    """Least-squares slope of values against their index."""
    x = np.arange(values.size, dtype=np.float64)
    return float(np.polyfit(x, values, 1)[0])


def shift_rows_linear(row: np.ndarray, shift: float) -> np.ndarray:
    """Resample a (ns, 3) row at s + shift with edge clamping (oracle resampler)."""
    ns = row.shape[0]
    x = np.clip(np.arange(ns, dtype=np.float64) + shift, 0, ns - 1)
    x0 = np.floor(x).astype(int)
    x1 = np.minimum(x0 + 1, ns - 1)
    f = (x - x0)[:, None]
    return (1.0 - f) * row[x0] + f * row[x1]
