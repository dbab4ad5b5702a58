"""Synthetic light field renderer with analytically known disparity.

Scenes are stacks of fronto-parallel textured layers, so every scene point
has a closed-form disparity and traces an EPI line of known slope.  That
makes rendered fields usable as ground truth for reconstruction tests.

Geometry conventions (pinned by the translation-consistency tests):

* A world point (X, Y, Z) seen from the view at world offset (u, v) lands at
  pixel ``s = focal * (X - u) / Z``, ``t = focal * (Y - v) / Z`` and has
  disparity ``d = disparity_scale / Z``.  The homogeneous scale is Z itself.
* Image content at depth Z therefore shifts by ``-focal / Z`` pixels per
  unit of view translation: EPI lines of finite-depth points slope down-left,
  and a point at infinite depth gives a vertical EPI line.
* Layer textures are parameterized in the pixels of the (u, v) = (0, 0)
  view; a texture sample at column x corresponds to the world abscissa
  ``X = (x + offset_s) * Z / focal``.

Compositing is painter's order: layers are listed far to near, each blended
over the canvas with its opacity.  Texture lookups outside a layer's extent
are fully transparent, so finite layers occlude only where their texture
actually lies.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from PIL import Image
from scipy.ndimage import gaussian_filter

from .lightfield import CameraModel, LightField, from_uint8


@dataclass(frozen=True)
class ScenePoint:
    """World point; depth must be positive (infinity allowed)."""

    x: float
    y: float
    z: float

    def __post_init__(self) -> None:
        if not self.z > 0:
            raise ValueError(f"scene point depth must be positive, got {self.z}")


@dataclass(frozen=True)
class Translation:
    """In-plane shift of the view plane; the depth component is zero by construction."""

    tx: float = 0.0
    ty: float = 0.0


def project_point(
    camera: CameraModel, point: ScenePoint, view: tuple[float, float]
) -> tuple[float, float, float]:
    """Project a world point into the view at world offset (u, v).

    Returns:
        (s, t, d): pixel coordinates and disparity of the point.
    """
    u, v = view
    s = camera.focal * (point.x - u) / point.z
    t = camera.focal * (point.y - v) / point.z
    return s, t, camera.disparity(point.z)


def epi_slope(camera: CameraModel, depth: float, view_step: float = 1.0) -> float:
    """EPI line slope ds/du, in pixels per view step, of a point at ``depth``."""
    if not depth > 0:
        raise ValueError(f"depth must be positive, got {depth}")
    return -camera.focal * view_step / depth


def disparity_slope(camera: CameraModel, disparity: float, view_step: float = 1.0) -> float:
    """EPI line slope, in pixels per view step, of a point with the given disparity."""
    return -(camera.focal / camera.disparity_scale) * disparity * view_step


@dataclass
class SceneLayer:
    """One fronto-parallel textured plane.

    Attributes:
        depth: plane depth in world units; ``math.inf`` pins the layer at
            zero disparity.
        texture: RGB image array (height, width, 3), float in [0, 1].
        offset_s / offset_t: position of the texture's top-left corner in
            reference-view pixels (world offset = pixel offset * depth / focal).
        opacity: scalar alpha applied on top of ``mask``.
        mask: optional per-texel alpha in [0, 1], same height/width as texture.
    """

    depth: float
    texture: np.ndarray
    offset_s: float = 0.0
    offset_t: float = 0.0
    opacity: float = 1.0
    mask: np.ndarray | None = None

    def __post_init__(self) -> None:
        if not self.depth > 0:
            raise ValueError(f"layer depth must be positive, got {self.depth}")
        self.texture = np.asarray(self.texture, dtype=np.float32)
        if self.texture.ndim != 3 or self.texture.shape[-1] != 3:
            raise ValueError(f"texture must be (h, w, 3), got {self.texture.shape}")
        if not 0.0 <= self.opacity <= 1.0:
            raise ValueError(f"opacity must lie in [0, 1], got {self.opacity}")
        if self.mask is not None:
            self.mask = np.asarray(self.mask, dtype=np.float32)
            if self.mask.shape != self.texture.shape[:2]:
                raise ValueError(
                    f"mask shape {self.mask.shape} must match texture {self.texture.shape[:2]}"
                )


@dataclass
class SceneSpec:
    """Layer stack ordered far to near, plus a background color."""

    layers: list[SceneLayer]
    background: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def __post_init__(self) -> None:
        if not self.layers:
            raise ValueError("scene must contain at least one layer")
        depths = [layer.depth for layer in self.layers]
        if any(d0 < d1 for d0, d1 in zip(depths, depths[1:])):
            raise ValueError(f"layers must be ordered far to near, got depths {depths}")


def _sample_layer(
    layer: SceneLayer, xs: np.ndarray, yt: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Bilinearly sample a layer's premultiplied color and alpha.

    Out-of-extent texels contribute zero alpha, so the layer fades out over
    the last fractional pixel of its texture.

    Args:
        layer: source layer.
        xs, yt: sample coordinates in texel units, any matching shape.

    Returns:
        (color, alpha): premultiplied RGB of shape xs.shape + (3,) and alpha
        of shape xs.shape, both float64.
    """
    tex = layer.texture.astype(np.float64)
    th, tw = tex.shape[:2]
    alpha_map = np.full((th, tw), float(layer.opacity))
    if layer.mask is not None:
        alpha_map = alpha_map * layer.mask

    x0 = np.floor(xs).astype(np.int64)
    y0 = np.floor(yt).astype(np.int64)
    fx = xs - x0
    fy = yt - y0

    color = np.zeros(xs.shape + (3,))
    alpha = np.zeros(xs.shape)
    for dy in (0, 1):
        wy = np.where(dy == 0, 1.0 - fy, fy)
        yy = y0 + dy
        for dx in (0, 1):
            wx = np.where(dx == 0, 1.0 - fx, fx)
            xx = x0 + dx
            inside = (xx >= 0) & (xx < tw) & (yy >= 0) & (yy < th)
            xi = np.clip(xx, 0, tw - 1)
            yi = np.clip(yy, 0, th - 1)
            w = wy * wx * inside
            a = alpha_map[yi, xi] * w
            alpha += a
            color += a[..., None] * tex[yi, xi]
    return color, alpha


def render_view(
    scene: SceneSpec,
    camera: CameraModel,
    view_world: tuple[float, float],
    size: tuple[int, int],
) -> np.ndarray:
    """Render one view at a world offset; returns (ns, nt, 3) float64 in [0, 1]."""
    ns, nt = size
    u_w, v_w = view_world
    s_grid = np.arange(ns, dtype=np.float64)[:, None]
    t_grid = np.arange(nt, dtype=np.float64)[None, :]
    canvas = np.empty((ns, nt, 3))
    canvas[:] = np.asarray(scene.background, dtype=np.float64)
    for layer in scene.layers:
        rate = camera.focal / layer.depth  # 0 at infinite depth
        xs = s_grid - layer.offset_s + rate * u_w + np.zeros_like(t_grid)
        yt = t_grid - layer.offset_t + rate * v_w + np.zeros_like(s_grid)
        color, alpha = _sample_layer(layer, xs, yt)
        canvas = color + (1.0 - alpha)[..., None] * canvas
    return np.clip(canvas, 0.0, 1.0)


def render_dense_lightfield(
    scene: SceneSpec,
    camera: CameraModel,
    grid: tuple[int, int, int, int],
    view_step: float = 1.0,
    origin: Translation = Translation(),
) -> LightField:
    """Render every view of a (nu, nv, ns, nt) grid.

    View (iu, iv) sits at world offset ``(origin.tx + iu * view_step,
    origin.ty + iv * view_step)``.  Every scene point traces an EPI line of
    slope ``epi_slope(camera, depth, view_step)`` across the rendered views.
    """
    nu, nv, ns, nt = grid
    if min(grid) < 1:
        raise ValueError(f"grid dimensions must be >= 1, got {grid}")
    if not view_step > 0:
        raise ValueError(f"view_step must be positive, got {view_step}")
    samples = np.empty((nu, nv, ns, nt, 3), dtype=np.float32)
    for iu in range(nu):
        for iv in range(nv):
            world = (origin.tx + iu * view_step, origin.ty + iv * view_step)
            samples[iu, iv] = render_view(scene, camera, world, (ns, nt))
    return LightField(samples, view_step=view_step, camera=camera)


# ---------------------------------------------------------------------------
# Procedural textures
# ---------------------------------------------------------------------------


def texture_constant(size: tuple[int, int], color: Sequence[float]) -> np.ndarray:
    """Uniform color patch; size is (width, height)."""
    w, h = size
    tex = np.empty((h, w, 3), dtype=np.float32)
    tex[:] = np.asarray(color, dtype=np.float32)
    return tex


def texture_checker(
    size: tuple[int, int],
    cell: int = 8,
    color_a: Sequence[float] = (0.9, 0.9, 0.9),
    color_b: Sequence[float] = (0.2, 0.2, 0.2),
) -> np.ndarray:
    w, h = size
    yy, xx = np.mgrid[0:h, 0:w]
    board = ((xx // cell + yy // cell) % 2).astype(np.float32)
    a = np.asarray(color_a, dtype=np.float32)
    b = np.asarray(color_b, dtype=np.float32)
    return board[..., None] * b + (1.0 - board[..., None]) * a


def texture_stripes(
    size: tuple[int, int],
    period: int = 8,
    color_a: Sequence[float] = (0.85, 0.3, 0.25),
    color_b: Sequence[float] = (0.95, 0.9, 0.4),
) -> np.ndarray:
    w, h = size
    xx = np.arange(w)
    band = ((xx // max(period // 2, 1)) % 2).astype(np.float32)[None, :, None]
    band = np.repeat(band, h, axis=0)
    a = np.asarray(color_a, dtype=np.float32)
    b = np.asarray(color_b, dtype=np.float32)
    return band * b + (1.0 - band) * a


def texture_smooth_noise(
    size: tuple[int, int],
    rng: np.random.Generator,
    smoothness: float = 2.0,
    lo: float = 0.2,
    hi: float = 0.95,
) -> np.ndarray:
    """Band-limited random texture: Gaussian-filtered noise rescaled to [lo, hi].

    Smooth enough that bilinear resampling stays accurate, which the
    shear-consistency tolerances rely on.
    """
    w, h = size
    noise = rng.random((h, w, 3))
    sm = gaussian_filter(noise, sigma=(smoothness, smoothness, 0), mode="wrap")
    mn = sm.min(axis=(0, 1), keepdims=True)
    mx = sm.max(axis=(0, 1), keepdims=True)
    span = np.where(mx > mn, mx - mn, 1.0)
    return (lo + (hi - lo) * (sm - mn) / span).astype(np.float32)


def texture_sinusoid(
    size: tuple[int, int],
    freq_x: float = 0.05,
    freq_y: float = 0.03,
    lo: float = 0.1,
    hi: float = 0.9,
) -> np.ndarray:
    """Smooth separable sinusoidal pattern, distinct per channel."""
    w, h = size
    yy, xx = np.mgrid[0:h, 0:w]
    tex = np.empty((h, w, 3), dtype=np.float32)
    for c, (px, py) in enumerate([(0.0, 0.0), (1.3, 0.7), (2.1, 1.9)]):
        wave = 0.5 + 0.25 * np.sin(2 * np.pi * freq_x * xx + px) + 0.25 * np.cos(
            2 * np.pi * freq_y * yy + py
        )
        tex[..., c] = lo + (hi - lo) * wave
    return tex


def texture_blob(
    size: tuple[int, int],
    center: tuple[float, float],
    sigma: float = 2.0,
    fg: Sequence[float] = (1.0, 1.0, 1.0),
    bg: Sequence[float] = (0.05, 0.05, 0.05),
) -> np.ndarray:
    """Single Gaussian spot; handy as a trackable feature."""
    w, h = size
    cx, cy = center
    yy, xx = np.mgrid[0:h, 0:w]
    g = np.exp(-((xx - cx) ** 2 + (yy - cy) ** 2) / (2.0 * sigma**2))
    fg_arr = np.asarray(fg, dtype=np.float32)
    bg_arr = np.asarray(bg, dtype=np.float32)
    return (g[..., None] * fg_arr + (1.0 - g[..., None]) * bg_arr).astype(np.float32)


_TEXTURE_KINDS = {
    "constant": texture_constant,
    "checker": texture_checker,
    "stripes": texture_stripes,
    "smooth_noise": texture_smooth_noise,
    "sinusoid": texture_sinusoid,
    "blob": texture_blob,
}


def random_scene(
    rng: np.random.Generator,
    size: tuple[int, int],
    camera: CameraModel,
    view_step: float = 1.0,
    n_layers: int = 3,
    slope_range: tuple[float, float] = (0.5, 1.1),
    max_views: int = 99,
) -> SceneSpec:
    """Draw a layered scene with EPI slopes spread over ``slope_range``.

    The background layer is oversized so it stays in frame across
    ``max_views`` views; nearer layers are smaller opaque patches that create
    occlusions.  Textures are bright band-limited noise so that zero-filled
    reconstructions score poorly and resampling oracles stay accurate.
    """
    ns, nt = size
    lo, hi = slope_range
    slopes = np.sort(rng.uniform(lo, hi, size=n_layers))  # far (small) to near (big)
    layers = []
    for i, slope in enumerate(slopes):
        depth = camera.focal * view_step / slope
        # view content drifts toward higher texture columns with u, so the
        # slack goes on the right of the extent
        travel = int(math.ceil(slope * max_views)) + 4
        if i == 0:
            w, h = ns + travel, nt + 4
            off_s, off_t = -2.0, -2.0
        else:
            w = int(rng.integers(ns // 3, (2 * ns) // 3)) + travel
            h = int(rng.integers(nt // 3, (3 * nt) // 4))
            off_s = float(rng.uniform(-travel, ns - w + travel))
            off_t = float(rng.uniform(0, nt - h))
        smooth = float(rng.uniform(0.9, 1.9))
        tex = texture_smooth_noise((w, h), rng, smoothness=smooth, lo=0.4, hi=1.0)
        layers.append(
            SceneLayer(depth=depth, texture=tex, offset_s=off_s, offset_t=off_t)
        )
    return SceneSpec(layers=layers, background=(0.4, 0.4, 0.4))


# ---------------------------------------------------------------------------
# Scene config files
# ---------------------------------------------------------------------------


def _texture_from_config(spec: dict, base_dir: Path) -> np.ndarray:
    if "file" in spec:
        with Image.open(base_dir / spec["file"]) as img:
            return from_uint8(np.asarray(img.convert("RGB")))
    kind = spec.get("kind")
    if kind not in _TEXTURE_KINDS:
        raise ValueError(f"unknown texture kind {kind!r}")
    params = {k: v for k, v in spec.items() if k not in ("kind", "size", "seed")}
    size = tuple(spec["size"])
    if kind in ("smooth_noise",):
        rng = np.random.default_rng(int(spec.get("seed", 0)))
        return _TEXTURE_KINDS[kind](size, rng, **params)
    for key in ("center", "color", "color_a", "color_b", "fg", "bg"):
        if key in params:
            params[key] = tuple(params[key])
    return _TEXTURE_KINDS[kind](size, **params)


def load_scene_config(
    path: str | Path,
) -> tuple[SceneSpec, CameraModel, tuple[int, int, int, int], float]:
    """Read a scene description file.

    The file is JSON with keys ``camera`` (focal, disparity_scale), ``grid``
    [nu, nv, ns, nt], ``view_step``, ``background`` and ``layers``.  Each
    layer gives ``depth`` (a number, or the string "inf") or ``disparity``,
    an ``offset`` [s, t] in reference-view pixels, optional ``opacity``, and
    a ``texture`` that is either {"file": path} or {"kind": ..., "size":
    [w, h], ...} for one of the procedural kinds.
    """
    path = Path(path)
    with open(path) as fh:
        cfg = json.load(fh)
    cam_cfg = cfg.get("camera", {})
    camera = CameraModel(
        focal=float(cam_cfg.get("focal", 1.0)),
        disparity_scale=float(cam_cfg.get("disparity_scale", 1.0)),
    )
    grid = tuple(int(x) for x in cfg["grid"])
    if len(grid) != 4:
        raise ValueError(f"grid must be [nu, nv, ns, nt], got {cfg['grid']}")
    view_step = float(cfg.get("view_step", 1.0))
    layers = []
    for entry in cfg["layers"]:
        if "depth" in entry:
            depth = math.inf if entry["depth"] == "inf" else float(entry["depth"])
        elif "disparity" in entry:
            d = float(entry["disparity"])
            depth = math.inf if d == 0 else camera.disparity_scale / d
        else:
            raise ValueError("layer needs a depth or a disparity")
        off = entry.get("offset", [0.0, 0.0])
        layers.append(
            SceneLayer(
                depth=depth,
                texture=_texture_from_config(entry["texture"], path.parent),
                offset_s=float(off[0]),
                offset_t=float(off[1]),
                opacity=float(entry.get("opacity", 1.0)),
            )
        )
    scene = SceneSpec(
        layers=layers, background=tuple(cfg.get("background", [0.0, 0.0, 0.0]))
    )
    return scene, camera, grid, view_step
