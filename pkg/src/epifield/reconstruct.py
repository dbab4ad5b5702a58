"""Field-level reconstruction: fill every blank band of a sparse light field.

Three methods share the same window walk: the learned network, the
disparity-consistency shear oracle, and the zero-fill / nearest-row-copy
baselines.  Input views are always copied verbatim from the sparse field;
only blank-band rows are written, and trailing views beyond the last input
sub-light-field stay zero.
"""

from __future__ import annotations

import numpy as np

from .lightfield import LightField
from .network import EpiResNet, forward_windows
from .sampling import EPIWindow, SamplingPattern, SparseLightField
from .shear import DisparityMap, shear_reconstruct


def _check_mask(sparse: SparseLightField, pattern: SamplingPattern) -> None:
    expected = pattern.input_view_mask(sparse.field.nu)
    if not np.array_equal(sparse.u_valid, expected):
        raise ValueError(
            f"sparse field mask does not match pattern {pattern.name} "
            f"for nu={sparse.field.nu}"
        )


def zero_fill_lightfield(sparse: SparseLightField) -> LightField:
    """Baseline floor: keep input views, leave every gap view zero."""
    return LightField(
        sparse.field.samples.copy(),
        view_step=sparse.field.view_step,
        camera=sparse.field.camera,
    )


def network_reconstruct_lightfield(
    sparse: SparseLightField,
    net: EpiResNet,
    pattern: SamplingPattern,
    chunk: int = 16,
) -> LightField:
    """Inpaint every gap with the network, window by window.

    For each window span, all (v, t) fibers are batched through one forward
    pass; only the blank-band rows of the output are copied into the result.
    """
    _check_mask(sparse, pattern)
    lf = sparse.field
    out = lf.samples.copy()
    a = pattern.subfield_size
    for start, stop in pattern.window_spans(lf.nu):
        # (h, nv, ns, nt, 3) -> (nv * nt, h, ns, 3)
        win = lf.samples[start:stop]
        stack = np.ascontiguousarray(win.transpose(1, 3, 0, 2, 4)).reshape(
            lf.nv * lf.nt, stop - start, lf.ns, 3
        )
        est = forward_windows(net, stack, chunk=chunk)
        est = est.reshape(lf.nv, lf.nt, stop - start, lf.ns, 3).transpose(2, 0, 3, 1, 4)
        lo, hi = start + a, stop - a
        out[lo:hi] = np.clip(est[a:-a], 0.0, 1.0)
    return LightField(out, view_step=lf.view_step, camera=lf.camera)


def shear_reconstruct_lightfield(
    sparse: SparseLightField,
    disp: DisparityMap,
    pattern: SamplingPattern,
) -> LightField:
    """Fill every gap by shearing along constant- or per-pixel-disparity lines."""
    _check_mask(sparse, pattern)
    lf = sparse.field
    out = lf.samples.copy()
    a = pattern.subfield_size
    for start, stop in pattern.window_spans(lf.nu):
        for v in range(lf.nv):
            for t in range(lf.nt):
                window = EPIWindow(
                    np.ascontiguousarray(lf.samples[start:stop, v, :, t, :]),
                    gap=pattern.gap,
                )
                filled, _ = shear_reconstruct(
                    window, disp, lf.camera, view_step=lf.view_step, t=t
                )
                out[start + a : stop - a, v, :, t, :] = filled.pixels[a:-a]
    return LightField(out, view_step=lf.view_step, camera=lf.camera)


def nearest_copy_lightfield(
    sparse: SparseLightField, pattern: SamplingPattern
) -> LightField:
    """Copy each gap row from its nearest input row (shear at disparity zero)."""
    return shear_reconstruct_lightfield(sparse, DisparityMap(0.0), pattern)
