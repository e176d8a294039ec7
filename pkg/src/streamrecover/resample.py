"""Sampling primitives: MATLAB-style bicubic resizing and bilinear backward warping."""
import math
from enum import Enum

import numpy as np

from . import _accel
from ._accel import njit, prange
from .core import DimensionError, as_image

CUBIC_A = -0.5
# keeps floor() inside int64 for absurd flow values; clamp/reflect results are unaffected
_POS_LIMIT = float(2 ** 40)


class BoundaryPolicy(str, Enum):
    CLAMP = "clamp"
    REFLECT = "reflect"


def _policy(policy):
    return BoundaryPolicy(policy)


def bicubic_kernel(x):
    """Keys cubic convolution kernel with a = -0.5 (MATLAB ``imresize`` 'bicubic')."""
    ax = np.abs(np.asarray(x, dtype=np.float64))
    ax2 = ax * ax
    ax3 = ax2 * ax
    a = CUBIC_A
    near = (a + 2.0) * ax3 - (a + 3.0) * ax2 + 1.0
    far = a * ax3 - 5.0 * a * ax2 + 8.0 * a * ax - 4.0 * a
    w = np.where(ax <= 1.0, near, np.where(ax < 2.0, far, 0.0))
    return float(w) if w.ndim == 0 else w


def resolve_index(idx, n, policy=BoundaryPolicy.CLAMP):
    """Map integer sample indices onto ``[0, n)``.

    ``clamp`` replicates the edge pixel; ``reflect`` mirrors about the edge
    pixel centre (index -1 -> 1), periodic with period ``2(n - 1)``.
    """
    idx = np.asarray(idx, dtype=np.int64)
    if _policy(policy) is BoundaryPolicy.CLAMP or n == 1:
        return np.clip(idx, 0, n - 1)
    period = 2 * (n - 1)
    m = np.mod(idx, period)
    return np.where(m > n - 1, period - m, m)


def _contributions(in_len, out_len, scale, antialias, policy):
    """Per-output tap indices, weights and a reference index along one axis.

    ``scale`` is output/input.  Source coordinate of output ``i`` is
    ``(i + 0.5) / scale - 0.5``.  Downscaling with antialias stretches the
    kernel by ``1/scale``.
    """
    if scale < 1.0 and antialias:
        width = 4.0 / scale

        def kernel(d):
            return scale * bicubic_kernel(scale * d)
    else:
        width = 4.0
        kernel = bicubic_kernel
    centre = (np.arange(out_len, dtype=np.float64) + 0.5) / scale - 0.5
    left = np.floor(centre - width / 2.0)
    taps = int(math.ceil(width)) + 2
    raw = left[:, None] + np.arange(taps, dtype=np.float64)[None, :]
    weights = kernel(centre[:, None] - raw)
    weights = weights / weights.sum(axis=1, keepdims=True)
    idx = resolve_index(raw.astype(np.int64), in_len, policy)
    ref = resolve_index(np.floor(centre + 0.5).astype(np.int64), in_len, policy)
    return idx, weights, ref


def _resize_axis(img, axis, out_len, scale, antialias, policy):
    in_len = img.shape[axis]
    idx, weights, ref = _contributions(in_len, out_len, scale, antialias, policy)
    moved = np.moveaxis(img, axis, 0)
    base = moved[ref]
    # accumulate deviations from a reference tap: constant rows come out bit-exact
    acc = np.zeros_like(base)
    for p in range(idx.shape[1]):
        w = weights[:, p].reshape((-1,) + (1,) * (moved.ndim - 1))
        acc += w * (moved[idx[:, p]] - base)
    return np.moveaxis(base + acc, 0, axis)


def degrade(image, s, policy=BoundaryPolicy.CLAMP):
    """Antialiased bicubic downscaling by integer factor ``s`` (``imresize(I, 1/s)``)."""
    if int(s) != s or s < 2:
        raise ValueError(f"scale must be an integer >= 2, got {s!r}")
    s = int(s)
    img = as_image(image)
    h, w = img.shape[:2]
    out_h, out_w = -(-h // s), -(-w // s)
    out = _resize_axis(img, 0, out_h, 1.0 / s, True, policy)
    out = _resize_axis(out, 1, out_w, 1.0 / s, True, policy)
    return np.clip(out, 0.0, 1.0)


def upscale(image, target_h, target_w, policy=BoundaryPolicy.CLAMP):
    """Bicubic upscaling (4 taps per axis) to ``target_h x target_w``."""
    img = as_image(image)
    h, w = img.shape[:2]
    if target_h < h or target_w < w:
        raise ValueError(f"upscale target {target_h}x{target_w} is smaller than source {h}x{w}")
    out = _resize_axis(img, 0, int(target_h), target_h / h, False, policy)
    out = _resize_axis(out, 1, int(target_w), target_w / w, False, policy)
    return np.clip(out, 0.0, 1.0)


@njit(cache=True, inline="always")
def _resolve_nb(i, n, reflect):
    if n == 1:
        return 0
    if reflect:
        period = 2 * (n - 1)
        m = i % period
        if m < 0:
            m += period
        if m > n - 1:
            m = period - m
        return m
    if i < 0:
        return 0
    if i > n - 1:
        return n - 1
    return i


@njit(cache=True, parallel=True)
def _warp_nb(src, flow, reflect, out, valid):
    h, w = flow.shape[0], flow.shape[1]
    hs, ws, nc = src.shape[0], src.shape[1], src.shape[2]
    for y in prange(h):
        for x in range(w):
            px = x + flow[y, x, 0]
            py = y + flow[y, x, 1]
            valid[y, x] = px >= 0.0 and px <= ws - 1 and py >= 0.0 and py <= hs - 1
            px = min(max(px, -_POS_LIMIT), _POS_LIMIT)
            py = min(max(py, -_POS_LIMIT), _POS_LIMIT)
            x0f = math.floor(px)
            y0f = math.floor(py)
            fx = px - x0f
            fy = py - y0f
            x0 = np.int64(x0f)
            y0 = np.int64(y0f)
            ix0 = _resolve_nb(x0, ws, reflect)
            ix1 = _resolve_nb(x0 + 1, ws, reflect)
            iy0 = _resolve_nb(y0, hs, reflect)
            iy1 = _resolve_nb(y0 + 1, hs, reflect)
            for c in range(nc):
                top = (1.0 - fx) * src[iy0, ix0, c] + fx * src[iy0, ix1, c]
                bot = (1.0 - fx) * src[iy1, ix0, c] + fx * src[iy1, ix1, c]
                out[y, x, c] = (1.0 - fy) * top + fy * bot


def _warp_np(src, flow, policy):
    h, w = flow.shape[:2]
    hs, ws = src.shape[:2]
    ys, xs = np.mgrid[0:h, 0:w]
    px = xs + flow[..., 0]
    py = ys + flow[..., 1]
    valid = (px >= 0.0) & (px <= ws - 1) & (py >= 0.0) & (py <= hs - 1)
    px = np.clip(px, -_POS_LIMIT, _POS_LIMIT)
    py = np.clip(py, -_POS_LIMIT, _POS_LIMIT)
    x0f = np.floor(px)
    y0f = np.floor(py)
    fx = (px - x0f)[..., None]
    fy = (py - y0f)[..., None]
    x0 = x0f.astype(np.int64)
    y0 = y0f.astype(np.int64)
    ix0 = resolve_index(x0, ws, policy)
    ix1 = resolve_index(x0 + 1, ws, policy)
    iy0 = resolve_index(y0, hs, policy)
    iy1 = resolve_index(y0 + 1, hs, policy)
    top = (1.0 - fx) * src[iy0, ix0] + fx * src[iy0, ix1]
    bot = (1.0 - fx) * src[iy1, ix0] + fx * src[iy1, ix1]
    return (1.0 - fy) * top + fy * bot, valid


def backward_warp(source, flow, policy=BoundaryPolicy.CLAMP):
    """Bilinearly sample ``source`` at ``p + flow(p)`` for every pixel ``p`` of ``flow``.

    Works on images and flow fields alike (channel-wise).  Returns the warped
    array and a mask that is False wherever the sample point falls outside
    ``[0, W-1] x [0, H-1]`` of the source; those values follow ``policy``.
    """
    src = np.asarray(source, dtype=np.float64)
    squeeze = src.ndim == 2
    if squeeze:
        src = src[:, :, None]
    fl = np.asarray(flow, dtype=np.float64)
    if fl.ndim != 3 or fl.shape[2] != 2:
        raise DimensionError(f"flow must be HxWx2, got {fl.shape}")
    if src.ndim != 3 or src.shape[0] < 1 or src.shape[1] < 1:
        raise DimensionError(f"cannot warp source of shape {src.shape}")
    policy = _policy(policy)
    if _accel.USE_NUMBA:
        out = np.empty(fl.shape[:2] + (src.shape[2],))
        valid = np.empty(fl.shape[:2], dtype=np.bool_)
        _warp_nb(np.ascontiguousarray(src), np.ascontiguousarray(fl), policy is BoundaryPolicy.REFLECT, out, valid)
    else:
        out, valid = _warp_np(src, fl, policy)
    if squeeze:
        out = out[:, :, 0]
    return out, valid
