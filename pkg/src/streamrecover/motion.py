"""Candidate future flows: warped, propagated (uniform acceleration) and estimated.

The flow estimator is a seam: anything with ``estimate(from_img, to_img)``
returning ``F_{from->to}`` can be used.  The default is a coarse-to-fine block
matcher.
"""
from dataclasses import asdict, dataclass
from typing import Protocol

import numpy as np

from . import _accel
from ._accel import njit, prange
from .core import DimensionError, as_flow, as_image, same_hw
from .resample import BoundaryPolicy, backward_warp, degrade, upscale

LUMA_WEIGHTS = np.array([0.299, 0.587, 0.114])
# coarser pyramid levels below this size carry no usable structure
MIN_LEVEL_SIZE = 8


class FlowEstimator(Protocol):
    def estimate(self, from_img, to_img) -> np.ndarray:
        ...


@dataclass(frozen=True)
class BlockMatchConfig:
    levels: int = 3
    block: int = 9
    radius: int = 4
    subpixel: bool = True

    def __post_init__(self):
        if self.levels < 1:
            raise ValueError(f"levels must be >= 1, got {self.levels}")
        if self.block < 3 or self.block % 2 == 0:
            raise ValueError(f"block must be odd and >= 3, got {self.block}")
        if self.radius < 1:
            raise ValueError(f"radius must be >= 1, got {self.radius}")

    def to_dict(self):
        return asdict(self)


def to_gray(image):
    img = as_image(image)
    if img.shape[2] == 1:
        return img[:, :, 0].copy()
    return img[:, :, 0] * LUMA_WEIGHTS[0] + img[:, :, 1] * LUMA_WEIGHTS[1] + img[:, :, 2] * LUMA_WEIGHTS[2]


@njit(cache=True, inline="always")
def _clampi(i, n):
    if i < 0:
        return 0
    if i > n - 1:
        return n - 1
    return i


@njit(cache=True)
def _sad_nb(src, dst, y, x, dv, du, half):
    h, w = src.shape
    acc = 0.0
    for by in range(-half, half + 1):
        ys = _clampi(y + by, h)
        yd = _clampi(y + dv + by, h)
        for bx in range(-half, half + 1):
            acc += abs(src[ys, _clampi(x + bx, w)] - dst[yd, _clampi(x + du + bx, w)])
    return acc


@njit(cache=True)
def _ssd_nb(src, dst, y, x, dv, du, half):
    h, w = src.shape
    acc = 0.0
    for by in range(-half, half + 1):
        ys = _clampi(y + by, h)
        yd = _clampi(y + dv + by, h)
        for bx in range(-half, half + 1):
            d = src[ys, _clampi(x + bx, w)] - dst[yd, _clampi(x + du + bx, w)]
            acc += d * d
    return acc


@njit(cache=True, parallel=True)
def _match_level_nb(src, dst, cu, cv, half, radius, out_u, out_v):
    h, w = src.shape
    for y in prange(h):
        for x in range(w):
            best = np.inf
            bu = 0
            bv = 0
            bmag = 0
            for oy in range(-radius, radius + 1):
                dv = cv[y, x] + oy
                for ox in range(-radius, radius + 1):
                    du = cu[y, x] + ox
                    cost = _sad_nb(src, dst, y, x, dv, du, half)
                    mag = du * du + dv * dv
                    better = cost < best
                    if not better and cost == best:
                        if mag < bmag:
                            better = True
                        elif mag == bmag and (dv < bv or (dv == bv and du < bu)):
                            better = True
                    if better:
                        best = cost
                        bu = du
                        bv = dv
                        bmag = mag
            out_u[y, x] = bu
            out_v[y, x] = bv


@njit(cache=True, inline="always")
def _parabola(cm, c0, cp):
    den = cm - 2.0 * c0 + cp
    # an exact match is not refined
    if den <= 0.0 or c0 == 0.0:
        return 0.0
    off = (cm - cp) / (2.0 * den)
    return min(max(off, -0.5), 0.5)


@njit(cache=True, parallel=True)
def _subpixel_nb(src, dst, iu, iv, half, out):
    h, w = src.shape
    for y in prange(h):
        for x in range(w):
            du = iu[y, x]
            dv = iv[y, x]
            c0 = _ssd_nb(src, dst, y, x, dv, du, half)
            fu = _parabola(_ssd_nb(src, dst, y, x, dv, du - 1, half), c0,
                           _ssd_nb(src, dst, y, x, dv, du + 1, half))
            fv = _parabola(_ssd_nb(src, dst, y, x, dv - 1, du, half), c0,
                           _ssd_nb(src, dst, y, x, dv + 1, du, half))
            out[y, x, 0] = du + fu
            out[y, x, 1] = dv + fv


def _block_cost_np(src, dst, ys, xs, dv, du, half, squared=False):
    h, w = src.shape
    acc = np.zeros(src.shape)
    for by in range(-half, half + 1):
        rs = np.clip(ys + by, 0, h - 1)
        rd = np.clip(ys + dv + by, 0, h - 1)
        for bx in range(-half, half + 1):
            d = src[rs, np.clip(xs + bx, 0, w - 1)] - dst[rd, np.clip(xs + du + bx, 0, w - 1)]
            acc += d * d if squared else np.abs(d)
    return acc


def _match_level_np(src, dst, cu, cv, half, radius):
    ys, xs = np.indices(src.shape)
    best = np.full(src.shape, np.inf)
    bu = np.zeros(src.shape, dtype=np.int64)
    bv = np.zeros(src.shape, dtype=np.int64)
    bmag = np.zeros(src.shape, dtype=np.int64)
    for oy in range(-radius, radius + 1):
        dv = cv + oy
        for ox in range(-radius, radius + 1):
            du = cu + ox
            cost = _block_cost_np(src, dst, ys, xs, dv, du, half)
            mag = du * du + dv * dv
            tie = cost == best
            better = (cost < best) | (tie & (mag < bmag)) | (
                tie & (mag == bmag) & ((dv < bv) | ((dv == bv) & (du < bu))))
            best = np.where(better, cost, best)
            bu = np.where(better, du, bu)
            bv = np.where(better, dv, bv)
            bmag = np.where(better, mag, bmag)
    return bu, bv


def _parabola_np(cm, c0, cp):
    den = cm - 2.0 * c0 + cp
    with np.errstate(divide="ignore", invalid="ignore"):
        off = (cm - cp) / (2.0 * den)
    return np.where((den > 0.0) & (c0 != 0.0), np.clip(off, -0.5, 0.5), 0.0)


def _subpixel_np(src, dst, iu, iv, half):
    ys, xs = np.indices(src.shape)
    def ssd(dv, du):
        return _block_cost_np(src, dst, ys, xs, dv, du, half, squared=True)

    c0 = ssd(iv, iu)
    fu = _parabola_np(ssd(iv, iu - 1), c0, ssd(iv, iu + 1))
    fv = _parabola_np(ssd(iv - 1, iu), c0, ssd(iv + 1, iu))
    return np.stack([iu + fu, iv + fv], axis=-1)


def _pyramid(gray, levels):
    pyr = [gray]
    while len(pyr) < levels:
        h, w = pyr[-1].shape
        if -(-h // 2) < MIN_LEVEL_SIZE or -(-w // 2) < MIN_LEVEL_SIZE:
            break
        pyr.append(degrade(pyr[-1], 2)[:, :, 0])
    return pyr


def block_match_estimate(from_img, to_img, cfg=BlockMatchConfig()):
    """Coarse-to-fine SAD block matching; returns ``F_{from->to}``.

    Each level searches integer displacements within ``cfg.radius`` of twice
    the coarser estimate.  Equal costs resolve to the smallest displacement,
    then to the lexicographically smallest ``(dv, du)``.  The sub-pixel step
    fits a parabola per axis to SSD costs around the SAD winner: SAD is
    V-shaped at its minimum, so a parabola through it locks onto integers.
    """
    a = as_image(from_img)
    b = as_image(to_img)
    if a.shape[:2] != b.shape[:2]:
        raise DimensionError(f"frames differ in size: {a.shape[:2]} vs {b.shape[:2]}")
    half = cfg.block // 2
    pyr_a = _pyramid(to_gray(a), cfg.levels)
    pyr_b = _pyramid(to_gray(b), cfg.levels)
    iu = iv = None
    for src, dst in zip(reversed(pyr_a), reversed(pyr_b)):
        h, w = src.shape
        if iu is None:
            cu = np.zeros((h, w), dtype=np.int64)
            cv = np.zeros((h, w), dtype=np.int64)
        else:
            rows = np.minimum(np.arange(h) // 2, iu.shape[0] - 1)
            cols = np.minimum(np.arange(w) // 2, iu.shape[1] - 1)
            cu = 2 * iu[np.ix_(rows, cols)]
            cv = 2 * iv[np.ix_(rows, cols)]
        if _accel.USE_NUMBA:
            iu = np.empty((h, w), dtype=np.int64)
            iv = np.empty((h, w), dtype=np.int64)
            _match_level_nb(src, dst, cu, cv, half, cfg.radius, iu, iv)
        else:
            iu, iv = _match_level_np(src, dst, cu, cv, half, cfg.radius)
    src, dst = pyr_a[0], pyr_b[0]
    if not cfg.subpixel:
        return np.stack([iu, iv], axis=-1).astype(np.float64)
    if _accel.USE_NUMBA:
        out = np.empty(src.shape + (2,))
        _subpixel_nb(src, dst, iu, iv, half, out)
        return out
    return _subpixel_np(src, dst, iu, iv, half)


class BlockMatchEstimator:
    """:class:`FlowEstimator` backed by :func:`block_match_estimate`."""

    def __init__(self, cfg=None):
        self.cfg = cfg or BlockMatchConfig()

    def estimate(self, from_img, to_img):
        return block_match_estimate(from_img, to_img, self.cfg)

    def __repr__(self):
        return f"BlockMatchEstimator({self.cfg})"


def warp_predict(f_m1_to_0, f_0_to_m1, t, policy=BoundaryPolicy.CLAMP):
    """Linear-motion prediction ``t * W(F_{-1->0}; F_{0->-1})`` and its validity mask."""
    fwd = as_flow(f_m1_to_0)
    back = as_flow(f_0_to_m1)
    same_hw(fwd, back)
    warped, valid = backward_warp(fwd, back, policy)
    return t * warped, valid


def propagate(f_0_to_m1, f_0_to_m2, t):
    """Quadratic extrapolation ``0.5 t (t+1) F_{0->-2} - t (t+2) F_{0->-1}``."""
    f1 = as_flow(f_0_to_m1)
    f2 = as_flow(f_0_to_m2)
    same_hw(f1, f2)
    return (0.5 * t * (t + 1.0)) * f2 - (t * (t + 2.0)) * f1


def estimate_lossy(i0, lr, s, estimator, matched=True):
    """Estimate ``F_{0->t}`` against the bicubic upscale of the received LR frame.

    With ``matched`` the reference is first put through the same
    degrade/upscale chain, so both inputs carry the same blur and a static
    scene yields zero flow at any scale.
    """
    ref = as_image(i0)
    low = as_image(lr)
    h, w = ref.shape[:2]
    expect = (-(-h // s), -(-w // s))
    if low.shape[:2] != expect:
        raise DimensionError(f"LR frame is {low.shape[:2]}, expected {expect} for scale {s} of {h}x{w}")
    if low.shape[2] != ref.shape[2]:
        raise DimensionError("LR frame and reference differ in channel count")
    if matched:
        ref = upscale(degrade(ref, s), h, w)
    return estimator.estimate(ref, upscale(low, h, w))
