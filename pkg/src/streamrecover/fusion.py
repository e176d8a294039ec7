"""Candidate flow fusion and forward-to-backward flow projection."""
import math
from dataclasses import asdict, dataclass
from enum import Enum

import numpy as np
from scipy import ndimage

from . import _accel
from ._accel import njit
from .core import DimensionError, as_flow, as_image
from .resample import BoundaryPolicy, backward_warp

CHARBONNIER_EPS = 1e-6


class CandidateLabel(str, Enum):
    WARPED = "warped"
    PROPAGATED = "propagated"
    ESTIMATED = "estimated"


# lower value wins photometric ties
PRIORITY = {CandidateLabel.ESTIMATED: 0, CandidateLabel.WARPED: 1, CandidateLabel.PROPAGATED: 2}


@dataclass(frozen=True)
class FlowCandidate:
    flow: np.ndarray
    valid: np.ndarray
    label: CandidateLabel

    def __post_init__(self):
        flow = as_flow(self.flow)
        valid = np.asarray(self.valid, dtype=bool)
        if valid.shape != flow.shape[:2]:
            raise DimensionError(f"mask {valid.shape} does not match flow {flow.shape[:2]}")
        object.__setattr__(self, "flow", flow)
        object.__setattr__(self, "valid", valid)
        object.__setattr__(self, "label", CandidateLabel(self.label))

    @classmethod
    def always_valid(cls, flow, label):
        flow = as_flow(flow)
        return cls(flow, np.ones(flow.shape[:2], dtype=bool), label)


@dataclass(frozen=True)
class ProjectionConfig:
    sigma: float = 1.0
    radius: int = 1

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError(f"sigma must be > 0, got {self.sigma}")
        if self.radius < 1 or int(self.radius) != self.radius:
            raise ValueError(f"radius must be an integer >= 1, got {self.radius}")

    def to_dict(self):
        return asdict(self)


def _lost_rule(by_label):
    """Warped where its mask holds, propagated elsewhere; a lone candidate passes through."""
    if len(by_label) == 1:
        return next(iter(by_label.values())).flow.copy()
    base = None
    for label in (CandidateLabel.PROPAGATED, CandidateLabel.ESTIMATED, CandidateLabel.WARPED):
        if label in by_label:
            base = by_label[label].flow
            break
    out = base.copy()
    warped = by_label.get(CandidateLabel.WARPED)
    if warped is not None:
        out[warped.valid] = warped.flow[warped.valid]
    return out


def fuse(candidates, reference, target_proxy=None, policy=BoundaryPolicy.CLAMP, window=1):
    """Per-pixel selection among candidate ``F_{0->t}`` flows.

    With a ``target_proxy`` (the upscaled LR frame) each pixel takes the
    candidate whose end point best matches the reference colour under the
    Charbonnier penalty.  Candidates whose mask is False, or whose end point
    leaves the proxy, cannot compete at that pixel; pixels with no contender
    fall back to the lost-case rule.  Without a proxy the lost-case rule is
    applied everywhere.  ``window > 1`` averages the per-pixel cost over an
    odd ``window x window`` box before comparing.
    """
    candidates = list(candidates)
    if window < 1 or window % 2 == 0:
        raise ValueError(f"window must be a positive odd integer, got {window}")
    if not candidates:
        raise ValueError("fuse needs at least one candidate")
    ref = as_image(reference)
    by_label = {}
    for c in candidates:
        if c.flow.shape[:2] != ref.shape[:2]:
            raise DimensionError(f"{c.label.value} flow {c.flow.shape[:2]} does not match reference {ref.shape[:2]}")
        if c.label in by_label:
            raise ValueError(f"duplicate candidate label {c.label.value!r}")
        by_label[c.label] = c
    fallback = _lost_rule(by_label)
    if target_proxy is None:
        return fallback

    proxy = as_image(target_proxy)
    if proxy.shape != ref.shape:
        raise DimensionError(f"proxy {proxy.shape} does not match reference {ref.shape}")
    out = fallback.copy()
    best = np.full(ref.shape[:2], np.inf)
    chosen = np.zeros(ref.shape[:2], dtype=bool)
    for c in sorted(by_label.values(), key=lambda c: PRIORITY[c.label]):
        sampled, inside = backward_warp(proxy, c.flow, policy)
        diff = ref - sampled
        cost = np.sqrt(diff * diff + CHARBONNIER_EPS ** 2).sum(axis=2)
        if window > 1:
            cost = ndimage.uniform_filter(cost, size=window, mode="nearest")
        take = c.valid & inside & (cost < best)
        best = np.where(take, cost, best)
        out[take] = c.flow[take]
        chosen |= take
    out[~chosen] = fallback[~chosen]
    return out


@njit(cache=True)
def _project_nb(flow, radius, sigma2, num, wsum, ref, has_ref):
    h, w = flow.shape[0], flow.shape[1]
    for y in range(h):
        for x in range(w):
            fu = flow[y, x, 0]
            fv = flow[y, x, 1]
            px = x + fu
            py = y + fv
            if px + radius <= 0.0 or px - radius >= w - 1 or py + radius <= 0.0 or py - radius >= h - 1:
                continue
            x_lo = max(int(math.floor(px - radius)) + 1, 0)
            x_hi = min(int(math.ceil(px + radius)) - 1, w - 1)
            y_lo = max(int(math.floor(py - radius)) + 1, 0)
            y_hi = min(int(math.ceil(py + radius)) - 1, h - 1)
            for ty in range(y_lo, y_hi + 1):
                dy = ty - py
                for tx in range(x_lo, x_hi + 1):
                    dx = tx - px
                    wt = math.exp(-(dx * dx + dy * dy) / sigma2)
                    if not has_ref[ty, tx]:
                        has_ref[ty, tx] = True
                        ref[ty, tx, 0] = fu
                        ref[ty, tx, 1] = fv
                    num[ty, tx, 0] += wt * (fu - ref[ty, tx, 0])
                    num[ty, tx, 1] += wt * (fv - ref[ty, tx, 1])
                    wsum[ty, tx] += wt


def _project_np(flow, radius, sigma2):
    h, w = flow.shape[:2]
    n = h * w
    ys, xs = np.divmod(np.arange(n), w)
    fu = flow[..., 0].ravel()
    fv = flow[..., 1].ravel()
    px = xs + fu
    py = ys + fv
    near = (px + radius > 0.0) & (px - radius < w - 1) & (py + radius > 0.0) & (py - radius < h - 1)
    src = np.nonzero(near)[0]
    px, py, fu, fv = px[src], py[src], fu[src], fv[src]
    x_lo = np.floor(px - radius).astype(np.int64) + 1
    y_lo = np.floor(py - radius).astype(np.int64) + 1
    x_hi = np.ceil(px + radius).astype(np.int64) - 1
    y_hi = np.ceil(py + radius).astype(np.int64) - 1
    pairs = []
    for ky in range(2 * radius):
        ty = y_lo + ky
        oky = (ty <= y_hi) & (ty >= 0) & (ty < h)
        for kx in range(2 * radius):
            tx = x_lo + kx
            ok = oky & (tx <= x_hi) & (tx >= 0) & (tx < w)
            sel = np.nonzero(ok)[0]
            dx = tx[sel] - px[sel]
            dy = ty[sel] - py[sel]
            pairs.append((ty[sel] * w + tx[sel], sel, np.exp(-(dx * dx + dy * dy) / sigma2)))
    if pairs:
        tgt = np.concatenate([p[0] for p in pairs])
        sel = np.concatenate([p[1] for p in pairs])
        wt = np.concatenate([p[2] for p in pairs])
    else:
        tgt = sel = np.zeros(0, dtype=np.int64)
        wt = np.zeros(0)
    # reference = first arriving source in raster order, as in the scatter kernel
    first = np.full(n, np.iinfo(np.int64).max)
    np.minimum.at(first, tgt, src[sel])
    has_ref = first < np.iinfo(np.int64).max
    ref = np.zeros((n, 2))
    ref[has_ref, 0] = flow[..., 0].ravel()[first[has_ref]]
    ref[has_ref, 1] = flow[..., 1].ravel()[first[has_ref]]
    num = np.stack([
        np.bincount(tgt, wt * (fu[sel] - ref[tgt, 0]), minlength=n),
        np.bincount(tgt, wt * (fv[sel] - ref[tgt, 1]), minlength=n),
    ], axis=-1)
    wsum = np.bincount(tgt, wt, minlength=n)
    return num.reshape(h, w, 2), wsum.reshape(h, w), ref.reshape(h, w, 2)


def project_flow(forward, cfg=ProjectionConfig()):
    """Turn ``F_{0->t}`` into ``F_{t->0}`` by Gaussian-weighted splatting of negated vectors.

    Source pixel ``x`` lands at ``x + F(x)`` and contributes to every target
    pixel closer than ``cfg.radius`` to that point along both axes (an open
    square, so radius 1 covers the 4 bilinear neighbours), weighted by
    ``exp(-d^2 / sigma^2)`` with ``d`` the distance from the landing point.
    Returns ``(backward, valid)``; ``valid`` is False on holes (no mass).
    """
    flow = as_flow(forward)
    h, w = flow.shape[:2]
    sigma2 = float(cfg.sigma) ** 2
    if _accel.USE_NUMBA:
        num = np.zeros((h, w, 2))
        wsum = np.zeros((h, w))
        ref = np.zeros((h, w, 2))
        has_ref = np.zeros((h, w), dtype=np.bool_)
        _project_nb(np.ascontiguousarray(flow), float(cfg.radius), sigma2, num, wsum, ref, has_ref)
    else:
        num, wsum, ref = _project_np(flow, int(cfg.radius), sigma2)
    valid = wsum > 0.0
    back = np.zeros((h, w, 2))
    back[valid] = -(ref[valid] + num[valid] / wsum[valid][:, None])
    return back, valid


@njit(cache=True)
def _fill_nb(flow, valid, out):
    h, w = valid.shape
    kmax = max(h, w)
    for y in range(h):
        for x in range(w):
            if valid[y, x]:
                continue
            best = np.iinfo(np.int64).max
            bidx = np.iinfo(np.int64).max
            for k in range(1, kmax + 1):
                for dy in range(-k, k + 1):
                    yy = y + dy
                    if yy < 0 or yy >= h:
                        continue
                    step = 1 if (dy == -k or dy == k) else 2 * k
                    for dx in range(-k, k + 1, step):
                        xx = x + dx
                        if xx < 0 or xx >= w or not valid[yy, xx]:
                            continue
                        d2 = dy * dy + dx * dx
                        idx = yy * w + xx
                        if d2 < best or (d2 == best and idx < bidx):
                            best = d2
                            bidx = idx
                if best <= k * k:
                    break
            out[y, x, 0] = flow[bidx // w, bidx % w, 0]
            out[y, x, 1] = flow[bidx // w, bidx % w, 1]


def _fill_np(flow, valid, out):
    h, w = valid.shape
    vy, vx = np.nonzero(valid)
    hy, hx = np.nonzero(~valid)
    chunk = max(1, 4_000_000 // max(len(vy), 1))
    for start in range(0, len(hy), chunk):
        cy = hy[start:start + chunk, None]
        cx = hx[start:start + chunk, None]
        d2 = (vy[None, :] - cy) ** 2 + (vx[None, :] - cx) ** 2
        # np.argmin keeps the first minimum, i.e. the earliest valid pixel in raster order
        pick = np.argmin(d2, axis=1)
        out[hy[start:start + chunk], hx[start:start + chunk]] = flow[vy[pick], vx[pick]]


def fill_holes(flow, valid):
    """Copy the nearest valid vector into each hole; an all-hole field becomes zero."""
    fl = as_flow(flow)
    mask = np.asarray(valid, dtype=bool)
    if mask.shape != fl.shape[:2]:
        raise DimensionError(f"mask {mask.shape} does not match flow {fl.shape[:2]}")
    if not mask.any():
        return np.zeros_like(fl)
    out = fl.copy()
    if mask.all():
        return out
    if _accel.USE_NUMBA:
        _fill_nb(np.ascontiguousarray(fl), np.ascontiguousarray(mask), out)
    else:
        _fill_np(fl, mask, out)
    return out
