"""Independent reference implementations used by the unit and acceptance tests.

Each one is written the slow, obvious way (explicit loops over taps, sources
or pixels) so it shares no code path with the package.
"""
import itertools
import math

import numpy as np


def keys(x, a=-0.5):
    x = abs(x)
    if x <= 1:
        return (a + 2) * x ** 3 - (a + 3) * x ** 2 + 1
    if x < 2:
        return a * x ** 3 - 5 * a * x ** 2 + 8 * a * x - 4 * a
    return 0.0


def mirror(j, n):
    # walk the index back inside by repeated reflection about the edge centres
    if n == 1:
        return 0
    while j < 0 or j > n - 1:
        j = -j if j < 0 else 2 * (n - 1) - j
    return j


def dense_matrix(n_in, n_out, scale, policy="clamp"):
    """Resampling matrix built tap by tap over every integer position in the support."""
    stretch = min(scale, 1.0)
    m = np.zeros((n_out, n_in))
    for i in range(n_out):
        c = (i + 0.5) / scale - 0.5
        lo = math.floor(c - 2 / stretch) - 1
        hi = math.ceil(c + 2 / stretch) + 1
        total = 0.0
        for j in range(lo, hi + 1):
            wt = stretch * keys(stretch * (c - j))
            if wt == 0.0:
                continue
            k = min(max(j, 0), n_in - 1) if policy == "clamp" else mirror(j, n_in)
            m[i, k] += wt
            total += wt
        m[i] /= total
    return m


def dense_resize(img, out_h, out_w, policy="clamp", s=None):
    """Reference resize; ``s`` gives the downscale factor, otherwise the size ratio is the scale."""
    sy = 1.0 / s if s else out_h / img.shape[0]
    sx = 1.0 / s if s else out_w / img.shape[1]
    my = dense_matrix(img.shape[0], out_h, sy, policy)
    mx = dense_matrix(img.shape[1], out_w, sx, policy)
    return np.clip(np.stack([my @ img[:, :, c] @ mx.T for c in range(img.shape[2])], axis=-1), 0, 1)


def splat_oracle(flow, sigma=1.0, radius=1):
    """Every source against every target: plain weighted average of negated vectors."""
    h, w = flow.shape[:2]
    num = np.zeros((h, w, 2))
    den = np.zeros((h, w))
    for sy, sx in itertools.product(range(h), range(w)):
        px = sx + flow[sy, sx, 0]
        py = sy + flow[sy, sx, 1]
        for ty, tx in itertools.product(range(h), range(w)):
            if abs(tx - px) < radius and abs(ty - py) < radius:
                wt = math.exp(-((tx - px) ** 2 + (ty - py) ** 2) / sigma ** 2)
                num[ty, tx] -= wt * flow[sy, sx]
                den[ty, tx] += wt
    valid = den > 0
    out = np.zeros((h, w, 2))
    out[valid] = num[valid] / den[valid][:, None]
    return out, valid


def random_field(rng, i):
    h, w = rng.integers(1, 33, size=2)
    kind = i % 4
    if kind == 0:
        f = rng.normal(scale=3.0, size=(h, w, 2))
    elif kind == 1:
        # half-pixel grid: landing points hit footprint edges exactly
        f = rng.integers(-8, 9, size=(h, w, 2)) / 2.0
    elif kind == 2:
        f = rng.uniform(-1.5 * w, 1.5 * w, size=(h, w, 2))
    else:
        f = np.broadcast_to(rng.normal(scale=2, size=2), (h, w, 2)) + rng.normal(scale=0.3, size=(h, w, 2))
    return np.ascontiguousarray(f)


def fill_oracle(flow, valid):
    h, w = valid.shape
    out = flow.copy()
    pts = [(y, x) for y in range(h) for x in range(w) if valid[y, x]]
    for y in range(h):
        for x in range(w):
            if not valid[y, x]:
                by, bx = min(pts, key=lambda p: ((p[0] - y) ** 2 + (p[1] - x) ** 2, p[0] * w + p[1]))
                out[y, x] = flow[by, bx]
    return out
