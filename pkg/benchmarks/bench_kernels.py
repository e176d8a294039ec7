"""Time each hot kernel on the numba and numpy backends.

    python benchmarks/bench_kernels.py [--size 128] [--repeat 5] [--csv out.csv]

Numba kernels are compiled (or loaded from cache) in a warm-up call that is
not timed.  The speed-up column is numpy time over numba time, and the
``max_diff`` column confirms both backends computed the same thing.
"""
import argparse
import time

import numpy as np

from streamrecover import _accel
from streamrecover.fusion import fill_holes, project_flow
from streamrecover.io import write_table_csv
from streamrecover.motion import block_match_estimate
from streamrecover.resample import backward_warp
from streamrecover.simulator import SceneSpec, generate_scene


def cases(size):
    spec = SceneSpec("translate", (size, size), 0, (1.5, -0.75), frames=4)
    frames, _ = generate_scene(spec)
    rng = np.random.default_rng(0)
    flow = rng.normal(scale=3.0, size=(size, size, 2))
    holes = rng.random((size, size)) < 0.2
    return {
        "block_match": lambda: block_match_estimate(frames[0], frames[1]),
        "backward_warp": lambda: backward_warp(frames[0], flow)[0],
        "project_flow": lambda: project_flow(flow)[0],
        "fill_holes": lambda: fill_holes(flow, ~holes),
    }


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--size", type=int, default=128)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--csv")
    args = ap.parse_args(argv)
    if not _accel.HAVE_NUMBA:
        raise SystemExit("numba is not installed; nothing to compare")
    rows = []
    for name, fn in cases(args.size).items():
        with _accel.use_numba(True):
            fn()
            t_nb, out_nb = best_of(fn, args.repeat)
        with _accel.use_numba(False):
            t_np, out_np = best_of(fn, args.repeat)
        rows.append({
            "kernel": name,
            "size": args.size,
            "numba_ms": round(t_nb * 1e3, 3),
            "numpy_ms": round(t_np * 1e3, 3),
            "speedup": round(t_np / t_nb, 2),
            "max_diff": float(np.max(np.abs(out_nb - out_np))),
        })
        print(f"{name:14s} numba {t_nb * 1e3:9.2f} ms   numpy {t_np * 1e3:9.2f} ms   "
              f"x{t_np / t_nb:6.2f}   max diff {rows[-1]['max_diff']:.1e}")
    if args.csv:
        write_table_csv(rows, args.csv, header_comment=f"size={args.size} repeat={args.repeat}")


if __name__ == "__main__":
    main()
