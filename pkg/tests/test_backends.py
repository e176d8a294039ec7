"""The numba kernels and their numpy fallbacks must agree."""
import os
import subprocess
import sys

import numpy as np
import pytest

from streamrecover import _accel
from streamrecover.fusion import ProjectionConfig, fill_holes, project_flow
from streamrecover.motion import BlockMatchConfig, block_match_estimate
from streamrecover.resample import backward_warp

pytestmark = pytest.mark.skipif(not _accel.HAVE_NUMBA, reason="numba not installed")


def both(fn, *args):
    with _accel.use_numba(True):
        a = fn(*args)
    with _accel.use_numba(False):
        b = fn(*args)
    return a, b


def test_block_matching_bitwise(rng):
    a = rng.random((40, 36, 3))
    b = np.roll(a, (1, -2), axis=(0, 1)) * 0.9 + 0.05
    for cfg in (BlockMatchConfig(), BlockMatchConfig(levels=1, block=5, radius=2, subpixel=False)):
        x, y = both(block_match_estimate, a, b, cfg)
        assert x.tobytes() == y.tobytes()


@pytest.mark.parametrize("policy", ["clamp", "reflect"])
def test_warp_bitwise(policy, rng):
    src = rng.random((17, 23, 3))
    flow = rng.normal(scale=8, size=(17, 23, 2))
    (o1, v1), (o2, v2) = both(backward_warp, src, flow, policy)
    assert o1.tobytes() == o2.tobytes() and np.array_equal(v1, v2)


def test_projection_close(rng):
    for r in (1, 2):
        flow = rng.normal(scale=3, size=(30, 25, 2))
        (b1, v1), (b2, v2) = both(project_flow, flow, ProjectionConfig(1.3, r))
        assert np.array_equal(v1, v2)
        assert np.max(np.abs(b1 - b2)) <= 1e-12


def test_fill_bitwise(rng):
    flow = rng.normal(size=(25, 31, 2))
    valid = rng.random((25, 31)) < 0.1
    a, b = both(fill_holes, flow, valid)
    assert np.array_equal(a, b)


def test_env_flag_selects_numpy():
    code = "from streamrecover import _accel; print(_accel.backend())"
    env = {**os.environ, "STREAMRECOVER_DISABLE_NUMBA": "1"}
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "numpy"
    env["STREAMRECOVER_DISABLE_NUMBA"] = "0"
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "numba"


def test_benchmark_runs(tmp_path):
    script = os.path.join(os.path.dirname(__file__), "..", "benchmarks", "bench_kernels.py")
    out = tmp_path / "bench.csv"
    subprocess.run([sys.executable, script, "--size", "32", "--repeat", "1", "--csv", str(out)],
                   check=True, capture_output=True)
    lines = out.read_text().splitlines()
    assert lines[1].startswith("kernel,") and len(lines) == 6
