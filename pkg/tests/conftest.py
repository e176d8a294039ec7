import numpy as np
import pytest

from streamrecover import _accel
from streamrecover.simulator import SceneSpec, generate_scene


@pytest.fixture(params=["numba", "numpy"])
def backend(request):
    """Run a test once per kernel backend."""
    if request.param == "numba" and not _accel.HAVE_NUMBA:
        pytest.skip("numba not installed")
    with _accel.use_numba(request.param == "numba"):
        yield request.param


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def scene(kind="translate", size=(64, 64), seed=0, velocity=(0.0, 0.0), acceleration=(0.0, 0.0), frames=4):
    spec = SceneSpec(kind, size, seed, velocity, acceleration, frames)
    return spec, generate_scene(spec)[0]
