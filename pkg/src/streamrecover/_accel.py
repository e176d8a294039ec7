"""Backend selection for the hot kernels.

Every per-pixel kernel in the package exists twice: a numba ``@njit`` version
and a vectorised numpy version.  ``STREAMRECOVER_DISABLE_NUMBA=1`` (or a
missing numba install) forces the numpy path.  The flag is read once at import
time; tests flip :data:`USE_NUMBA` through :func:`use_numba`.
"""
import contextlib
import os

try:
    import numba
    from numba import njit, prange

    HAVE_NUMBA = True
    if "NUMBA_THREADING_LAYER" not in os.environ:
        # the bundled TBB is too old for numba; omp is thread-safe for concurrent callers
        numba.config.THREADING_LAYER_PRIORITY = ["omp", "workqueue", "tbb"]
except ImportError:  # pragma: no cover - numba is a hard dependency in practice
    HAVE_NUMBA = False
    numba = None

    def njit(*args, **kwargs):
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]
        return lambda fn: fn

    prange = range


def _env_disabled():
    return os.environ.get("STREAMRECOVER_DISABLE_NUMBA", "").strip().lower() in ("1", "true", "yes", "on")


USE_NUMBA = HAVE_NUMBA and not _env_disabled()


def backend():
    return "numba" if USE_NUMBA else "numpy"


@contextlib.contextmanager
def use_numba(enabled):
    """Temporarily switch backend (no-op request for numba if it is absent)."""
    global USE_NUMBA
    saved = USE_NUMBA
    USE_NUMBA = bool(enabled) and HAVE_NUMBA
    try:
        yield
    finally:
        USE_NUMBA = saved


def set_num_threads(n):
    if HAVE_NUMBA and n is not None:
        numba.set_num_threads(int(n))


__all__ = ["HAVE_NUMBA", "USE_NUMBA", "backend", "njit", "prange", "set_num_threads", "use_numba"]
