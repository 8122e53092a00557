"""Selection between numba-compiled kernels and the pure numpy path.

Set ``SIGSDE_BACKEND=numpy`` to force the numpy implementations; the default
uses numba when it imports cleanly.
"""
import functools
import os

_requested = os.environ.get("SIGSDE_BACKEND", "numba").strip().lower()

try:
    import numba as nb
except ImportError:  # pragma: no cover - numba is a declared dependency
    nb = None

HAVE_NUMBA = nb is not None
if HAVE_NUMBA:
    # skip probing old TBB builds, which only warns
    nb.config.THREADING_LAYER_PRIORITY = ["omp", "workqueue", "tbb"]
USE_NUMBA = HAVE_NUMBA and _requested != "numpy"

if HAVE_NUMBA:
    njit = functools.partial(nb.njit, cache=True, nogil=True)
    # batch kernels: one trajectory per prange iteration
    pnjit = functools.partial(nb.njit, cache=True, nogil=True, parallel=True)
    prange = nb.prange
else:  # pragma: no cover
    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]
        return lambda f: f

    pnjit = njit
    prange = range


def backend_name():
    return "numba" if USE_NUMBA else "numpy"


def set_threads(n):
    """Cap the numba worker pool (no-op on the numpy path)."""
    if HAVE_NUMBA and n:
        nb.set_num_threads(max(1, min(int(n), nb.config.NUMBA_NUM_THREADS)))
