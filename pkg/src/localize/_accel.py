"""Numba availability and the pure-numpy fallback switch.

Set ``LOCALIZE_DISABLE_JIT=1`` to force every hot kernel onto its numpy path.
"""
import os

_FALSY = ("", "0", "false", "no", "off")

try:
    import numba
    from numba import njit, prange

    HAVE_NUMBA = True
    # The bundled TBB is too old for numba; skip straight to OpenMP/workqueue.
    numba.config.THREADING_LAYER_PRIORITY = ["omp", "workqueue", "tbb"]
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]

        def wrap(fn):
            return fn

        return wrap

    prange = range


def jit_enabled():
    """True when kernels should dispatch to their numba implementation."""
    if not HAVE_NUMBA:
        return False
    return os.environ.get("LOCALIZE_DISABLE_JIT", "").strip().lower() in _FALSY


def resolve_backend(backend=None):
    if backend is None:
        return "numba" if jit_enabled() else "numpy"
    if backend not in ("numba", "numpy"):
        raise ValueError(f"unknown backend {backend!r}; expected 'numba' or 'numpy'")
    if backend == "numba" and not HAVE_NUMBA:
        raise RuntimeError("numba backend requested but numba is not importable")
    return backend


def set_threads(n):
    """Limit numba's worker pool to ``n`` threads (clamped to the pool size).

    Results never depend on the thread count: every parallel loop writes
    per-trial outputs and reductions happen afterwards in a fixed order.
    """
    if not HAVE_NUMBA or n is None:
        return
    n = max(1, min(int(n), numba.config.NUMBA_NUM_THREADS))
    numba.set_num_threads(n)
