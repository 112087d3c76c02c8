"""Kernel backend selection.

The integrators in :mod:`qutritsim.kernels` exist twice: a loop-oriented
version that numba compiles in nopython mode, and a vectorized pure-numpy
version. Which one runs is decided once at import time from the environment
variable ``QUTRITSIM_BACKEND``:

* ``auto`` (default) - numba if it imports cleanly, numpy otherwise
* ``numba``          - require numba, fail loudly if missing
* ``numpy``          - force the pure-numpy path

``benchmarks/benchmark_kernels.py`` compares the two paths directly.
"""

import os

_requested = os.environ.get("QUTRITSIM_BACKEND", "auto").strip().lower()
if _requested not in ("auto", "numba", "numpy"):
    raise RuntimeError(
        "QUTRITSIM_BACKEND must be one of auto|numba|numpy, got %r" % _requested
    )

_use_numba = False
if _requested in ("auto", "numba"):
    try:
        import numba  # noqa: F401

        _use_numba = True
    except ImportError:
        if _requested == "numba":
            raise


def using_numba():
    return _use_numba


def backend_name():
    return "numba" if _use_numba else "numpy"


def jit(fn):
    """Compile ``fn`` with numba when active, otherwise return it unchanged."""
    if _use_numba:
        from numba import njit

        return njit(cache=True)(fn)
    return fn
