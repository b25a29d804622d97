"""Switch between numba-compiled kernels and the pure numpy/Python path.

Set ``PLAPEIG_DISABLE_NUMBA=1`` before import to run every kernel
uncompiled. Both paths are kept numerically equivalent and are compared
in ``tests/test_kernels.py`` and ``benchmarks/bench_kernels.py``.
"""
import os

_FALSY = {"", "0", "false", "no", "off"}

USE_NUMBA = os.environ.get("PLAPEIG_DISABLE_NUMBA", "").strip().lower() in _FALSY

if USE_NUMBA:
    try:
        import numba
    except ImportError:  # pragma: no cover
        USE_NUMBA = False

if USE_NUMBA:

    def njit(fn):
        return numba.njit(cache=True, nogil=True)(fn)

else:

    def njit(fn):
        return fn


def backend() -> str:
    return "numba" if USE_NUMBA else "numpy"
