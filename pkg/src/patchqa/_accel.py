"""Optional numba acceleration.

Hot kernels are written once as plain loops and compiled with numba when it
is importable. Setting ``PATCHQA_DISABLE_NUMBA=1`` forces the pure-numpy
implementations, which is useful for debugging and for environments where
JIT compilation is unavailable.
"""
import os

try:
    import numba
except ImportError:  # pragma: no cover - exercised only without numba
    numba = None

HAVE_NUMBA = numba is not None
DISABLED = os.environ.get("PATCHQA_DISABLE_NUMBA", "").strip().lower() not in ("", "0", "false", "no")
USE_NUMBA = HAVE_NUMBA and not DISABLED


def njit(func):
    """Compile ``func`` in nopython mode, or return it untouched without numba."""
    if not HAVE_NUMBA:
        return func
    return numba.njit(cache=True, nogil=True)(func)


def backend():
    return "numba" if USE_NUMBA else "numpy"
