"""Kernel acceleration switch.

Hot numeric kernels are compiled with numba by default. Setting the
environment variable ``COSTEER_NO_NUMBA=1`` (before import) selects the
pure-numpy fallback path, which runs the identical Python source without
JIT compilation. ``benchmarks/bench_kernels.py`` compares both paths.
"""

import os

ENABLE_NUMBA = os.environ.get("COSTEER_NO_NUMBA", "0") not in ("1", "true", "yes")
CACHE_NUMBA = os.environ.get("COSTEER_NUMBA_CACHE", "1") not in ("0", "false", "no")

if ENABLE_NUMBA:
    try:
        import numba
    except ImportError:
        ENABLE_NUMBA = False


def jit_kernel(func):
    """@njit when numba is enabled, identity otherwise (fallback path)."""
    if ENABLE_NUMBA:
        return numba.njit(cache=CACHE_NUMBA)(func)
    return func
