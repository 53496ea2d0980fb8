"""Numba switch.

Kernels in :mod:`crypthom.kernels` come in two flavours: a numba-compiled
loop and a vectorised numpy fallback. Which one is dispatched is decided once,
at import time, from the ``CRYPTHOM_DISABLE_NUMBA`` environment variable
(any of ``1``, ``true``, ``yes``). If numba cannot be imported the numpy path
is used regardless.

The kernels are serial loops (no ``prange``); ``CRYPTHOM_NUM_THREADS`` only
sets how many epsilon runs the ``full`` subcommand executes concurrently.
"""
import os

_FALSY = {"", "0", "false", "no", "off"}

try:
    import numba
    HAS_NUMBA = True
except ImportError:  # pragma: no cover
    numba = None
    HAS_NUMBA = False

DISABLE_NUMBA = os.environ.get("CRYPTHOM_DISABLE_NUMBA", "").strip().lower() not in _FALSY
USE_NUMBA = HAS_NUMBA and not DISABLE_NUMBA
CACHE_NUMBA = True


def num_threads():
    try:
        n = int(os.environ.get("CRYPTHOM_NUM_THREADS", "1"))
    except ValueError:
        n = 1
    return max(1, n)


def njit(func):
    """Compile ``func`` in nopython mode, or return None without numba.

    The numba variant is always exposed under its own name so that tests and
    the benchmark can compare both paths in one process.
    """
    if not HAS_NUMBA:
        return None
    return numba.njit(cache=CACHE_NUMBA, nogil=True)(func)

