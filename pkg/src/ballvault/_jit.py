"""Kernel backend selection.

The hot loops in ``ballvault._kernels`` are written in a numba-compatible
subset of Python over numpy arrays.  By default they are compiled with
``numba.njit``; setting ``BALLVAULT_BACKEND=numpy`` runs the exact same
source uncompiled (slow, but bit-identical -- useful for debugging and
for machines without a working numba).  ``BALLVAULT_BACKEND=numba``
forces compilation and fails loudly if numba is unavailable.
"""

import os

try:
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised via env flag tests
    numba = None
    HAVE_NUMBA = False

_requested = os.environ.get("BALLVAULT_BACKEND", "auto").strip().lower()

if _requested in ("", "auto"):
    BACKEND = "numba" if HAVE_NUMBA else "numpy"
elif _requested in ("numba", "numpy"):
    if _requested == "numba" and not HAVE_NUMBA:
        raise ImportError("BALLVAULT_BACKEND=numba but numba is not importable")
    BACKEND = _requested
else:
    raise ValueError(
        "BALLVAULT_BACKEND must be one of 'auto', 'numba', 'numpy'; got %r" % _requested
    )


def jit(func):
    """Compile ``func`` with numba, or return it unchanged on the numpy backend."""
    if BACKEND == "numba":
        return numba.njit(cache=True, nogil=True)(func)
    return func
