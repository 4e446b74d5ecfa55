"""Optional numba acceleration.

Kernels are written as plain loops over numpy arrays so the same source runs
either compiled by numba or interpreted by CPython.  Set ``ACSEL_DISABLE_NUMBA=1``
to force the interpreted path (or when numba is not installed).
"""

import os

_flag = os.environ.get("ACSEL_DISABLE_NUMBA", "").strip().lower()
DISABLED = _flag not in ("", "0", "false", "no")

try:
    import numba
except ImportError:  # pragma: no cover - exercised only without numba
    numba = None

USE_NUMBA = numba is not None and not DISABLED


def njit(func):
    """Compile ``func`` with numba when enabled; keep the original as ``.py_func``."""
    if not USE_NUMBA:
        func.py_func = func
        return func
    return numba.njit(cache=True, nogil=True)(func)
