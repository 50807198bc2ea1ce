"""Optional numba acceleration.

Set XLNLU_NUMBA=0 to force the pure-numpy fallback path.  Anything that wants a
jitted kernel imports ``njit`` from here; when numba is disabled (or missing)
the decorator is a no-op and the same source runs as plain python/numpy.
"""

import os

NUMBA_ENABLED = os.environ.get("XLNLU_NUMBA", "1") not in ("0", "false", "no")

if NUMBA_ENABLED:
    try:
        from numba import njit, prange
    except ImportError:
        NUMBA_ENABLED = False

if not NUMBA_ENABLED:

    def njit(func=None, **kwargs):
        if func is not None:
            return func

        def wrapper(f):
            return f

        return wrapper

    def prange(x):
        return range(x)
