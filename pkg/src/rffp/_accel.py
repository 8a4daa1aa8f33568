"""
Numba shim.

Set ``RFFP_DISABLE_NUMBA=1`` to force the pure-numpy code paths, or run in an
environment without numba installed.
"""
import os

_disabled = os.environ.get("RFFP_DISABLE_NUMBA", "").strip().lower() in ("1", "true", "yes", "on")

try:
    if _disabled:
        raise ImportError("numba disabled by RFFP_DISABLE_NUMBA")
    from numba import njit, prange

    HAVE_NUMBA = True
except ImportError:
    HAVE_NUMBA = False
    prange = range

    def njit(*args, **kw):
        if len(args) == 1 and callable(args[0]) and not kw:
            return args[0]
        return lambda f: f


def use_numba():
    """Whether the compiled kernels are active for this process."""
    return HAVE_NUMBA
