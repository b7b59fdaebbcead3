"""Optional numba acceleration.

Set ``LURSYNC_NUMBA=0`` in the environment before import to force the
pure-numpy kernels everywhere.  Both variants of every kernel are always
importable so they can be compared side by side.
"""
import functools
import os

try:
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    HAVE_NUMBA = False

_flag = os.environ.get("LURSYNC_NUMBA", "1").strip().lower()
USE_NUMBA = HAVE_NUMBA and _flag not in ("0", "false", "no", "off")


def njit(*args, **kwargs):
    """``numba.njit`` with caching, or a transparent no-op without numba."""
    kwargs.setdefault("cache", True)

    def wrap(f):
        if HAVE_NUMBA:
            return numba.njit(**kwargs)(f)

        @functools.wraps(f)
        def plain(*a, **kw):
            return f(*a, **kw)

        return plain

    if len(args) == 1 and callable(args[0]):
        return wrap(args[0])
    return wrap


def backend():
    return "numba" if USE_NUMBA else "numpy"
