"""Backend switch for the compiled kernels.

Every hot kernel in :mod:`spreadlab.kernels` exists twice: a numba ``@njit``
version and a pure-numpy version.  The numba path is used when numba imports
and ``SPREADLAB_DISABLE_NUMBA`` is unset (or ``0``).  Both paths consume the
same pre-drawn random numbers, so results are bit-identical across backends.
"""
import os

try:
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    HAVE_NUMBA = False

_FALSY = {"", "0", "false", "no", "off"}


def _env_disabled():
    return os.environ.get("SPREADLAB_DISABLE_NUMBA", "0").strip().lower() not in _FALSY


_backend = "numba" if HAVE_NUMBA and not _env_disabled() else "numpy"


def backend():
    return _backend


def use_numba():
    return _backend == "numba"


def set_backend(name):
    """Select ``"numba"`` or ``"numpy"`` at runtime; returns the previous backend."""
    global _backend
    if name not in ("numba", "numpy"):
        raise ValueError(f"unknown backend {name!r}")
    if name == "numba" and not HAVE_NUMBA:
        raise RuntimeError("numba is not installed")
    prev, _backend = _backend, name
    return prev


def njit(func):
    if not HAVE_NUMBA:
        return func
    return numba.njit(cache=True, nogil=True)(func)
