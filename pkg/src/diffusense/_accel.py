"""Numba switch.

Hot kernels are compiled with numba when it is importable and the
``DIFFUSENSE_JIT`` environment variable is not set to a false value
(``0``, ``false``, ``no``, ``off``). The flag is read at call time so
tests and benchmarks can flip it without re-importing the package.
"""
import os

try:
    from numba import njit as _njit

    NUMBA_AVAILABLE = True
except ImportError:  # pragma: no cover - numba is a hard dependency in CI
    _njit = None
    NUMBA_AVAILABLE = False

JIT_ENV = "DIFFUSENSE_JIT"
_FALSE = {"0", "false", "no", "off"}


def jit_enabled():
    if not NUMBA_AVAILABLE:
        return False
    return os.environ.get(JIT_ENV, "1").strip().lower() not in _FALSE


def backend_name():
    return "numba" if jit_enabled() else "numpy"


def njit(func):
    """``numba.njit(cache=True)`` or identity when numba is missing."""
    if _njit is None:  # pragma: no cover
        return func
    return _njit(cache=True)(func)
