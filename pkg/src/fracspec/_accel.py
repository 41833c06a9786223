"""Optional numba acceleration.

Hot kernels are written once in numba-compatible Python. When numba is
importable and ``FRACSPEC_DISABLE_NUMBA`` is unset (or ``0``), they are
compiled with :func:`numba.njit`; otherwise callers take the vectorized
numpy path instead.
"""

from __future__ import annotations

import os

_FLAG = os.environ.get("FRACSPEC_DISABLE_NUMBA", "0").strip().lower()

try:  # pragma: no cover - depends on the environment
    import numba as _numba
except ImportError:  # pragma: no cover
    _numba = None

USE_NUMBA: bool = _numba is not None and _FLAG in ("", "0", "false", "no")

jit_options = {
    "nogil": True,
    "cache": True,
    "fastmath": False,
    "error_model": "numpy",
}


def njit(func):
    """Compile ``func`` with numba when acceleration is enabled."""
    if not USE_NUMBA:
        return func
    return _numba.njit(**jit_options)(func)


def backend() -> str:
    return "numba" if USE_NUMBA else "numpy"
