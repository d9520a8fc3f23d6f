"""Optional numba acceleration.

Set ``FRACVOX_DISABLE_NUMBA=1`` to run every kernel through its pure
numpy / pure Python fallback. The flag is read once at import time.
"""
from __future__ import annotations

import os

_DISABLED = os.environ.get("FRACVOX_DISABLE_NUMBA", "").strip().lower() in ("1", "true", "yes", "on")

try:
    import numba as _numba
except ImportError:  # pragma: no cover - numba is a hard dependency in practice
    _numba = None

HAS_NUMBA = _numba is not None
USE_NUMBA = HAS_NUMBA and not _DISABLED


def njit(*args, **kwargs):
    """``numba.njit`` when available, otherwise the identity decorator.

    Always compiles when numba is importable, even if the env flag is set,
    so that tests and benchmarks can compare both paths in one process.
    Dispatch between paths happens in :mod:`fracvox.kernels`.
    """
    if not HAS_NUMBA:
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]
        return lambda f: f
    kwargs.setdefault("cache", True)
    return _numba.njit(*args, **kwargs)


def backend() -> str:
    return "numba" if USE_NUMBA else "numpy"
