"""Select the kernel backend at import time.

The compiled Cython module is used when it was built; otherwise, or when the
environment variable PRIVALOG_PURE_PYTHON is set to a non-empty value other
than "0", the numpy fallback is used.  Both expose the same functions.
"""

from __future__ import annotations

import os
from types import ModuleType

from . import _kernels_py


def _load() -> ModuleType:
    if os.environ.get("PRIVALOG_PURE_PYTHON", "") not in ("", "0"):
        return _kernels_py
    try:
        from . import _kernels  # type: ignore[attr-defined]
    except ImportError:
        return _kernels_py
    return _kernels


_impl = _load()

BACKEND: str = _impl.BACKEND
crc32 = _impl.crc32
crc32_many = _impl.crc32_many
cross_indices = _impl.cross_indices
unique_first = _impl.unique_first
member = _impl.member
pow_vec = _impl.pow_vec


def backends() -> dict[str, ModuleType]:
    """All importable backends, keyed by name (used by tests and benchmarks)."""
    found = {"python": _kernels_py}
    try:
        from . import _kernels  # type: ignore[attr-defined]
    except ImportError:
        pass
    else:
        found["cython"] = _kernels
    return found
