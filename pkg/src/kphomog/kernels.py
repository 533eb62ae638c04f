"""Kernel dispatch.

The compiled extension is preferred; setting ``KPHOMOG_PURE_PYTHON=1``
forces the pure-Python implementation. Both produce identical results.
"""

import os

from . import _kernels_py

if os.environ.get("KPHOMOG_PURE_PYTHON", "") not in ("", "0"):
    _impl = _kernels_py
else:
    try:
        from . import _kernels as _impl  # type: ignore[attr-defined]
    except ImportError:
        _impl = _kernels_py

BACKEND = "compiled" if _impl is not _kernels_py else "python"

edit_distance = _impl.edit_distance
contains_run = _impl.contains_run

__all__ = ["BACKEND", "edit_distance", "contains_run"]
