"""Kernel backend selection.

The compiled extension is preferred when importable; the numpy fallback is
otherwise used, or can be forced with PINCHMD_PURE=1 (useful for the
benchmark and for cross-checking the two implementations).
"""

from __future__ import annotations

import os

from . import _kernels_np

if os.environ.get("PINCHMD_PURE", "").lower() in ("1", "true", "yes"):
    kernels = _kernels_np
    BACKEND_NAME = "python"
else:
    try:
        from . import _kernels_cy as kernels  # type: ignore[no-redef]

        BACKEND_NAME = "compiled"
    except ImportError:
        kernels = _kernels_np
        BACKEND_NAME = "python"


def active_backend() -> str:
    return BACKEND_NAME
