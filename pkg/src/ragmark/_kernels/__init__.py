"""Kernel backend selection.

Prefers the compiled extension when it imported cleanly; falls back to
the pure-Python module otherwise. Set RAGMARK_PURE_PYTHON=1 to force
the fallback (useful for benchmarking and debugging).
"""

from __future__ import annotations

import os

if os.environ.get("RAGMARK_PURE_PYTHON"):
    from ragmark._kernels import _pure as _impl
else:
    try:
        from ragmark._kernels import _speedups as _impl  # type: ignore[attr-defined]
    except ImportError:
        from ragmark._kernels import _pure as _impl

BACKEND: str = _impl.BACKEND
gestalt_total = _impl.gestalt_total
trigram_accumulate = _impl.trigram_accumulate
range_cdf_inner = _impl.range_cdf_inner
as_grid = _impl.as_grid

__all__ = [
    "BACKEND",
    "as_grid",
    "gestalt_total",
    "range_cdf_inner",
    "trigram_accumulate",
]
