"""Kernel dispatch: compiled extension when importable, numpy otherwise.

Set ``CLUSTERDRIFT_PURE_PYTHON=1`` to force the fallback.
"""
import os

from . import _kernels_py

if os.environ.get("CLUSTERDRIFT_PURE_PYTHON"):
    _impl = _kernels_py
else:
    try:
        from . import _kernels as _impl
    except ImportError:
        _impl = _kernels_py

BACKEND = "compiled" if _impl is not _kernels_py else "python"

pairwise_sq_dists = _impl.pairwise_sq_dists
nearest_neighbor = _impl.nearest_neighbor
assign_nearest = _impl.assign_nearest
competitive_epoch = _impl.competitive_epoch
