"""Hot numeric kernels with two interchangeable backends.

The backend is picked once at import time from ``WPCNPLAN_BACKEND``
(``numba`` by default, ``numpy`` for the pure-numpy path). If numba cannot
be imported the numpy path is used silently.
"""

from __future__ import annotations

import os

BACKEND = os.environ.get("WPCNPLAN_BACKEND", "numba").strip().lower()

if BACKEND not in ("numba", "numpy"):
    raise ImportError(f"WPCNPLAN_BACKEND must be 'numba' or 'numpy', got {BACKEND!r}")

if BACKEND == "numba":
    try:
        from . import _numba as _impl
    except ImportError:  # pragma: no cover - numba missing
        from . import _numpy as _impl

        BACKEND = "numpy"
else:
    from . import _numpy as _impl

obstacle_height = _impl.obstacle_height
hover_eval = _impl.hover_eval
nondominated_ranks = _impl.nondominated_ranks
polyline_penetration = _impl.polyline_penetration
escape_waypoints = _impl.escape_waypoints

__all__ = [
    "BACKEND",
    "obstacle_height",
    "hover_eval",
    "nondominated_ranks",
    "polyline_penetration",
    "escape_waypoints",
]
