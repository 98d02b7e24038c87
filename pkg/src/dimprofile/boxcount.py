"""Covering numbers from coordinate mesh cubes.

A cube of side ``r / sqrt(n)`` has diameter ``r``; the number of such mesh
cubes meeting the set is the canonical estimate of ``N_r(E)`` and is within
a factor ``(3 sqrt(n))^n`` of the true covering number.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidParameterError
from .pointset import PointSet

# Relative slack when flooring: points lying on a cube face up to rounding
# (common for IFS-generated sets) are assigned to the upper cube.
_FACE_SNAP = 1e-9
_MAX_INDEX = 2.0**62


@dataclass(frozen=True)
class BoxCountResult:
    r: float
    cube_side: float
    count: int

    def to_dict(self) -> dict:
        return {"r": self.r, "cube_side": self.cube_side, "count": self.count}


def mesh_indices(e: PointSet, r: float) -> np.ndarray:
    """Integer mesh-cube index of every point for cubes of diameter ``r``."""
    if not (r > 0 and math.isfinite(r)):
        raise InvalidParameterError(f"r must be positive and finite, got {r}")
    q = e.points * (math.sqrt(e.ambient_dim) / r)
    if np.abs(q).max() >= _MAX_INDEX:
        raise InvalidParameterError(f"r={r} too small: mesh indices overflow")
    q = q + _FACE_SNAP * np.maximum(1.0, np.abs(q))
    return np.floor(q).astype(np.int64)


def mesh_count(e: PointSet, r: float) -> BoxCountResult:
    idx = mesh_indices(e, r)
    count = len(np.unique(idx, axis=0))
    return BoxCountResult(r=r, cube_side=r / math.sqrt(e.ambient_dim), count=count)


def representatives(e: PointSet, r: float) -> PointSet:
    """First point (in canonical order) of every occupied mesh cube of diameter ``r``."""
    idx = mesh_indices(e, r)
    _, first = np.unique(idx, axis=0, return_index=True)
    return e.subset(np.sort(first))


def count_curve(e: PointSet, r_grid) -> list[BoxCountResult]:
    from .capacity import check_r_grid

    return [mesh_count(e, r) for r in check_r_grid(r_grid)]
