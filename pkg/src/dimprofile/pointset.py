"""Finite point clouds standing in for compact subsets of R^n.

Sets are produced by deterministic generators (iterated function systems,
Cantor sets, evenly spaced segments, Cartesian products) or loaded from
CSV/JSON files. Every generator emits points in a canonical order so that
downstream experiments are reproducible bit-for-bit.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.spatial import ConvexHull, QhullError, cKDTree
from scipy.spatial.distance import pdist

from .errors import InvalidParameterError, ResourceLimitError

DEFAULT_POINT_CAP = 100_000

# pdist is used directly below this size; above it the hull is searched.
_BRUTE_FORCE_DIAMETER = 3000


@dataclass(frozen=True, eq=False)
class PointSet:
    """An immutable, nonempty, ordered sample of points in R^n.

    Parameters
    ----------
    points : array_like, shape (N, n)
        Point coordinates. A 1-D input is read as N points on the line.
    """

    points: np.ndarray

    def __post_init__(self):
        pts = np.array(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts.reshape(-1, 1)
        if pts.ndim != 2 or pts.shape[0] == 0 or pts.shape[1] == 0:
            raise InvalidParameterError(
                f"point set must be a nonempty (N, n) array, got shape {pts.shape}"
            )
        if not np.all(np.isfinite(pts)):
            raise InvalidParameterError("point coordinates must be finite")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @property
    def ambient_dim(self) -> int:
        return self.points.shape[1]

    def __len__(self) -> int:
        return self.points.shape[0]

    def subset(self, indices) -> "PointSet":
        return PointSet(self.points[np.asarray(indices)])

    def embed(self, ambient_dim: int) -> "PointSet":
        """Pad with zero coordinates so the set lives in a larger space."""
        if ambient_dim < self.ambient_dim:
            raise InvalidParameterError("cannot embed into a smaller space")
        pad = np.zeros((len(self), ambient_dim - self.ambient_dim))
        return PointSet(np.hstack([self.points, pad]))


@dataclass(frozen=True)
class IfsMap:
    """Contracting similarity x -> ratio * orthogonal @ x + offset."""

    ratio: float
    offset: tuple
    orthogonal: tuple | None = None

    def matrix(self, n: int) -> np.ndarray:
        if self.orthogonal is None:
            return self.ratio * np.eye(n)
        return self.ratio * np.asarray(self.orthogonal, dtype=float).reshape(n, n)


@dataclass(frozen=True)
class IfsSpec:
    ambient_dim: int
    maps: tuple
    depth: int

    def __post_init__(self):
        if self.ambient_dim < 1:
            raise InvalidParameterError("ambient_dim must be positive")
        if len(self.maps) == 0:
            raise InvalidParameterError("an IFS needs at least one map")
        if int(self.depth) != self.depth or self.depth < 0:
            raise InvalidParameterError(f"depth must be a nonnegative integer, got {self.depth}")
        for f in self.maps:
            if not 0.0 < f.ratio < 1.0:
                raise InvalidParameterError(f"contraction ratio {f.ratio} not in (0, 1)")
            if len(f.offset) != self.ambient_dim:
                raise InvalidParameterError("offset length does not match ambient_dim")
            if f.orthogonal is not None:
                q = np.asarray(f.orthogonal, dtype=float).reshape(
                    self.ambient_dim, self.ambient_dim
                )
                if not np.allclose(q.T @ q, np.eye(self.ambient_dim), atol=1e-10):
                    raise InvalidParameterError("orthogonal part is not orthogonal")

    @property
    def size(self) -> int:
        return len(self.maps) ** self.depth


def generate_ifs(spec: IfsSpec, cap: int = DEFAULT_POINT_CAP) -> PointSet:
    """Images of the origin under all depth-fold compositions of the maps.

    Point ``k`` is ``f_{i1} o f_{i2} o ... o f_{id}(0)`` where ``(i1, ..., id)``
    is the base-``len(maps)`` expansion of ``k`` (lexicographic order, first
    map outermost).
    """
    if spec.size > cap:
        raise ResourceLimitError(
            f"IFS would generate {spec.size} points, above the cap of {cap}"
        )
    n = spec.ambient_dim
    mats = [f.matrix(n) for f in spec.maps]
    offsets = [np.asarray(f.offset, dtype=float) for f in spec.maps]
    pts = np.zeros((1, n))
    for _ in range(spec.depth):
        pts = np.concatenate([pts @ a.T + b for a, b in zip(mats, offsets)])
    return PointSet(pts)


def cantor_spec(ratio: float, depth: int) -> IfsSpec:
    if not 0.0 < ratio <= 0.5:
        raise InvalidParameterError(f"Cantor ratio must lie in (0, 1/2], got {ratio}")
    return IfsSpec(1, (IfsMap(ratio, (0.0,)), IfsMap(ratio, (1.0 - ratio,))), depth)


def sierpinski_spec(depth: int) -> IfsSpec:
    h = math.sqrt(3.0) / 2.0
    maps = (
        IfsMap(0.5, (0.0, 0.0)),
        IfsMap(0.5, (0.5, 0.0)),
        IfsMap(0.5, (0.25, h / 2.0)),
    )
    return IfsSpec(2, maps, depth)


def generate_cantor(ratio: float, depth: int, cap: int = DEFAULT_POINT_CAP) -> PointSet:
    """Left endpoints of the depth-th stage of the Cantor set with the given ratio.

    For ``ratio=1/3`` this is the middle-thirds set, box dimension log 2 / log 3.
    """
    return generate_ifs(cantor_spec(ratio, depth), cap=cap)


def generate_segment(n_points: int, length: float = 1.0) -> PointSet:
    """Evenly spaced sample of [0, length] including both endpoints."""
    if n_points < 1:
        raise InvalidParameterError("n_points must be positive")
    return PointSet(np.linspace(0.0, length, n_points))


def product_set(a: PointSet, b: PointSet, cap: int = DEFAULT_POINT_CAP) -> PointSet:
    """Cartesian product, ``a``-major order."""
    size = len(a) * len(b)
    if size > cap:
        raise ResourceLimitError(f"product has {size} points, above the cap of {cap}")
    left = np.repeat(a.points, len(b), axis=0)
    right = np.tile(b.points, (len(a), 1))
    return PointSet(np.hstack([left, right]))


def diameter(e: PointSet) -> float:
    """Largest pairwise Euclidean distance (0 for a singleton)."""
    pts = e.points
    if len(pts) == 1:
        return 0.0
    if len(pts) <= _BRUTE_FORCE_DIAMETER:
        return float(pdist(pts).max())
    # The diameter is realised between extreme points, so restrict to the hull
    # of the affine span.
    centred = pts - pts.mean(axis=0)
    _, sv, vt = np.linalg.svd(centred, full_matrices=False)
    rank = int(np.sum(sv > sv[0] * 1e-12)) if sv[0] > 0 else 0
    if rank == 0:
        return 0.0
    coords = centred @ vt[:rank].T
    if rank == 1:
        return float(coords.max() - coords.min())
    try:
        hull = ConvexHull(coords)
        extreme = pts[hull.vertices]
    except QhullError:
        extreme = pts
    return float(pdist(extreme).max())


def min_gap(e: PointSet) -> float:
    """Smallest distance between distinct points (``inf`` if there are none)."""
    pts = np.unique(e.points, axis=0)
    if len(pts) < 2:
        return math.inf
    d, _ = cKDTree(pts).query(pts, k=2)
    return float(d[:, 1].min())


def merge_duplicates(e: PointSet) -> tuple[PointSet, np.ndarray, np.ndarray]:
    """Drop repeated points, keeping first occurrences in order.

    Returns the reduced set, the indices of the kept points and, for every
    original point, the position of its representative in the reduced set.
    """
    _, first, inverse = np.unique(e.points, axis=0, return_index=True, return_inverse=True)
    order = np.argsort(first)
    keep = first[order]
    rank = np.empty_like(order)
    rank[order] = np.arange(len(order))
    return e.subset(keep), keep, rank[inverse.ravel()]


def load_pointset(path) -> PointSet:
    path = Path(path)
    if path.suffix.lower() == ".json":
        payload = json.loads(path.read_text())
        pts = np.asarray(payload["points"], dtype=float).reshape(-1, int(payload["dim"]))
        return PointSet(pts)
    pts = np.loadtxt(path, delimiter=",", ndmin=2)
    return PointSet(pts)


def save_pointset(e: PointSet, path, fmt: str | None = None) -> None:
    path = Path(path)
    fmt = fmt or ("json" if path.suffix.lower() == ".json" else "csv")
    if fmt == "json":
        payload = {"dim": e.ambient_dim, "points": e.points.tolist()}
        path.write_text(json.dumps(payload))
    else:
        np.savetxt(path, e.points, delimiter=",", fmt="%.17g")
