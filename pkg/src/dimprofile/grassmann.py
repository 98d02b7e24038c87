"""Random subspaces, orthogonal projections and tube probabilities.

Subspaces of ``R^n`` are drawn from the rotation-invariant measure on the
Grassmannian ``G(n, m)`` by orthonormalising an ``n x m`` Gaussian frame.
A subspace is stored through an orthonormal basis (columns); projections are
expressed in basis coordinates, so ``project`` returns an ``m``-dimensional
point set.
"""
from __future__ import annotations

import json
import math
import zlib
from dataclasses import dataclass

import numpy as np

from .capacity import DiscreteMeasure
from .errors import InvalidParameterError, NumericalError
from .kernels import phi_of_distance
from .pointset import PointSet

ORTHONORMAL_TOL = 1e-10
MIN_TRIALS = 1000
TUBE_CHUNK = 10_000

# a redraw is only needed for numerically singular frames
_RANK_TOL = 1e-8
_MAX_REDRAWS = 16


def child_rng(seed: int, name: str, *extra: int) -> np.random.Generator:
    """Independent stream derived from ``seed`` and a label."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), zlib.crc32(name.encode()), *extra]))


@dataclass(frozen=True, eq=False)
class Subspace:
    basis: np.ndarray
    redraws: int = 0

    def __post_init__(self):
        b = np.array(self.basis, dtype=float)
        if b.ndim != 2 or not 1 <= b.shape[1] <= b.shape[0]:
            raise InvalidParameterError("basis must be an n x m matrix with 1 <= m <= n")
        if np.abs(b.T @ b - np.eye(b.shape[1])).max() > ORTHONORMAL_TOL:
            raise InvalidParameterError("basis columns are not orthonormal")
        b.setflags(write=False)
        object.__setattr__(self, "basis", b)

    @property
    def n(self) -> int:
        return self.basis.shape[0]

    @property
    def m(self) -> int:
        return self.basis.shape[1]

    def coordinates(self, x) -> np.ndarray:
        """Coordinates ``basis^T x`` of the projection; rows of ``x`` are points."""
        return np.asarray(x, dtype=float) @ self.basis

    def perpendicular(self, x) -> np.ndarray:
        """``x - pi_V x`` in ambient coordinates."""
        x = np.asarray(x, dtype=float)
        return x - self.coordinates(x) @ self.basis.T

    def to_dict(self) -> dict:
        """Basis as a list of columns."""
        return {"n": self.n, "m": self.m, "basis_columns": self.basis.T.tolist()}

    @classmethod
    def from_dict(cls, data: dict) -> "Subspace":
        return cls(np.array(data["basis_columns"], dtype=float).T)


def _orthonormal_frame(g: np.ndarray) -> np.ndarray | None:
    """QR of a Gaussian frame with the sign fix that keeps the law invariant."""
    q, r = np.linalg.qr(g)
    d = np.diagonal(r, axis1=-2, axis2=-1)
    if np.any(np.abs(d) < _RANK_TOL):
        return None
    return q * np.where(d < 0, -1.0, 1.0)[..., None, :]


def sample_subspace(n: int, m: int, seed: int | np.random.Generator) -> Subspace:
    if not 1 <= m <= n:
        raise InvalidParameterError(f"need 1 <= m <= n, got n={n}, m={m}")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    for attempt in range(_MAX_REDRAWS):
        q = _orthonormal_frame(rng.standard_normal((n, m)))
        if q is not None:
            return Subspace(q, redraws=attempt)
    raise NumericalError("could not draw a full-rank Gaussian frame")


def sample_subspaces(n: int, m: int, count: int, seed: int) -> list[Subspace]:
    """``count`` subspaces from child streams of ``seed``; independent of ``count`` prefix-wise."""
    return [sample_subspace(n, m, child_rng(seed, "subspace", i)) for i in range(count)]


def project(e: PointSet, v: Subspace) -> PointSet:
    if e.ambient_dim != v.n:
        raise InvalidParameterError(
            f"point set lives in R^{e.ambient_dim} but the subspace is in R^{v.n}"
        )
    return PointSet(v.coordinates(e.points))


@dataclass(frozen=True, eq=False)
class WeightedProjection:
    subspace: Subspace
    points: np.ndarray
    weights: np.ndarray

    @property
    def total_mass(self) -> float:
        return float(self.weights.sum())

    def support(self) -> np.ndarray:
        return self.points[self.weights > 0]


def weighted_projection(e: PointSet, mu: DiscreteMeasure, v: Subspace) -> WeightedProjection:
    """Projected points carrying ``mu_i * exp(-|x_i - pi_V x_i|^2 / 2)``."""
    if mu.set_size != len(e):
        raise InvalidParameterError("measure and point set differ in size")
    coords = project(e, v).points
    perp = v.perpendicular(e.points)
    weights = mu.weights * np.exp(-0.5 * np.einsum("ij,ij->i", perp, perp))
    return WeightedProjection(v, coords, weights)


def _tube_hits(x: np.ndarray, m: int, r: float, trials: int, rng: np.random.Generator) -> int:
    n = x.size
    frames = rng.standard_normal((trials, n, m))
    q, rr = np.linalg.qr(frames)
    # rank-deficient frames have probability zero; drop them if they ever occur
    ok = np.all(np.abs(np.diagonal(rr, axis1=1, axis2=2)) >= _RANK_TOL, axis=1)
    coords = np.einsum("n,tnm->tm", x, q[ok])
    hits = int(np.count_nonzero(np.einsum("tm,tm->t", coords, coords) <= r * r))
    missing = trials - int(ok.sum())
    if missing:
        hits += _tube_hits(x, m, r, missing, rng)
    return hits


def tube_probability(x, m: int, r: float, trials: int, seed: int,
                     chunk: int = TUBE_CHUNK) -> tuple[float, float]:
    """Monte Carlo estimate of ``P{V : |pi_V x| <= r}`` with its binomial standard error.

    Trials are split into chunks of ``chunk`` with child seeds ``(seed, chunk
    index)``, so the estimate depends only on ``seed``, ``trials`` and ``chunk``.
    """
    x = np.asarray(x, dtype=float).ravel()
    if not 1 <= m <= x.size:
        raise InvalidParameterError(f"need 1 <= m <= n, got n={x.size}, m={m}")
    if not np.any(x):
        raise InvalidParameterError("x must be nonzero")
    if not r > 0:
        raise InvalidParameterError("r must be positive")
    if trials < MIN_TRIALS:
        raise InvalidParameterError(f"need at least {MIN_TRIALS} trials")
    hits = 0
    for i, start in enumerate(range(0, trials, chunk)):
        size = min(chunk, trials - start)
        hits += _tube_hits(x, m, r, size, child_rng(seed, "tube", i))
    p = hits / trials
    return p, math.sqrt(p * (1.0 - p) / trials)


def tube_probability_exact(n: int, m: int, t: float) -> float:
    """Exact ``P{|pi_V x| <= r}`` with ``t = r/|x|`` for ``(n, m)`` in {(2,1), (3,1)}."""
    if t >= 1:
        return 1.0
    if (n, m) == (2, 1):
        return 2.0 / math.pi * math.asin(t)
    if (n, m) == (3, 1):
        return t
    raise InvalidParameterError(f"no closed form implemented for (n, m) = ({n}, {m})")


@dataclass
class TubeReport:
    n: int
    m: int
    trials: int
    seed: int
    rows: list
    lower_floor: float

    @property
    def ratio_min(self) -> float:
        return min(row["ratio"] for row in self.rows)

    @property
    def ratio_max(self) -> float:
        return max(row["ratio"] for row in self.rows)

    @property
    def flagged(self) -> bool:
        return self.ratio_min < self.lower_floor

    def to_dict(self) -> dict:
        return {
            "n": self.n, "m": self.m, "trials": self.trials, "seed": self.seed,
            "lower_floor": self.lower_floor, "rows": self.rows,
            "ratio_min": self.ratio_min, "ratio_max": self.ratio_max,
            "band": self.ratio_max / self.ratio_min if self.ratio_min > 0 else math.inf,
            "flagged": self.flagged,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def verify_tube_comparability(n: int, m: int, ratio_grid, trials: int, seed: int,
                              lower_floor: float = 0.1) -> TubeReport:
    """Ratio of the tube probability to ``phi_r^m(x)`` at ``|x|/r`` over ``ratio_grid``.

    Uses ``r = 1`` and ``x = (|x|, 0, ..., 0)``; by rotation invariance only
    ``|x|/r`` matters.
    """
    if not 1 <= m <= n:
        raise InvalidParameterError(f"need 1 <= m <= n, got n={n}, m={m}")
    rows = []
    for i, q in enumerate(ratio_grid):
        q = float(q)
        if not 1.0 <= q <= 1e3:
            raise InvalidParameterError("|x|/r must lie in [1, 1000]")
        x = np.zeros(n)
        x[0] = q
        p, se = tube_probability(x, m, 1.0, trials, int(child_rng(seed, "ratio", i).integers(2**63)))
        ref = phi_of_distance(q, m, 1.0)
        rows.append({"x_over_r": q, "probability": p, "stderr": se, "phi": ref,
                     "ratio": p / ref, "ratio_stderr": se / ref})
    return TubeReport(n, m, trials, seed, rows, lower_floor)
