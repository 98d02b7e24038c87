"""Energy minimisation over probability measures on a finite set.

For a symmetric kernel matrix ``K`` the capacity is ``1 / min w^T K w`` over
the probability simplex. A minimiser ``w`` (the equilibrium measure) has
potential ``K w`` at least the minimum energy everywhere and equal to it on
the support of ``w``; that pair of conditions is checked numerically and
returned as a certificate alongside the capacity.

The solver is Frank-Wolfe with away steps and exact line search. Once the
support stabilises, a fully corrective step solves the stationarity system
``K_SS u = 1`` on the support, which finishes in one step what Frank-Wolfe
approaches only linearly. ``K`` need not be positive semidefinite for
``phi`` kernels, so the problem can be nonconvex; random restarts and the
certificate guard against spurious stationary points.
"""
from __future__ import annotations

import logging
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import InvalidParameterError, NumericalError
from .kernels import KernelMatrix, KernelSpec, assemble_matrix
from .pointset import DEFAULT_POINT_CAP, PointSet, merge_duplicates

log = logging.getLogger(__name__)

WEIGHT_FLOOR = 1e-10


@dataclass(frozen=True, eq=False)
class DiscreteMeasure:
    weights: np.ndarray

    def __post_init__(self):
        w = np.array(self.weights, dtype=float).ravel()
        if w.size == 0 or np.any(w < 0) or not np.all(np.isfinite(w)):
            raise InvalidParameterError("weights must be finite and nonnegative")
        if abs(w.sum() - 1.0) > 1e-12:
            raise InvalidParameterError(f"weights sum to {w.sum()!r}, not 1")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @property
    def set_size(self) -> int:
        return self.weights.size

    @classmethod
    def uniform(cls, n: int) -> "DiscreteMeasure":
        return cls(np.full(n, 1.0 / n))

    @classmethod
    def point_mass(cls, n: int, i: int) -> "DiscreteMeasure":
        w = np.zeros(n)
        w[i] = 1.0
        return cls(w)


@dataclass(frozen=True)
class SolverOptions:
    max_iter: int = 100_000
    tol: float = 1e-8
    restarts: int = 0
    seed: int = 0
    weight_floor: float = WEIGHT_FLOOR
    point_cap: int = DEFAULT_POINT_CAP


@dataclass(frozen=True, eq=False)
class CapacityResult:
    """Capacity at one scale together with its optimality certificate.

    ``kkt_residual`` is the worst violation of: potential >= min_energy at
    every point, and potential == min_energy at every point whose weight
    exceeds the weight floor.
    """

    spec: KernelSpec
    capacity: float
    min_energy: float
    equilibrium: DiscreteMeasure
    potential_min_on_support: float
    potential_max_off_support_defect: float
    kkt_residual: float
    iterations: int
    converged: bool
    n_points: int = 0

    @property
    def support_size(self) -> int:
        return int(np.count_nonzero(self.equilibrium.weights > WEIGHT_FLOOR))

    def to_dict(self) -> dict:
        return {
            "r": self.spec.r,
            "s": self.spec.s,
            "capacity": self.capacity,
            "min_energy": self.min_energy,
            "kkt_residual": self.kkt_residual,
            "iterations": self.iterations,
            "converged": self.converged,
            "support_size": self.support_size,
        }


def _matrix(k) -> np.ndarray:
    return k.entries if isinstance(k, KernelMatrix) else np.asarray(k, dtype=float)


def energy(mu: DiscreteMeasure, k) -> float:
    """``w^T K w``."""
    m = _matrix(k)
    if m.shape != (mu.set_size, mu.set_size):
        raise InvalidParameterError(
            f"measure on {mu.set_size} points vs kernel matrix of shape {m.shape}"
        )
    w = mu.weights
    return float(w @ (m @ w))


def potential(mu: DiscreteMeasure, k, i=None):
    """``(K w)[i]``, or the whole potential vector when ``i`` is None."""
    m = _matrix(k)
    if m.shape != (mu.set_size, mu.set_size):
        raise InvalidParameterError(
            f"measure on {mu.set_size} points vs kernel matrix of shape {m.shape}"
        )
    if i is None:
        return m @ mu.weights
    if not 0 <= i < mu.set_size:
        raise InvalidParameterError(f"point index {i} out of range")
    return float(m[i] @ mu.weights)


def certificate(k: np.ndarray, w: np.ndarray, floor: float = WEIGHT_FLOOR):
    """Energy, potential and worst violation of the equilibrium conditions."""
    g = k @ w
    e = float(w @ g)
    supp = w > floor
    off_defect = max(0.0, float(e - g.min()))
    on_defect = float(np.abs(g[supp] - e).max()) if supp.any() else math.inf
    return e, g, max(off_defect, on_defect)


def _fully_corrective(k, w, floor, max_drops=8):
    """Minimise over the face spanned by the current support.

    Solves ``K_SS u = 1`` and rescales to the simplex; if the solution leaves
    the face, moves toward it until the first weight vanishes, drops that
    point and repeats (primal active-set step). Returns ``(support, weights,
    energy)`` or None if the face minimiser could not be found.
    """
    supp = np.flatnonzero(w > floor)
    ws = w[supp]
    for _ in range(max_drops):
        sub = k[np.ix_(supp, supp)]
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                u = np.linalg.solve(sub, np.ones(supp.size))
        except np.linalg.LinAlgError:
            return None
        total = u.sum()
        if not (total > 0 and np.all(np.isfinite(u))):
            return None
        z = u / total
        neg = z <= 0
        if not neg.any():
            return supp, z, float(z @ sub @ z)
        step = np.min(ws[neg] / (ws[neg] - z[neg]))
        ws = ws + step * (z - ws)
        keep = ws > floor
        supp, ws = supp[keep], ws[keep]
        ws = ws / ws.sum()
    return None


def _frank_wolfe(k: np.ndarray, w0: np.ndarray, opts: SolverOptions):
    """Frank-Wolfe with away and pairwise steps for ``min w^T K w`` on the simplex.

    Pairwise steps matter here: two points closer than ``r`` have identical
    kernel rows near the diagonal, so the energy is linear along a mass
    transfer between them and plain away steps zig-zag.

    A fully corrective step is attempted whenever the support has changed
    and is small, has grown by 10%, or as many plain steps as support points
    have passed. Returns
    ``(w, iterations)``; the caller recomputes the certificate.
    """
    tol, floor = opts.tol, opts.weight_floor
    diag = np.diag(k).copy()
    w = w0.copy()
    g = k @ w
    e = float(w @ g)
    last_key, last_size, since = None, 0, 0
    it = 0
    for it in range(1, opts.max_iter + 1):
        if it % 500 == 0:
            # incremental updates drift; resynchronise
            g = k @ w
            e = float(w @ g)
        i = int(np.argmin(g))
        supp = w > 0
        j = int(np.argmax(np.where(supp, g, -np.inf)))
        fw_gap = e - g[i]
        on_supp = np.flatnonzero(w > floor)
        kkt = max(fw_gap, float(np.abs(g[on_supp] - e).max()))
        if kkt <= 0.5 * tol:
            break

        size = on_supp.size
        if (size > 1 and (size <= 100 or size >= 1.1 * last_size or since >= size)
                and not np.array_equal(on_supp, last_key)):
            last_key, last_size, since = on_supp, size, 0
            cand = _fully_corrective(k, w, floor)
            if cand is not None and cand[2] <= e + 1e-15:
                cs, cw, e = cand
                w = np.zeros_like(w)
                w[cs] = cw
                g = cw @ k[cs]
                continue
        since += 1

        # candidate directions: toward vertex i, away from vertex j, and a
        # pairwise transfer into i from the support point that gains most
        sidx = np.flatnonzero(supp)
        ps = g[i] - g[sidx]
        pc = diag[i] + diag[sidx] - 2.0 * k[i, sidx]
        pw = w[sidx]
        with np.errstate(divide="ignore", invalid="ignore"):
            pstep = np.where(pc > 0, np.minimum(pw, -ps / pc), pw)
        pgain = np.where(ps < 0, 2.0 * pstep * ps + pstep * pstep * pc, np.inf)
        m = int(np.argmin(pgain))
        pj = int(sidx[m])
        cands = (
            (g[i] - e, diag[i] - 2.0 * g[i] + e, 1.0),
            (e - g[j], diag[j] - 2.0 * g[j] + e,
             w[j] / (1.0 - w[j]) if w[j] < 1.0 else 0.0),
            (ps[m], pc[m], pw[m]),
        )
        best, gamma, drop = None, 0.0, 0.0
        for kind, (slope, curv, gmax) in enumerate(cands):
            if not (slope < 0 and gmax > 0):
                continue
            step = min(gmax, -slope / curv) if curv > 0 else gmax
            gain = 2.0 * step * slope + step * step * curv
            if best is None or gain < drop:
                best, gamma, drop = kind, step, gain
        if best is None:
            break
        gmax = cands[best][2]
        if best == 0:
            w *= 1.0 - gamma
            w[i] += gamma
            g = (1.0 - gamma) * g + gamma * k[i]
        elif best == 1:
            w *= 1.0 + gamma
            w[j] -= gamma
            if gamma == gmax:
                w[j] = 0.0
            g = (1.0 + gamma) * g - gamma * k[j]
        else:
            w[i] += gamma
            w[pj] -= gamma
            if gamma == gmax:
                w[pj] = 0.0
            g = g + gamma * (k[i] - k[pj])
        np.maximum(w, 0.0, out=w)
        e = e + drop
    return w / w.sum(), it


def _run(k, w, opts):
    w, iters = _frank_wolfe(k, w, opts)
    e, g, kkt = certificate(k, w, opts.weight_floor)
    return (kkt <= opts.tol, e, w, g, kkt, iters)


def solve_matrix(k: np.ndarray, opts: SolverOptions = SolverOptions()):
    """Equilibrium weights for a symmetric matrix.

    Returns ``(converged, energy, weights, potential, kkt_residual,
    iterations)``. Frank-Wolfe grows the support from the point of least
    uniform potential; each restart begins at a random vertex. Certified runs
    beat uncertified ones, then lower energy wins.
    """
    n = k.shape[0]
    rng = np.random.default_rng(opts.seed)
    best = None
    for attempt in range(opts.restarts + 1):
        start = int(np.argmin(k.sum(axis=1))) if attempt == 0 else int(rng.integers(n))
        w0 = np.zeros(n)
        w0[start] = 1.0
        run = _run(k, w0, opts)
        if best is None or (run[0], -run[1]) > (best[0], -best[1]):
            best = run
    return best


def solve_equilibrium(e: PointSet, spec: KernelSpec,
                      opts: SolverOptions = SolverOptions()) -> CapacityResult:
    """Capacity ``C_r^s(E)`` and equilibrium measure of a point set.

    Coincident points are merged before assembly (with a warning); the merged
    weight is reported on the first occurrence.
    """
    reduced, keep, _ = merge_duplicates(e)
    if len(reduced) < len(e):
        log.warning("merged %d duplicate points before solving", len(e) - len(reduced))
    km = assemble_matrix(reduced, spec, cap=opts.point_cap).entries
    converged, en, w, g, kkt, iters = solve_matrix(km, opts)
    if not en > 0:
        raise NumericalError(f"nonpositive minimum energy {en}", residual=kkt)
    full = np.zeros(len(e))
    full[keep] = w
    full /= full.sum()
    supp = w > opts.weight_floor
    return CapacityResult(
        spec=spec,
        capacity=1.0 / en,
        min_energy=en,
        equilibrium=DiscreteMeasure(full),
        potential_min_on_support=float(g[supp].min()),
        potential_max_off_support_defect=max(0.0, float(en - g.min())),
        kkt_residual=kkt,
        iterations=iters,
        converged=bool(converged),
        n_points=len(e),
    )


class CurveError(NumericalError):
    def __init__(self, r, cause):
        super().__init__(f"at r={r}: {cause}", getattr(cause, "residual", None))
        self.r = r


def check_r_grid(r_grid) -> list[float]:
    grid = [float(r) for r in r_grid]
    if not grid or any(not (r > 0 and math.isfinite(r)) for r in grid):
        raise InvalidParameterError("r-grid values must be positive and finite")
    if any(b >= a for a, b in zip(grid, grid[1:])):
        raise InvalidParameterError("r-grid must be strictly decreasing")
    return grid


def capacity_curve(e: PointSet, s: float, r_grid, opts: SolverOptions = SolverOptions(),
                   coarsen: float | None = None, threads: int = 1):
    """``[(r, CapacityResult), ...]`` for every scale of a decreasing grid.

    With ``coarsen=k`` each scale is solved on one representative per mesh
    cube of diameter ``r/k`` (a subset of ``e``). That bounds the work by the
    covering number at scale ``r/k`` and changes the capacity by at most a
    factor ``(1 + 2/k)^s``.
    """
    from .boxcount import representatives

    grid = check_r_grid(r_grid)

    def one(r):
        target = e if coarsen is None else representatives(e, r / coarsen)
        try:
            return r, solve_equilibrium(target, KernelSpec("phi", s, r), opts)
        except (NumericalError, np.linalg.LinAlgError) as err:
            raise CurveError(r, err) from err

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            return list(pool.map(one, grid))
    return [one(r) for r in grid]
