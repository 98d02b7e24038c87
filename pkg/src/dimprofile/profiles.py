"""Scaling-exponent regression and dimension-profile estimates.

The lower/upper limits in the definitions of box dimensions and dimension
profiles are replaced by finite-range surrogates: an ordinary least-squares
slope of ``log value`` against ``-log r`` over the whole grid, and the
smallest/largest slopes over contiguous windows of the grid.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .boxcount import count_curve
from .capacity import SolverOptions, capacity_curve, check_r_grid
from .errors import InvalidParameterError
from .pointset import PointSet, diameter, min_gap

DEFAULT_WINDOW = 5
DEFAULT_RATIO = 0.5
GAP_FACTOR = 5.0
VARIANTS = ("slope_lower", "slope_ols", "slope_upper")

# absorbs rounding in inequality checks that hold with equality
_SLACK = 1e-12


@dataclass(frozen=True)
class ScalingFit:
    xs: tuple
    ys: tuple
    slope_ols: float
    slope_lower: float
    slope_upper: float
    window: int
    stderr: float

    def to_dict(self) -> dict:
        return {
            "slope_lower": self.slope_lower,
            "slope_ols": self.slope_ols,
            "slope_upper": self.slope_upper,
            "stderr": self.stderr,
            "window": self.window,
            "xs": list(self.xs),
            "ys": list(self.ys),
        }


def _ols(x: np.ndarray, y: np.ndarray) -> tuple[float, float]:
    xc = x - x.mean()
    sxx = float(xc @ xc)
    slope = float(xc @ (y - y.mean())) / sxx
    if len(x) <= 2:
        return slope, 0.0
    resid = y - y.mean() - slope * xc
    return slope, math.sqrt(float(resid @ resid) / (len(x) - 2) / sxx)


def fit_scaling(curve, window: int = DEFAULT_WINDOW) -> ScalingFit:
    """Fit ``log value ~ slope * (-log r)`` for ``curve = [(r, value), ...]``.

    ``slope_lower``/``slope_upper`` are the extreme OLS slopes over all runs of
    ``window`` consecutive points (widened to include the full-range slope,
    which is not always bracketed by the window slopes).
    """
    if window < 3:
        raise InvalidParameterError("window must be at least 3")
    pts = list(curve)
    if len(pts) < max(4, window):
        raise InvalidParameterError(
            f"need at least {max(4, window)} grid points, got {len(pts)}"
        )
    r = np.array([p[0] for p in pts], dtype=float)
    v = np.array([p[1] for p in pts], dtype=float)
    if np.any(r <= 0) or np.any(v <= 0):
        raise InvalidParameterError("scales and values must be positive")
    x = -np.log(r)
    y = np.log(v)
    if np.unique(x).size < 2:
        raise InvalidParameterError("grid needs at least two distinct scales")
    slope, stderr = _ols(x, y)
    windows = [_ols(x[i:i + window], y[i:i + window])[0] for i in range(len(x) - window + 1)]
    return ScalingFit(
        xs=tuple(x.tolist()),
        ys=tuple(y.tolist()),
        slope_ols=slope,
        slope_lower=min(min(windows), slope),
        slope_upper=max(max(windows), slope),
        window=window,
        stderr=stderr,
    )


def default_r_grid(e: PointSet, ratio: float = DEFAULT_RATIO,
                   gap_factor: float = GAP_FACTOR, r_max: float | None = None) -> list[float]:
    """Geometric grid from the diameter down to ``gap_factor`` times the minimum gap.

    A set without two distinct points has no natural scale; the grid then
    runs from 1 over eight halvings.
    """
    if not 0 < ratio < 1:
        raise InvalidParameterError("grid ratio must lie in (0, 1)")
    gap = min_gap(e)
    if not math.isfinite(gap):
        top = 1.0 if r_max is None else r_max
        return [top * ratio**k for k in range(8)]
    top = diameter(e) if r_max is None else r_max
    floor = gap_factor * gap
    grid = []
    r = top
    while r >= floor * (1 - 1e-12):
        grid.append(r)
        r *= ratio
    return grid


def check_gap_floor(e: PointSet, grid, gap_factor: float = GAP_FACTOR) -> None:
    gap = min_gap(e)
    if math.isfinite(gap) and min(grid) < gap_factor * gap * (1 - 1e-12):
        raise InvalidParameterError(
            f"smallest scale {min(grid):.3g} is below {gap_factor} x the minimum gap {gap:.3g}"
        )


@dataclass(frozen=True)
class ProfileOptions:
    window: int = DEFAULT_WINDOW
    ratio: float = DEFAULT_RATIO
    gap_factor: float = GAP_FACTOR
    coarsen: float | None = None
    threads: int = 1
    solver: SolverOptions = field(default_factory=SolverOptions)


def estimate_profile(e: PointSet, s: float, r_grid=None,
                     opts: ProfileOptions = ProfileOptions()) -> ScalingFit:
    """Slope of ``log C_r^s(E)`` against ``-log r``."""
    fit, _ = _profile_with_results(e, s, r_grid, opts)
    return fit


def _profile_with_results(e, s, r_grid, opts):
    grid = default_r_grid(e, opts.ratio, opts.gap_factor) if r_grid is None else r_grid
    grid = check_r_grid(grid)
    check_gap_floor(e, grid, opts.gap_factor)
    results = capacity_curve(e, s, grid, opts.solver, coarsen=opts.coarsen,
                             threads=opts.threads)
    fit = fit_scaling([(r, res.capacity) for r, res in results], opts.window)
    return fit, results


def box_dimension_fit(e: PointSet, r_grid=None, window: int = DEFAULT_WINDOW) -> ScalingFit:
    grid = default_r_grid(e) if r_grid is None else check_r_grid(r_grid)
    return fit_scaling([(b.r, b.count) for b in count_curve(e, grid)], window)


@dataclass(frozen=True)
class ProfileCurve:
    s_grid: tuple
    estimates: tuple
    set_id: str
    ambient_dim: int
    r_grid: tuple = ()
    unconverged: tuple = ()

    def values(self, variant: str = "slope_ols") -> list[float]:
        if variant not in VARIANTS:
            raise InvalidParameterError(f"unknown slope variant {variant!r}")
        return [getattr(f, variant) for f in self.estimates]

    def to_rows(self) -> list[tuple]:
        return [(s, f.slope_lower, f.slope_ols, f.slope_upper, f.stderr)
                for s, f in zip(self.s_grid, self.estimates)]

    def to_dict(self) -> dict:
        return {
            "set_id": self.set_id,
            "ambient_dim": self.ambient_dim,
            "r_grid": list(self.r_grid),
            "unconverged": [list(u) for u in self.unconverged],
            "profile": [
                {"s": s, **f.to_dict()} for s, f in zip(self.s_grid, self.estimates)
            ],
        }


def profile_curve(e: PointSet, s_grid, r_grid=None, opts: ProfileOptions = ProfileOptions(),
                  set_id: str = "") -> ProfileCurve:
    """Dimension-profile estimates for every ``s`` on a shared r-grid."""
    s_grid = [float(s) for s in s_grid]
    if not s_grid or any(b <= a for a, b in zip(s_grid, s_grid[1:])) or s_grid[0] <= 0:
        raise InvalidParameterError("s-grid must be positive and strictly increasing")
    grid = default_r_grid(e, opts.ratio, opts.gap_factor) if r_grid is None else r_grid
    grid = check_r_grid(grid)
    fits, bad = [], []
    for s in s_grid:
        fit, results = _profile_with_results(e, s, grid, opts)
        fits.append(fit)
        bad.extend((s, r) for r, res in results if not res.converged)
    return ProfileCurve(tuple(s_grid), tuple(fits), set_id, e.ambient_dim,
                        tuple(grid), tuple(bad))


@dataclass
class InequalityReport:
    variant: str
    tol: float
    checks: list
    violations: list

    @property
    def passed(self) -> bool:
        return not self.violations

    def to_dict(self) -> dict:
        return {"variant": self.variant, "tol": self.tol, "pass": self.passed,
                "checks": self.checks, "violations": self.violations}


def check_profile_inequalities(s_grid, d, ambient_dim: int, tol: float,
                               variant: str = "slope_ols") -> InequalityReport:
    """Check the monotonicity, two-sided, reciprocal and Lipschitz bounds.

    For every pair ``s < t`` of the grid:

    (a) ``0 <= d(s) <= d(t) <= n``
    (b) ``d(t) / (1 + (1/s - 1/t) d(t)) <= d(s) <= s``
    (c) ``1/d(s) - 1/s <= 1/d(t) - 1/t`` when ``d(s) > tol``
    (d) ``d(t) - d(s) <= t - s``

    each relaxed by ``tol``.
    """
    s_grid = [float(v) for v in s_grid]
    d = [float(v) for v in d]
    if len(s_grid) != len(d):
        raise InvalidParameterError("s-grid and profile values differ in length")
    if len(s_grid) < 3:
        raise InvalidParameterError("need at least 3 s values")
    slack = tol + _SLACK
    checks, violations = [], []

    def record(name, s, t, lhs, rhs):
        entry = {"check": name, "s": s, "t": t, "lhs": lhs, "rhs": rhs,
                 "excess": lhs - rhs}
        checks.append(entry)
        if lhs > rhs + slack:
            violations.append(entry)

    n = float(ambient_dim)
    for a, (s, ds) in enumerate(zip(s_grid, d)):
        record("bounds_low", s, s, 0.0, ds)
        record("bounds_high", s, s, ds, n)
        record("upper_by_s", s, s, ds, s)
        for t, dt in zip(s_grid[a + 1:], d[a + 1:]):
            record("monotone", s, t, ds, dt)
            record("lower_bound", s, t, dt / (1.0 + (1.0 / s - 1.0 / t) * dt), ds)
            if ds > tol and dt > 0:
                record("reciprocal", s, t, 1.0 / ds - 1.0 / s, 1.0 / dt - 1.0 / t)
            record("lipschitz", s, t, dt - ds, t - s)
    return InequalityReport(variant, tol, checks, violations)


def verify_inequalities(p: ProfileCurve, tol: float = 0.05,
                        variant: str = "slope_ols") -> InequalityReport:
    return check_profile_inequalities(p.s_grid, p.values(variant), p.ambient_dim, tol, variant)
