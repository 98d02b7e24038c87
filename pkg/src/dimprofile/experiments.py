"""Verification suites and the projection experiment.

Every suite takes a plain ``dict`` config (merged over its defaults) and
returns an :class:`ExperimentReport` whose JSON form is a pure function of
that config, so a report can be reproduced from its own config echo.
"""
from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from .boxcount import count_curve
from .capacity import SolverOptions, capacity_curve, check_r_grid
from .errors import InvalidParameterError
from .grassmann import (
    project,
    sample_subspaces,
    tube_probability_exact,
    verify_tube_comparability,
)
from .kernels import phi_of_distance, psi_radial
from .pointset import (
    DEFAULT_POINT_CAP,
    PointSet,
    generate_cantor,
    generate_ifs,
    generate_segment,
    load_pointset,
    product_set,
    sierpinski_spec,
)
from .profiles import (
    ProfileOptions,
    check_profile_inequalities,
    default_r_grid,
    fit_scaling,
    profile_curve,
    verify_inequalities,
)


@dataclass
class ExperimentReport:
    experiment_id: str
    config: dict
    results: dict
    violations: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.violations

    def to_dict(self) -> dict:
        return {"experiment_id": self.experiment_id, "config": self.config,
                "results": self.results, "pass": self.passed,
                "violations": self.violations}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)


def build_set(spec: dict, cap: int = DEFAULT_POINT_CAP) -> PointSet:
    """Point set from a generator description such as ``{"kind": "cantor", "ratio": 1/3, "depth": 8}``."""
    kind = spec.get("kind")
    if kind == "cantor":
        return generate_cantor(float(spec["ratio"]), int(spec["depth"]), cap)
    if kind == "segment":
        return generate_segment(int(spec["n_points"]), float(spec.get("length", 1.0)))
    if kind == "sierpinski":
        return generate_ifs(sierpinski_spec(int(spec["depth"])), cap)
    if kind == "product":
        return product_set(build_set(spec["a"], cap), build_set(spec["b"], cap), cap)
    if kind == "points":
        return PointSet(np.array(spec["points"], dtype=float))
    if kind == "file":
        return load_pointset(spec["path"])
    raise InvalidParameterError(f"unknown set kind {kind!r}")


def _merge(defaults: dict, overrides: dict | None) -> dict:
    cfg = dict(defaults)
    for key, value in (overrides or {}).items():
        if key not in defaults:
            raise InvalidParameterError(f"unknown config key {key!r}")
        cfg[key] = value
    return cfg


def _solver(cfg: dict) -> SolverOptions:
    return SolverOptions(point_cap=int(cfg["point_cap"]), restarts=int(cfg["restarts"]),
                         seed=int(cfg["seed"]))


def _grid(e: PointSet, cfg: dict) -> list[float]:
    if cfg.get("r_grid") is not None:
        return check_r_grid(cfg["r_grid"])
    return default_r_grid(e, cfg["ratio"])


_COMMON = {"seed": 0, "point_cap": DEFAULT_POINT_CAP, "restarts": 0, "threads": 1}


CAPACITY_BOXCOUNT_DEFAULTS = {
    **_COMMON,
    "set": {"kind": "cantor", "ratio": 1 / 3, "depth": 10},
    "s": 2.0,
    "r_grid": None,
    "ratio": 0.5,
    "band_limit": 10.0,
}


def capacity_boxcount_suite(overrides: dict | None = None) -> ExperimentReport:
    """Box counts against capacities: ``N_r / C_r^s`` should stay in a bounded band."""
    cfg = _merge(CAPACITY_BOXCOUNT_DEFAULTS, overrides)
    e = build_set(cfg["set"], cfg["point_cap"])
    grid = _grid(e, cfg)
    cfg["r_grid"] = grid
    caps = capacity_curve(e, float(cfg["s"]), grid, _solver(cfg), threads=int(cfg["threads"]))
    counts = count_curve(e, grid)
    rows, violations = [], []
    for (r, res), box in zip(caps, counts):
        rows.append({"r": r, "count": box.count, "capacity": res.capacity,
                     "ratio": box.count / res.capacity, "converged": res.converged,
                     "kkt_residual": res.kkt_residual})
        if not res.converged:
            violations.append({"check": "converged", "r": r, "kkt_residual": res.kkt_residual})
    ratios = [row["ratio"] for row in rows]
    band = max(ratios) / min(ratios)
    if band > cfg["band_limit"]:
        violations.append({"check": "band", "band": band, "limit": cfg["band_limit"]})
    results = {"rows": rows, "ratio_min": min(ratios), "ratio_max": max(ratios), "band": band}
    if len(grid) >= 4:
        window = min(5, len(grid))
        c_fit = fit_scaling([(row["r"], row["capacity"]) for row in rows], window)
        n_fit = fit_scaling([(row["r"], row["count"]) for row in rows], window)
        results.update(slope_capacity=c_fit.slope_ols, slope_count=n_fit.slope_ols,
                       slope_difference=c_fit.slope_ols - n_fit.slope_ols)
    return ExperimentReport("capacity-boxcount", cfg, results, violations)


PSI_PHI_DEFAULTS = {
    **_COMMON,
    "n": 2,
    "s_values": [0.5, 1.0, 1.5],
    "x_over_r": {"min": 1e-3, "max": 1e3, "points": 61},
    "band_limit": 1e3,
    "scaling_r": [0.5, 2.0],
    "scaling_x_over_r": [0.1, 1.0, 10.0],
    "scaling_tol": 1e-6,
}


def psi_polar(rho: float, s: float) -> float:
    """``psi_1^s`` in the plane by a double quadrature over polar coordinates.

    Independent of the Bessel-based radial reduction used by the kernels module.
    """
    def inner(t):
        # exp(-|x-y|^2/2) with the maximum over the angle factored out
        val, _ = integrate.quad(lambda th: math.exp(-rho * t * (1.0 - math.cos(th))),
                                0.0, math.pi, epsabs=0.0, epsrel=1e-12, limit=200)
        return 2.0 * val * math.exp(-0.5 * (rho - t) ** 2) * t ** (1.0 - s)

    lo, hi = max(0.0, rho - 40.0), rho + 40.0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        pts = [rho] if lo < rho < hi else None
        val, _ = integrate.quad(inner, lo, hi, points=pts, epsabs=0.0, epsrel=1e-11, limit=400)
    return val


def psi_phi_suite(overrides: dict | None = None) -> ExperimentReport:
    """Band of ``phi / psi`` over a log grid and the scaling identity of ``psi``."""
    cfg = _merge(PSI_PHI_DEFAULTS, overrides)
    n = int(cfg["n"])
    g = cfg["x_over_r"]
    grid = np.logspace(math.log10(g["min"]), math.log10(g["max"]), int(g["points"]))
    results, violations = {"bands": [], "scaling": []}, []
    for s in cfg["s_values"]:
        s = float(s)
        ratios = phi_of_distance(grid, s, 1.0) / psi_radial(grid, n, s)
        band = float(ratios.max() / ratios.min())
        results["bands"].append({"s": s, "ratio_min": float(ratios.min()),
                                 "ratio_max": float(ratios.max()), "band": band})
        if band >= cfg["band_limit"]:
            violations.append({"check": "band", "s": s, "band": band})
        if n != 2:
            continue
        for rho in cfg["scaling_x_over_r"]:
            ref = psi_polar(float(rho), s)
            for r in cfg["scaling_r"]:
                val = psi_radial(float(rho) * float(r), n, s, float(r))
                rel = abs(val - ref) / ref
                results["scaling"].append({"s": s, "r": r, "x_over_r": rho,
                                           "psi_r": val, "psi_1_oracle": ref, "rel_error": rel})
                if rel > cfg["scaling_tol"]:
                    violations.append({"check": "scaling", "s": s, "r": r, "x_over_r": rho,
                                       "rel_error": rel})
    return ExperimentReport("psi-phi", cfg, results, violations)


TUBE_DEFAULTS = {
    **_COMMON,
    "pairs": [[2, 1]],
    "x_over_r": [1.0, 3.0, 10.0, 100.0],
    "trials": 100_000,
    "ratio_floor": 0.1,
    "ratio_ceiling": 20.0,
    "stderr_multiple": 3.0,
}


def tube_suite(overrides: dict | None = None) -> ExperimentReport:
    """Tube probabilities against ``phi_r^m`` and, where known, exact values."""
    cfg = _merge(TUBE_DEFAULTS, overrides)
    results, violations = {"reports": []}, []
    for n, m in cfg["pairs"]:
        rep = verify_tube_comparability(int(n), int(m), cfg["x_over_r"], int(cfg["trials"]),
                                        int(cfg["seed"]), cfg["ratio_floor"])
        data = rep.to_dict()
        for row in data["rows"]:
            if not cfg["ratio_floor"] <= row["ratio"] <= cfg["ratio_ceiling"]:
                violations.append({"check": "ratio_band", "n": n, "m": m, **row})
            try:
                exact = tube_probability_exact(int(n), int(m), 1.0 / row["x_over_r"])
            except InvalidParameterError:
                continue
            row["exact"] = exact
            if abs(row["probability"] - exact) > cfg["stderr_multiple"] * row["stderr"]:
                violations.append({"check": "exact", "n": n, "m": m, **row})
        results["reports"].append(data)
    return ExperimentReport("tube", cfg, results, violations)


INEQUALITIES_DEFAULTS = {
    **_COMMON,
    "set": {"kind": "cantor", "ratio": 1 / 3, "depth": 10},
    "s_grid": [0.25 * i for i in range(1, 9)],
    "r_grid": None,
    "ratio": 0.5,
    "window": 5,
    "coarsen": None,
    "tol": 0.05,
    "variant": "slope_ols",
}


def _negative_control(tol: float) -> bool:
    """``d(s) = s^2`` breaks the Lipschitz bound; the checker must say so."""
    s = [0.25, 0.5, 0.75, 1.0]
    return not check_profile_inequalities(s, [v * v for v in s], 1, tol).passed


def inequalities_suite(overrides: dict | None = None) -> ExperimentReport:
    cfg = _merge(INEQUALITIES_DEFAULTS, overrides)
    e = build_set(cfg["set"], cfg["point_cap"])
    grid = _grid(e, cfg)
    cfg["r_grid"] = grid
    opts = ProfileOptions(window=int(cfg["window"]), ratio=float(cfg["ratio"]),
                          coarsen=cfg["coarsen"], threads=int(cfg["threads"]),
                          solver=_solver(cfg))
    curve = profile_curve(e, cfg["s_grid"], grid, opts)
    report = verify_inequalities(curve, float(cfg["tol"]), cfg["variant"])
    detected = _negative_control(float(cfg["tol"]))
    violations = list(report.violations)
    if not detected:
        violations.append({"check": "negative_control"})
    for s, r in curve.unconverged:
        violations.append({"check": "converged", "s": s, "r": r})
    results = {"profile": curve.to_dict(), "inequalities": report.to_dict(),
               "negative_control_detected": detected}
    return ExperimentReport("inequalities", cfg, results, violations)


PROJECT_DEFAULTS = {
    **_COMMON,
    "set": {"kind": "product",
            "a": {"kind": "cantor", "ratio": 1 / 3, "depth": 8},
            "b": {"kind": "cantor", "ratio": 1 / 3, "depth": 8}},
    "m": 1,
    "subspaces": 50,
    "r_grid": None,
    "ratio": 0.5,
    # the two finest default scales of the product set need dense matrices of several GB
    "max_levels": 9,
    "window": 5,
    "coarsen": 2.0,
    "upper_slack": 0.07,
    "tol": 0.1,
    "min_fraction": 0.8,
}


def project_experiment(overrides: dict | None = None, e: PointSet | None = None) -> ExperimentReport:
    """Box-count slopes of projections onto random ``m``-planes against the ``m``-profile."""
    cfg = _merge(PROJECT_DEFAULTS, overrides)
    if e is None:
        e = build_set(cfg["set"], cfg["point_cap"])
    n, m = e.ambient_dim, int(cfg["m"])
    if not 1 <= m <= n:
        raise InvalidParameterError(f"need 1 <= m <= n, got n={n}, m={m}")
    grid = _grid(e, cfg)
    if cfg["r_grid"] is None:
        grid = grid[: int(cfg["max_levels"])]
    cfg["r_grid"] = grid
    window = int(cfg["window"])
    opts = ProfileOptions(window=window, coarsen=cfg["coarsen"], threads=int(cfg["threads"]),
                          solver=_solver(cfg))
    d_m = profile_curve(e, [float(m)], grid, opts).estimates[0]
    slopes = []
    for v in sample_subspaces(n, m, int(cfg["subspaces"]), int(cfg["seed"])):
        counts = count_curve(project(e, v), grid)
        slopes.append(fit_scaling([(b.r, b.count) for b in counts], window).slope_ols)
    slopes_arr = np.array(slopes)
    target = d_m.slope_ols
    within = np.abs(slopes_arr - target) <= cfg["tol"]
    median = float(np.median(slopes_arr))
    fraction = float(within.mean())
    violations = []
    for i, sl in enumerate(slopes):
        if sl > target + cfg["upper_slack"]:
            violations.append({"check": "upper_bound", "subspace": i, "slope": sl,
                               "limit": target + cfg["upper_slack"]})
    if abs(median - target) > cfg["tol"]:
        violations.append({"check": "median", "median": median, "profile": target})
    if fraction < cfg["min_fraction"]:
        violations.append({"check": "fraction", "fraction": fraction,
                           "required": cfg["min_fraction"]})
    results = {"profile": d_m.to_dict(), "slopes": slopes, "median": median,
               "fraction_within": fraction, "max_slope": float(slopes_arr.max())}
    return ExperimentReport("project-experiment", cfg, results, violations)


SUITES = {
    "capacity-boxcount": capacity_boxcount_suite,
    "psi-phi": psi_phi_suite,
    "tube": tube_suite,
    "inequalities": inequalities_suite,
}
