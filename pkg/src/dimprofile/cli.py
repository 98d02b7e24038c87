"""Command-line interface: ``dimprofile <subcommand> [options]``.

Exit codes: 0 success, 1 usage or input error, 2 resource cap exceeded,
3 numerical failure, 4 a verification ran but reported violations.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from pathlib import Path

from .boxcount import count_curve
from .capacity import CurveError, SolverOptions, capacity_curve, potential, solve_equilibrium
from .errors import DimProfileError, NumericalError, ResourceLimitError
from .experiments import SUITES, ExperimentReport, build_set, project_experiment
from .kernels import KernelSpec, assemble_matrix
from .pointset import DEFAULT_POINT_CAP, diameter, load_pointset, min_gap, save_pointset
from .profiles import (
    ProfileOptions,
    default_r_grid,
    fit_scaling,
    profile_curve,
    verify_inequalities,
)

EXIT_OK, EXIT_USAGE, EXIT_CAP, EXIT_NUMERIC, EXIT_FAILED = 0, 1, 2, 3, 4


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _float_list(text: str) -> list[float]:
    """``"a,b,c"`` or ``"start:step:stop"`` (stop inclusive)."""
    if ":" in text:
        start, step, stop = (float(t) for t in text.split(":"))
        if step <= 0:
            raise argparse.ArgumentTypeError("step must be positive")
        count = int(round((stop - start) / step)) + 1
        return [round(start + i * step, 12) for i in range(count)]
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError as err:
        raise argparse.ArgumentTypeError(str(err)) from err


def _common_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=Path, default=None, help="output file (stdout if omitted)")
    p.add_argument("--format", choices=("json", "csv"), default=None,
                   help="default: json for reports, file suffix for point sets")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--point-cap", type=int, default=DEFAULT_POINT_CAP)
    p.add_argument("--config", type=Path, default=None,
                   help="JSON file of option defaults; explicit flags win")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common_parser()
    parser = _Parser(prog="dimprofile",
                     description="Capacity-based dimension profiles of finite point sets.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("generate", parents=[common], help="write a point set")
    g.add_argument("kind", choices=("cantor", "segment", "sierpinski", "product"))
    g.add_argument("--ratio", type=float, default=1 / 3)
    g.add_argument("--depth", type=int, default=8)
    g.add_argument("--n-points", type=int, default=1001)
    g.add_argument("--length", type=float, default=1.0)
    g.add_argument("--a", type=Path, help="first factor of a product")
    g.add_argument("--b", type=Path, help="second factor of a product")

    c = sub.add_parser("capacity", parents=[common], help="capacities on an r-grid")
    c.add_argument("--input", type=Path, required=True)
    c.add_argument("--s", type=float, required=True)
    c.add_argument("--r", type=float, default=None, help="single scale")
    c.add_argument("--r-grid", type=_float_list, default=None)
    c.add_argument("--kernel", choices=("phi", "psi"), default="phi")
    c.add_argument("--coarsen", type=float, default=None)
    c.add_argument("--restarts", type=int, default=0)
    c.add_argument("--tol", type=float, default=1e-8, dest="solver_tol",
                   help="certificate tolerance")
    c.add_argument("--max-iter", type=int, default=100_000)
    c.add_argument("--dump-weights", type=Path, default=None,
                   help="write equilibrium weights (single scale only)")

    b = sub.add_parser("boxcount", parents=[common], help="mesh box counts on an r-grid")
    b.add_argument("--input", type=Path, required=True)
    b.add_argument("--r-grid", type=_float_list, default=None)
    b.add_argument("--window", type=int, default=5)

    p = sub.add_parser("profile", parents=[common], help="dimension profile and inequality checks")
    p.add_argument("--input", type=Path, required=True)
    p.add_argument("--s", type=float, action="append", default=None, dest="s_values")
    p.add_argument("--s-grid", type=_float_list, default=None)
    p.add_argument("--r-grid", type=_float_list, default=None)
    p.add_argument("--ratio", type=float, default=0.5)
    p.add_argument("--window", type=int, default=5)
    p.add_argument("--coarsen", type=float, default=None)
    p.add_argument("--tol", type=float, default=0.05)
    p.add_argument("--variant", choices=("slope_lower", "slope_ols", "slope_upper"),
                   default="slope_ols")

    x = sub.add_parser("project-experiment", parents=[common],
                       help="projected box-count slopes against the m-profile")
    x.add_argument("--input", type=Path, default=None,
                   help="point set (default: the Cantor(1/3, 8) product)")
    x.add_argument("--m", type=int, default=None)
    x.add_argument("--subspaces", type=int, default=None)
    x.add_argument("--r-grid", type=_float_list, default=None)
    x.add_argument("--coarsen", type=float, default=None)

    v = sub.add_parser("verify", parents=[common], help="run a verification suite")
    v.add_argument("suite", choices=sorted(SUITES))
    parser.subcommands = dict(sub.choices)
    return parser


def _parse(parser: argparse.ArgumentParser, argv: list[str]) -> tuple[argparse.Namespace, dict]:
    args = parser.parse_args(argv)
    extra = {}
    if args.config is not None:
        try:
            cfg = json.loads(args.config.read_text())
        except (OSError, json.JSONDecodeError) as err:
            raise UsageError(f"cannot read config {args.config}: {err}") from err
        if not isinstance(cfg, dict):
            raise UsageError("config must be a JSON object")
        sub = parser.subcommands[args.command]
        known = {a.dest for a in sub._actions}
        defaults = {k.replace("-", "_"): val for k, val in cfg.items()}
        extra = {k: val for k, val in defaults.items() if k not in known}
        sub.set_defaults(**{k: val for k, val in defaults.items() if k in known})
        args = parser.parse_args(argv)
    return args, extra


def _emit(text: str, out: Path | None) -> None:
    if out is None:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")
    else:
        out.write_text(text if text.endswith("\n") else text + "\n")


def _dumps(payload) -> str:
    return json.dumps(payload, sort_keys=True, indent=2)


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _solver_opts(args) -> SolverOptions:
    return SolverOptions(max_iter=getattr(args, "max_iter", 100_000), tol=getattr(args, "solver_tol", 1e-8),
                         restarts=getattr(args, "restarts", 0), seed=args.seed,
                         point_cap=args.point_cap)


def cmd_generate(args, extra) -> int:
    if args.out is None:
        raise UsageError("generate needs --out")
    if args.kind == "product":
        if args.a is None or args.b is None:
            raise UsageError("product needs --a and --b")
        spec = {"kind": "product", "a": {"kind": "file", "path": str(args.a)},
                "b": {"kind": "file", "path": str(args.b)}}
    elif args.kind == "segment":
        spec = {"kind": "segment", "n_points": args.n_points, "length": args.length}
    elif args.kind == "cantor":
        spec = {"kind": "cantor", "ratio": args.ratio, "depth": args.depth}
    else:
        spec = {"kind": "sierpinski", "depth": args.depth}
    e = build_set(spec, args.point_cap)
    fmt = args.format or ("json" if args.out.suffix.lower() == ".json" else "csv")
    save_pointset(e, args.out, fmt)
    print(f"points={len(e)} dim={e.ambient_dim} diameter={diameter(e):.17g} "
          f"min_gap={min_gap(e):.17g}")
    return EXIT_OK


def _grid(e, args) -> list[float]:
    return args.r_grid if args.r_grid is not None else default_r_grid(e, getattr(args, "ratio", 0.5))


def cmd_capacity(args, extra) -> int:
    e = load_pointset(args.input)
    opts = _solver_opts(args)
    if args.r is not None:
        res = solve_equilibrium(e, KernelSpec(args.kernel, args.s, args.r), opts)
        results = [res]
        if args.dump_weights is not None:
            pot = potential(res.equilibrium, assemble_matrix(e, res.spec, opts.point_cap))
            args.dump_weights.write_text(
                _csv(["index", "weight", "potential"],
                     [(i, repr(float(w)), repr(float(g))) for i, (w, g)
                      in enumerate(zip(res.equilibrium.weights, pot))]))
    else:
        if args.dump_weights is not None:
            raise UsageError("--dump-weights needs a single --r")
        if args.kernel != "phi":
            raise UsageError("capacity curves use the phi kernel; pass --r for psi")
        results = [res for _, res in capacity_curve(e, args.s, _grid(e, args), opts,
                                                    coarsen=args.coarsen, threads=args.threads)]
    rows = [res.to_dict() for res in results]
    if args.format == "csv":
        keys = ["r", "s", "capacity", "min_energy", "kkt_residual", "iterations",
                "converged", "support_size"]
        _emit(_csv(keys, [[row[k] for k in keys] for row in rows]), args.out)
    else:
        _emit(_dumps({"kernel": args.kernel, "input": str(args.input), "results": rows}), args.out)
    return EXIT_OK if all(res.converged for res in results) else EXIT_NUMERIC


def cmd_boxcount(args, extra) -> int:
    e = load_pointset(args.input)
    grid = _grid(e, args)
    counts = count_curve(e, grid)
    payload = {"input": str(args.input), "counts": [b.to_dict() for b in counts]}
    if len(grid) >= max(4, args.window):
        payload["fit"] = fit_scaling([(b.r, b.count) for b in counts], args.window).to_dict()
    if args.format == "csv":
        _emit(_csv(["r", "cube_side", "count"], [(b.r, b.cube_side, b.count) for b in counts]),
              args.out)
    else:
        _emit(_dumps(payload), args.out)
    return EXIT_OK


def cmd_profile(args, extra) -> int:
    e = load_pointset(args.input)
    s_grid = sorted(set((args.s_grid or []) + (args.s_values or [])))
    if not s_grid:
        raise UsageError("profile needs --s or --s-grid")
    opts = ProfileOptions(window=args.window, ratio=args.ratio, coarsen=args.coarsen,
                          threads=args.threads, solver=_solver_opts(args))
    curve = profile_curve(e, s_grid, _grid(e, args), opts, set_id=str(args.input))
    report = verify_inequalities(curve, args.tol, args.variant) if len(s_grid) >= 3 else None
    if args.format == "csv":
        _emit(_csv(["s", "slope_lower", "slope_ols", "slope_upper", "stderr"], curve.to_rows()),
              args.out)
        if report is not None:
            target = None if args.out is None else args.out.with_suffix(".inequalities.json")
            _emit(_dumps(report.to_dict()), target)
    else:
        payload = {"profile": curve.to_dict(),
                   "inequalities": None if report is None else report.to_dict()}
        _emit(_dumps(payload), args.out)
    if curve.unconverged:
        return EXIT_NUMERIC
    return EXIT_OK if report is None or report.passed else EXIT_FAILED


def _report_exit(report: ExperimentReport, args) -> int:
    _emit(report.to_json(), args.out)
    return EXIT_OK if report.passed else EXIT_FAILED


def _suite_overrides(args, extra: dict) -> dict:
    overrides = dict(extra)
    overrides.update(seed=args.seed, threads=args.threads, point_cap=args.point_cap)
    return overrides


def cmd_project(args, extra) -> int:
    overrides = _suite_overrides(args, extra)
    for key in ("m", "subspaces", "r_grid", "coarsen"):
        if getattr(args, key) is not None:
            overrides[key] = getattr(args, key)
    if args.input is not None:
        overrides["set"] = {"kind": "file", "path": str(args.input)}
    return _report_exit(project_experiment(overrides), args)


def cmd_verify(args, extra) -> int:
    return _report_exit(SUITES[args.suite](_suite_overrides(args, extra)), args)


COMMANDS = {
    "generate": cmd_generate,
    "capacity": cmd_capacity,
    "boxcount": cmd_boxcount,
    "profile": cmd_profile,
    "project-experiment": cmd_project,
    "verify": cmd_verify,
}


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    try:
        args, extra = _parse(parser, argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        if extra and args.command not in ("verify", "project-experiment"):
            raise UsageError(f"unknown config keys: {', '.join(sorted(extra))}")
        return COMMANDS[args.command](args, extra)
    except UsageError as err:
        print(f"dimprofile: error: {err}", file=sys.stderr)
        return EXIT_USAGE
    except ResourceLimitError as err:
        print(f"dimprofile: resource limit: {err}", file=sys.stderr)
        return EXIT_CAP
    except (NumericalError, CurveError) as err:
        print(f"dimprofile: numerical failure: {err}", file=sys.stderr)
        return EXIT_NUMERIC
    except (DimProfileError, OSError, KeyError, ValueError) as err:
        print(f"dimprofile: error: {err}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
