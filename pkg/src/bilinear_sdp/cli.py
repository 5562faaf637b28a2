"""Command-line front end.

Exit codes: 0 success, 1 validation failure, 2 solver not optimal,
3 I/O or malformed input file, 4 numeric failure.
"""

import argparse
import json
import logging
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .exceptions import InvalidInputError, NumericFailure
from .fixtures import FIXTURES, fixture
from .lowrank import conjecture_probe
from .pipeline import repro_rows, run_simulation, run_solve
from .problem import load_problem, validate
from .reachable import default_grid, reach_set
from .sdp import SolverConfig

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_NOT_OPTIMAL = 2
EXIT_IO = 3
EXIT_NUMERIC = 4

DIGITS = 12

log = logging.getLogger("bilinear_sdp")


class CliError(Exception):
    def __init__(self, message, code):
        super().__init__(message)
        self.code = code


def _round(obj):
    """Round floats to ``DIGITS`` significant digits; non-finite become null."""
    if isinstance(obj, dict):
        return {str(k): _round(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _round(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return float(f"{x:.{DIGITS}g}") if math.isfinite(x) else None
    return obj


def dump_json(data, path):
    text = json.dumps(_round(data), indent=2) + "\n"
    if path is None:
        sys.stdout.write(text)
        return
    try:
        Path(path).write_text(text)
    except OSError as exc:
        raise CliError(f"cannot write {path}: {exc}", EXIT_IO) from exc


def _load(args):
    if args.problem is None:
        raise CliError("--problem is required", EXIT_IO)
    if args.problem in FIXTURES:
        return fixture(args.problem)
    try:
        return load_problem(args.problem)
    except (OSError, json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise CliError(f"cannot read problem file {args.problem}: {exc}", EXIT_IO) from exc
    except InvalidInputError as exc:
        raise CliError(f"invalid problem: {exc}", EXIT_VALIDATION) from exc


def _validated(args):
    spec = _load(args)
    report = validate(spec)
    if not report:
        raise CliError("validation failed: " + "; ".join(report.messages), EXIT_VALIDATION)
    return spec


def _solver_cfg(args):
    return SolverConfig(gap_tol=args.gap_tol)


def _solved(args):
    spec = _validated(args)
    result = run_solve(spec, _solver_cfg(args))
    if not result.solution.optimal:
        raise CliError(f"solver finished with status {result.solution.status}", EXIT_NOT_OPTIMAL)
    return result


def cmd_validate(args):
    spec = _load(args)
    report = validate(spec)
    print(f"negative definite: {report.negative_definite}")
    print(f"irreducible:       {report.irreducible}")
    print(f"nonnegative p0:    {report.nonnegative}")
    for m in report.messages:
        print(f"  - {m}")
    return EXIT_OK if report else EXIT_VALIDATION


def cmd_solve(args):
    t0 = time.perf_counter()
    result = _solved(args)
    report = result.report()
    if not args.no_simulate:
        report["simulation"] = run_simulation(result, eps=args.eps_kick, xy=False).summary
    dump_json(report, args.out)
    print(
        f"E = {result.energy:.{DIGITS}g}  r_n_max = {result.r_max:.{DIGITS}g}  "
        f"rank {result.rank_before} -> {result.rank_after}  "
        f"({time.perf_counter() - t0:.3f} s)",
        file=sys.stderr if args.out is None else sys.stdout,
    )
    return EXIT_OK


def cmd_synthesize(args):
    result = _solved(args)
    data = {"energy": result.energy, "rank": result.rank_after, "schedule": result.schedule.to_dict()}
    dump_json(data, args.out)
    return EXIT_OK


def _write_csv(traj, path):
    try:
        traj.to_csv(path, digits=DIGITS)
    except OSError as exc:
        raise CliError(f"cannot write {path}: {exc}", EXIT_IO) from exc


def cmd_simulate(args):
    t0 = time.perf_counter()
    result = _solved(args)
    sim = run_simulation(result, eps=args.eps_kick, horizon=args.horizon)
    out = Path(args.out) if args.out else Path("trajectory")
    stem = out.with_suffix("") if out.suffix == ".csv" else out
    r_path = stem.parent / (stem.name + "_r.csv")
    xy_path = stem.parent / (stem.name + "_xy.csv")
    _write_csv(sim.r_traj, r_path)
    _write_csv(sim.xy_traj, xy_path)
    s = sim.summary
    print(f"wrote {r_path} and {xy_path}")
    print(
        f"target radius: r-system {s['final_target']:.{DIGITS}g}, xy-system "
        f"{s['xy_final_target']:.{DIGITS}g}, bound {s['target_bound']:.{DIGITS}g}"
    )
    print(f"t' = {s['tprime_final']:.6g} of T_f = {s['T_f']:.6g} ({time.perf_counter() - t0:.3f} s)")
    return EXIT_OK


def cmd_reach(args):
    t0 = time.perf_counter()
    spec = _validated(args)
    if args.grid:
        counts = args.grid if len(args.grid) > 1 else args.grid * (spec.n - 1)
        if len(counts) != spec.n - 1:
            raise CliError(f"--grid needs 1 or {spec.n - 1} counts", EXIT_VALIDATION)
        top = float(spec.p0.max()) or 1.0
        grids = [np.linspace(0.0, top, c) for c in counts]
    else:
        grids = default_grid(spec)
    rs = reach_set(spec, grids, workers=args.workers, cfg=_solver_cfg(args))
    if args.out:
        try:
            rs.to_csv(args.out, digits=DIGITS)
        except OSError as exc:
            raise CliError(f"cannot write {args.out}: {exc}", EXIT_IO) from exc
    else:
        rs.to_csv(sys.stdout, digits=DIGITS)
    feasible = sum(s.feasible for s in rs)
    print(
        f"{len(rs)} slices, {feasible} feasible ({time.perf_counter() - t0:.3f} s)",
        file=sys.stderr if args.out is None else sys.stdout,
    )
    return EXIT_OK


def cmd_probe_rank(args):
    lo, hi = args.n_range
    report = conjecture_probe(
        args.count, range(lo, hi + 1), args.seed, kind=args.kind, workers=args.workers,
        cfg=_solver_cfg(args),
    )
    dump_json(report.to_dict(), args.out)
    for n in sorted(report.ranks):
        print(
            f"n={n}: rank histogram {report.histogram(n)}, "
            f"rank-1 fraction {report.rank1_fraction(n):.3f}",
            file=sys.stderr if args.out is None else sys.stdout,
        )
    return EXIT_VALIDATION if report.violations else EXIT_OK


def cmd_repro(args):
    rows = repro_rows(args.case)
    header = f"{'case':<7} {'quantity':<32} {'reference':>12} {'computed':>14} {'|diff|':>10} {'tol':>8}  ok"
    print(header)
    print("-" * len(header))
    for r in rows:
        print(
            f"{r.case:<7} {r.quantity:<32} {r.reference:>12.6g} {r.computed:>14.8g} "
            f"{r.diff:>10.2e} {r.tol:>8.0e}  {'yes' if r.ok else 'NO'}"
        )
    failed = [r for r in rows if not r.ok]
    print(f"\n{len(rows) - len(failed)}/{len(rows)} within tolerance")
    return EXIT_OK if not failed else EXIT_NOT_OPTIMAL


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument(
        "--problem", help="problem JSON file, or a built-in fixture name (2x2, 3x3, 3chain)"
    )
    common.add_argument("--out", help="output path (default: standard output)")
    common.add_argument("--gap-tol", type=float, default=1e-8, help="solver duality-gap tolerance")
    common.add_argument("--eps-kick", type=float, default=None, help="value given to zero radii")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--workers", type=int, default=1)
    common.add_argument("--grid", type=int, nargs="+", help="grid points per non-target axis")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(
        prog="bilinear-sdp", description="Optimal transfer in dissipative bilinear systems."
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", parents=[common], help="check the problem hypotheses")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("solve", parents=[common], help="solve and write a JSON report")
    p.add_argument("--no-simulate", action="store_true", help="skip the closed-loop run")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("synthesize", parents=[common], help="write the control schedule")
    p.set_defaults(func=cmd_synthesize)

    p = sub.add_parser("simulate", parents=[common], help="write r and xy trajectory CSVs")
    p.add_argument("--horizon", type=float, default=None)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("reach", parents=[common], help="reachable-set sweep to CSV")
    p.set_defaults(func=cmd_reach)

    p = sub.add_parser("probe-rank", parents=[common], help="rank statistics of random instances")
    p.add_argument("--count", type=int, default=20)
    p.add_argument("--n-range", type=int, nargs=2, default=(4, 6), metavar=("LO", "HI"))
    p.add_argument("--kind", choices=("dense", "tridiagonal"), default="dense")
    p.set_defaults(func=cmd_probe_rank)

    p = sub.add_parser("repro", parents=[common], help="compare against the worked examples")
    p.add_argument("case", nargs="?", default="all", choices=("2x2", "3x3", "3chain", "all"))
    p.set_defaults(func=cmd_repro)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except NumericFailure as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except InvalidInputError as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
