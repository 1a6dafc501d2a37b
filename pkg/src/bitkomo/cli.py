"""Command line interface: plan / aggregate / oracle subcommands.

Exit codes: 0 success, 1 usage error, 2 scenario error, 3 no solution
found in any trial.
"""

from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path

from . import bench
from .cspace import ScenarioError, load_scenario
from .planner import MODES, PlannerParams, TerminationCondition

_MODE_ALIASES = {"komo": "komo_restarts"}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(1)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="bitkomo", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("plan", help="run planning trials and emit a trial CSV")
    p.add_argument("--scenario", required=True, help="scenario YAML file")
    p.add_argument("--mode", default="bitkomo",
                   choices=sorted(set(MODES) | set(_MODE_ALIASES)))
    p.add_argument("--time-limit", type=float, default=None,
                   help="seconds per trial (default: the scenario's budget_s)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--delta", type=int, default=1, help="edge relaxation number")
    p.add_argument("--batch-size", type=int, default=100)
    p.add_argument("--waypoints", type=int, default=20)
    p.add_argument("--resolution", type=float, default=None,
                   help="edge check spacing (default: 1%% of the bounds diagonal)")
    p.add_argument("--margin", type=float, default=None,
                   help="waypoint clearance margin (default: resolution/2)")
    p.add_argument("--trials", type=int, default=1)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", default=None, help="CSV output file (default: stdout)")

    a = sub.add_parser("aggregate", help="success-rate/cost curves from a trial CSV")
    a.add_argument("--in", dest="infile", required=True)
    a.add_argument("--out", default=None)
    a.add_argument("--points", type=int, default=100)

    o = sub.add_parser("oracle", help="grid-Dijkstra optimal cost for a 2-D scenario")
    o.add_argument("--scenario", required=True)
    o.add_argument("--cell", type=float, default=None)
    return parser


def _load(path: str):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        print(f"error: cannot read scenario file: {exc}", file=sys.stderr)
        raise SystemExit(2)
    try:
        return load_scenario(text)
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        raise SystemExit(2)


def _cmd_plan(args) -> int:
    scenario = _load(args.scenario)
    budget = args.time_limit if args.time_limit is not None else scenario.budget_s
    if budget is None:
        print("error: no --time-limit and the scenario sets no budget_s",
              file=sys.stderr)
        return 1
    params = PlannerParams(
        mode=_MODE_ALIASES.get(args.mode, args.mode),
        delta=args.delta,
        batch_size=args.batch_size,
        resolution=args.resolution,
        waypoints=args.waypoints,
        margin=args.margin,
    )
    ptc = TerminationCondition(budget_s=budget)
    records = bench.run_trials(
        scenario, params, ptc, args.trials, args.seed, workers=args.workers
    )
    csv = bench.emit_csv(records)
    if args.out:
        Path(args.out).write_text(csv)
    else:
        sys.stdout.write(csv)
    solved = any(math.isfinite(bench.first_solution_time(r)) for r in records)
    return 0 if solved else 3


def _cmd_aggregate(args) -> int:
    try:
        records = bench.parse_csv(Path(args.infile).read_text())
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    horizon = max(ev.elapsed_s for r in records for ev in r.events)
    series = bench.aggregate(records, bench.log_time_grid(max(horizon, 0.011), args.points))
    csv = bench.emit_aggregate_csv(series)
    if args.out:
        Path(args.out).write_text(csv)
    else:
        sys.stdout.write(csv)
    return 0


def _cmd_oracle(args) -> int:
    scenario = _load(args.scenario)
    try:
        result = bench.grid_oracle(scenario, args.cell)
    except bench.UnreachableError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    print(f"cost {result.cost:.9g} error_bound {result.error_bound:.9g}")
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "plan":
        return _cmd_plan(args)
    if args.command == "aggregate":
        return _cmd_aggregate(args)
    return _cmd_oracle(args)


if __name__ == "__main__":
    sys.exit(main())
