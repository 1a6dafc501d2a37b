"""Benchmark harness: trial execution, CSV emission, success-rate and cost
aggregation, and a grid-Dijkstra optimal-cost oracle for 2-D disc robots."""

from __future__ import annotations

import heapq
import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .cspace import ContractError, DiscRobot, Scenario, distance, is_valid_config
from .planner import PlanEvent, PlannerParams, TerminationCondition, plan

# events that carry a meaningful cost column in the CSV
_COSTED_EVENTS = {"first_solution", "improvement", "optimizer_success", "optimizer_failure"}


@dataclass
class TrialRecord:
    scenario: str
    mode: str
    seed: int
    events: list[PlanEvent]


@dataclass
class AggregateSeries:
    times: np.ndarray
    success_rate: np.ndarray
    cost_median: np.ndarray  # NaN where no trial has a solution yet
    cost_q25: np.ndarray
    cost_q75: np.ndarray


def _run_one(scenario, params, ptc, seed, optimize_fn):
    result = plan(scenario, params, ptc, seed, optimize_fn=optimize_fn)
    return TrialRecord(
        scenario=scenario.name, mode=params.mode, seed=seed, events=result.events
    )


def run_trials(
    scenario: Scenario,
    params: PlannerParams,
    ptc: TerminationCondition,
    n_trials: int,
    base_seed: int,
    workers: int = 1,
    optimize_fn=None,
) -> list[TrialRecord]:
    """Independent trials with seeds base_seed..base_seed+n_trials-1,
    returned in trial order. optimize_fn must be a module-level callable
    when workers > 1 (it crosses process boundaries)."""
    if n_trials < 1:
        raise ContractError("need n_trials >= 1")
    seeds = [base_seed + i for i in range(n_trials)]
    if workers <= 1:
        return [_run_one(scenario, params, ptc, s, optimize_fn) for s in seeds]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        futures = [
            pool.submit(_run_one, scenario, params, ptc, s, optimize_fn) for s in seeds
        ]
        return [f.result() for f in futures]


# ---------------------------------------------------------------------------
# aggregation


def log_time_grid(budget_s: float, points: int = 100) -> np.ndarray:
    return np.geomspace(0.01, budget_s, points)


def best_cost_at(record: TrialRecord, t: float) -> float:
    """Best-so-far cost at time t (inf before the first solution)."""
    best = math.inf
    for ev in record.events:
        if ev.elapsed_s > t:
            break
        if ev.kind in ("first_solution", "improvement"):
            best = ev.cost
    return best


def first_solution_time(record: TrialRecord) -> float:
    for ev in record.events:
        if ev.kind == "first_solution":
            return ev.elapsed_s
    return math.inf


def aggregate(records: list[TrialRecord], time_grid) -> AggregateSeries:
    """success_rate(t) from first-solution timestamps; cost quantiles over
    the best-so-far costs of trials that have a solution at t."""
    if not records:
        raise ContractError("aggregate needs at least one trial record")
    times = np.asarray(time_grid, dtype=float)
    n = len(records)
    firsts = [first_solution_time(r) for r in records]
    success = np.array([sum(f <= t for f in firsts) / n for t in times])
    med = np.full_like(times, np.nan)
    q25 = np.full_like(times, np.nan)
    q75 = np.full_like(times, np.nan)
    for i, t in enumerate(times):
        costs = [best_cost_at(r, t) for r in records if first_solution_time(r) <= t]
        if costs:
            med[i] = np.median(costs)
            q25[i] = np.percentile(costs, 25)
            q75[i] = np.percentile(costs, 75)
    return AggregateSeries(
        times=times, success_rate=success, cost_median=med, cost_q25=q25, cost_q75=q75
    )


# ---------------------------------------------------------------------------
# grid-Dijkstra oracle


class UnreachableError(RuntimeError):
    """No grid path connects the snapped start and goal cells."""


@dataclass(frozen=True)
class OracleResult:
    cost: float
    error_bound: float  # overestimation bound: grid metric + snapping


# 16-connected neighborhood (unit, diagonal, and knight moves)
_MOVES = [
    (1, 0), (-1, 0), (0, 1), (0, -1),
    (1, 1), (1, -1), (-1, 1), (-1, -1),
    (2, 1), (2, -1), (-2, 1), (-2, -1),
    (1, 2), (1, -2), (-1, 2), (-1, -2),
]
# the 16-neighborhood grid metric overestimates Euclidean lengths by at
# most sec(pi/16)-ish; 2.8% is the standard bound
_GRID_METRIC_OVERESTIMATE = 0.028


def grid_oracle(scenario: Scenario, cell: float | None = None) -> OracleResult:
    """Dijkstra shortest path length on a 16-connected grid over valid
    configurations; start/goal snap to their nearest valid cells.

    Move segments are also checked at interior points so knight moves
    cannot cut through thin obstacles.
    """
    if not isinstance(scenario.robot, DiscRobot):
        raise ContractError("grid oracle supports 2-D disc-robot scenarios only")
    if cell is None:
        cell = scenario.diagonal() / 400.0
    lo, hi = scenario.lo, scenario.hi
    nx = int(math.floor((hi[0] - lo[0]) / cell)) + 1
    ny = int(math.floor((hi[1] - lo[1]) / cell)) + 1
    xs = lo[0] + np.arange(nx) * cell
    ys = lo[1] + np.arange(ny) * cell
    valid = np.zeros((nx, ny), dtype=bool)
    for i in range(nx):
        for j in range(ny):
            valid[i, j] = is_valid_config(scenario, np.array([xs[i], ys[j]]))

    def snap(q):
        best = None
        best_d = math.inf
        for i in range(nx):
            for j in range(ny):
                if not valid[i, j]:
                    continue
                d = math.hypot(xs[i] - q[0], ys[j] - q[1])
                if d < best_d:
                    best_d = d
                    best = (i, j)
        if best is None:
            raise UnreachableError("no valid grid cell to snap to")
        return best, best_d

    (si, sj), snap_s = snap(scenario.start)
    (gi, gj), snap_g = snap(scenario.goal)

    def move_clear(i, j, di, dj):
        # forbid corner cutting: cells adjacent to the move segment must be
        # valid too (knight moves otherwise slip through thin walls)
        if abs(di) == 1 and abs(dj) == 1:
            return valid[i + di, j] and valid[i, j + dj]
        if abs(di) == 2:
            return valid[i + di // 2, j] and valid[i + di // 2, j + dj]
        if abs(dj) == 2:
            return valid[i, j + dj // 2] and valid[i + di, j + dj // 2]
        return True

    dist = np.full((nx, ny), math.inf)
    dist[si, sj] = 0.0
    heap = [(0.0, si, sj)]
    while heap:
        d, i, j = heapq.heappop(heap)
        if d > dist[i, j]:
            continue
        if (i, j) == (gi, gj):
            break
        for di, dj in _MOVES:
            ni, nj = i + di, j + dj
            if not (0 <= ni < nx and 0 <= nj < ny) or not valid[ni, nj]:
                continue
            nd = d + cell * math.hypot(di, dj)
            if nd < dist[ni, nj] and move_clear(i, j, di, dj):
                dist[ni, nj] = nd
                heapq.heappush(heap, (nd, ni, nj))
    cost = dist[gi, gj]
    if math.isinf(cost):
        raise UnreachableError("goal cell unreachable on the grid")
    bound = _GRID_METRIC_OVERESTIMATE * cost + 2.0 * cell + snap_s + snap_g
    return OracleResult(cost=float(cost), error_bound=float(bound))


# ---------------------------------------------------------------------------
# CSV I/O


def _fmt(x: float) -> str:
    return format(float(x), ".9g")


def emit_csv(records: list[TrialRecord]) -> str:
    """Bit-stable CSV: header scenario,mode,seed,elapsed_s,event,cost; the
    cost column is empty for events that do not carry one."""
    out = io.StringIO()
    out.write("scenario,mode,seed,elapsed_s,event,cost\n")
    for rec in records:
        for ev in rec.events:
            cost = _fmt(ev.cost) if ev.kind in _COSTED_EVENTS else ""
            out.write(
                f"{rec.scenario},{rec.mode},{rec.seed},{_fmt(ev.elapsed_s)},{ev.kind},{cost}\n"
            )
    return out.getvalue()


def parse_csv(text: str) -> list[TrialRecord]:
    """Inverse of emit_csv (costless events come back with cost = inf)."""
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or lines[0] != "scenario,mode,seed,elapsed_s,event,cost":
        raise ContractError("unrecognized trial CSV header")
    records: dict[tuple, TrialRecord] = {}
    for ln in lines[1:]:
        scenario, mode, seed, elapsed, kind, cost = ln.split(",")
        key = (scenario, mode, int(seed))
        rec = records.get(key)
        if rec is None:
            rec = TrialRecord(scenario=scenario, mode=mode, seed=int(seed), events=[])
            records[key] = rec
        rec.events.append(
            PlanEvent(float(elapsed), kind, float(cost) if cost else math.inf)
        )
    return list(records.values())


def emit_aggregate_csv(series: AggregateSeries) -> str:
    out = io.StringIO()
    out.write("t,success_rate,cost_median,cost_q25,cost_q75\n")
    for i, t in enumerate(series.times):
        cols = [_fmt(t), _fmt(series.success_rate[i])]
        for arr in (series.cost_median, series.cost_q25, series.cost_q75):
            cols.append("" if math.isnan(arr[i]) else _fmt(arr[i]))
        out.write(",".join(cols) + "\n")
    return out.getvalue()
