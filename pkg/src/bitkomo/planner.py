"""The hybrid planning loop: batch sampling, tree search with relaxed edge
checking and penalty costing, trajectory optimization on improved paths,
and the anytime cost ledger. Also provides the plain tree-search and
repeated-optimization baseline modes."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace

import numpy as np

from . import bitstar, komo, sampling
from .cspace import ContractError, Scenario, distance, is_valid_config
from .komo import AlParams, OptResult
from .relaxed_check import EdgeCheckConfig, check_edge_full, check_edge_relaxed

MODES = ("bitkomo", "bitstar", "komo_restarts")

# komo_restarts seeds: uniform noise amplitude as a fraction of the
# per-dimension bounds range, applied around the constant-start trajectory
RESTART_NOISE_FRACTION = 0.05


@dataclass(frozen=True)
class PlannerParams:
    mode: str = "bitkomo"
    delta: int = 1
    batch_size: int = 100
    resolution: float | None = None  # None: 0.01 x bounds diagonal
    waypoints: int = 20
    margin: float | None = None  # None: 0.5 x resolution
    # the planner seeds the optimizer with a strong initial penalty so the
    # first unconstrained solves cannot collapse the seed path through
    # obstacles into a different homotopy class, and a loose step tolerance
    # because sub-millimeter trajectory precision buys no planning value
    al: AlParams = field(default_factory=lambda: AlParams(mu0=100.0, tol_step=1e-4))
    eta: float = 1.1
    rejection_cap: int = 10_000

    def __post_init__(self):
        if self.mode not in MODES:
            raise ContractError(f"mode must be one of {MODES}")
        if self.delta < 0:
            raise ContractError("delta must be >= 0")

    def resolve(self, scenario: Scenario) -> "PlannerParams":
        res = self.resolution
        if res is None:
            res = 0.01 * scenario.diagonal()
        margin = self.margin
        if margin is None:
            margin = 0.5 * res
        delta = 0 if self.mode == "bitstar" else self.delta
        return replace(self, resolution=res, margin=margin, delta=delta)


@dataclass(frozen=True)
class TerminationCondition:
    budget_s: float
    target_cost: float | None = None
    max_batches: int | None = None  # deterministic stop for testing

    def __post_init__(self):
        if not self.budget_s > 0:
            raise ContractError("time budget must be > 0")


@dataclass
class PlanEvent:
    elapsed_s: float
    kind: str  # first_solution | improvement | optimizer_success | optimizer_failure | batch_added
    cost: float


@dataclass
class PlanResult:
    best_path: list[np.ndarray] | None
    c_best: float
    events: list[PlanEvent]
    rng_seed: int


def penalized_edge_cost(c_hat: float, cp: int, c_max: float) -> float:
    """Edge cost with the collision surcharge: c_hat + cp * c_max."""
    if cp < 0:
        raise ContractError("collision penalty must be >= 0")
    return c_hat + cp * c_max


def validate_path(path, scenario: Scenario, resolution: float) -> bool:
    """Every waypoint valid and every consecutive pair fully collision
    checked at the given resolution."""
    path = [np.asarray(q, dtype=float) for q in path]
    if not all(is_valid_config(scenario, q) for q in path):
        return False
    return all(
        check_edge_full(scenario, a, b, resolution) for a, b in zip(path, path[1:])
    )


def failing_optimizer(problem, params) -> OptResult:
    """Test hook standing in for the optimizer: always infeasible, no side
    effects (used for the guarantee-preservation ablation)."""
    return OptResult(
        waypoints=problem.waypoints.copy(),
        feasible=False,
        reported_cost=komo.path_cost(problem.waypoints),
        iterations=(0, 0),
    )


class _Run:
    """Mutable per-run context shared by the planning modes."""

    def __init__(self, scenario, params, ptc, seed, optimize_fn):
        self.scenario = scenario
        self.params = params.resolve(scenario)
        self.ptc = ptc
        self.seed = seed
        self.rng = np.random.default_rng(seed)
        self.optimize_fn = optimize_fn
        self.t0 = time.perf_counter()
        self.events: list[PlanEvent] = []
        self.c_best = math.inf
        self.best_path: list[np.ndarray] | None = None
        self.n_batches = 0

    def elapsed(self) -> float:
        return time.perf_counter() - self.t0

    def done(self) -> bool:
        if self.elapsed() >= self.ptc.budget_s:
            return True
        if self.ptc.target_cost is not None and self.c_best <= self.ptc.target_cost:
            return True
        return False

    def run_optimizer(self, problem) -> OptResult:
        if self.optimize_fn is not None:
            return self.optimize_fn(problem, self.params.al)
        # the budget overshoots by at most one outer AL iteration
        return komo.optimize(problem, self.params.al, stop_check=self.done)

    def record_solution(self, cost: float, path: list[np.ndarray]) -> None:
        if cost >= self.c_best:
            return
        kind = "first_solution" if math.isinf(self.c_best) else "improvement"
        self.c_best = cost
        self.best_path = [np.asarray(q, dtype=float).copy() for q in path]
        self.events.append(PlanEvent(self.elapsed(), kind, cost))

    def log(self, kind: str, cost: float) -> None:
        self.events.append(PlanEvent(self.elapsed(), kind, cost))


def plan(
    scenario: Scenario,
    params: PlannerParams,
    ptc: TerminationCondition,
    seed: int,
    optimize_fn=None,
) -> PlanResult:
    """Run the planner until the termination condition holds.

    optimize_fn overrides the trajectory optimizer (testing hook); it must
    be side-effect-free on failure.
    """
    run = _Run(scenario, params, ptc, seed, optimize_fn)
    if run.params.mode == "komo_restarts":
        _komo_restarts_loop(run)
    else:
        _tree_loop(run)
    return PlanResult(
        best_path=run.best_path, c_best=run.c_best, events=run.events, rng_seed=seed
    )


# ---------------------------------------------------------------------------
# tree-search modes (bitkomo / bitstar)


def _tree_loop(run: _Run) -> None:
    scenario, params = run.scenario, run.params
    state, ledger = bitstar.init_state(scenario)
    edge_cfg = EdgeCheckConfig(resolution=params.resolution, delta=params.delta)
    sampler_cfg = sampling.SamplerConfig(
        batch_size=params.batch_size, rng_seed=run.seed,
        rejection_cap=params.rejection_cap,
    )
    free_measure = float(np.prod(scenario.hi - scenario.lo))
    radius = math.inf
    optimized_hashes: set[bytes] = set()
    fine_ok: set[bytes] = set()
    forbidden: set[bytes] = set()

    while not run.done():
        if not state.q_e and bitstar.qv_best_value(state) == math.inf:
            if run.ptc.max_batches is not None and run.n_batches >= run.ptc.max_batches:
                return
            try:
                _add_batch(run, state, ledger, sampler_cfg)
            except sampling.SamplerStarvedError:
                return
            radius = sampling.connection_radius(
                len(state.nodes), scenario.dimension, free_measure, params.eta
            )
            run.n_batches += 1
            run.log("batch_added", run.c_best)
        while True:
            best_v = bitstar.qv_best_value(state)
            if math.isinf(best_v) or best_v > bitstar.qe_best_value(state):
                break
            bitstar.expand_next_vertex(state, ledger, radius)
        edge = bitstar.qe_pop_best(state)
        if edge is None:
            continue
        if _edge_key(edge.source.q, edge.target.q) in forbidden:
            continue
        if not bitstar.edge_addition_helps(state, ledger, edge):
            continue
        outcome = check_edge_relaxed(scenario, edge.source.q, edge.target.q, edge_cfg)
        if outcome.cp > params.delta:
            continue
        c_edge = penalized_edge_cost(edge.c_hat, outcome.cp, ledger.c_max)
        if not bitstar.edge_improves_cost(state, ledger, edge, c_edge):
            continue
        prev_goal_g = state.goal.g if state.goal.in_tree else math.inf
        bitstar.add_edge_to_tree(state, ledger, edge, c_edge)
        goal = state.goal_vertex
        if goal is None:
            continue
        if not _certify_tree_path(run, state, fine_ok, forbidden):
            # a finer recheck exposed a real collision the coarse spacing
            # missed; the offending edge is gone and the search reroutes
            continue
        ledger.c_i = goal.g
        if ledger.c_i < ledger.c_max:
            path = bitstar.get_best_path(state)
            run.record_solution(ledger.c_i, path)
        if params.mode == "bitkomo" and goal.g < prev_goal_g:
            _optimize_tree_path(run, state, ledger, optimized_hashes)
        if run.done():
            return


def _edge_key(qa: np.ndarray, qb: np.ndarray) -> bytes:
    return qa.tobytes() + qb.tobytes()


def _certify_tree_path(run, state, fine_ok, forbidden) -> bool:
    """Recheck the goal path's edges at one tenth of the planning
    resolution before certifying the solution. Edges checked at the coarse
    spacing can slip past obstacle corners; a reported solution must not.
    The first failing edge is removed from the tree and remembered so the
    queues never re-admit it."""
    fine_res = run.params.resolution / 10.0
    chain = []
    v = state.goal
    while v is not None:
        chain.append(v)
        v = v.parent
    chain.reverse()
    for a, b in zip(chain, chain[1:]):
        key = _edge_key(a.q, b.q)
        if key in fine_ok:
            continue
        if check_edge_full(run.scenario, a.q, b.q, fine_res):
            fine_ok.add(key)
            continue
        forbidden.add(key)
        bitstar.remove_edge(state, b)
        return False
    return True


def _add_batch(run, state, ledger, sampler_cfg) -> None:
    scenario = run.scenario
    bitstar.prune(state, scenario, ledger.c_i)
    informed = sampling.InformedSet(
        focus_a=scenario.start, focus_b=scenario.goal, c_i=ledger.c_i
    )
    batch = sampling.sample_batch(scenario, sampler_cfg, informed, run.rng)
    for q in batch:
        state.nodes.append(
            bitstar.Node(
                q,
                ghat=distance(scenario.start, q),
                h=distance(q, scenario.goal),
            )
        )
    state.rebuild_coords()
    state.batch_id += 1
    # restart the vertex queue from the whole tree
    state.q_v = []
    for v in state.tree_vertices():
        v.expanded_batch = -1
        bitstar.qv_push(state, v)


def _optimize_tree_path(run, state, ledger, optimized_hashes) -> None:
    path = bitstar.get_best_path(state)
    key = np.ascontiguousarray(np.vstack(path)).tobytes()
    if key in optimized_hashes:
        return
    optimized_hashes.add(key)
    params = run.params
    problem = komo.build_problem(path, run.scenario, params.waypoints, params.margin)
    result = run.run_optimizer(problem)
    # reported solutions are held to the same tenth-resolution standard as
    # certified tree paths
    valid = result.feasible and validate_path(
        result.waypoints, run.scenario, params.resolution / 10.0
    )
    if valid:
        ledger.c_i = min(ledger.c_i, result.reported_cost)
        run.log("optimizer_success", result.reported_cost)
        run.record_solution(result.reported_cost, list(result.waypoints))
    else:
        run.log("optimizer_failure", result.reported_cost)


# ---------------------------------------------------------------------------
# repeated-optimization baseline


def _komo_restarts_loop(run: _Run) -> None:
    scenario, params = run.scenario, run.params
    T = params.waypoints
    span = scenario.hi - scenario.lo
    while not run.done():
        seed_path = np.tile(scenario.start, (T + 1, 1))
        noise = run.rng.uniform(
            -RESTART_NOISE_FRACTION, RESTART_NOISE_FRACTION, size=(T + 1, len(span))
        ) * span
        noise[0] = 0.0
        problem = komo.TrajectoryProblem(
            scenario=scenario, waypoints=seed_path + noise, margin=params.margin
        )
        result = run.run_optimizer(problem)
        valid = result.feasible and validate_path(
            result.waypoints, scenario, params.resolution / 10.0
        )
        if valid:
            run.log("optimizer_success", result.reported_cost)
            run.record_solution(result.reported_cost, list(result.waypoints))
        else:
            run.log("optimizer_failure", result.reported_cost)
