"""First-order Markov trajectory optimizer.

Builds a constrained nonlinear least-squares problem over waypoints
x_0..x_T (x_0 pinned): cost sum ||x_t - x_{t-1}||^2, per-waypoint
inequality constraints (clearance margin and joint limits) and the
terminal equality x_T = goal. Solved by an augmented Lagrangian outer
loop around a damped Gauss-Newton inner loop; the Markov structure makes
the Gauss-Newton system block-tridiagonal, solved in O(T n^3).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .cspace import ContractError, Scenario, clearance_rows, num_clearance_rows


class NotPositiveDefiniteError(RuntimeError):
    """The damped Gauss-Newton system lost positive definiteness; the
    caller should increase damping and retry."""


@dataclass(frozen=True)
class AlParams:
    mu0: float = 1.0
    mu_growth: float = 2.0
    outer_max: int = 20
    inner_max: int = 50
    tol_constraint: float = 1e-4
    tol_step: float = 1e-6
    lm_damping: float = 1e-4

    def __post_init__(self):
        if min(self.mu0, self.mu_growth - 1.0, self.outer_max, self.inner_max,
               self.tol_constraint, self.tol_step) <= 0 or self.lm_damping < 0:
            raise ContractError("invalid augmented Lagrangian parameters")


@dataclass
class TrajectoryProblem:
    scenario: Scenario
    waypoints: np.ndarray  # (T+1, n) seed, waypoints[0] is pinned
    margin: float

    @property
    def T(self) -> int:
        return self.waypoints.shape[0] - 1

    @property
    def n(self) -> int:
        return self.waypoints.shape[1]

    @property
    def n_clear(self) -> int:
        # one row per robot-body/obstacle pair; per-pair rows are smooth
        # almost everywhere, unlike their min
        return num_clearance_rows(self.scenario)

    @property
    def n_ineq_per_t(self) -> int:
        # clearance rows, then lo-limit rows, then hi-limit rows
        return self.n_clear + 2 * self.n


@dataclass
class EvalResult:
    cost: float
    f: np.ndarray       # (T, n) cost residuals x_t - x_{t-1}
    g: np.ndarray       # (T, m) inequality values per free waypoint
    g_jac: np.ndarray   # (T, m, n) d g_t / d x_t (g_t touches only x_t)
    gm: np.ndarray      # (T, P) clearance rows at segment midpoints
    gm_jac: np.ndarray  # (T, P, n) gradient at the midpoint; the chain rule
                        # puts 0.5 of it on each adjacent waypoint
    h: np.ndarray       # (n,) terminal equality x_T - goal
    h_jac: np.ndarray   # (n, n) identity on the last block

    def cost_gradient(self) -> np.ndarray:
        """Gradient of sum f^T f with respect to the stacked free waypoints."""
        T, n = self.f.shape
        grad = np.zeros((T, n))
        for t in range(T):
            grad[t] += 2.0 * self.f[t]
            if t + 1 < T:
                grad[t] -= 2.0 * self.f[t + 1]
        return grad.ravel()


@dataclass
class OptResult:
    waypoints: np.ndarray
    feasible: bool
    reported_cost: float
    iterations: tuple[int, int]


def path_cost(waypoints) -> float:
    """Polyline length: the planner's reported metric."""
    w = np.asarray(waypoints, dtype=float)
    if w.shape[0] < 2:
        raise ContractError("path_cost needs at least 2 waypoints")
    return float(np.linalg.norm(np.diff(w, axis=0), axis=1).sum())


def resample_polyline(path: np.ndarray, count: int) -> np.ndarray:
    """Arc-length resampling of a polyline to `count` points. A zero-length
    polyline collapses to its first point repeated."""
    path = np.asarray(path, dtype=float)
    seg = np.linalg.norm(np.diff(path, axis=0), axis=1)
    arc = np.concatenate([[0.0], np.cumsum(seg)])
    total = arc[-1]
    if total <= 0.0:
        return np.repeat(path[:1], count, axis=0)
    s = np.linspace(0.0, total, count)
    return np.stack([np.interp(s, arc, path[:, j]) for j in range(path.shape[1])], axis=1)


def build_problem(path, scenario: Scenario, T: int, margin: float) -> TrajectoryProblem:
    """Seed a T+1-waypoint problem by arc-length resampling the given path."""
    path = np.asarray(path, dtype=float)
    if path.ndim != 2 or path.shape[0] < 2:
        raise ContractError("seed path needs at least 2 configurations")
    if T < 2:
        raise ContractError("need T >= 2 waypoint steps")
    if margin < 0:
        raise ContractError("clearance margin must be >= 0")
    return TrajectoryProblem(
        scenario=scenario,
        waypoints=resample_polyline(path, T + 1),
        margin=margin,
    )


def evaluate(problem: TrajectoryProblem, x: np.ndarray) -> EvalResult:
    """Cost, constraints and analytic Jacobians at the stacked free
    waypoints x (shape (T*n,) or (T, n); x_0 excluded)."""
    T, n = problem.T, problem.n
    w = np.asarray(x, dtype=float).reshape(T, n)
    scen = problem.scenario
    full = np.vstack([problem.waypoints[:1], w])
    f = np.diff(full, axis=0)
    m = problem.n_ineq_per_t
    nc = problem.n_clear
    g = np.empty((T, m))
    g_jac = np.zeros((T, m, n))
    gm = np.empty((T, nc))
    gm_jac = np.empty((T, nc, n))
    eye = np.eye(n)
    if nc:
        # clearance at the waypoints and at segment midpoints; midpoint
        # rows stop segments from cutting obstacle corners between
        # waypoints while keeping the first-order Markov coupling
        mids = 0.5 * (full[:-1] + full[1:])
        d, dg = clearance_rows(scen, np.vstack([w, mids]))
        g[:, :nc] = problem.margin - d[:T]
        g_jac[:, :nc] = -dg[:T]
        gm[:] = problem.margin - d[T:]
        gm_jac[:] = -dg[T:]
    g[:, nc:nc + n] = scen.lo - w
    g_jac[:, nc:nc + n] = -eye
    g[:, nc + n:] = w - scen.hi
    g_jac[:, nc + n:] = eye
    h = w[-1] - scen.goal
    return EvalResult(
        cost=float(np.sum(f * f)), f=f, g=g, g_jac=g_jac, gm=gm, gm_jac=gm_jac,
        h=h, h_jac=np.eye(n),
    )


# ---------------------------------------------------------------------------
# block-tridiagonal linear algebra


@dataclass
class BlockTridiag:
    """Symmetric block-tridiagonal matrix: diag (T, n, n) and upper
    off-diagonal off (T-1, n, n)."""

    diag: np.ndarray
    off: np.ndarray

    def to_dense(self) -> np.ndarray:
        T, n, _ = self.diag.shape
        dense = np.zeros((T * n, T * n))
        for t in range(T):
            dense[t * n:(t + 1) * n, t * n:(t + 1) * n] = self.diag[t]
        for t in range(T - 1):
            dense[t * n:(t + 1) * n, (t + 1) * n:(t + 2) * n] = self.off[t]
            dense[(t + 1) * n:(t + 2) * n, t * n:(t + 1) * n] = self.off[t].T
        return dense


def solve_banded(H: BlockTridiag, rhs: np.ndarray) -> np.ndarray:
    """Solve H d = rhs by block-tridiagonal Cholesky elimination, linear in
    the number of blocks. Raises NotPositiveDefiniteError when a Schur
    block fails to factor (caller increases damping)."""
    T, n, _ = H.diag.shape
    b = np.asarray(rhs, dtype=float).reshape(T, n)
    factors = []
    y = np.empty((T, n))
    try:
        c = cho_factor(H.diag[0], lower=True)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefiniteError(str(exc)) from exc
    factors.append(c)
    y[0] = b[0]
    for t in range(1, T):
        w = cho_solve(factors[t - 1], H.off[t - 1])  # C_{t-1}^{-1} O_{t-1}
        schur = H.diag[t] - H.off[t - 1].T @ w
        try:
            c = cho_factor(schur, lower=True)
        except np.linalg.LinAlgError as exc:
            raise NotPositiveDefiniteError(str(exc)) from exc
        factors.append(c)
        y[t] = b[t] - H.off[t - 1].T @ cho_solve(factors[t - 1], y[t - 1])
    d = np.empty((T, n))
    d[T - 1] = cho_solve(factors[T - 1], y[T - 1])
    for t in range(T - 2, -1, -1):
        d[t] = cho_solve(factors[t], y[t] - H.off[t] @ d[t + 1])
    return d.ravel()


# ---------------------------------------------------------------------------
# augmented Lagrangian outer loop, Gauss-Newton inner loop


def _active_mask(g: np.ndarray, kappa: np.ndarray) -> np.ndarray:
    return (g >= 0.0) | (kappa > 0.0)


def al_value(ev: EvalResult, lam: np.ndarray, kappa: np.ndarray,
             kappa_m: np.ndarray, mu: float) -> float:
    """Augmented Lagrangian with the active-set clipped inequality terms."""
    val = ev.cost + float(lam @ ev.h) + mu * float(ev.h @ ev.h)
    act = _active_mask(ev.g, kappa)
    ga = ev.g[act]
    val += float(kappa[act] @ ga) + mu * float(ga @ ga)
    actm = _active_mask(ev.gm, kappa_m)
    gm = ev.gm[actm]
    val += float(kappa_m[actm] @ gm) + mu * float(gm @ gm)
    return val


def _assemble(problem: TrajectoryProblem, ev: EvalResult,
              lam: np.ndarray, kappa: np.ndarray, kappa_m: np.ndarray,
              mu: float, damping: float) -> tuple[BlockTridiag, np.ndarray]:
    """Gauss-Newton system J^T J + damping I and right-hand side -J^T r of
    the augmented Lagrangian least-squares form."""
    T, n = problem.T, problem.n
    eye = np.eye(n)
    diag = np.tile((damping * eye)[None], (T, 1, 1)).copy()
    off = np.zeros((T - 1, n, n))
    rhs = np.zeros((T, n))
    sq = math.sqrt(mu)
    # cost residuals f_t = x_t - x_{t-1}: J blocks (-I at t-1, +I at t)
    for t in range(T):
        diag[t] += eye
        rhs[t] -= ev.f[t]
        if t + 1 < T:
            diag[t] += eye
            off[t] += -eye
            rhs[t] += ev.f[t + 1]
    # active inequalities: residual sq*g + kappa/(2 sq), J = sq * g_jac
    act = _active_mask(ev.g, kappa)
    for t in range(T):
        rows = np.nonzero(act[t])[0]
        if rows.size == 0:
            continue
        J = sq * ev.g_jac[t, rows]
        r = sq * ev.g[t, rows] + kappa[t, rows] / (2.0 * sq)
        diag[t] += J.T @ J
        rhs[t] -= J.T @ r
    # active midpoint rows: the midpoint of (x_{i}, x_{i+1}) carries half
    # the gradient on each adjacent waypoint (blocks i-1 and i; x_0 fixed)
    actm = _active_mask(ev.gm, kappa_m)
    for i in range(T):
        rows = np.nonzero(actm[i])[0]
        if rows.size == 0:
            continue
        Jh = 0.5 * sq * ev.gm_jac[i, rows]
        r = sq * ev.gm[i, rows] + kappa_m[i, rows] / (2.0 * sq)
        JtJ = Jh.T @ Jh
        Jtr = Jh.T @ r
        diag[i] += JtJ
        rhs[i] -= Jtr
        if i >= 1:
            diag[i - 1] += JtJ
            rhs[i - 1] -= Jtr
            off[i - 1] += JtJ
    # terminal equality: residual sq*h + lam/(2 sq), J = sq * I at block T-1
    diag[T - 1] += mu * eye
    rhs[T - 1] -= sq * (sq * ev.h + lam / (2.0 * sq))
    return BlockTridiag(diag=diag, off=off), rhs.ravel()


def max_violation(ev: EvalResult, tol: float = 0.0) -> float:
    viol_h = float(np.max(np.abs(ev.h))) if ev.h.size else 0.0
    viol_g = float(np.max(ev.g)) if ev.g.size else 0.0
    viol_m = float(np.max(ev.gm)) if ev.gm.size else 0.0
    return max(viol_h, viol_g, viol_m, 0.0)


def optimize(problem: TrajectoryProblem, params: AlParams, stop_check=None) -> OptResult:
    """Augmented Lagrangian loop with multiplier updates lam += 2 mu h,
    kappa = max(0, kappa + 2 mu g) and mu growth per outer iteration.

    The inner loop is damped Gauss-Newton with an Armijo backtracking line
    search (factor 0.5, slope 1e-4). x_0 never moves. An infeasible
    outcome is a normal result, flagged on OptResult. stop_check, when
    given, is polled every iteration to bound budget overshoot.
    """
    T, n = problem.T, problem.n
    x = problem.waypoints[1:].ravel().copy()
    lam = np.zeros(n)
    kappa = np.zeros((T, problem.n_ineq_per_t))
    kappa_m = np.zeros((T, problem.n_clear))
    mu = params.mu0
    total_inner = 0
    outer_done = 0
    ev = evaluate(problem, x)
    step_norm = math.inf
    stopped = False
    for outer in range(params.outer_max):
        if stopped or (stop_check is not None and outer > 0 and stop_check()):
            break
        outer_done = outer + 1
        damping = params.lm_damping
        rejections = 0
        for _ in range(params.inner_max):
            if stop_check is not None and total_inner > 0 and stop_check():
                stopped = True
                break
            total_inner += 1
            cur = al_value(ev, lam, kappa, kappa_m, mu)
            step = None
            while damping < 1e12:
                H, rhs = _assemble(problem, ev, lam, kappa, kappa_m, mu, damping)
                try:
                    step = solve_banded(H, rhs)
                    break
                except NotPositiveDefiniteError:
                    damping = max(damping, params.lm_damping) * 10.0
            if step is None:
                break
            slope = -float(rhs @ step)  # rhs = -grad/2; slope of the model
            alpha = 1.0
            accepted = False
            while alpha >= 1e-10:
                x_try = x + alpha * step
                ev_try = evaluate(problem, x_try)
                if al_value(ev_try, lam, kappa, kappa_m, mu) <= cur + 1e-4 * alpha * 2.0 * slope:
                    accepted = True
                    break
                alpha *= 0.5
            if not accepted:
                # a failed line search with high damping means the inner
                # problem has stalled; move on to the multiplier update
                rejections += 1
                if rejections >= 3:
                    break
                damping = max(damping, params.lm_damping) * 10.0
                continue
            rejections = 0
            x = x_try
            ev = ev_try
            damping = max(params.lm_damping, damping * 0.5)
            step_norm = float(np.linalg.norm(alpha * step))
            if step_norm <= params.tol_step:
                break
        viol = max_violation(ev)
        if viol <= params.tol_constraint and step_norm <= params.tol_step:
            break
        lam = lam + 2.0 * mu * ev.h
        kappa = np.maximum(0.0, kappa + 2.0 * mu * ev.g)
        kappa_m = np.maximum(0.0, kappa_m + 2.0 * mu * ev.gm)
        mu *= params.mu_growth
    waypoints = np.vstack([problem.waypoints[:1], x.reshape(T, n)])
    feasible = max_violation(ev) <= params.tol_constraint
    if feasible:
        # pin the terminal waypoint exactly: the equality is only met to
        # tol_constraint, which would let the reported length dip below
        # the start-goal lower bound
        waypoints[-1] = problem.scenario.goal
    return OptResult(
        waypoints=waypoints,
        feasible=feasible,
        reported_cost=path_cost(waypoints),
        iterations=(outer_done, total_inner),
    )
