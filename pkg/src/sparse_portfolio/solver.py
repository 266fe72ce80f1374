"""PALM and FISTA-accelerated PALM for the penalized cardinality problems.

The relaxed problem couples a simplex iterate ``w`` with a sparse iterate
``v`` in the grouped set through ``nu/2 ||w - v||^2``. Each iteration takes a
projected gradient step in ``w`` (and, for CVaR, a hinge-prox step in the
auxiliary ``u``), then projects ``w`` onto the grouped set to get ``v``.
``nu`` follows a continuation schedule with warm starts.

The reported portfolio takes its support from ``v`` and re-solves the convex
problem on that support, so it is exactly feasible.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import linprog

from .objectives import (
    PortfolioState,
    alpha_star,
    cvar_exact,
    cvar_grad_u,
    cvar_grad_w,
    cvar_relaxed_value,
    hinge_prox,
    markowitz_grad,
    markowitz_relaxed_value,
    markowitz_smooth_grad,
)
from .problem import ProblemSpec
from .constraints_projection import (
    GroupPartition,
    PartitionError,
    project_budgeted_simplex,
    project_omega,
    project_simplex,
    project_sparse_simplex,
)


class DescentError(RuntimeError):
    """The unaccelerated objective trace increased; the step size is unsafe."""


@dataclass(frozen=True)
class SolverConfig:
    """Solver settings.

    ``nu_schedule`` values are multiples of the smooth part's Lipschitz
    constant when ``nu_scale == "lipschitz"`` and raw penalty weights when
    ``nu_scale == "absolute"``. ``step_mode`` is ``"lipschitz"`` (inverse
    Lipschitz steps) or ``"fixed"`` (uses ``step`` for every block).
    ``momentum`` selects the extrapolation form of the FISTA update:
    ``"standard"`` extrapolates past the new point, ``"reversed"`` uses
    ``x_k + c (x_k - x_{k+1})``.
    """

    nu_schedule: tuple[float, ...] = (1e-3, 1e-2, 1e-1, 1.0, 10.0, 100.0, 1e3, 1e4, 1e5)
    nu_scale: str = "lipschitz"
    max_iters: int = 5000
    tol: float = 1e-8
    step_mode: str = "lipschitz"
    step: float | None = None
    accelerate: bool = True
    restart: bool = True
    momentum: str = "standard"
    seed: int = 0
    gap_threshold: float = 1e-6
    check_descent: bool = True

    def __post_init__(self):
        object.__setattr__(self, "nu_schedule", tuple(float(x) for x in self.nu_schedule))
        errs = self.problems()
        if errs:
            raise ValueError("; ".join(errs))

    def problems(self) -> list[str]:
        errs = []
        nus = self.nu_schedule
        if not nus:
            errs.append("nu_schedule must be nonempty")
        if any(x <= 0 for x in nus):
            errs.append("nu_schedule entries must be positive")
        if any(b < a for a, b in zip(nus, nus[1:])):
            errs.append("nu_schedule must be nondecreasing")
        if self.nu_scale not in ("lipschitz", "absolute"):
            errs.append(f"nu_scale must be 'lipschitz' or 'absolute', got {self.nu_scale!r}")
        if self.max_iters < 1:
            errs.append("max_iters must be at least 1")
        if not self.tol > 0:
            errs.append("tol must be positive")
        if self.step_mode not in ("lipschitz", "fixed"):
            errs.append(f"step_mode must be 'lipschitz' or 'fixed', got {self.step_mode!r}")
        if self.step_mode == "fixed" and not (self.step and self.step > 0):
            errs.append("fixed step_mode needs a positive step")
        if self.momentum not in ("standard", "reversed"):
            errs.append(f"momentum must be 'standard' or 'reversed', got {self.momentum!r}")
        return errs

    def nus(self, lipschitz: float) -> list[float]:
        # a zero curvature estimate (e.g. one CVaR sample) leaves nu unscaled
        scale = lipschitz if self.nu_scale == "lipschitz" and lipschitz > 0 else 1.0
        return [x * scale for x in self.nu_schedule]


@dataclass
class FistaState:
    t: float
    y: np.ndarray
    x: np.ndarray

    @classmethod
    def start(cls, x) -> "FistaState":
        x = np.asarray(x, dtype=float)
        return cls(1.0, x.copy(), x.copy())


def fista_update(
    state: FistaState,
    prox_grad_step: Callable[[np.ndarray], np.ndarray],
    momentum: str = "standard",
) -> FistaState:
    if state.t < 1:
        raise ValueError("FISTA momentum parameter must be >= 1")
    x_new = prox_grad_step(state.y)
    t_new = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * state.t**2))
    c = (state.t - 1.0) / t_new
    if momentum == "standard":
        y_new = x_new + c * (x_new - state.x)
    else:
        y_new = state.x + c * (state.x - x_new)
    return FistaState(t_new, y_new, x_new)


def _advance(state: FistaState, step, accelerate: bool, momentum: str) -> FistaState:
    if accelerate:
        return fista_update(state, step, momentum)
    x_new = step(state.y)
    return FistaState(1.0, x_new, x_new)


@dataclass(frozen=True)
class LipschitzEstimate:
    value: float
    converged: bool
    iterations: int


def estimate_lipschitz(
    op: Callable[[np.ndarray], np.ndarray],
    dim: int,
    seed: int = 0,
    max_iter: int = 2000,
    rtol: float = 1e-9,
) -> LipschitzEstimate:
    """Largest eigenvalue of a symmetric PSD operator by power iteration.

    If the Rayleigh quotient has not settled after ``max_iter`` steps, the
    Frobenius norm (an upper bound) is returned with ``converged=False``.
    """
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(dim)
    x /= np.linalg.norm(x)
    lam_prev = -np.inf
    for i in range(max_iter):
        y = op(x)
        lam = float(x @ y)
        ny = np.linalg.norm(y)
        if ny == 0.0:
            return LipschitzEstimate(0.0, True, i + 1)
        x = y / ny
        if abs(lam - lam_prev) <= rtol * abs(lam):
            return LipschitzEstimate(max(lam, ny), True, i + 1)
        lam_prev = lam
    eye = np.eye(dim)
    frob = math.sqrt(sum(float(np.sum(op(eye[i]) ** 2)) for i in range(dim)))
    return LipschitzEstimate(frob, False, max_iter)


@dataclass
class SolveReport:
    state: PortfolioState
    weights: np.ndarray
    objective: float
    objective_trace: list[float]
    relax_gap: float
    iterations: int
    converged: bool
    stationarity_residual: float
    wall_time: float
    method: str
    stage_nus: list[float] = field(default_factory=list)
    stage_ends: list[int] = field(default_factory=list)
    stage_gaps: list[float] = field(default_factory=list)
    lipschitz_converged: bool = True
    alpha: float | None = None

    @property
    def support(self) -> list[int]:
        return np.nonzero(self.weights)[0].tolist()

    def summary(self) -> str:
        return (
            f"objective={self.objective:.10g} gap={self.relax_gap:.3g} "
            f"iterations={self.iterations} wall_time={self.wall_time:.3f}s"
        )


# -- restricted convex solves ----------------------------------------------

def _budgets_bind(partition: GroupPartition, support) -> bool:
    s = set(support)
    return any(
        (g.p > 0 or g.q < 1) and s.intersection(g.indices) for g in partition.groups
    )


def _polish_simplex_qp(A, b, w):
    """Exact KKT solve of min w'Aw - b'w on the simplex, on the support of ``w``.

    Returns None if the candidate fails the KKT conditions.
    """
    S = np.nonzero(w > 0)[0]
    m = S.size
    K = np.zeros((m + 1, m + 1))
    K[:m, :m] = 2.0 * A[np.ix_(S, S)]
    K[:m, m] = 1.0
    K[m, :m] = 1.0
    rhs = np.append(b[S], 1.0)
    try:
        sol = np.linalg.solve(K, rhs)
    except np.linalg.LinAlgError:
        return None
    if np.any(sol[:m] < 0):
        return None
    z = np.zeros_like(w)
    z[S] = sol[:m]
    theta = sol[m]
    grad = 2.0 * A @ z - b
    scale = max(1.0, float(np.abs(grad).max()))
    if np.any(grad + theta < -1e-12 * scale):
        return None
    return z


def _fista_qp(A, b, proj, w0, L, tol=1e-14, max_iter=100000):
    """Accelerated projected gradient with restart for min w'Aw - b'w."""
    step = 1.0 / L if L > 0 else 1.0
    f = lambda z: z @ A @ z - b @ z
    x = proj(w0)
    state = FistaState.start(x)
    prev = f(x)
    for _ in range(max_iter):
        new = fista_update(state, lambda y: proj(y - step * (2.0 * A @ y - b)))
        val = f(new.x)
        if val > prev:
            new = FistaState(1.0, new.x.copy(), new.x)
        done = np.abs(new.x - state.x).max() <= tol
        state, prev = new, val
        if done:
            break
    return state.x


def restricted_solve(problem: ProblemSpec, support: Sequence[int], w0=None):
    """Minimize the objective with holdings confined to ``support``.

    Weights lie on the unit simplex and respect the partition's group budgets.
    Markowitz uses accelerated projected gradient, finished by an exact KKT
    solve on the detected active set when only the simplex binds. CVaR is
    solved as its linear program.
    """
    K = np.array(sorted(set(int(i) for i in support)), dtype=int)
    if K.size == 0:
        raise ValueError("restricted_solve needs a nonempty support")
    n = problem.n
    if problem.model == "cvar":
        w = _restricted_cvar_lp(problem, K)
        return w, problem.objective(w)

    mom = problem.mom
    lam = problem.markowitz.lambda_ridge
    A = mom.sigma[np.ix_(K, K)] + lam * np.eye(K.size)
    b = problem.markowitz.gamma_return * mom.mu[K]
    w = np.zeros(n)
    if K.size == 1:
        w[K] = 1.0
        if _budgets_bind(problem.partition, K):
            w = project_budgeted_simplex(w, problem.partition, support=K)
        return w, problem.objective(w)

    L = 2.0 * float(np.linalg.eigvalsh(A)[-1])
    if _budgets_bind(problem.partition, K):
        def proj(z):
            full = np.zeros(n)
            full[K] = z
            return project_budgeted_simplex(full, problem.partition, support=K)[K]
        start = np.full(K.size, 1.0 / K.size) if w0 is None else np.asarray(w0, float)[K]
        zK = _fista_qp(A, b, proj, start, L, tol=1e-13, max_iter=20000)
    else:
        start = np.full(K.size, 1.0 / K.size) if w0 is None else np.asarray(w0, float)[K]
        zK = _fista_qp(A, b, project_simplex, start, L)
        polished = _polish_simplex_qp(A, b, zK)
        if polished is not None:
            zK = polished
    w[K] = zK
    return w, problem.objective(w)


def _restricted_cvar_lp(problem: ProblemSpec, K: np.ndarray) -> np.ndarray:
    R = problem.R[:, K]
    N, k = R.shape
    beta = problem.cvar.beta
    # variables: [w_K (k), alpha (1), excess (N)]
    c = np.concatenate([np.zeros(k), [1.0], np.full(N, 1.0 / (N * (1.0 - beta)))])
    A_ub = np.hstack([-R, -np.ones((N, 1)), -np.eye(N)])
    b_ub = np.zeros(N)
    A_eq = np.concatenate([np.ones(k), [0.0], np.zeros(N)])[None, :]
    b_eq = [1.0]
    rows, rhs = [], []
    Kset = {int(i): j for j, i in enumerate(K)}
    for g in problem.partition.groups:
        cols = [Kset[i] for i in g.indices if i in Kset]
        if not cols or (g.p <= 0 and g.q >= 1):
            continue
        row = np.zeros(k + 1 + N)
        row[cols] = 1.0
        rows += [row, -row]
        rhs += [g.q, -g.p]
    if rows:
        A_ub = np.vstack([A_ub, np.array(rows)])
        b_ub = np.concatenate([b_ub, rhs])
    bounds = [(0.0, None)] * k + [(None, None)] + [(0.0, None)] * N
    res = linprog(c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq, bounds=bounds, method="highs")
    if res.status != 0:
        raise PartitionError(f"restricted CVaR program failed: {res.message}")
    wK = np.maximum(res.x[:k], 0.0)
    wK /= wK.sum()
    w = np.zeros(problem.n)
    w[K] = wK
    if _budgets_bind(problem.partition, K) and not np.all(
        [g.p - 1e-10 <= w[list(g.indices)].sum() <= g.q + 1e-10 for g in problem.partition.groups]
    ):
        w = project_budgeted_simplex(w, problem.partition, support=K)
    return w


# -- readout ----------------------------------------------------------------

def _readout_support(problem: ProblemSpec, v, w) -> list[int]:
    part = problem.partition
    support = set(np.nonzero(v)[0].tolist())
    for g in part.groups:
        if g.q > 0 and part.cardinality_free(g):
            support.update(g.indices)
    # make the support able to carry a full budget, filling groups with
    # spare cardinality in order of w
    def carries(s):
        caps = sum(g.q for g in part.groups if s.intersection(g.indices))
        lows = all(g.p <= 0 or s.intersection(g.indices) for g in part.groups)
        return caps >= 1.0 - 1e-12 and lows

    if not carries(support):
        for i in np.argsort(-np.asarray(w), kind="stable"):
            g = next(g for g in part.groups if i in g.indices)
            if g.q <= 0 or i in support:
                continue
            if len(support.intersection(g.indices)) < g.k:
                support.add(int(i))
                if carries(support):
                    break
    return sorted(support)


def _finish(problem, v, w, start_w=None):
    support = _readout_support(problem, v, w)
    weights, value = restricted_solve(problem, support)
    if start_w is not None:
        start_val = problem.objective(start_w)
        if start_val < value:
            return np.asarray(start_w, float).copy(), start_val
    return weights, value


# -- solvers ----------------------------------------------------------------

def _validate(problem: ProblemSpec):
    # GroupPartition validates at construction; re-check a ready instance
    GroupPartition(problem.partition.groups, problem.partition.n)


def _markowitz_lipschitz(problem: ProblemSpec, config: SolverConfig) -> LipschitzEstimate:
    sigma = problem.mom.sigma
    lam = problem.markowitz.lambda_ridge
    est = estimate_lipschitz(lambda x: sigma @ x + lam * x, problem.n, seed=config.seed)
    return replace(est, value=2.0 * est.value)


def _cvar_lipschitz(problem: ProblemSpec, config: SolverConfig) -> LipschitzEstimate:
    R = problem.R
    rho = problem.cvar.rho_relax

    def op(x):
        r = R @ x
        return R.T @ (r - r.mean())

    est = estimate_lipschitz(op, problem.n, seed=config.seed)
    return replace(est, value=rho * est.value)


def _initial_state(problem: ProblemSpec, init: PortfolioState | None) -> PortfolioState:
    n = problem.n
    w = np.full(n, 1.0 / n) if init is None else np.asarray(init.w, float).copy()
    v = project_omega(w, problem.partition)
    u = alpha = None
    if problem.model == "cvar":
        if init is not None and init.u is not None:
            u = np.asarray(init.u, float).copy()
        else:
            _, alpha = cvar_exact(w, problem.R, problem.cvar.beta)
            u = -(problem.R @ w) - alpha
    return PortfolioState(w, v, u, alpha)


def _check_descent(obj, prev, config, where):
    if config.check_descent and obj > prev + 1e-10 * max(1.0, abs(prev)):
        raise DescentError(
            f"{where}: relaxed objective rose from {prev:.17g} to {obj:.17g}; step size too large"
        )


def palm_markowitz(
    problem: ProblemSpec, config: SolverConfig | None = None, init: PortfolioState | None = None
) -> SolveReport:
    config = config or SolverConfig()
    _validate(problem)
    t0 = time.perf_counter()
    mom, params = problem.mom, problem.markowitz
    lip = _markowitz_lipschitz(problem, config)
    st = _initial_state(problem, init)
    w, v = st.w, st.v

    trace, stage_nus, stage_ends, stage_gaps = [], [], [], []
    converged = False
    step = config.step
    for nu in config.nus(lip.value):
        if config.step_mode == "lipschitz":
            step = 1.0 / (lip.value + nu)
        fs = FistaState.start(w)
        prev = markowitz_relaxed_value(w, v, mom, params, nu)
        converged = False
        for _ in range(config.max_iters):
            v_old = v
            grad_step = lambda y: project_simplex(y - step * markowitz_grad(y, v_old, mom, params, nu))
            new = _advance(fs, grad_step, config.accelerate, config.momentum)
            v = project_omega(new.x, problem.partition)
            obj = markowitz_relaxed_value(new.x, v, mom, params, nu)
            if config.accelerate:
                if config.restart and obj > prev:
                    new = FistaState(1.0, new.x.copy(), new.x)
            else:
                _check_descent(obj, prev, config, "palm_markowitz")
            dw = np.abs(new.x - fs.x).max()
            dv = np.abs(v - v_old).max()
            fs, prev = new, obj
            trace.append(obj)
            if dw <= config.tol and dv <= config.tol:
                converged = True
                break
        w = fs.x
        stage_nus.append(nu)
        stage_ends.append(len(trace))
        stage_gaps.append(float(np.linalg.norm(w - v)))

    state = PortfolioState(w, v)
    weights, value = _finish(problem, v, w)
    resid = stationarity_residual(state, problem, step, nu=stage_nus[-1])
    return SolveReport(
        state, weights, value, trace, stage_gaps[-1], len(trace), converged, resid,
        time.perf_counter() - t0, "palm_markowitz", stage_nus, stage_ends, stage_gaps,
        lip.converged,
    )


def palm_cvar(
    problem: ProblemSpec, config: SolverConfig | None = None, init: PortfolioState | None = None
) -> SolveReport:
    config = config or SolverConfig()
    _validate(problem)
    t0 = time.perf_counter()
    R, params = problem.R, problem.cvar
    N = R.shape[0]
    lip = _cvar_lipschitz(problem, config)
    st = _initial_state(problem, init)
    w, v, u = st.w, st.v, st.u

    trace, stage_nus, stage_ends, stage_gaps = [], [], [], []
    converged = False
    step_w = config.step
    step_u = config.step if config.step_mode == "fixed" else 1.0 / params.rho_relax
    for nu in config.nus(lip.value):
        if config.step_mode == "lipschitz":
            step_w = 1.0 / (lip.value + nu)
        fw, fu = FistaState.start(w), FistaState.start(u)
        prev = cvar_relaxed_value(w, u, v, R, params, nu)
        converged = False
        for _ in range(config.max_iters):
            v_old, u_cur = v, fu.x
            new_w = _advance(
                fw,
                lambda y: project_simplex(y - step_w * cvar_grad_w(y, u_cur, v_old, R, params, nu)),
                config.accelerate,
                config.momentum,
            )
            w_cur = new_w.x
            new_u = _advance(
                fu,
                lambda y: hinge_prox(y - step_u * cvar_grad_u(w_cur, y, R, params), step_u, params.beta, N),
                config.accelerate,
                config.momentum,
            )
            v = project_omega(w_cur, problem.partition)
            obj = cvar_relaxed_value(w_cur, new_u.x, v, R, params, nu)
            if config.accelerate:
                if config.restart and obj > prev:
                    new_w = FistaState(1.0, new_w.x.copy(), new_w.x)
                    new_u = FistaState(1.0, new_u.x.copy(), new_u.x)
            else:
                _check_descent(obj, prev, config, "palm_cvar")
            dw = np.abs(new_w.x - fw.x).max()
            dv = np.abs(v - v_old).max()
            fw, fu, prev = new_w, new_u, obj
            trace.append(obj)
            if dw <= config.tol and dv <= config.tol:
                converged = True
                break
        w, u = fw.x, fu.x
        stage_nus.append(nu)
        stage_ends.append(len(trace))
        stage_gaps.append(float(np.linalg.norm(w - v)))

    # the relaxed level sits 1/(rho N) below the VaR; the report also carries
    # the exact VaR of the returned portfolio
    state = PortfolioState(w, v, u, alpha_star(w, u, R, params.rho_relax))
    weights, value = _finish(problem, v, w)
    resid = stationarity_residual(state, problem, step_w, nu=stage_nus[-1])
    return SolveReport(
        state, weights, value, trace, stage_gaps[-1], len(trace), converged, resid,
        time.perf_counter() - t0, "palm_cvar", stage_nus, stage_ends, stage_gaps,
        lip.converged, cvar_exact(weights, R, params.beta)[1],
    )


def prox_grad_global_k(
    problem: ProblemSpec,
    config: SolverConfig | None = None,
    init: PortfolioState | None = None,
) -> SolveReport:
    """Projected gradient on {w in simplex, ||w||_0 <= k} without the ``v`` relaxation.

    For CVaR the hinge is still split off through ``u``. When ``init`` is
    given, the result is never worse than the starting portfolio.
    """
    config = config or SolverConfig()
    part = problem.partition
    if len(part.groups) != 1 or not part.is_global:
        raise PartitionError(
            "prox_grad_global_k needs a single all-asset group whose budget interval contains 1"
        )
    k = part.groups[0].k
    t0 = time.perf_counter()
    st = _initial_state(problem, init)
    # the default uniform start is not k-sparse; the first step's projection
    # picks the support, so no descent is claimed for that step
    w0 = st.w
    start_obj = problem.objective(w0) if np.count_nonzero(w0) <= k else math.inf
    trace = []
    converged = False

    if problem.model == "markowitz":
        mom, params = problem.mom, problem.markowitz
        lip = _markowitz_lipschitz(problem, config)
        step = 1.0 / lip.value if config.step_mode == "lipschitz" else config.step
        fs = FistaState.start(w0)
        prev = start_obj
        for _ in range(config.max_iters):
            new = _advance(
                fs,
                lambda y: project_sparse_simplex(y - step * markowitz_smooth_grad(y, mom, params), k),
                config.accelerate,
                config.momentum,
            )
            obj = problem.objective(new.x)
            if config.accelerate:
                if config.restart and obj > prev:
                    new = FistaState(1.0, new.x.copy(), new.x)
            else:
                _check_descent(obj, prev, config, "prox_grad_global_k")
            dw = np.abs(new.x - fs.x).max()
            fs, prev = new, obj
            trace.append(obj)
            if dw <= config.tol:
                converged = True
                break
        w, u = fs.x, None
    else:
        R, params = problem.R, problem.cvar
        N = R.shape[0]
        lip = _cvar_lipschitz(problem, config)
        step = 1.0 / lip.value if config.step_mode == "lipschitz" else config.step
        step_u = 1.0 / params.rho_relax if config.step_mode == "lipschitz" else config.step
        zero = np.zeros(problem.n)
        fw, fu = FistaState.start(w0), FistaState.start(st.u)
        prev = cvar_relaxed_value(w0, st.u, w0, R, params, 0.0) if start_obj < math.inf else math.inf
        for _ in range(config.max_iters):
            u_cur = fu.x
            new_w = _advance(
                fw,
                lambda y: project_sparse_simplex(y - step * cvar_grad_w(y, u_cur, zero, R, params, 0.0), k),
                config.accelerate,
                config.momentum,
            )
            w_cur = new_w.x
            new_u = _advance(
                fu,
                lambda y: hinge_prox(y - step_u * cvar_grad_u(w_cur, y, R, params), step_u, params.beta, N),
                config.accelerate,
                config.momentum,
            )
            obj = cvar_relaxed_value(w_cur, new_u.x, w_cur, R, params, 0.0)
            if config.accelerate:
                if config.restart and obj > prev:
                    new_w = FistaState(1.0, new_w.x.copy(), new_w.x)
                    new_u = FistaState(1.0, new_u.x.copy(), new_u.x)
            else:
                _check_descent(obj, prev, config, "prox_grad_global_k")
            dw = np.abs(new_w.x - fw.x).max()
            fw, fu, prev = new_w, new_u, obj
            trace.append(obj)
            if dw <= config.tol:
                converged = True
                break
        w, u = fw.x, fu.x

    state = PortfolioState(w, w.copy(), u)
    weights, value = _finish(problem, w, w, start_w=None if init is None else init.w)
    resid = stationarity_residual(state, problem, step, k=k)
    return SolveReport(
        state, weights, value, trace, 0.0, len(trace), converged, resid,
        time.perf_counter() - t0, "prox_grad_global_k", [0.0], [len(trace)], [0.0],
        lip.converged,
        None if problem.model == "markowitz" else cvar_exact(weights, problem.R, problem.cvar.beta)[1],
    )


def solve(problem: ProblemSpec, config: SolverConfig | None = None, init=None) -> SolveReport:
    """Pick the solver for the problem: PALM for Markowitz or CVaR."""
    if problem.model == "markowitz":
        return palm_markowitz(problem, config, init)
    return palm_cvar(problem, config, init)


def stationarity_residual(
    state: PortfolioState,
    problem: ProblemSpec,
    delta: float,
    nu: float = 0.0,
    k: int | None = None,
) -> float:
    """Fixed-point residual ``||w - P(w - delta * grad)||_inf``.

    ``P`` is the simplex projection, or the sparse-simplex projection when
    ``k`` is given. The gradient is that of the penalized objective at the
    state's ``v`` (and ``u`` for CVaR).
    """
    w = np.asarray(state.w, float)
    v = w if state.v is None else np.asarray(state.v, float)
    if problem.model == "markowitz":
        g = markowitz_grad(w, v, problem.mom, problem.markowitz, nu)
    else:
        u = state.u
        if u is None:
            _, a = cvar_exact(w, problem.R, problem.cvar.beta)
            u = -(problem.R @ w) - a
        g = cvar_grad_w(w, u, v, problem.R, problem.cvar, nu)
    z = w - delta * g
    target = project_simplex(z) if k is None else project_sparse_simplex(z, k)
    return float(np.abs(w - target).max())
