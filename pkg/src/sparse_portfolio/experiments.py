"""Desk-scale studies: efficient frontiers, stationarity escape, brute-force comparison.

Every study returns plain Python records and can emit CSV. Each CSV starts
with one ``#`` comment line carrying the config hash and seed.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
import time
from dataclasses import asdict, dataclass, field, is_dataclass, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .objectives import CvarParams, MarkowitzParams, PortfolioState, cvar_exact
from .oracle import DEFAULT_CAP, EnumerationCapError, exhaustive_search, randomized_search_until
from .problem import ProblemSpec
from .constraints_projection import GroupPartition, feasibility_problems
from .returns_data import ReturnsPanel, estimate_moments, synth_returns
from .solver import SolverConfig, prox_grad_global_k, restricted_solve, solve

DEFAULT_SEED = 20180621
DEFAULT_UNIVERSE = dict(n_assets=65, n_samples=251, sectors=7)
# Escape study default: minimum variance. With gamma = 0 and nonnegative
# covariances a k=1 start provably stays put under step 1/L.
ESCAPE_MARKOWITZ = MarkowitzParams(gamma_return=0.0)


def default_universe(seed: int = DEFAULT_SEED) -> ReturnsPanel:
    return synth_returns(seed=seed, **DEFAULT_UNIVERSE)


def config_hash(obj) -> str:
    def plain(x):
        if is_dataclass(x):
            return plain(asdict(x))
        if isinstance(x, dict):
            return {str(k): plain(v) for k, v in x.items()}
        if isinstance(x, (list, tuple)):
            return [plain(v) for v in x]
        if isinstance(x, np.ndarray):
            return x.tolist()
        if isinstance(x, np.generic):
            return x.item()
        return x

    blob = json.dumps(plain(obj), sort_keys=True, default=str)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def write_csv(path, header: Sequence[str], rows, meta: dict | None = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        if meta is not None:
            fh.write("# " + " ".join(f"{k}={v}" for k, v in meta.items()) + "\n")
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([repr(x) if isinstance(x, float) else x for x in row])
    return path


def read_csv(path) -> tuple[list[str], list[list[str]]]:
    """Header and rows of a CSV written by :func:`write_csv` (comment lines skipped)."""
    with open(path, newline="") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    rows = list(csv.reader(lines))
    return rows[0], rows[1:]


# -- frontiers --------------------------------------------------------------

@dataclass
class FrontierPoint:
    parameter: float
    risk: float
    reward: float
    weights: np.ndarray
    label: str
    objective: float = math.nan
    error: str | None = None


@dataclass
class FrontierCurve:
    label: str
    partition: GroupPartition
    points: list[FrontierPoint] = field(default_factory=list)


def default_variants(
    labels: Sequence[str], exclude: Sequence[str] | None = None, k: int = 2
) -> list[tuple[str, GroupPartition]]:
    """Unconstrained baseline plus two sector-capped models.

    The first model drops one sector and allows ``k`` holdings per remaining
    sector; the second drops two sectors. By default the dropped sectors are
    the last two labels in order of appearance.
    """
    names = list(dict.fromkeys(labels))
    if exclude is None:
        exclude = names[-2:][::-1]
    n = len(labels)
    return [
        ("unconstrained", GroupPartition.single(n)),
        (f"exclude_{exclude[0]}_k{k}", GroupPartition.from_labels(labels, k=k, exclude=exclude[:1])),
        (
            f"exclude_{exclude[0]}_{exclude[1]}_k{k}",
            GroupPartition.from_labels(labels, k=k, exclude=exclude[:2]),
        ),
    ]


def frontier_markowitz(
    gamma_grid: Sequence[float],
    variants: Sequence[tuple[str, GroupPartition]],
    returns: ReturnsPanel,
    config: SolverConfig | None = None,
    lambda_ridge: float = 0.0,
) -> list[FrontierCurve]:
    grid = [float(g) for g in gamma_grid]
    if not grid:
        raise ValueError("gamma_grid must be nonempty")
    moments = estimate_moments(returns)
    curves = []
    for label, part in variants:
        curve = FrontierCurve(label, part)
        for gamma in grid:
            params = MarkowitzParams(gamma, lambda_ridge)
            prob = ProblemSpec("markowitz", part, returns, moments, markowitz=params)
            try:
                rep = solve(prob, config)
                w = rep.weights
                curve.points.append(
                    FrontierPoint(gamma, float(w @ moments.sigma @ w), float(moments.mu @ w), w, label, rep.objective)
                )
            except Exception as exc:  # recorded per point, the sweep continues
                curve.points.append(
                    FrontierPoint(gamma, math.nan, math.nan, np.full(prob.n, math.nan), label, error=str(exc))
                )
        curves.append(curve)
    return curves


def frontier_cvar(
    beta_grid: Sequence[float],
    variants: Sequence[tuple[str, GroupPartition]],
    returns: ReturnsPanel,
    config: SolverConfig | None = None,
    rho_relax: float | None = None,
) -> list[FrontierCurve]:
    grid = [float(b) for b in beta_grid]
    if not grid or any(not 0 < b < 1 for b in grid):
        raise ValueError("beta_grid must be nonempty and inside (0, 1)")
    rho = CvarParams().rho_relax if rho_relax is None else rho_relax
    curves = []
    for label, part in variants:
        curve = FrontierCurve(label, part)
        for beta in grid:
            prob = ProblemSpec("cvar", part, returns, cvar=CvarParams(beta, rho))
            try:
                rep = solve(prob, config)
                phi, alpha = cvar_exact(rep.weights, returns.returns, beta)
                curve.points.append(FrontierPoint(beta, phi, alpha, rep.weights, label, phi))
            except Exception as exc:
                curve.points.append(
                    FrontierPoint(beta, math.nan, math.nan, np.full(prob.n, math.nan), label, error=str(exc))
                )
        curves.append(curve)
    return curves


def frontier_rows(curves: Sequence[FrontierCurve]):
    for c in curves:
        for p in c.points:
            yield [p.label, p.parameter, p.risk, p.reward, *map(float, p.weights)]


def write_frontier_csv(path, curves: Sequence[FrontierCurve], meta: dict | None = None) -> Path:
    n = curves[0].partition.n
    header = ["label", "parameter", "risk", "reward", *[f"w_{i}" for i in range(n)]]
    return write_csv(path, header, frontier_rows(curves), meta)


def check_frontier_weights(curves: Sequence[FrontierCurve]) -> list[str]:
    errs = []
    for c in curves:
        for p in c.points:
            if p.error is None:
                errs += [f"{c.label} @ {p.parameter}: {e}" for e in feasibility_problems(p.weights, c.partition)]
    return errs


# -- stationarity escape ----------------------------------------------------

@dataclass(frozen=True)
class EscapeRow:
    model: str
    n: int
    k: int
    fraction: float
    trials: int


@dataclass
class EscapeTable:
    rows: list[EscapeRow] = field(default_factory=list)

    def fraction(self, model: str, n: int, k: int) -> float:
        for r in self.rows:
            if (r.model, r.n, r.k) == (model, n, k):
                return r.fraction
        raise KeyError((model, n, k))


def escape_trials(
    problem: ProblemSpec,
    k: int,
    trials: int,
    seed: int,
    config: SolverConfig | None = None,
    threshold: float = 1e-9,
) -> list[tuple[float, float]]:
    """(initial, final) objective pairs for the escape procedure on one problem.

    Each trial draws a support of size ``k``, solves the restricted problem
    there and restarts the sparse projected-gradient method from that point.
    """
    if trials < 1:
        raise ValueError("trials must be at least 1")
    if not 1 <= k <= problem.n:
        raise ValueError(f"need 1 <= k <= n, got k={k}, n={problem.n}")
    prob = problem.with_global_k(k)
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(trials):
        K = np.sort(rng.choice(prob.n, size=k, replace=False))
        w_init, f_init = restricted_solve(prob, K)
        rep = prox_grad_global_k(prob, config, init=PortfolioState(w_init, w_init.copy()))
        out.append((f_init, rep.objective))
    return out


def escape_experiment(
    n_list: Sequence[int],
    k_list: Sequence[int],
    trials: int,
    model: str,
    seed: int = DEFAULT_SEED,
    universe: ReturnsPanel | None = None,
    config: SolverConfig | None = None,
    markowitz: MarkowitzParams | None = None,
    cvar: CvarParams | None = None,
    threshold: float = 1e-9,
) -> EscapeTable:
    """Fraction of trials in which the solver improves on a restricted optimum.

    For each ``n`` a seeded subset of ``n`` assets is drawn from the universe;
    a trial counts when the final objective is below the start by more than
    ``threshold``. Markowitz defaults to :data:`ESCAPE_MARKOWITZ`.
    """
    universe = universe if universe is not None else default_universe(seed)
    rng = np.random.default_rng(seed)
    table = EscapeTable()
    for n in n_list:
        if n > universe.n_assets:
            raise ValueError(f"universe has {universe.n_assets} assets, asked for n={n}")
        assets = np.sort(rng.choice(universe.n_assets, size=n, replace=False))
        panel = universe.subset(assets)
        base = ProblemSpec(
            model,
            GroupPartition.single(n),
            panel,
            markowitz=markowitz or ESCAPE_MARKOWITZ,
            cvar=cvar or CvarParams(),
        )
        for k in k_list:
            cell_seed = int(rng.integers(2**31))
            pairs = escape_trials(base, k, trials, cell_seed, config, threshold)
            hits = sum(final < init - threshold for init, final in pairs)
            table.rows.append(EscapeRow(model, n, k, hits / trials, trials))
    return table


def write_escape_csv(path, table: EscapeTable, meta: dict | None = None) -> Path:
    rows = ([r.model, r.n, r.k, r.trials, r.fraction] for r in table.rows)
    return write_csv(path, ["model", "n", "k", "trials", "fraction"], rows, meta)


# -- brute-force comparison -------------------------------------------------

@dataclass
class BruteForceResult:
    model: str
    n: int
    k: int
    solver_value: float
    best_value: float
    quantile_rank: float
    subsets: int
    solver_time: float
    histogram_path: Path | None = None
    note: str | None = None


def comparison_problem(model: str, n: int, k: int, seed: int, sectors: int = 1) -> ProblemSpec:
    panel = synth_returns(n, DEFAULT_UNIVERSE["n_samples"], sectors, seed=seed)
    return ProblemSpec(model, GroupPartition.single(n, k), panel)


def brute_force_comparison(
    sizes: Sequence[tuple[int, int]],
    model: str,
    seed: int = DEFAULT_SEED,
    out_dir=None,
    config: SolverConfig | None = None,
    cap: int = DEFAULT_CAP,
    problem_factory=comparison_problem,
) -> list[BruteForceResult]:
    results = []
    for n, k in sizes:
        prob = problem_factory(model, n, k, seed)
        try:
            oracle = exhaustive_search(prob, k, cap=cap, keep_values=True)
        except EnumerationCapError as exc:
            results.append(
                BruteForceResult(model, n, k, math.nan, math.nan, math.nan, 0, 0.0, note=f"skipped: {exc}")
            )
            continue
        rep = solve(prob, config)
        path = None
        if out_dir is not None:
            meta = {"config_hash": config_hash([model, n, k, seed, config]), "seed": seed,
                    "solver_value": repr(rep.objective)}
            path = write_csv(
                Path(out_dir) / f"histogram_{model}_{n}_{k}.csv",
                ["subset_rank", "value"],
                enumerate(oracle.all_values),
                meta,
            )
        results.append(
            BruteForceResult(
                model, n, k, rep.objective, oracle.best_value,
                oracle.quantile_rank(rep.objective), oracle.subsets_evaluated,
                rep.wall_time, path,
            )
        )
    return results


# -- timing -----------------------------------------------------------------

@dataclass(frozen=True)
class TimingRow:
    trial: int
    method: str
    elapsed_seconds: float
    matched: bool


def timing_comparison(
    model: str,
    n: int = 30,
    k: int = 10,
    trials: int = 20,
    seed: int = DEFAULT_SEED,
    time_cap: float = 20.0,
    config: SolverConfig | None = None,
    problem_factory=comparison_problem,
) -> list[TimingRow]:
    """Solver wall time against randomized search for the solver's value.

    Each trial times one solve, then runs the randomized search (seeded per
    trial) until it reaches the solver's objective or ``time_cap`` expires.
    A capped search records ``matched=False``; its time is a lower bound.
    """
    if trials < 1:
        raise ValueError("trials must be at least 1")
    prob = problem_factory(model, n, k, seed)
    rows = []
    for trial in range(trials):
        t0 = time.perf_counter()
        rep = solve(prob, config)
        rows.append(TimingRow(trial, "solver", time.perf_counter() - t0, True))
        elapsed, matched = randomized_search_until(prob, rep.objective, time_cap, seed=seed + trial)
        rows.append(TimingRow(trial, "random_search", elapsed, matched))
    return rows


def write_timing_csv(path, rows: Sequence[TimingRow], meta: dict | None = None) -> Path:
    out = ([r.trial, r.method, r.elapsed_seconds, r.matched] for r in rows)
    return write_csv(path, ["trial", "method", "elapsed_seconds", "matched"], out, meta)


# -- acceleration -----------------------------------------------------------

@dataclass(frozen=True)
class AccelerationResult:
    plain_iterations: int
    accelerated_iterations: int | None
    target: float
    plain_objective: float
    accelerated_objective: float


def _first_hit(report, target: float, tol: float) -> int | None:
    """Iterations until the final-stage relaxed objective is within ``tol`` of ``target``."""
    start = report.stage_ends[-2] if len(report.stage_ends) > 1 else 0
    trace = np.asarray(report.objective_trace[start:])
    hit = np.nonzero(trace <= target + tol)[0]
    return int(start + hit[0] + 1) if hit.size else None


def acceleration_comparison(
    problem: ProblemSpec, config: SolverConfig | None = None, tol: float = 1e-6
) -> AccelerationResult:
    """Iterations the plain and accelerated solvers need to reach the plain final value.

    Both runs share every setting except acceleration. The target is the
    plain run's last relaxed objective; each count is the first iteration in
    the final penalty stage whose value is within ``tol`` of it.
    """
    config = config or SolverConfig()
    plain = solve(problem, replace(config, accelerate=False))
    fast = solve(problem, replace(config, accelerate=True))
    target = plain.objective_trace[-1]
    return AccelerationResult(
        _first_hit(plain, target, tol), _first_hit(fast, target, tol), target,
        plain.objective, fast.objective,
    )
