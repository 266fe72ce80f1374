"""Command-line entry point.

Subcommands: synth, estimate, solve, frontier, oracle, escape. Exit codes are
0 on success, 1 on a usage or validation error and 2 on a runtime failure.

A run config is a JSON object::

    {
      "seed": 0,
      "data": {"prices": "prices.csv"}            # or {"synthetic": {...}}
      "partition": "groups.json",                 # or a list, {"global_k": k},
                                                  # or {"by_sector": {...}}
      "objective": {"model": "markowitz", "gamma_return": 0.1},
      "solver": {"nu_schedule": [...], "max_iters": 5000, ...},
      "output_dir": "out"
    }

Relative paths resolve against the config file's directory.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from . import experiments as ex
from .constraints_projection import GroupPartition, GroupSpec, PartitionError, feasibility_problems
from .objectives import CvarParams, MarkowitzParams
from .oracle import DEFAULT_CAP, exhaustive_search
from .problem import MODELS, ProblemSpec
from .returns_data import (
    DataError,
    ReturnsPanel,
    SynthConfig,
    estimate_moments,
    read_prices_csv,
    returns_to_prices,
    synth_returns,
    to_returns,
)
from .solver import SolveReport, SolverConfig, solve


class ConfigError(ValueError):
    """Invalid run configuration. ``errors`` lists every problem found."""

    def __init__(self, errors):
        self.errors = [errors] if isinstance(errors, str) else list(errors)
        super().__init__("; ".join(self.errors))


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.format_usage()}{self.prog}: error: {message}")


# -- config -----------------------------------------------------------------

SYNTH_KEYS = {"n_assets", "n_samples", "sectors", "seed"} | {f.name for f in fields(SynthConfig)}
SOLVER_KEYS = {f.name for f in fields(SolverConfig)}
OBJECTIVE_KEYS = {"model", "gamma_return", "lambda_ridge", "beta", "rho_relax"}


@dataclass
class RunConfig:
    returns: ReturnsPanel
    problem: ProblemSpec
    solver: SolverConfig
    output_dir: Path
    seed: int
    raw: dict


def _read_json(path: Path, what: str):
    try:
        return json.loads(path.read_text())
    except FileNotFoundError:
        raise ConfigError(f"{what} file not found: {path}")
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{what} file {path} is not valid JSON: {exc}")


def load_returns(block, seed: int, base: Path) -> ReturnsPanel:
    if not isinstance(block, dict):
        raise ConfigError("'data' must be an object")
    sources = [k for k in ("prices", "synthetic") if k in block]
    if len(sources) != 1:
        raise ConfigError("'data' needs exactly one of 'prices' or 'synthetic'")
    if "prices" in block:
        path = base / block["prices"]
        if not path.is_file():
            raise ConfigError(f"prices file not found: {path}")
        sectors = block.get("sectors")
        panel = read_prices_csv(path)
        if isinstance(sectors, dict):
            missing = [t for t in panel.tickers if t not in sectors]
            if missing:
                raise ConfigError(f"'data.sectors' has no label for {missing[:10]}")
            sectors = [str(sectors[t]) for t in panel.tickers]
        return to_returns(panel, sectors)
    spec = dict(block["synthetic"])
    unknown = set(spec) - SYNTH_KEYS
    if unknown:
        raise ConfigError(f"unknown synthetic keys: {sorted(unknown)}")
    cfg = SynthConfig(**{k: float(spec.pop(k)) for k in list(spec) if k in {f.name for f in fields(SynthConfig)}})
    return synth_returns(
        int(spec.get("n_assets", ex.DEFAULT_UNIVERSE["n_assets"])),
        int(spec.get("n_samples", ex.DEFAULT_UNIVERSE["n_samples"])),
        spec.get("sectors", ex.DEFAULT_UNIVERSE["sectors"]),
        seed=int(spec.get("seed", seed)),
        config=cfg,
    )


def partition_from_groups(groups, tickers) -> GroupPartition:
    """Build a partition from ``[{name, tickers, p, q, k}, ...]``."""
    if not isinstance(groups, list):
        raise ConfigError("a group list must be a JSON array")
    where = {t: i for i, t in enumerate(tickers)}
    errs, specs = [], []
    for j, g in enumerate(groups):
        name = str(g.get("name", f"group_{j}"))
        names = g.get("tickers", [])
        unknown = [t for t in names if t not in where]
        if unknown:
            errs.append(f"group {name!r}: unknown tickers {unknown[:10]}")
            continue
        idx = tuple(sorted(where[t] for t in names))
        specs.append(GroupSpec(name, idx, float(g.get("p", 0.0)), float(g.get("q", 1.0)), int(g.get("k", len(idx)))))
    if errs:
        raise ConfigError(errs)
    return GroupPartition(tuple(specs), len(tickers))


def partition_to_groups(partition: GroupPartition, tickers) -> list[dict]:
    return [
        {"name": g.name, "tickers": [tickers[i] for i in g.indices], "p": g.p, "q": g.q, "k": g.k}
        for g in partition.groups
    ]


def load_partition(block, returns: ReturnsPanel, base: Path) -> GroupPartition:
    n = returns.n_assets
    if block is None:
        return GroupPartition.single(n)
    if isinstance(block, str):
        return partition_from_groups(_read_json(base / block, "partition"), returns.tickers)
    if isinstance(block, list):
        return partition_from_groups(block, returns.tickers)
    if isinstance(block, dict) and "global_k" in block:
        return GroupPartition.single(n, int(block["global_k"]))
    if isinstance(block, dict) and "by_sector" in block:
        opts = block["by_sector"] or {}
        if returns.sectors is None:
            raise ConfigError("'by_sector' partition needs sector labels in the data block")
        return GroupPartition.from_labels(
            list(returns.sectors),
            k=opts.get("k"),
            p=opts.get("p", 0.0),
            q=opts.get("q", 1.0),
            exclude=tuple(opts.get("exclude", ())),
        )
    raise ConfigError("'partition' must be a path, a group list, {'global_k': k} or {'by_sector': {...}}")


def objective_params(block) -> tuple[str, MarkowitzParams, CvarParams]:
    block = dict(block or {})
    unknown = set(block) - OBJECTIVE_KEYS
    if unknown:
        raise ConfigError(f"unknown objective keys: {sorted(unknown)}")
    model = block.get("model", "markowitz")
    if model not in MODELS:
        raise ConfigError(f"unknown model {model!r}; expected one of {list(MODELS)}")
    mk = MarkowitzParams(float(block.get("gamma_return", 0.1)), float(block.get("lambda_ridge", 0.0)))
    cv = CvarParams(float(block.get("beta", 0.9)), float(block.get("rho_relax", CvarParams().rho_relax)))
    return model, mk, cv


def solver_config(block, seed: int, overrides: dict | None = None) -> SolverConfig:
    block = dict(block or {})
    unknown = set(block) - SOLVER_KEYS
    if unknown:
        raise ConfigError(f"unknown solver keys: {sorted(unknown)}")
    block.setdefault("seed", seed)
    block.update({k: v for k, v in (overrides or {}).items() if v is not None})
    return SolverConfig(**block)


def load_run_config(raw: dict, base: Path = Path("."), overrides: dict | None = None) -> RunConfig:
    """Validate a parsed config, collecting every error before raising."""
    overrides = overrides or {}
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    seed = int(overrides.get("seed") if overrides.get("seed") is not None else raw.get("seed", 0))
    errs = []

    def attempt(fn, *args):
        try:
            return fn(*args)
        except (ConfigError, PartitionError) as exc:
            errs.extend(exc.errors)
        except (DataError, ValueError, TypeError, KeyError) as exc:
            errs.append(str(exc))
        return None

    returns = attempt(load_returns, raw.get("data"), seed, base)
    partition = None
    if returns is not None:
        partition = attempt(load_partition, raw.get("partition"), returns, base)
    obj = dict(raw.get("objective") or {})
    if overrides.get("model"):
        obj["model"] = overrides["model"]
    params = attempt(objective_params, obj)
    solver_over = {k: overrides.get(k) for k in ("nu_schedule", "max_iters", "tol", "accelerate", "step_mode", "step")}
    solver_over["seed"] = overrides.get("seed")
    scfg = attempt(solver_config, raw.get("solver"), seed, solver_over)
    problem = None
    if returns is not None and partition is not None and params is not None:
        model, mk, cv = params
        problem = attempt(lambda: ProblemSpec(model, partition, returns, markowitz=mk, cvar=cv))
    if errs:
        raise ConfigError(errs)
    out = overrides.get("output_dir") or raw.get("output_dir", "out")
    return RunConfig(returns, problem, scfg, base / out, seed, raw)


def read_run_config(path, overrides: dict | None = None) -> RunConfig:
    path = Path(path)
    raw = _read_json(path, "config")
    return load_run_config(raw, path.parent, overrides)


# -- outputs ----------------------------------------------------------------

def write_weights_csv(path: Path, tickers, weights) -> Path:
    return ex.write_csv(path, list(tickers), [[float(x) for x in weights]])


def report_dict(rep: SolveReport, run: RunConfig) -> dict:
    st = rep.state
    tickers = list(run.returns.tickers)
    return {
        "method": rep.method,
        "model": run.problem.model,
        "objective": rep.objective,
        "weights": rep.weights.tolist(),
        "support": [tickers[i] for i in rep.support],
        "relax_gap": rep.relax_gap,
        "iterations": rep.iterations,
        "converged": rep.converged,
        "stationarity_residual": rep.stationarity_residual,
        "wall_time": rep.wall_time,
        "objective_trace": rep.objective_trace,
        "stage_nus": rep.stage_nus,
        "stage_ends": rep.stage_ends,
        "stage_gaps": rep.stage_gaps,
        "lipschitz_converged": rep.lipschitz_converged,
        "alpha": rep.alpha,
        "state": {
            "w": st.w.tolist(),
            "v": st.v.tolist(),
            "u": None if st.u is None else st.u.tolist(),
            "alpha": st.alpha,
        },
        "tickers": tickers,
        "partition": partition_to_groups(run.problem.partition, tickers),
        "seed": run.seed,
        "config_hash": ex.config_hash(run.raw),
    }


def check_report(report: dict) -> list[str]:
    """Feasibility problems of the weights in a parsed ``report.json``."""
    part = partition_from_groups(report["partition"], report["tickers"])
    return feasibility_problems(np.asarray(report["weights"], float), part)


# -- subcommands ------------------------------------------------------------

def _overrides(args) -> dict:
    keys = ("seed", "model", "max_iters", "tol", "accelerate", "step_mode", "step", "output_dir")
    out = {k: getattr(args, k, None) for k in keys}
    if getattr(args, "nu_schedule", None):
        out["nu_schedule"] = tuple(args.nu_schedule)
    return out


def cmd_synth(args) -> str:
    panel = synth_returns(
        args.n_assets, args.n_samples, args.sectors, seed=args.seed,
        config=SynthConfig(args.factor_vol, args.idio_vol, args.mean_low, args.mean_high),
    )
    out = Path(args.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    prices = returns_to_prices(panel)
    ex.write_csv(out / "prices.csv", ["date", *prices.tickers],
                 ([d, *map(float, row)] for d, row in zip(prices.dates, prices.prices)))
    ex.write_csv(out / "returns.csv", list(panel.tickers), panel.returns.tolist())
    sectors = {t: s for t, s in zip(panel.tickers, panel.sectors)}
    (out / "sectors.json").write_text(json.dumps(sectors, indent=1))
    return f"wrote {panel.n_samples}x{panel.n_assets} returns to {out}"


def cmd_estimate(args) -> str:
    run = read_run_config(args.config, _overrides(args))
    mom = estimate_moments(run.returns)
    out = run.output_dir
    tickers = list(run.returns.tickers)
    meta = {"config_hash": ex.config_hash(run.raw), "seed": run.seed}
    ex.write_csv(out / "mu.csv", ["ticker", "mu"], zip(tickers, map(float, mom.mu)), meta)
    ex.write_csv(out / "sigma.csv", tickers, mom.sigma.tolist(), meta)
    return f"estimated moments for {len(tickers)} assets from {run.returns.n_samples} samples"


def cmd_solve(args) -> str:
    run = read_run_config(args.config, _overrides(args))
    rep = solve(run.problem, run.solver)
    out = run.output_dir
    write_weights_csv(out / "weights.csv", run.returns.tickers, rep.weights)
    (out / "report.json").write_text(json.dumps(report_dict(rep, run), indent=1))
    return rep.summary()


def cmd_frontier(args) -> str:
    run = read_run_config(args.config, _overrides(args))
    if run.returns.sectors is None:
        raise ConfigError("frontier variants need sector labels in the data block")
    model = run.problem.model
    variants = ex.default_variants(list(run.returns.sectors), args.exclude, args.k)
    if model == "markowitz":
        grid = args.grid or np.linspace(0.0, 1.5, 31).tolist()
        curves = ex.frontier_markowitz(grid, variants, run.returns, run.solver,
                                       run.problem.markowitz.lambda_ridge)
    else:
        grid = args.grid or np.linspace(0.5, 0.95, 10).tolist()
        curves = ex.frontier_cvar(grid, variants, run.returns, run.solver, run.problem.cvar.rho_relax)
    meta = {"config_hash": ex.config_hash([run.raw, args.grid, args.k, args.exclude]), "seed": run.seed}
    path = ex.write_frontier_csv(run.output_dir / f"frontier_{model}.csv", curves, meta)
    failed = sum(p.error is not None for c in curves for p in c.points)
    return f"{len(curves)} curves x {len(grid)} points to {path} ({failed} failed)"


def cmd_oracle(args) -> str:
    run = read_run_config(args.config, _overrides(args))
    prob = run.problem if args.k is None else run.problem.with_global_k(args.k)
    res = exhaustive_search(prob, cap=args.cap)
    rep = solve(prob, run.solver)
    k = prob.partition.groups[0].k
    meta = {"config_hash": ex.config_hash([run.raw, args.k]), "seed": run.seed,
            "solver_value": repr(rep.objective)}
    out = run.output_dir
    ex.write_csv(out / f"histogram_{prob.model}_{prob.n}_{k}.csv", ["subset_rank", "value"],
                 enumerate(res.all_values), meta)
    tickers = run.returns.tickers
    summary = {
        "best_value": res.best_value,
        "best_support": [tickers[i] for i in res.best_support],
        "subsets_evaluated": res.subsets_evaluated,
        "solver_value": rep.objective,
        "solver_quantile_rank": res.quantile_rank(rep.objective),
        "config_hash": meta["config_hash"],
        "seed": run.seed,
    }
    if args.timing_trials:
        rows = ex.timing_comparison(
            prob.model, prob.n, k, args.timing_trials, run.seed, args.time_cap, run.solver,
            problem_factory=lambda *_: prob,
        )
        ex.write_timing_csv(out / "timing.csv", rows, meta)
        for method in ("solver", "random_search"):
            summary[f"mean_{method}_seconds"] = float(np.mean([r.elapsed_seconds for r in rows if r.method == method]))
    (out / "oracle.json").write_text(json.dumps(summary, indent=1))
    return (f"best={res.best_value:.10g} solver={rep.objective:.10g} "
            f"rank={summary['solver_quantile_rank']:.4f} subsets={res.subsets_evaluated}")


def cmd_escape(args) -> str:
    universe = None
    raw = {"n": args.n, "k": args.k, "trials": args.trials, "model": args.model, "seed": args.seed}
    scfg = None
    mk, cv = None, None
    if args.config:
        run = read_run_config(args.config, _overrides(args))
        universe, scfg, raw = run.returns, run.solver, {**raw, "config": run.raw}
        if run.problem.model == args.model:
            mk, cv = run.problem.markowitz, run.problem.cvar
    bad = [f"k={k} > n={n}" for n in args.n for k in args.k if k > n]
    if bad or args.trials < 1:
        raise ConfigError(bad + (["trials must be at least 1"] if args.trials < 1 else []))
    table = ex.escape_experiment(args.n, args.k, args.trials, args.model, args.seed, universe,
                                 scfg, markowitz=mk, cvar=cv)
    path = ex.write_escape_csv(Path(args.output_dir) / f"escape_{args.model}.csv", table,
                               {"config_hash": ex.config_hash(raw), "seed": args.seed})
    cells = " ".join(f"n={r.n},k={r.k}:{r.fraction:g}" for r in table.rows)
    return f"{cells} -> {path}"


# -- parser -----------------------------------------------------------------

def _solver_flags(p):
    p.add_argument("--config", required=True, help="run config (JSON)")
    p.add_argument("--seed", type=int)
    p.add_argument("--output-dir", dest="output_dir")
    p.add_argument("--model", choices=["markowitz", "cvar"])
    p.add_argument("--nu-schedule", dest="nu_schedule", type=float, nargs="+")
    p.add_argument("--max-iters", dest="max_iters", type=int)
    p.add_argument("--tol", type=float)
    p.add_argument("--step-mode", dest="step_mode", choices=["lipschitz", "fixed"])
    p.add_argument("--step", type=float)
    acc = p.add_mutually_exclusive_group()
    acc.add_argument("--accelerate", dest="accelerate", action="store_true", default=None)
    acc.add_argument("--no-accelerate", dest="accelerate", action="store_false")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="sparse-portfolio", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("synth", help="write a seeded synthetic price/returns panel")
    p.add_argument("--n-assets", dest="n_assets", type=int, default=ex.DEFAULT_UNIVERSE["n_assets"])
    p.add_argument("--n-samples", dest="n_samples", type=int, default=ex.DEFAULT_UNIVERSE["n_samples"])
    p.add_argument("--sectors", type=int, default=ex.DEFAULT_UNIVERSE["sectors"])
    p.add_argument("--seed", type=int, default=ex.DEFAULT_SEED)
    d = SynthConfig()
    p.add_argument("--factor-vol", dest="factor_vol", type=float, default=d.factor_vol)
    p.add_argument("--idio-vol", dest="idio_vol", type=float, default=d.idio_vol)
    p.add_argument("--mean-low", dest="mean_low", type=float, default=d.mean_low)
    p.add_argument("--mean-high", dest="mean_high", type=float, default=d.mean_high)
    p.add_argument("--output-dir", dest="output_dir", default="out")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("estimate", help="estimate mean and covariance")
    _solver_flags(p)
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("solve", help="solve one problem")
    _solver_flags(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("frontier", help="sweep an efficient frontier")
    _solver_flags(p)
    p.add_argument("--grid", type=float, nargs="+", help="gamma (Markowitz) or beta (CVaR) values")
    p.add_argument("--k", type=int, default=2, help="per-sector cardinality in the capped variants")
    p.add_argument("--exclude", nargs=2, help="two sector labels to drop")
    p.set_defaults(func=cmd_frontier)

    p = sub.add_parser("oracle", help="exhaustive subset search for a global-k problem")
    _solver_flags(p)
    p.add_argument("--k", type=int, help="global cardinality (overrides the partition)")
    p.add_argument("--cap", type=int, default=DEFAULT_CAP)
    p.add_argument("--timing-trials", dest="timing_trials", type=int, default=0)
    p.add_argument("--time-cap", dest="time_cap", type=float, default=20.0)
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("escape", help="stationarity escape study")
    p.add_argument("--model", choices=["markowitz", "cvar"], required=True)
    p.add_argument("--n", type=int, nargs="+", required=True)
    p.add_argument("--k", type=int, nargs="+", required=True)
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--seed", type=int, default=ex.DEFAULT_SEED)
    p.add_argument("--config", help="optional run config supplying the universe and solver block")
    p.add_argument("--output-dir", dest="output_dir", default="out")
    p.set_defaults(func=cmd_escape)
    return parser


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    if args.command is None:
        parser.print_usage(sys.stderr)
        return 1
    try:
        line = args.func(args)
    except (ConfigError, PartitionError) as exc:
        print("invalid configuration:", file=sys.stderr)
        for e in exc.errors:
            print(f"  - {e}", file=sys.stderr)
        return 1
    except DataError as exc:
        print(f"invalid data: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # anything past validation is a runtime failure
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    print(line)
    return 0


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
