"""Cardinality-constrained portfolio selection by penalty relaxation.

Markowitz and CVaR objectives are minimized over the unit simplex intersected
with per-group budget and cardinality limits. The solvers alternate a
projected gradient step on a dense iterate with an exact projection onto the
sparse grouped set.
"""

from .constraints_projection import (
    GroupPartition,
    GroupSpec,
    PartitionError,
    feasibility_problems,
    is_feasible,
    project_box_sum,
    project_group,
    project_omega,
    project_simplex,
    project_sparse_simplex,
    project_topk,
)
from .objectives import (
    CvarParams,
    MarkowitzParams,
    PortfolioState,
    alpha_star,
    cvar_exact,
    cvar_grad_u,
    cvar_grad_w,
    cvar_relaxed_value,
    hinge_prox,
    markowitz_grad,
    markowitz_value,
)
from .oracle import OracleResult, exhaustive_search, randomized_search_until
from .problem import ProblemSpec
from .returns_data import (
    DataError,
    Moments,
    PricePanel,
    ReturnsPanel,
    SynthConfig,
    estimate_moments,
    load_prices,
    synth_returns,
    to_returns,
)
from .solver import (
    SolveReport,
    SolverConfig,
    estimate_lipschitz,
    palm_cvar,
    palm_markowitz,
    prox_grad_global_k,
    restricted_solve,
    solve,
    stationarity_residual,
)

__version__ = "0.1.0"
