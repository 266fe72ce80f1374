"""Problem definition shared by the solvers, the oracle and the experiments."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np

from .objectives import CvarParams, MarkowitzParams, cvar_exact, markowitz_value
from .constraints_projection import GroupPartition
from .returns_data import Moments, ReturnsPanel, estimate_moments

MODELS = ("markowitz", "cvar")


@dataclass(frozen=True)
class ProblemSpec:
    """A portfolio problem: data, objective choice and group constraints.

    ``returns`` is always kept; Markowitz moments are estimated from it unless
    supplied explicitly.
    """

    model: str
    partition: GroupPartition
    returns: ReturnsPanel | None = None
    moments: Moments | None = None
    markowitz: MarkowitzParams = field(default_factory=MarkowitzParams)
    cvar: CvarParams = field(default_factory=CvarParams)

    def __post_init__(self):
        if self.model not in MODELS:
            raise ValueError(f"unknown model {self.model!r}; expected one of {MODELS}")
        if self.model == "cvar" and self.returns is None:
            raise ValueError("the CVaR model needs a returns panel")
        if self.model == "markowitz" and self.returns is None and self.moments is None:
            raise ValueError("the Markowitz model needs moments or a returns panel")
        if self.n != self.partition.n:
            raise ValueError(f"partition covers {self.partition.n} assets, data has {self.n}")

    @property
    def n(self) -> int:
        if self.moments is not None:
            return self.moments.mu.size
        return self.returns.n_assets

    @cached_property
    def mom(self) -> Moments:
        return self.moments if self.moments is not None else estimate_moments(self.returns)

    @property
    def R(self) -> np.ndarray:
        return self.returns.returns

    def objective(self, w) -> float:
        """Unrelaxed objective: Markowitz value, or the empirical CVaR."""
        if self.model == "markowitz":
            return markowitz_value(w, self.mom, self.markowitz)
        return cvar_exact(w, self.R, self.cvar.beta)[0]

    def with_partition(self, partition: GroupPartition) -> "ProblemSpec":
        return replace(self, partition=partition)

    def with_global_k(self, k: int) -> "ProblemSpec":
        return replace(self, partition=GroupPartition.single(self.n, k))

    def subset(self, indices) -> "ProblemSpec":
        """Same objective on a subset of assets, with no cardinality cap."""
        idx = list(indices)
        returns = self.returns.subset(idx) if self.returns is not None else None
        moments = None
        if self.moments is not None:
            moments = Moments(self.moments.mu[idx], self.moments.sigma[np.ix_(idx, idx)])
        return ProblemSpec(
            self.model,
            GroupPartition.single(len(idx)),
            returns,
            moments,
            self.markowitz,
            self.cvar,
        )
