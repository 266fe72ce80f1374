"""Ground truth by exhaustive subset enumeration, and randomized search timing."""

from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .problem import ProblemSpec
from .solver import restricted_solve

DEFAULT_CAP = 2_000_000


class EnumerationCapError(ValueError):
    def __init__(self, needed: int, cap: int):
        self.needed, self.cap = needed, cap
        super().__init__(f"exhaustive search needs {needed} subset solves, cap is {cap}")


@dataclass
class OracleResult:
    best_support: tuple[int, ...]
    best_value: float
    best_w: np.ndarray
    all_values: list[float] | None
    subsets_evaluated: int

    def quantile_rank(self, value: float, atol: float = 1e-10) -> float:
        """Fraction of subsets whose optimum is strictly below ``value - atol``."""
        if self.all_values is None:
            raise ValueError("per-subset values were not retained")
        vals = np.sort(self.all_values)
        return float(np.searchsorted(vals, value - atol, side="left") / vals.size)


def colex_subsets(n: int, k: int):
    """All size-k subsets of range(n) in colexicographic order."""
    if not 0 <= k <= n:
        return
    c = list(range(k)) + [n]
    while True:
        yield tuple(c[:k])
        j = 0
        while j < k and c[j] + 1 == c[j + 1]:
            j += 1
        if j >= k:
            return
        c[j] += 1
        c[:j] = range(j)


def _global_k(problem: ProblemSpec) -> int:
    groups = problem.partition.groups
    if len(groups) != 1:
        raise ValueError("exhaustive search supports a single global cardinality group only")
    return groups[0].k


def exhaustive_search(
    problem: ProblemSpec,
    k: int | None = None,
    cap: int = DEFAULT_CAP,
    keep_values: bool = True,
    workers: int = 1,
) -> OracleResult:
    n = problem.n
    k = _global_k(problem) if k is None else k
    needed = math.comb(n, k)
    if needed > cap:
        raise EnumerationCapError(needed, cap)

    subsets = list(colex_subsets(n, k))

    def run(K):
        return restricted_solve(problem, K)

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            results = list(pool.map(run, subsets))
    else:
        results = [run(K) for K in subsets]

    values = [float(v) for _, v in results]
    best = int(np.argmin(values))
    return OracleResult(
        subsets[best],
        values[best],
        results[best][0],
        values if keep_values else None,
        len(subsets),
    )


def randomized_search_until(
    problem: ProblemSpec,
    target_value: float,
    time_cap: float,
    seed: int = 0,
    k: int | None = None,
    atol: float = 1e-9,
) -> tuple[float, bool]:
    """Solve random size-k subsets until one reaches ``target_value + atol``.

    Subsets are drawn uniformly and never repeated. Returns the elapsed wall
    time and whether the target was met before ``time_cap`` seconds ran out
    (or before every subset had been tried).
    """
    if math.isnan(target_value) or target_value == -math.inf:
        raise ValueError("target must be a number above -inf")
    n = problem.n
    k = _global_k(problem) if k is None else k
    total = math.comb(n, k)
    rng = np.random.default_rng(seed)
    seen: set[tuple[int, ...]] = set()
    t0 = time.perf_counter()
    while True:
        K = tuple(np.sort(rng.choice(n, size=k, replace=False)).tolist())
        if K in seen:
            continue
        seen.add(K)
        _, value = restricted_solve(problem, K)
        elapsed = time.perf_counter() - t0
        if value <= target_value + atol:
            return elapsed, True
        if elapsed >= time_cap or len(seen) == total:
            return elapsed, False
