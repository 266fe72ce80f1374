import math
from itertools import combinations

import numpy as np
import pytest

from sparse_portfolio.constraints_projection import GroupPartition
from sparse_portfolio.experiments import comparison_problem
from sparse_portfolio.objectives import MarkowitzParams
from sparse_portfolio.oracle import (
    EnumerationCapError,
    colex_subsets,
    exhaustive_search,
    randomized_search_until,
)
from sparse_portfolio.problem import ProblemSpec
from sparse_portfolio.returns_data import Moments
from sparse_portfolio.solver import restricted_solve, solve


def diag_problem(d, k):
    n = len(d)
    return ProblemSpec("markowitz", GroupPartition.single(n, k),
                       moments=Moments(np.zeros(n), np.diag(d)), markowitz=MarkowitzParams(0.0))


class TestColex:
    def test_order_and_count(self):
        subs = list(colex_subsets(5, 3))
        assert len(subs) == math.comb(5, 3)
        assert subs[:4] == [(0, 1, 2), (0, 1, 3), (0, 2, 3), (1, 2, 3)]
        assert sorted(subs) == sorted(combinations(range(5), 3))
        # colex: ordered by the reversed tuple
        assert subs == sorted(subs, key=lambda s: s[::-1])

    def test_edge_sizes(self):
        assert list(colex_subsets(4, 4)) == [(0, 1, 2, 3)]
        assert list(colex_subsets(3, 0)) == [()]
        assert list(colex_subsets(2, 3)) == []


class TestExhaustive:
    def test_single_subset(self):
        prob = comparison_problem("markowitz", 3, 3, 0)
        res = exhaustive_search(prob)
        assert res.subsets_evaluated == 1
        assert res.best_value == pytest.approx(restricted_solve(prob, [0, 1, 2])[1], abs=0)

    def test_smallest_diagonal(self):
        res = exhaustive_search(diag_problem([4.0, 3.0, 2.0, 1.0], 1))
        assert res.best_support == (3,)
        assert res.best_value == 1.0

    def test_cap(self):
        with pytest.raises(EnumerationCapError) as err:
            exhaustive_search(comparison_problem("markowitz", 20, 10, 0), cap=1000)
        assert err.value.needed == math.comb(20, 10)

    def test_histogram_and_bounds(self, rng):
        prob = comparison_problem("markowitz", 9, 4, 1)
        res = exhaustive_search(prob)
        assert len(res.all_values) == math.comb(9, 4)
        assert res.best_value == min(res.all_values)
        for _ in range(50):
            K = rng.choice(9, 4, replace=False)
            assert res.best_value <= restricted_solve(prob, K)[1] + 1e-15

    def test_permutation_invariant(self, rng):
        prob = comparison_problem("markowitz", 8, 3, 2)
        perm = rng.permutation(8)
        moved = ProblemSpec("markowitz", prob.partition, prob.returns.subset(perm))
        a, b = exhaustive_search(prob), exhaustive_search(moved)
        assert b.best_value == pytest.approx(a.best_value, abs=1e-10)
        assert sorted(perm[list(b.best_support)]) == list(a.best_support)

    def test_threaded_matches_serial(self):
        prob = comparison_problem("cvar", 7, 3, 0)
        a = exhaustive_search(prob)
        b = exhaustive_search(prob, workers=3)
        assert a.all_values == b.all_values and a.best_support == b.best_support

    def test_quantile_rank(self):
        res = exhaustive_search(diag_problem([4.0, 3.0, 2.0, 1.0], 1))
        assert res.quantile_rank(1.0) == 0.0
        assert res.quantile_rank(2.5) == 0.5
        assert res.quantile_rank(10.0) == 1.0
        res.all_values = None
        with pytest.raises(ValueError):
            res.quantile_rank(1.0)

    def test_needs_single_group(self):
        prob = ProblemSpec("markowitz", GroupPartition.from_labels(["a", "b", "a"]),
                           moments=Moments(np.zeros(3), np.eye(3)))
        with pytest.raises(ValueError):
            exhaustive_search(prob)


class TestRandomized:
    def test_infinite_target_matches_at_once(self):
        prob = comparison_problem("markowitz", 10, 3, 0)
        elapsed, matched = randomized_search_until(prob, math.inf, 10.0, seed=1)
        assert matched and elapsed < 1.0

    def test_unreachable_target(self):
        # 30-choose-10 cannot be exhausted in the time cap
        prob = comparison_problem("markowitz", 30, 10, 0)
        elapsed, matched = randomized_search_until(prob, -1.0, 0.2, seed=1)
        assert not matched and elapsed >= 0.2

    def test_exhausted_small_space(self):
        prob = comparison_problem("markowitz", 5, 2, 0)
        best = exhaustive_search(prob).best_value
        _, matched = randomized_search_until(prob, best - 1.0, 60.0, seed=0)
        assert not matched
        _, matched = randomized_search_until(prob, best, 60.0, seed=0)
        assert matched

    def test_rejects_nan(self):
        with pytest.raises(ValueError):
            randomized_search_until(comparison_problem("markowitz", 5, 2, 0), math.nan, 1.0)

    def test_solver_value_reachable(self):
        prob = comparison_problem("markowitz", 10, 5, 0)
        rep = solve(prob)
        _, matched = randomized_search_until(prob, rep.objective, 30.0, seed=4)
        assert matched
