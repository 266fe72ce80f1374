"""Independent oracles shared by the test modules.

Nothing here calls into the package's own projection or QP code. The convex
oracles enumerate faces of the feasible polytope: for every candidate active
set the KKT system is solved in closed form, infeasible candidates are
dropped and the best survivor is the exact minimizer.
"""

from itertools import combinations

import numpy as np
import pytest


def box_sum_oracle(u, p, q):
    """argmin ||z - u||^2 over {z >= 0, p <= sum(z) <= q} by face enumeration."""
    u = np.asarray(u, float)
    l = u.size
    best, best_val = None, np.inf
    candidates = [np.zeros(l)]
    for m in range(1, l + 1):
        for F in combinations(range(l), m):
            F = list(F)
            # sum constraint inactive, or pinned at p or at q
            z = np.zeros(l)
            z[F] = u[F]
            candidates.append(z)
            for c in (p, q):
                z = np.zeros(l)
                z[F] = u[F] - (u[F].sum() - c) / m
                candidates.append(z)
    for z in candidates:
        s = z.sum()
        if np.all(z >= -1e-13) and p - 1e-12 <= s <= q + 1e-12:
            val = float(np.sum((z - u) ** 2))
            if val < best_val - 1e-15:
                best, best_val = np.maximum(z, 0.0), val
    return best


def group_projection_oracle(y, p, q, k):
    """Projection onto {z >= 0, p <= sum(z) <= q, ||z||_0 <= k}: best box-sum
    projection over every size-k support."""
    y = np.asarray(y, float)
    best, best_val = None, np.inf
    for S in combinations(range(y.size), k):
        S = list(S)
        z = np.zeros_like(y)
        z[S] = box_sum_oracle(y[S], p, q)
        val = float(np.sum((z - y) ** 2))
        if val < best_val - 1e-13:
            best, best_val = z, val
    return best, best_val


def simplex_qp_oracle(A, b):
    """argmin z'Az - b'z over the unit simplex, A positive definite, by face enumeration."""
    A, b = np.asarray(A, float), np.asarray(b, float)
    l = b.size
    best, best_val = None, np.inf
    for m in range(1, l + 1):
        for F in combinations(range(l), m):
            F = list(F)
            K = np.zeros((m + 1, m + 1))
            K[:m, :m] = 2 * A[np.ix_(F, F)]
            K[:m, m] = 1.0
            K[m, :m] = 1.0
            sol = np.linalg.solve(K, np.append(b[F], 1.0))
            if np.any(sol[:m] < -1e-12):
                continue
            z = np.zeros(l)
            z[F] = np.maximum(sol[:m], 0)
            z /= z.sum()
            val = float(z @ A @ z - b @ z)
            if val < best_val:
                best, best_val = z, val
    return best, best_val


def naive_markowitz(w, sigma, mu, gamma, lam):
    n = len(w)
    total = 0.0
    for i in range(n):
        for j in range(n):
            total += w[i] * (sigma[i][j] + (lam if i == j else 0.0)) * w[j]
    for i in range(n):
        total -= gamma * mu[i] * w[i]
    return total


def two_pass_moments(R):
    R = np.asarray(R, float)
    N, n = R.shape
    mu = np.array([sum(R[j, i] for j in range(N)) / N for i in range(n)])
    S = np.zeros((n, n))
    for a in range(n):
        for b in range(n):
            S[a, b] = sum((R[j, a] - mu[a]) * (R[j, b] - mu[b]) for j in range(N)) / N
    return mu, S


def central_diff(f, x, h=1e-6):
    x = np.asarray(x, float)
    g = np.zeros_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        g[i] = (f(x + e) - f(x - e)) / (2 * h)
    return g


def rel_err(a, b):
    a, b = np.asarray(a, float), np.asarray(b, float)
    return float(np.linalg.norm(a - b) / max(np.linalg.norm(b), 1e-300))


def random_psd(rng, n, scale=1.0):
    B = rng.standard_normal((n, n))
    return scale * (B @ B.T / n + 0.1 * np.eye(n))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
