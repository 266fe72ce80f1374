"""Markowitz and CVaR objectives, gradients and proximal maps.

Relaxed CVaR model. With ``x = R w + u`` and the centering projector
``M = I - 11'/N`` (never formed; ``M x = x - mean(x)``), the VaR level is
eliminated in closed form,

    alpha*(u, w) = -(1 + rho * 1'x) / (rho * N),

and the relaxed loss is

    g(w, u, v) = alpha* + sum([u]_+) / (N (1 - beta)) + nu/2 ||w - v||^2
                 + rho/2 ||M x - 1/(rho N)||^2.

Its smooth part has gradient ``-1/N + rho * M x`` in ``x``, hence
``R' (-1/N + rho M x) + nu (w - v)`` in ``w``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .returns_data import Moments


@dataclass(frozen=True)
class MarkowitzParams:
    gamma_return: float = 0.1
    lambda_ridge: float = 0.0

    def __post_init__(self):
        if self.gamma_return < 0 or self.lambda_ridge < 0:
            raise ValueError("gamma_return and lambda_ridge must be nonnegative")


@dataclass(frozen=True)
class CvarParams:
    beta: float = 0.9
    rho_relax: float = 5.0

    def __post_init__(self):
        if not 0.0 < self.beta < 1.0:
            raise ValueError(f"beta must lie in (0, 1), got {self.beta}")
        if self.rho_relax <= 0:
            raise ValueError(f"rho_relax must be positive, got {self.rho_relax}")


@dataclass
class PortfolioState:
    w: np.ndarray
    v: np.ndarray
    u: np.ndarray | None = None
    alpha: float | None = None


def _centered(x):
    return x - x.mean()


# -- Markowitz --------------------------------------------------------------

def markowitz_value(w, moments: Moments, params: MarkowitzParams) -> float:
    w = np.asarray(w, dtype=float)
    quad = w @ moments.sigma @ w + params.lambda_ridge * (w @ w)
    return float(quad - params.gamma_return * (moments.mu @ w))


def markowitz_smooth_grad(w, moments: Moments, params: MarkowitzParams) -> np.ndarray:
    w = np.asarray(w, dtype=float)
    return 2.0 * (moments.sigma @ w + params.lambda_ridge * w) - params.gamma_return * moments.mu


def markowitz_grad(w, v, moments: Moments, params: MarkowitzParams, nu: float) -> np.ndarray:
    """Gradient in ``w`` of the penalized objective ``f(w) + nu/2 ||w - v||^2``."""
    w = np.asarray(w, dtype=float)
    return markowitz_smooth_grad(w, moments, params) + nu * (w - np.asarray(v, float))


def markowitz_relaxed_value(w, v, moments, params, nu) -> float:
    d = np.asarray(w, float) - np.asarray(v, float)
    return markowitz_value(w, moments, params) + 0.5 * nu * float(d @ d)


# -- CVaR -------------------------------------------------------------------

def cvar_exact(w, returns, beta: float) -> tuple[float, float]:
    """Empirical CVaR ``phi`` and VaR ``alpha`` of the loss ``-R w``.

    ``F(a) = a + sum([loss - a]_+) / (N (1 - beta))`` is piecewise linear and
    convex with kinks at the sample losses, so its minimum sits at one of
    them. When a flat segment makes the minimizer non-unique, the smallest
    minimizing loss is returned as ``alpha``.
    """
    R = np.asarray(returns, dtype=float)
    losses = np.sort(-(R @ np.asarray(w, dtype=float)))
    N = losses.size
    # sum_{j >= i} (l_j - l_i) over sorted losses via suffix sums
    suffix = np.cumsum(losses[::-1])[::-1]
    counts = np.arange(N, 0, -1)
    excess = suffix - counts * losses
    F = losses + excess / (N * (1.0 - beta))
    i = int(np.argmin(F))
    Fmin = F[i]
    # first index within rounding of the minimum
    i = int(np.nonzero(F <= Fmin + 1e-15 * max(1.0, abs(Fmin)))[0][0])
    return float(F[i]), float(losses[i])


def alpha_star(w, u, returns, rho_relax: float) -> float:
    R = np.asarray(returns, dtype=float)
    x = R @ np.asarray(w, float) + np.asarray(u, float)
    return float(-(1.0 + rho_relax * x.sum()) / (rho_relax * R.shape[0]))


def cvar_pre_elimination_value(w, u, v, alpha, returns, params: CvarParams, nu: float) -> float:
    """Relaxed CVaR objective before eliminating ``alpha``."""
    R = np.asarray(returns, dtype=float)
    N = R.shape[0]
    u = np.asarray(u, float)
    r = R @ np.asarray(w, float) + alpha + u
    d = np.asarray(w, float) - np.asarray(v, float)
    hinge = np.maximum(u, 0.0).sum() / (N * (1.0 - params.beta))
    return float(alpha + hinge + 0.5 * params.rho_relax * (r @ r) + 0.5 * nu * (d @ d))


def cvar_smooth_value(w, u, v, returns, params: CvarParams, nu: float) -> float:
    """Relaxed CVaR objective without the hinge sum."""
    R = np.asarray(returns, dtype=float)
    N = R.shape[0]
    rho = params.rho_relax
    x = R @ np.asarray(w, float) + np.asarray(u, float)
    alpha = -(1.0 + rho * x.sum()) / (rho * N)
    r = _centered(x) - 1.0 / (rho * N)
    d = np.asarray(w, float) - np.asarray(v, float)
    return float(alpha + 0.5 * rho * (r @ r) + 0.5 * nu * (d @ d))


def cvar_relaxed_value(w, u, v, returns, params: CvarParams, nu: float) -> float:
    N = np.shape(returns)[0]
    hinge = np.maximum(np.asarray(u, float), 0.0).sum() / (N * (1.0 - params.beta))
    return cvar_smooth_value(w, u, v, returns, params, nu) + float(hinge)


def _cvar_grad_x(w, u, R, rho):
    x = R @ w + u
    return rho * _centered(x) - 1.0 / R.shape[0]


def cvar_grad_w(w, u, v, returns, params: CvarParams, nu: float) -> np.ndarray:
    R = np.asarray(returns, dtype=float)
    w = np.asarray(w, float)
    gx = _cvar_grad_x(w, np.asarray(u, float), R, params.rho_relax)
    return R.T @ gx + nu * (w - np.asarray(v, float))


def cvar_grad_u(w, u, returns, params: CvarParams) -> np.ndarray:
    R = np.asarray(returns, dtype=float)
    return _cvar_grad_x(np.asarray(w, float), np.asarray(u, float), R, params.rho_relax)


def hinge_prox(x, t: float, beta: float, N: int) -> np.ndarray:
    """Prox of ``t * [.]_+ / (N (1 - beta))``, applied componentwise."""
    x = np.asarray(x, dtype=float)
    tau = t / (N * (1.0 - beta))
    return np.where(x > tau, x - tau, np.where(x < 0.0, x, 0.0))
