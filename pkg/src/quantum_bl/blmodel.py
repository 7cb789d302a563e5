"""Return and risk algebra for the Black-Litterman pipeline.

Returns are weekly log returns on input. Helpers that produce model inputs
(covariance, historical mean) take ``periods_per_year`` so the whole
optimization can run in annualized units; gamma is unaffected by that scaling.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import AllZeroCaps, DimensionMismatch, NonPositivePrice, ZeroVariance
from .numerics import as_symmetric, invert_spd

log = logging.getLogger(__name__)

WEEKS_PER_YEAR = 52


@dataclass
class BlInputs:
    sigma: np.ndarray
    w_mkt: np.ndarray
    gamma: float
    gamma_eff: float
    tau: float
    budget: int
    penalty: float
    pi: np.ndarray
    mu_bl: np.ndarray

    def to_dict(self) -> dict:
        return {
            "sigma": self.sigma.tolist(),
            "w_mkt": self.w_mkt.tolist(),
            "gamma": self.gamma,
            "gamma_eff": self.gamma_eff,
            "tau": self.tau,
            "budget": self.budget,
            "penalty": self.penalty,
            "pi": self.pi.tolist(),
            "mu_bl": self.mu_bl.tolist(),
        }


def log_returns(prices) -> np.ndarray:
    """``log(p_t / p_{t-1})`` along axis 0."""
    p = np.asarray(prices, dtype=float)
    if p.shape[0] < 2:
        raise ValueError("need at least two price rows")
    if not np.all(p > 0):
        raise NonPositivePrice("prices must be strictly positive")
    return np.diff(np.log(p), axis=0)


def covariance(returns, periods_per_year: float = 1.0) -> np.ndarray:
    """Sample covariance (N-1 denominator), scaled to ``periods_per_year``."""
    r = np.asarray(returns, dtype=float)
    c = np.atleast_2d(np.cov(r, rowvar=False, ddof=1)) * periods_per_year
    return 0.5 * (c + c.T)


def mean_return(returns, periods_per_year: float = 1.0) -> np.ndarray:
    return np.asarray(returns, dtype=float).mean(axis=0) * periods_per_year


def implied_return(gamma: float, sigma, w_mkt) -> np.ndarray:
    """Reverse-optimized equilibrium return ``gamma * Sigma @ w_mkt``."""
    sigma = as_symmetric(sigma)
    w = np.asarray(w_mkt, dtype=float).ravel()
    if sigma.shape[0] != w.shape[0]:
        raise DimensionMismatch(f"Sigma is {sigma.shape[0]}-dimensional, weights have {w.shape[0]} entries")
    return gamma * sigma @ w


def irx_to_weekly(irx) -> np.ndarray:
    """13-week T-bill quote (annualized percent) to a weekly rate."""
    return np.asarray(irx, dtype=float) / 100.0 / WEEKS_PER_YEAR


def estimate_gamma(index_returns, rf) -> float:
    """Risk premium over variance of the index: ``(mean(r) - mean(rf)) / var(r)``."""
    r = np.asarray(index_returns, dtype=float).ravel()
    f = np.asarray(rf, dtype=float).ravel()
    if r.shape != f.shape or r.size < 2:
        raise ValueError("index and risk-free series need equal lengths >= 2")
    var = float(np.var(r, ddof=1))
    if var <= 0.0:
        raise ZeroVariance("index returns are constant")
    return float((r.mean() - f.mean()) / var)


def effective_gamma(gamma: float, budget: int) -> float:
    if budget < 1:
        raise ValueError("budget must be >= 1")
    return gamma / budget


def combined_return(sigma, pi, views) -> np.ndarray:
    """Posterior mean ``[(tS)^-1 + P'W^-1 P]^-1 [(tS)^-1 pi + P'W^-1 Q]``.

    ``views`` is any object with ``P``, ``Q``, ``omega`` (diagonal entries or
    full matrix) and ``tau`` attributes.
    """
    sigma = as_symmetric(sigma)
    pi = np.asarray(pi, dtype=float).ravel()
    p = np.asarray(views.P, dtype=float)
    q = np.asarray(views.Q, dtype=float).ravel()
    omega = np.asarray(views.omega, dtype=float)
    omega_inv = np.diag(1.0 / omega) if omega.ndim == 1 else invert_spd(omega)
    prior_prec = invert_spd(views.tau * sigma)
    post_prec = prior_prec + p.T @ omega_inv @ p
    return invert_spd(post_prec) @ (prior_prec @ pi + p.T @ omega_inv @ q)


def index_shares(snapshot_prices, caps, base: float = 100.0) -> np.ndarray:
    """Shares bought when ``base`` units of money are split by cap weight."""
    caps = np.asarray(caps, dtype=float)
    if np.any(caps < 0):
        raise ValueError("market caps must be nonnegative")
    total = caps.sum()
    if total <= 0:
        raise AllZeroCaps("all market caps are zero")
    return base * (caps / total) / np.asarray(snapshot_prices, dtype=float)


def index_series(prices, caps, base: float = 100.0, snapshot: int = -1) -> np.ndarray:
    """Cap-weighted index level ``sum_i P_i(t) S_i`` with shares fixed at row ``snapshot``."""
    p = np.atleast_2d(np.asarray(prices, dtype=float))
    shares = index_shares(p[snapshot], caps, base)
    return p @ shares


def cap_weights(caps) -> np.ndarray:
    caps = np.asarray(caps, dtype=float)
    if caps.sum() <= 0:
        raise AllZeroCaps("all market caps are zero")
    return caps / caps.sum()


def gamma_from_history(index_levels, rf_weekly, floor: Optional[float] = None) -> float:
    """Estimate gamma from index levels and the aligned weekly risk-free rate.

    ``rf_weekly[k]`` is the rate over the period starting at level ``k``.
    A nonpositive estimate is replaced by ``floor`` when one is given.
    """
    r = log_returns(np.asarray(index_levels, dtype=float).reshape(-1, 1))[:, 0]
    rf = np.asarray(rf_weekly, dtype=float)[: r.size]
    gamma = estimate_gamma(r, rf)
    if floor is not None and gamma < floor:
        log.warning("estimated gamma %.4f below floor; using %.4f", gamma, floor)
        return float(floor)
    return gamma
