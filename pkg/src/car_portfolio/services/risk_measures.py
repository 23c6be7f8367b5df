"""
Closed-form risk and moment functionals of constant-proportion portfolios.

All quantities refer to logarithmic returns over [0, T].
"""

from typing import Union

import numpy as np
from numpy.typing import ArrayLike

from car_portfolio.errors import DimensionMismatch, OutOfRange, ZeroVolatilityPortfolio
from car_portfolio.models.all_models import (
    BenchmarkPortfolio,
    ConstraintSpec,
    MarketModel,
    PortfolioVector,
    RiskSpec,
    WealthLaw,
)

PortfolioLike = Union[PortfolioVector, ArrayLike]
BenchmarkLike = Union[BenchmarkPortfolio, ArrayLike]


def _weights(market: MarketModel, pi: PortfolioLike) -> np.ndarray:
    weights = pi.pi if isinstance(pi, PortfolioVector) else PortfolioVector(np.asarray(pi, dtype=float)).pi
    if weights.shape != (market.d,):
        raise DimensionMismatch(f"Portfolio must have {market.d} weights, got shape {weights.shape}")
    return weights


def _benchmark_weights(market: MarketModel, eta: BenchmarkLike) -> np.ndarray:
    return _weights(market, eta.eta if isinstance(eta, BenchmarkPortfolio) else eta)


def _check_wealth(x: float) -> None:
    if not np.isfinite(x) or x <= 0.0:
        raise OutOfRange(f"Initial wealth must be positive, got {x}")


def log_return_quantile(market: MarketModel, pi: PortfolioLike, spec: RiskSpec, x: float = 1.0) -> float:
    """
    alpha-quantile of log(X(T)/x): (r + b'pi)T - ||sigma'pi||^2 T/2 + z_alpha ||sigma'pi|| sqrt(T).

    The initial wealth only enters through validation; the quantile does not depend on it.
    """
    _check_wealth(x)
    weights = _weights(market, pi)
    eps = market.volatility(weights)
    return (market.r + float(market.b @ weights)) * spec.T - 0.5 * eps**2 * spec.T + spec.z_alpha * eps * spec.sqrt_T


def capital_at_risk(market: MarketModel, pi: PortfolioLike, spec: RiskSpec) -> float:
    """CaR(pi, alpha, T) = rT - q = -b'pi T + ||sigma'pi||^2 T/2 - z_alpha ||sigma'pi|| sqrt(T)."""
    weights = _weights(market, pi)
    eps = market.volatility(weights)
    return -float(market.b @ weights) * spec.T + 0.5 * eps**2 * spec.T - spec.z_alpha * eps * spec.sqrt_T


def log_correlation(market: MarketModel, pi: PortfolioLike, eta: BenchmarkLike) -> float:
    """
    Corr(log X(T), log Y(T)) = pi' sigma sigma' eta / (||sigma'pi|| ||sigma'eta||).

    Raises:
        ZeroVolatilityPortfolio: If either portfolio has zero Brownian exposure.
    """
    exposure_pi = market.exposure(_weights(market, pi))
    exposure_eta = market.exposure(_benchmark_weights(market, eta))
    norm_pi = float(np.linalg.norm(exposure_pi))
    norm_eta = float(np.linalg.norm(exposure_eta))
    if norm_pi == 0.0 or norm_eta == 0.0:
        raise ZeroVolatilityPortfolio("Correlation is undefined for a portfolio with ||sigma' pi|| = 0")
    return float(exposure_pi @ exposure_eta) / (norm_pi * norm_eta)


def correlation_constraint(market: MarketModel, pi: PortfolioLike, eta: BenchmarkLike, delta: float) -> float:
    """
    g(pi) = delta ||sigma'eta|| ||sigma'pi|| + pi' sigma sigma' eta; the constraint reads g(pi) <= 0.

    Unlike log_correlation this is defined everywhere and vanishes at pi = 0.
    """
    exposure_pi = market.exposure(_weights(market, pi))
    exposure_eta = market.exposure(_benchmark_weights(market, eta))
    return float(delta * np.linalg.norm(exposure_eta) * np.linalg.norm(exposure_pi) + exposure_pi @ exposure_eta)


def is_feasible(market: MarketModel, pi: PortfolioLike, constraint: ConstraintSpec, tol: float = 0.0) -> bool:
    """Whether pi satisfies Corr <= -delta; the zero portfolio counts as feasible for every delta."""
    weights = _weights(market, pi)
    if not np.any(weights != 0.0):
        return True
    return correlation_constraint(market, weights, constraint.eta, constraint.delta) <= tol


def wealth_law(market: MarketModel, pi: PortfolioLike, spec: RiskSpec, x: float = 1.0) -> WealthLaw:
    """Mean and variance of X(T) and of log X(T) for a constant-proportion portfolio."""
    _check_wealth(x)
    weights = _weights(market, pi)
    eps_sq = market.volatility(weights) ** 2
    drift = market.r + float(market.b @ weights)
    T = spec.T

    return WealthLaw(
        initial_wealth=float(x),
        mean=float(x * np.exp(drift * T)),
        variance=float(x**2 * np.exp(2.0 * drift * T) * np.expm1(eps_sq * T)),
        log_mean=float(np.log(x) + (drift - 0.5 * eps_sq) * T),
        log_variance=T * eps_sq,
    )
