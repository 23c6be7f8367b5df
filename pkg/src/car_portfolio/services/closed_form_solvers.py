"""
Analytic CaR-minimising portfolios.

Notation used throughout this module:
    beta = ||sigma^-1 b||          (market price of risk)
    e    = ||sigma' eta||          (benchmark volatility)
    c    = b' eta                  (benchmark excess return)
    D    = sqrt(beta^2 e^2 - c^2)  (Cauchy-Schwarz gap, > 0 unless eta is parallel to (sigma sigma')^-1 b)
"""

from typing import Optional, Tuple

import numpy as np

from car_portfolio.errors import DegenerateBenchmark, DegenerateDirection, InvalidThreshold, UnsupportedPartition, VerificationFailure
from car_portfolio.models.all_models import (
    AsymptoticLimits,
    BenchmarkPortfolio,
    BlockMarket,
    ConstraintSpec,
    MarketModel,
    PortfolioSolution,
    RiskSpec,
    VarianceComparison,
)
from car_portfolio.services.market_model import growth_optimal_benchmark
from car_portfolio.services.risk_measures import capital_at_risk, correlation_constraint
from car_portfolio.utils.app_logger import logger
from car_portfolio.utils.numerics import DEGENERACY_RTOL, positive_part


# ---------------------------------------------------------------------------
# Unconstrained problem
# ---------------------------------------------------------------------------


def optimal_car_on_ellipse(market: MarketModel, spec: RiskSpec, epsilon: float) -> Tuple[np.ndarray, float]:
    """
    First phase of the unconstrained reduction: on ||sigma' pi|| = epsilon the CaR is
    minimised by pi_eps = epsilon (sigma sigma')^-1 b / ||sigma^-1 b||.

    Returns:
        (pi_eps, CaR(pi_eps)).
    """
    pi_eps = epsilon * market.merton_direction / market.price_of_risk_norm
    return pi_eps, capital_at_risk(market, pi_eps, spec)


def solve_unconstrained(market: MarketModel, spec: RiskSpec) -> PortfolioSolution:
    """
    Minimum-CaR portfolio without constraints.

    pi* = (z_alpha/sqrt(T) + beta)^+ (sigma sigma')^-1 b / beta,
    CaR(pi*) = -(T/2) [(z_alpha/sqrt(T) + beta)^+]^2.
    """
    beta = market.price_of_risk_norm
    radius = positive_part(spec.z_alpha / spec.sqrt_T + beta)

    if radius == 0.0:
        logger.debug("Unconstrained optimum is the riskless portfolio (clamp active)")
        return PortfolioSolution(method="unconstrained", pi=np.zeros(market.d), epsilon=0.0, car=0.0, binding=False)

    pi = radius * market.merton_direction / beta
    return PortfolioSolution(
        method="unconstrained",
        pi=pi,
        epsilon=market.volatility(pi),
        car=-0.5 * spec.T * radius**2,
        binding=False,
    )


# ---------------------------------------------------------------------------
# Correlation-constrained problem
# ---------------------------------------------------------------------------


def _benchmark_scalars(market: MarketModel, eta: BenchmarkPortfolio) -> Tuple[float, float, float, float]:
    """Return (beta, e, c, D) and reject the degenerate direction."""
    beta = market.price_of_risk_norm
    e = eta.exposure_norm
    c = eta.excess_return
    if c <= 0.0:
        raise DegenerateBenchmark(f"Benchmark must have positive excess return, got b'eta = {c}")

    lead = beta**2 * e**2
    gap_sq = lead - c**2
    if gap_sq <= DEGENERACY_RTOL * lead:
        raise DegenerateDirection(
            "Benchmark is parallel to the Merton direction (sigma sigma')^-1 b; the constrained optimum is undefined"
        )
    return beta, e, c, float(np.sqrt(gap_sq))


def lagrange_multiplier(market: MarketModel, spec: RiskSpec, constraint: ConstraintSpec) -> float:
    """
    Positive root of the complementary-slackness quadratic:
    lambda* = (c T + T delta D / sqrt(1 - delta^2)) / e^2.
    """
    _, e, c, gap = _benchmark_scalars(market, constraint.eta)
    delta = constraint.delta
    return (c * spec.T + spec.T * delta * gap / np.sqrt(1.0 - delta**2)) / e**2


def epsilon_star(lam: float, market: MarketModel, spec: RiskSpec, eta: BenchmarkPortfolio, delta: float) -> float:
    """
    Optimal ellipse radius of the Lagrangian for a fixed multiplier:
    eps*(lambda) = (1/T) (z_alpha sqrt(T) - lambda delta e + ||sigma^-1 b T - lambda sigma' eta||)^+.
    """
    exposure_eta = market.exposure(eta.eta)
    tilted = market.sigma_inv_b * spec.T - lam * exposure_eta
    argument = spec.z_alpha * spec.sqrt_T - lam * delta * float(np.linalg.norm(exposure_eta)) + float(np.linalg.norm(tilted))
    return positive_part(argument) / spec.T


def lagrangian(market: MarketModel, spec: RiskSpec, constraint: ConstraintSpec, pi: np.ndarray, lam: float) -> float:
    """L(pi, lambda) = CaR(pi) + lambda g(pi)."""
    return capital_at_risk(market, pi, spec) + lam * correlation_constraint(market, pi, constraint.eta, constraint.delta)


def solve_constrained(market: MarketModel, spec: RiskSpec, constraint: ConstraintSpec) -> PortfolioSolution:
    """
    Minimum-CaR portfolio subject to Corr(log X(T), log Y(T)) <= -delta.

    Args:
        market: Market description.
        spec: Confidence level and horizon.
        constraint: Benchmark and threshold delta in [0, 1).

    Returns:
        The optimal portfolio; nonzero solutions sit on the constraint boundary (binding).

    Raises:
        DegenerateBenchmark: If b'eta <= 0.
        DegenerateDirection: If the Cauchy-Schwarz gap D vanishes.
    """
    beta, e, c, gap = _benchmark_scalars(market, constraint.eta)
    delta = constraint.delta
    root = np.sqrt(1.0 - delta**2)
    lam = lagrange_multiplier(market, spec, constraint)

    argument = spec.z_alpha * e / spec.sqrt_T + root * gap - delta * c
    logger.debug(f"Constrained solve: delta={delta}, lambda*={lam:.6g}, clamp argument={argument:.6g}")

    if argument <= 0.0:
        return PortfolioSolution(
            method="constrained", pi=np.zeros(market.d), epsilon=0.0, car=0.0, binding=False, lam=lam, delta=delta
        )

    scale = root * argument / (spec.T * gap)
    pi = scale * (market.merton_direction * spec.T - lam * constraint.eta.eta)
    return PortfolioSolution(
        method="constrained",
        pi=pi,
        epsilon=market.volatility(pi),
        car=-spec.T * argument**2 / (2.0 * e**2),
        binding=True,
        lam=lam,
        delta=delta,
    )


def two_fund_residual(market: MarketModel, pi: np.ndarray, eta: BenchmarkPortfolio) -> float:
    """Least-squares residual norm of pi projected onto span{(sigma sigma')^-1 b, eta}."""
    basis = np.column_stack([market.merton_direction, eta.eta])
    coefficients, *_ = np.linalg.lstsq(basis, np.asarray(pi, dtype=float), rcond=None)
    return float(np.linalg.norm(basis @ coefficients - pi))


# ---------------------------------------------------------------------------
# Pricing-kernel benchmark
# ---------------------------------------------------------------------------


def _check_delta(delta: float) -> float:
    if not (0.0 <= float(delta) < 1.0):
        raise InvalidThreshold(f"Correlation threshold delta must lie in [0, 1), got {delta}")
    return float(delta)


def _check_theta2(block: BlockMarket) -> Tuple[float, float]:
    theta1, theta2 = block.theta1, block.theta2
    if theta2 <= np.sqrt(DEGENERACY_RTOL) * np.hypot(theta1, theta2):
        raise DegenerateDirection("Second-type excess returns are spanned by the first type (theta2 = 0)")
    return theta1, theta2


def solve_pricing_kernel(block: BlockMarket, spec: RiskSpec, delta: float) -> PortfolioSolution:
    """
    Constrained optimum when the benchmark is the growth-optimal portfolio of the first-type assets.

    Uses theta1 = ||sigma11^-1 b1|| and theta2 = ||sigma22^-1 b2 - sigma22^-1 sigma21 sigma11^-1 b1||:
        lambda* = T (1 + delta theta2 / (theta1 sqrt(1 - delta^2))),
        pi*     = sqrt(1-delta^2) (z/sqrt(T) + sqrt(1-delta^2) theta2 - delta theta1)^+ / (T theta2)
                  * ((sigma sigma')^-1 b T - lambda* eta).

    Raises:
        DegenerateDirection: If theta2 vanishes.
        InvalidThreshold: If delta is outside [0, 1).
    """
    delta = _check_delta(delta)
    benchmark = growth_optimal_benchmark(block)
    theta1, theta2 = _check_theta2(block)
    market = block.to_market()

    root = np.sqrt(1.0 - delta**2)
    lam = spec.T * (1.0 + delta * theta2 / (theta1 * root))
    argument = spec.z_alpha / spec.sqrt_T + root * theta2 - delta * theta1

    if argument <= 0.0:
        return PortfolioSolution(
            method="pricing_kernel", pi=np.zeros(block.d), epsilon=0.0, car=0.0, binding=False, lam=lam, delta=delta
        )

    scale = root * argument / (spec.T * theta2)
    pi = scale * (market.merton_direction * spec.T - lam * benchmark.eta)
    return PortfolioSolution(
        method="pricing_kernel",
        pi=pi,
        epsilon=market.volatility(pi),
        car=-0.5 * spec.T * argument**2,
        binding=True,
        lam=lam,
        delta=delta,
    )


def asymptotic_portfolios(block: BlockMarket, spec: RiskSpec, delta: float) -> AsymptoticLimits:
    """
    Limits of the unconstrained and pricing-kernel constrained optima as sigma11 grows without bound
    (single first-type asset). Both limits hold nothing in the first-type asset.

    Raises:
        UnsupportedPartition: If the block market has m != 1.
    """
    if block.m != 1:
        raise UnsupportedPartition(f"Asymptotic limits need a single first-type asset, got m = {block.m}")
    delta = _check_delta(delta)

    price_of_risk = np.linalg.solve(block.sigma22, block.b2)
    kappa = float(np.linalg.norm(price_of_risk))
    direction = np.concatenate([[0.0], np.linalg.solve(block.sigma22.T, price_of_risk)])
    root = np.sqrt(1.0 - delta**2)
    z_scaled = spec.z_alpha / spec.sqrt_T

    return AsymptoticLimits(
        pi_unconstrained=positive_part(z_scaled / kappa + 1.0) * direction,
        pi_constrained=root * positive_part(z_scaled / kappa + root) * direction,
        var_unconstrained=spec.T * positive_part(z_scaled + kappa) ** 2,
        var_constrained=spec.T * positive_part(z_scaled + root * kappa) ** 2,
        delta=float(delta),
    )


def variance_comparison(block: BlockMarket, spec: RiskSpec, delta: float) -> VarianceComparison:
    """
    Log-return variances of the unconstrained and constrained optima in the pricing-kernel setting:

        Var(log X^{pi*})   = T [(z/sqrt(T) + sqrt(theta1^2 + theta2^2))^+]^2
        Var(log X^{pi*_c}) = T [(z/sqrt(T) + sqrt(1-delta^2) theta2 - delta theta1)^+]^2

    Raises:
        DegenerateDirection: If theta2 vanishes.
    """
    delta = _check_delta(delta)
    theta1, theta2 = _check_theta2(block)
    z_scaled = spec.z_alpha / spec.sqrt_T
    root = np.sqrt(1.0 - delta**2)

    var_u = spec.T * positive_part(z_scaled + np.hypot(theta1, theta2)) ** 2
    var_c = spec.T * positive_part(z_scaled + root * theta2 - delta * theta1) ** 2
    if var_c > var_u * (1.0 + 1e-12):
        # sqrt(theta1^2 + theta2^2) >= sqrt(1-delta^2) theta2 - delta theta1 rules this out
        raise VerificationFailure(f"Constrained variance {var_c} exceeds unconstrained variance {var_u}")

    reduction = 1.0 - var_c / var_u if var_u > 0.0 else 0.0
    return VarianceComparison(
        theta1=theta1,
        theta2=theta2,
        delta=float(delta),
        var_unconstrained=var_u,
        var_constrained=var_c,
        reduction_fraction=reduction,
    )


def default_constraint(block: BlockMarket, delta: float, eta: Optional[BenchmarkPortfolio] = None) -> ConstraintSpec:
    """Constraint against ``eta``, or against the growth-optimal benchmark of the first-type assets."""
    return ConstraintSpec(eta=eta if eta is not None else growth_optimal_benchmark(block), delta=delta)
