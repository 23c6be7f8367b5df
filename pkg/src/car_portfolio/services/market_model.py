"""
Construction and validation of Black-Scholes market descriptions.

Volatility matrices are built from per-asset standard deviations and a correlation
matrix by Cholesky factorisation; block-partitioned markets expose the
first-type/second-type split used by the pricing-kernel benchmark.
"""

from typing import Dict

import numpy as np
from numpy.typing import ArrayLike
from scipy import linalg

from car_portfolio.errors import (
    DegenerateBenchmark,
    DimensionMismatch,
    InvalidCorrelation,
    NotPositiveDefinite,
    OutOfRange,
    SingularBlock,
)
from car_portfolio.models.all_models import BenchmarkPortfolio, BlockMarket, MarketModel
from car_portfolio.utils.app_logger import logger
from car_portfolio.utils.normal_dist import normal_quantile
from car_portfolio.utils.numerics import CORRELATION_ATOL, IDENTITY_RTOL, PIVOT_RTOL, relative_error

__all__ = [
    "build_volatility_from_correlation",
    "assemble_block_market",
    "split_block_market",
    "normal_quantile",
    "growth_optimal_benchmark",
    "pricing_kernel_identity_residuals",
    "block_inverse_residual",
]


def build_volatility_from_correlation(gammas: ArrayLike, rho: ArrayLike) -> np.ndarray:
    """
    Lower-triangular volatility matrix L with L L' = diag(gamma) rho diag(gamma).

    Args:
        gammas: Per-asset return standard deviations (all positive).
        rho: Symmetric correlation matrix with unit diagonal.

    Returns:
        The Cholesky factor of the covariance matrix.

    Raises:
        DimensionMismatch: If gammas and rho sizes disagree.
        OutOfRange: If any gamma is non-positive.
        InvalidCorrelation: If rho is not a correlation matrix.
        NotPositiveDefinite: If a Cholesky pivot is non-positive (inadmissible correlation data).
    """
    gammas = np.asarray(gammas, dtype=float)
    rho = np.asarray(rho, dtype=float)

    if gammas.ndim != 1 or gammas.size < 1:
        raise DimensionMismatch(f"gammas must be a nonempty vector, got shape {gammas.shape}")
    d = gammas.size
    if rho.shape != (d, d):
        raise DimensionMismatch(f"Correlation matrix must be {d}x{d}, got {rho.shape}")
    if not np.all(np.isfinite(gammas)) or np.any(gammas <= 0.0):
        raise OutOfRange(f"Standard deviations must be positive, got {gammas.tolist()}")
    if not np.all(np.isfinite(rho)):
        raise InvalidCorrelation("Correlation matrix contains non-finite entries")
    if not np.allclose(rho, rho.T, rtol=0.0, atol=CORRELATION_ATOL):
        raise InvalidCorrelation("Correlation matrix is not symmetric")
    if not np.allclose(np.diag(rho), 1.0, rtol=0.0, atol=CORRELATION_ATOL):
        raise InvalidCorrelation("Correlation matrix must have a unit diagonal")
    if np.any(np.abs(rho) > 1.0 + CORRELATION_ATOL):
        raise InvalidCorrelation("Correlation entries must lie in [-1, 1]")

    covariance = np.outer(gammas, gammas) * rho
    try:
        lower = linalg.cholesky(covariance, lower=True)
    except linalg.LinAlgError as e:
        raise NotPositiveDefinite(f"Covariance matrix is not positive definite: {e}") from e

    pivots = np.diag(lower) ** 2
    if np.min(pivots) < PIVOT_RTOL * np.max(np.diag(covariance)):
        raise NotPositiveDefinite(f"Cholesky pivot {np.min(pivots):.3e} below tolerance; correlation data is inadmissible")

    logger.debug(f"Built {d}x{d} volatility matrix from correlation data")
    return lower


def block_inverse_residual(block: BlockMarket) -> float:
    """Max-norm of sigma @ sigma_inv - I with sigma_inv from the block formula."""
    return float(np.max(np.abs(block.sigma @ block.sigma_inv - np.eye(block.d))))


def assemble_block_market(
    sigma11: ArrayLike,
    sigma21: ArrayLike,
    sigma22: ArrayLike,
    b1: ArrayLike,
    b2: ArrayLike,
    r: float,
    require_positive_excess: bool = True,
) -> BlockMarket:
    """
    Assemble sigma = [[sigma11, 0], [sigma21, sigma22]] with its excess returns.

    Args:
        sigma11: m x m first-type block.
        sigma21: (d-m) x m coupling block.
        sigma22: (d-m) x (d-m) second-type block.
        b1: First-type excess returns.
        b2: Second-type excess returns.
        r: Riskless rate.
        require_positive_excess: Enforce b > 0 on the flattened market.

    Returns:
        A validated BlockMarket whose block-formula inverse matches sigma.

    Raises:
        DimensionMismatch: If shapes disagree or the second block is empty.
        SingularBlock: If a diagonal block is numerically singular, or the
            block-formula inverse does not reproduce the identity.
    """
    block = BlockMarket(
        sigma11=sigma11,
        sigma21=sigma21,
        sigma22=sigma22,
        b1=b1,
        b2=b2,
        r=r,
        require_positive_excess=require_positive_excess,
    )
    # Also validates b and sigma of the flattened market
    block.to_market()

    residual = block_inverse_residual(block)
    if residual > IDENTITY_RTOL:
        raise SingularBlock(f"Block inverse formula residual {residual:.3e} exceeds tolerance")
    logger.debug(f"Assembled block market m={block.m}, d={block.d}, block inverse residual {residual:.2e}")
    return block


def split_block_market(market: MarketModel, m: int) -> BlockMarket:
    """
    Partition a market whose sigma is block lower-triangular after its first ``m`` assets.

    Raises:
        DimensionMismatch: If m is not in [1, d) or the upper-right block is nonzero.
    """
    d = market.d
    if not (1 <= m < d):
        raise DimensionMismatch(f"First-type count must satisfy 1 <= m < d = {d}, got m = {m}")
    sigma = market.sigma
    if np.any(sigma[:m, m:] != 0.0):
        raise DimensionMismatch("First-type assets must not load on the second Brownian block")
    return assemble_block_market(
        sigma11=sigma[:m, :m],
        sigma21=sigma[m:, :m],
        sigma22=sigma[m:, m:],
        b1=market.b[:m],
        b2=market.b[m:],
        r=market.r,
        require_positive_excess=market.require_positive_excess,
    )


def pricing_kernel_identity_residuals(block: BlockMarket, benchmark: BenchmarkPortfolio) -> Dict[str, float]:
    """
    Relative residuals of the three benchmark identities of the pricing-kernel setting:

    - ||sigma' eta|| = ||sigma11^-1 b1||
    - b' eta = ||sigma11^-1 b1||^2
    - sqrt(||sigma^-1 b||^2 ||sigma' eta||^2 - (b' eta)^2) = ||sigma11^-1 b1|| * theta2

    The third residual is measured against ||sigma^-1 b|| ||sigma' eta||, the scale of
    the terms under the square root.
    """
    market = block.to_market()
    theta1 = block.theta1
    e = benchmark.exposure_norm
    c = benchmark.excess_return
    beta = market.price_of_risk_norm

    gap = np.sqrt(max(beta**2 * e**2 - c**2, 0.0))
    return {
        "exposure_norm": relative_error(e, theta1),
        "excess_return": relative_error(c, theta1**2),
        "cauchy_schwarz_gap": abs(gap - theta1 * block.theta2) / max(beta * e, 1e-300),
    }


def growth_optimal_benchmark(block: BlockMarket) -> BenchmarkPortfolio:
    """
    Growth-optimal portfolio of the first-type assets, eta' = [((sigma11 sigma11')^-1 b1)', 0].

    Args:
        block: Block-partitioned market.

    Returns:
        The benchmark portfolio, with the pricing-kernel identity residuals attached.

    Raises:
        DegenerateBenchmark: If b1 = 0 (no positive excess return).
    """
    if not np.any(block.b1 != 0.0):
        raise DegenerateBenchmark("First-type excess returns are zero; the growth-optimal benchmark is degenerate")

    eta1 = np.linalg.solve(block.sigma11.T, np.linalg.solve(block.sigma11, block.b1))
    eta = np.concatenate([eta1, np.zeros(block.d - block.m)])

    market = block.to_market()
    benchmark = BenchmarkPortfolio.from_weights(market, eta)
    residuals = pricing_kernel_identity_residuals(block, benchmark)
    worst = max(residuals.values())
    if worst > IDENTITY_RTOL:
        logger.warning(f"Pricing-kernel identities hold only to {worst:.2e}: {residuals}")
    else:
        logger.debug(f"Pricing-kernel identities hold to {worst:.2e}")

    return BenchmarkPortfolio(
        eta=benchmark.eta,
        exposure_norm=benchmark.exposure_norm,
        excess_return=benchmark.excess_return,
        identity_residuals=residuals,
    )
