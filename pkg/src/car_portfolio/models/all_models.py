"""
Domain models for markets, risk specifications and optimal portfolios.
"""

from dataclasses import dataclass, field
from functools import cached_property
from typing import Dict, Optional

import numpy as np

from car_portfolio.models.base import DataclassJsonMixin, frozen_array
from car_portfolio.errors import (
    DimensionMismatch,
    InvalidMarket,
    InvalidThreshold,
    OutOfRange,
    SingularBlock,
    DegenerateBenchmark,
)
from car_portfolio.utils.normal_dist import normal_quantile
from car_portfolio.utils.numerics import MAX_CONDITION


def _check_invertible(matrix: np.ndarray, label: str, error_cls=InvalidMarket) -> None:
    if not np.all(np.isfinite(matrix)):
        raise error_cls(f"{label} contains non-finite entries")
    cond = np.linalg.cond(matrix)
    if not np.isfinite(cond) or cond > MAX_CONDITION:
        raise error_cls(f"{label} is numerically singular (condition number {cond:.3e})")


# ---------------------------------------------------------------------------
# Market description
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class MarketModel(DataclassJsonMixin):
    """
    Black-Scholes market: riskless rate ``r``, excess returns ``b`` and an invertible
    volatility matrix ``sigma`` (rows = assets, columns = Brownian motions).

    ``sigma`` is stored as given; nothing downstream assumes it is triangular.
    """

    r: float
    b: np.ndarray
    sigma: np.ndarray
    # Relaxes the b > 0 assumption; the constrained solvers still require b'eta > 0
    require_positive_excess: bool = True

    def __post_init__(self):
        b = frozen_array(self.b)
        sigma = frozen_array(self.sigma)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "sigma", sigma)
        object.__setattr__(self, "r", float(self.r))

        if b.ndim != 1 or b.size < 1:
            raise DimensionMismatch(f"Excess return vector must be 1-D and nonempty, got shape {b.shape}")
        if sigma.shape != (b.size, b.size):
            raise DimensionMismatch(f"Volatility matrix must be {b.size}x{b.size}, got {sigma.shape}")
        if not np.isfinite(self.r) or not np.all(np.isfinite(b)):
            raise InvalidMarket("Riskless rate and excess returns must be finite")
        _check_invertible(sigma, "Volatility matrix")
        if self.require_positive_excess and np.any(b <= 0.0):
            raise InvalidMarket(f"Excess returns must be strictly positive, got {b.tolist()}")

    @property
    def d(self) -> int:
        return int(self.b.size)

    @cached_property
    def sigma_inv_b(self) -> np.ndarray:
        """sigma^{-1} b, the market price of risk vector."""
        return np.linalg.solve(self.sigma, self.b)

    @cached_property
    def merton_direction(self) -> np.ndarray:
        """(sigma sigma')^{-1} b, computed as sigma'^{-1} (sigma^{-1} b)."""
        return np.linalg.solve(self.sigma.T, self.sigma_inv_b)

    @cached_property
    def price_of_risk_norm(self) -> float:
        """||sigma^{-1} b||."""
        return float(np.linalg.norm(self.sigma_inv_b))

    def exposure(self, pi: np.ndarray) -> np.ndarray:
        """sigma' pi, the Brownian loading of a portfolio."""
        return self.sigma.T @ np.asarray(pi, dtype=float)

    def volatility(self, pi: np.ndarray) -> float:
        """||sigma' pi||."""
        return float(np.linalg.norm(self.exposure(pi)))


@dataclass(frozen=True, eq=False)
class RiskSpec(DataclassJsonMixin):
    """Confidence level ``alpha`` in (0, 0.5) and horizon ``T`` in years; ``z_alpha`` is derived."""

    alpha: float
    T: float
    z_alpha: float = field(init=False)

    def __post_init__(self):
        if not np.isfinite(self.T) or self.T <= 0.0:
            raise OutOfRange(f"Horizon T must be positive, got {self.T}")
        object.__setattr__(self, "alpha", float(self.alpha))
        object.__setattr__(self, "T", float(self.T))
        object.__setattr__(self, "z_alpha", normal_quantile(self.alpha))

    @property
    def sqrt_T(self) -> float:
        return float(np.sqrt(self.T))


@dataclass(frozen=True, eq=False)
class BlockMarket(DataclassJsonMixin):
    """
    Block-partitioned market sigma = [[sigma11, 0], [sigma21, sigma22]].

    The first ``m`` assets (first type) load only on W1; the remaining ``d - m``
    (second type) load on both W1 and W2.
    """

    sigma11: np.ndarray
    sigma21: np.ndarray
    sigma22: np.ndarray
    b1: np.ndarray
    b2: np.ndarray
    r: float
    require_positive_excess: bool = True

    def __post_init__(self):
        b1 = np.atleast_1d(np.asarray(self.b1, dtype=float))
        b2 = np.atleast_1d(np.asarray(self.b2, dtype=float))
        sigma11 = np.atleast_2d(np.asarray(self.sigma11, dtype=float))
        sigma22 = np.atleast_2d(np.asarray(self.sigma22, dtype=float))
        sigma21 = np.asarray(self.sigma21, dtype=float)

        m, k = b1.size, b2.size
        if m < 1:
            raise DimensionMismatch("First-type block must hold at least one asset")
        if k < 1:
            raise DimensionMismatch("Second-type block must hold at least one asset (m < d)")
        if sigma11.shape != (m, m):
            raise DimensionMismatch(f"sigma11 must be {m}x{m}, got {sigma11.shape}")
        if sigma22.shape != (k, k):
            raise DimensionMismatch(f"sigma22 must be {k}x{k}, got {sigma22.shape}")
        # A flat sigma21 is accepted when its size fits (k, m), e.g. a column for m = 1
        if sigma21.ndim < 2 and sigma21.size == k * m:
            sigma21 = sigma21.reshape(k, m)
        if sigma21.shape != (k, m):
            raise DimensionMismatch(f"sigma21 must be {k}x{m}, got {sigma21.shape}")

        for name, value in (("sigma11", sigma11), ("sigma21", sigma21), ("sigma22", sigma22), ("b1", b1), ("b2", b2)):
            object.__setattr__(self, name, frozen_array(value))
        object.__setattr__(self, "r", float(self.r))

        _check_invertible(self.sigma11, "sigma11", SingularBlock)
        _check_invertible(self.sigma22, "sigma22", SingularBlock)

    @property
    def m(self) -> int:
        return int(self.b1.size)

    @property
    def d(self) -> int:
        return int(self.b1.size + self.b2.size)

    @cached_property
    def sigma(self) -> np.ndarray:
        m, k = self.m, self.b2.size
        return np.block([[self.sigma11, np.zeros((m, k))], [self.sigma21, self.sigma22]])

    @cached_property
    def sigma_inv(self) -> np.ndarray:
        """Block inverse [[sigma11^-1, 0], [-sigma22^-1 sigma21 sigma11^-1, sigma22^-1]]."""
        m, k = self.m, self.b2.size
        inv11 = np.linalg.inv(self.sigma11)
        inv22 = np.linalg.inv(self.sigma22)
        return np.block([[inv11, np.zeros((m, k))], [-inv22 @ self.sigma21 @ inv11, inv22]])

    @cached_property
    def b(self) -> np.ndarray:
        return np.concatenate([self.b1, self.b2])

    @cached_property
    def theta1(self) -> float:
        """||sigma11^{-1} b1||, market price of risk of the first-type assets."""
        return float(np.linalg.norm(np.linalg.solve(self.sigma11, self.b1)))

    @cached_property
    def theta2(self) -> float:
        """||sigma22^{-1} b2 - sigma22^{-1} sigma21 sigma11^{-1} b1||."""
        spanned = self.sigma21 @ np.linalg.solve(self.sigma11, self.b1)
        return float(np.linalg.norm(np.linalg.solve(self.sigma22, self.b2 - spanned)))

    def to_market(self) -> MarketModel:
        """Flatten into a plain MarketModel."""
        return MarketModel(r=self.r, b=self.b, sigma=self.sigma, require_positive_excess=self.require_positive_excess)

    def with_sigma11(self, sigma11: np.ndarray | float) -> "BlockMarket":
        """Copy with the first-type volatility block replaced; sigma21, sigma22 and b are kept."""
        return BlockMarket(
            sigma11=np.atleast_2d(np.asarray(sigma11, dtype=float)),
            sigma21=self.sigma21,
            sigma22=self.sigma22,
            b1=self.b1,
            b2=self.b2,
            r=self.r,
            require_positive_excess=self.require_positive_excess,
        )


@dataclass(frozen=True, eq=False)
class BenchmarkPortfolio(DataclassJsonMixin):
    """Target/index portfolio weights ``eta`` with the two scalars every formula needs."""

    eta: np.ndarray
    exposure_norm: float  # ||sigma' eta||
    excess_return: float  # b' eta
    identity_residuals: Optional[Dict[str, float]] = None

    def __post_init__(self):
        object.__setattr__(self, "eta", frozen_array(self.eta))
        if not self.excess_return > 0.0:
            raise DegenerateBenchmark(f"Benchmark must have positive excess return, got b'eta = {self.excess_return}")

    @classmethod
    def from_weights(cls, market: MarketModel, eta: np.ndarray) -> "BenchmarkPortfolio":
        eta = np.asarray(eta, dtype=float)
        if eta.shape != (market.d,):
            raise DimensionMismatch(f"Benchmark must have {market.d} weights, got shape {eta.shape}")
        return cls(eta=eta, exposure_norm=market.volatility(eta), excess_return=float(market.b @ eta))


# ---------------------------------------------------------------------------
# Portfolios and their laws
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class PortfolioVector(DataclassJsonMixin):
    """Risky-asset weight fractions; no sign or leverage restriction."""

    pi: np.ndarray

    def __post_init__(self):
        pi = frozen_array(np.atleast_1d(self.pi))
        if pi.ndim != 1 or not np.all(np.isfinite(pi)):
            raise DimensionMismatch("Portfolio must be a finite 1-D vector")
        object.__setattr__(self, "pi", pi)

    @property
    def pi0(self) -> float:
        """Riskless fraction 1 - 1'pi."""
        return float(1.0 - self.pi.sum())


@dataclass(frozen=True)
class WealthLaw(DataclassJsonMixin):
    """Terminal wealth moments of a constant-proportion portfolio."""

    initial_wealth: float
    mean: float
    variance: float
    log_mean: float
    log_variance: float


@dataclass(frozen=True, eq=False)
class ConstraintSpec(DataclassJsonMixin):
    """Correlation constraint Corr(log X(T), log Y(T)) <= -delta against a benchmark."""

    eta: BenchmarkPortfolio
    delta: float

    def __post_init__(self):
        if not (0.0 <= float(self.delta) < 1.0):
            raise InvalidThreshold(f"Correlation threshold delta must lie in [0, 1), got {self.delta}")
        object.__setattr__(self, "delta", float(self.delta))


@dataclass(frozen=True, eq=False)
class PortfolioSolution(DataclassJsonMixin):
    """Optimal portfolio returned by the closed-form solvers."""

    method: str
    pi: np.ndarray
    epsilon: float  # ||sigma' pi||
    car: float
    binding: bool
    lam: Optional[float] = None  # Lagrange multiplier; None for the unconstrained problem
    delta: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "pi", frozen_array(self.pi))

    @property
    def pi0(self) -> float:
        return PortfolioVector(self.pi).pi0

    @property
    def is_riskless(self) -> bool:
        return bool(np.all(self.pi == 0.0))


@dataclass(frozen=True, eq=False)
class AsymptoticLimits(DataclassJsonMixin):
    """Limits of both optimal portfolios and their log-return variances as sigma11 grows without bound."""

    pi_unconstrained: np.ndarray
    pi_constrained: np.ndarray
    var_unconstrained: float
    var_constrained: float
    delta: float

    def __post_init__(self):
        object.__setattr__(self, "pi_unconstrained", frozen_array(self.pi_unconstrained))
        object.__setattr__(self, "pi_constrained", frozen_array(self.pi_constrained))


@dataclass(frozen=True)
class VarianceComparison(DataclassJsonMixin):
    """Log-return variances of the unconstrained and constrained optima in the pricing-kernel setting."""

    theta1: float
    theta2: float
    delta: float
    var_unconstrained: float
    var_constrained: float
    # 1 - var_constrained / var_unconstrained; 0 when the unconstrained optimum is already riskless
    reduction_fraction: float

    @property
    def reduction_percent(self) -> float:
        return 100.0 * self.reduction_fraction


@dataclass
class ResultRow(DataclassJsonMixin):
    """One row of an experiment table. Missing values (degenerate points) stay None."""

    experiment: str
    dataset: str
    sigma11: float
    delta: float
    var_unconstrained: Optional[float] = None
    var_constrained: Optional[float] = None
    pi0_unconstrained: Optional[float] = None
    pi0_constrained: Optional[float] = None
    car_unconstrained: Optional[float] = None
    car_constrained: Optional[float] = None
    reduction_percent: Optional[float] = None
    flag: str = ""

    def sort_key(self):
        return (self.experiment, self.dataset, self.delta, self.sigma11)


@dataclass(frozen=True, eq=False)
class MarketDataset(DataclassJsonMixin):
    """Raw market inputs: per-asset standard deviations, correlation matrix and excess returns."""

    name: str
    gammas: np.ndarray
    rho: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "name", str(self.name))
        for key in ("gammas", "rho", "b"):
            object.__setattr__(self, key, frozen_array(getattr(self, key)))
