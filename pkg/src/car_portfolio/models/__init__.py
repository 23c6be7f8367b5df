"""
Data models for CaR Portfolio.

This module provides the market descriptions, risk specifications, solver outputs
and verification records shared across services.
"""

from car_portfolio.models.base import DataclassJsonMixin
from car_portfolio.models.all_models import (
    MarketModel,
    RiskSpec,
    BlockMarket,
    BenchmarkPortfolio,
    PortfolioVector,
    WealthLaw,
    ConstraintSpec,
    PortfolioSolution,
    AsymptoticLimits,
    VarianceComparison,
    ResultRow,
    MarketDataset,
)
from car_portfolio.models.verification_models import (
    OracleConfig,
    McConfig,
    OracleResult,
    QuantileCheck,
    CorrelationCheck,
    MomentComparison,
    MomentCheck,
    CheckOutcome,
    VerificationReport,
)

__all__ = [
    # Base classes
    "DataclassJsonMixin",

    # Market and solver models
    "MarketModel",
    "RiskSpec",
    "BlockMarket",
    "BenchmarkPortfolio",
    "PortfolioVector",
    "WealthLaw",
    "ConstraintSpec",
    "PortfolioSolution",
    "AsymptoticLimits",
    "VarianceComparison",
    "ResultRow",
    "MarketDataset",

    # Verification models
    "OracleConfig",
    "McConfig",
    "OracleResult",
    "QuantileCheck",
    "CorrelationCheck",
    "MomentComparison",
    "MomentCheck",
    "CheckOutcome",
    "VerificationReport",
]
