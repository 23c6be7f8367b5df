"""
Service module initialization.

This module provides the market construction, closed-form solvers, numerical
verification and experiment orchestration services.
"""

# Core services
from car_portfolio.services.market_model import (
    build_volatility_from_correlation,
    assemble_block_market,
    growth_optimal_benchmark,
)
from car_portfolio.services.closed_form_solvers import (
    solve_unconstrained,
    solve_constrained,
    solve_pricing_kernel,
    asymptotic_portfolios,
    variance_comparison,
)

# Verification services
from car_portfolio.services.verification_oracle import NumericalOracle, MonteCarloEngine
from car_portfolio.services.verification_service import VerificationService

# Experiment services
from car_portfolio.services.experiment_service import ExperimentService

__all__ = [
    # Core services
    "build_volatility_from_correlation",
    "assemble_block_market",
    "growth_optimal_benchmark",
    "solve_unconstrained",
    "solve_constrained",
    "solve_pricing_kernel",
    "asymptotic_portfolios",
    "variance_comparison",

    # Verification services
    "NumericalOracle",
    "MonteCarloEngine",
    "VerificationService",

    # Experiment services
    "ExperimentService",
]
