"""
Shared fixtures: built-in datasets, their block markets and a random market generator.
"""

import numpy as np
import pytest

from car_portfolio.models.all_models import BenchmarkPortfolio, MarketModel, RiskSpec
from car_portfolio.models.verification_models import McConfig, OracleConfig
from car_portfolio.services.datasets import base_block_market, get_dataset
from car_portfolio.services.market_model import build_volatility_from_correlation


@pytest.fixture
def spec():
    """The experiment setting: alpha = 0.05, T = 5 years."""
    return RiskSpec(alpha=0.05, T=5.0)


@pytest.fixture
def long_spec():
    """A long horizon where the constrained optimum of dataset 1 is not riskless."""
    return RiskSpec(alpha=0.05, T=50.0)


@pytest.fixture
def block1():
    return base_block_market(get_dataset("1"), r=0.02)


@pytest.fixture
def block2():
    return base_block_market(get_dataset("2"), r=0.02)


@pytest.fixture
def market1(block1):
    return block1.to_market()


@pytest.fixture
def market2(block2):
    return block2.to_market()


@pytest.fixture
def fast_oracle():
    return OracleConfig(restarts=4, seed=11)


@pytest.fixture
def small_mc():
    """Enough paths for quick statistical checks."""
    return McConfig(paths=200_000, seed=99, block_size=50_000)


def random_correlation(rng: np.random.Generator, d: int) -> np.ndarray:
    """Normalised Wishart draw: a well-conditioned random correlation matrix."""
    g = rng.standard_normal((d, d + 3))
    cov = g @ g.T
    scale = 1.0 / np.sqrt(np.diag(cov))
    rho = cov * np.outer(scale, scale)
    np.fill_diagonal(rho, 1.0)
    return rho


def random_market(rng: np.random.Generator, d: int) -> MarketModel:
    gammas = rng.uniform(0.1, 0.4, size=d)
    sigma = build_volatility_from_correlation(gammas, random_correlation(rng, d))
    b = rng.uniform(0.005, 0.1, size=d)
    return MarketModel(r=0.02, b=b, sigma=sigma)


def random_benchmark(rng: np.random.Generator, market: MarketModel) -> BenchmarkPortfolio:
    """Random benchmark with positive excess return."""
    eta = rng.standard_normal(market.d)
    if market.b @ eta <= 0.0:
        eta = -eta
    return BenchmarkPortfolio.from_weights(market, eta)


def random_instance(seed: int):
    """(market, spec, benchmark, delta) over the ranges of the property suites."""
    rng = np.random.default_rng(seed)
    d = int(rng.integers(2, 5))
    market = random_market(rng, d)
    spec = RiskSpec(alpha=float(rng.uniform(0.01, 0.2)), T=float(rng.uniform(1.0, 10.0)))
    benchmark = random_benchmark(rng, market)
    delta = float(rng.uniform(0.0, 0.95))
    return market, spec, benchmark, delta
