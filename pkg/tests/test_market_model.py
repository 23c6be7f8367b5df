"""
Tests for market construction, validation and the growth-optimal benchmark.
"""

import numpy as np
import pytest
from scipy.special import ndtr, ndtri

from car_portfolio.errors import (
    DegenerateBenchmark,
    DimensionMismatch,
    InvalidCorrelation,
    InvalidMarket,
    InvalidThreshold,
    NotPositiveDefinite,
    OutOfRange,
    SingularBlock,
)
from car_portfolio.models.all_models import BlockMarket, ConstraintSpec, MarketModel, RiskSpec
from car_portfolio.services.datasets import DEFAULT_GAMMAS, get_dataset
from car_portfolio.services.market_model import (
    assemble_block_market,
    block_inverse_residual,
    build_volatility_from_correlation,
    growth_optimal_benchmark,
    split_block_market,
)
from car_portfolio.utils.normal_dist import inverse_normal_cdf, normal_quantile

from conftest import random_correlation


class TestBuildVolatility:
    """Cholesky construction of the volatility matrix."""

    def test_identity_correlation_gives_diagonal(self):
        """With rho = I the volatility matrix is diag(gamma)."""
        sigma = build_volatility_from_correlation(DEFAULT_GAMMAS, np.eye(3))
        np.testing.assert_allclose(sigma, np.diag(DEFAULT_GAMMAS), atol=1e-15)

    @pytest.mark.parametrize("dataset_id", ["1", "2"])
    def test_reconstruction(self, dataset_id):
        """L L' reproduces diag(gamma) rho diag(gamma) to 1e-12."""
        data = get_dataset(dataset_id)
        sigma = build_volatility_from_correlation(data.gammas, data.rho)
        covariance = np.outer(data.gammas, data.gammas) * data.rho
        assert np.max(np.abs(sigma @ sigma.T - covariance)) <= 1e-12
        assert np.allclose(sigma, np.tril(sigma))

    def test_dataset1_factor(self):
        """Hand-computed Cholesky factor of the first dataset."""
        data = get_dataset("1")
        sigma = build_volatility_from_correlation(data.gammas, data.rho)
        expected = np.array([[0.2, 0.0, 0.0], [-0.15, 0.2, 0.0], [-0.24, 0.0075, 0.179844]])
        np.testing.assert_allclose(sigma, expected, atol=1e-6)

    def test_random_reconstruction(self):
        """Reconstruction holds for random admissible inputs."""
        rng = np.random.default_rng(5)
        for _ in range(20):
            d = int(rng.integers(1, 6))
            gammas = rng.uniform(0.05, 0.5, size=d)
            rho = random_correlation(rng, d)
            sigma = build_volatility_from_correlation(gammas, rho)
            assert np.max(np.abs(sigma @ sigma.T - np.outer(gammas, gammas) * rho)) <= 1e-12

    def test_not_positive_definite(self):
        """Inadmissible correlation data is rejected."""
        rho = np.array([[1.0, 0.9, -0.9], [0.9, 1.0, 0.9], [-0.9, 0.9, 1.0]])
        with pytest.raises(NotPositiveDefinite):
            build_volatility_from_correlation(DEFAULT_GAMMAS, rho)

    def test_singular_correlation(self):
        """Perfectly correlated assets have a zero pivot."""
        rho = np.ones((2, 2))
        with pytest.raises(NotPositiveDefinite):
            build_volatility_from_correlation([0.2, 0.3], rho)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            build_volatility_from_correlation([0.2, 0.3], np.eye(3))

    def test_asymmetric_correlation(self):
        rho = np.array([[1.0, 0.2], [0.3, 1.0]])
        with pytest.raises(InvalidCorrelation):
            build_volatility_from_correlation([0.2, 0.3], rho)

    def test_non_unit_diagonal(self):
        with pytest.raises(InvalidCorrelation):
            build_volatility_from_correlation([0.2, 0.3], np.diag([1.0, 2.0]))

    def test_non_positive_gamma(self):
        with pytest.raises(OutOfRange):
            build_volatility_from_correlation([0.2, -0.3], np.eye(2))


class TestMarketModel:
    """Validation of the flat market description."""

    def test_rejects_singular_sigma(self):
        with pytest.raises(InvalidMarket):
            MarketModel(r=0.0, b=[0.1, 0.1], sigma=[[1.0, 1.0], [1.0, 1.0]])

    def test_rejects_non_positive_excess_return(self):
        with pytest.raises(InvalidMarket):
            MarketModel(r=0.0, b=[0.1, -0.1], sigma=np.eye(2))

    def test_relaxed_excess_return(self):
        """The positivity requirement can be switched off."""
        market = MarketModel(r=0.0, b=[0.1, -0.1], sigma=np.eye(2), require_positive_excess=False)
        assert market.d == 2

    def test_shape_mismatch(self):
        with pytest.raises(DimensionMismatch):
            MarketModel(r=0.0, b=[0.1, 0.1], sigma=np.eye(3))

    def test_arrays_are_read_only(self):
        market = MarketModel(r=0.0, b=[0.1], sigma=[[0.2]])
        with pytest.raises(ValueError):
            market.b[0] = 1.0

    def test_merton_direction(self, market1):
        """(sigma sigma')^-1 b solves the normal equations."""
        sigma = market1.sigma
        np.testing.assert_allclose(sigma @ sigma.T @ market1.merton_direction, market1.b, atol=1e-14)


class TestRiskSpec:
    """Confidence level, horizon and the normal quantile."""

    def test_z_alpha(self):
        spec = RiskSpec(alpha=0.05, T=5.0)
        assert spec.z_alpha == pytest.approx(-1.6448536269514722, abs=1e-10)
        assert abs(ndtr(spec.z_alpha) - 0.05) <= 1e-10

    @pytest.mark.parametrize("alpha", [0.0, 0.5, 0.7, -0.1])
    def test_alpha_out_of_range(self, alpha):
        with pytest.raises(OutOfRange):
            RiskSpec(alpha=alpha, T=1.0)

    def test_non_positive_horizon(self):
        with pytest.raises(OutOfRange):
            RiskSpec(alpha=0.05, T=0.0)

    def test_quantile_accuracy(self):
        """|Phi(z) - p| <= 1e-10 across both tails and the centre."""
        p = np.concatenate([np.logspace(-12, -1, 40), np.linspace(0.02, 0.98, 50), 1.0 - np.logspace(-12, -1, 40)])
        z = inverse_normal_cdf(p)
        assert np.max(np.abs(ndtr(z) - p)) <= 1e-10
        np.testing.assert_allclose(z, ndtri(p), rtol=1e-9, atol=1e-12)

    def test_quantile_antisymmetric_and_increasing(self):
        p = np.linspace(0.001, 0.499, 200)
        z = inverse_normal_cdf(p)
        np.testing.assert_allclose(z, -inverse_normal_cdf(1.0 - p), atol=1e-12)
        assert np.all(np.diff(z) > 0.0)

    def test_quantile_near_half(self):
        """alpha -> 0.5 from below gives z -> 0 from below."""
        z = normal_quantile(0.5 - 1e-9)
        assert -1e-8 < z < 0.0

    def test_scalar_in_scalar_out(self):
        assert isinstance(inverse_normal_cdf(0.3), float)

    @pytest.mark.parametrize("p", [0.0, 1.0, float("nan")])
    def test_inverse_cdf_domain(self, p):
        with pytest.raises(OutOfRange):
            inverse_normal_cdf(p)


class TestBlockMarket:
    """Block partition and its inverse formula."""

    def test_block_diagonal_inverse(self):
        block = assemble_block_market(
            sigma11=[[0.5]], sigma21=[[0.0], [0.0]], sigma22=np.diag([0.25, 0.4]), b1=[0.1], b2=[0.1, 0.1], r=0.0
        )
        np.testing.assert_allclose(block.sigma_inv, np.diag([2.0, 4.0, 2.5]), atol=1e-15)

    @pytest.mark.parametrize("dataset_id", ["1", "2"])
    def test_inverse_identity(self, dataset_id, request):
        block = request.getfixturevalue(f"block{dataset_id}")
        assert block_inverse_residual(block) <= 1e-12
        assert block.m == 1 and block.d == 3

    def test_empty_second_block(self):
        """m = d leaves no second-type asset."""
        with pytest.raises(DimensionMismatch):
            BlockMarket(sigma11=np.eye(2), sigma21=np.zeros((0, 2)), sigma22=np.zeros((0, 0)), b1=[0.1, 0.1], b2=[], r=0.0)

    def test_singular_block(self):
        with pytest.raises(SingularBlock):
            assemble_block_market(
                sigma11=[[0.5]], sigma21=[[0.1], [0.1]], sigma22=[[1.0, 1.0], [1.0, 1.0]], b1=[0.1], b2=[0.1, 0.1], r=0.0
            )

    def test_split_round_trip(self, market1, block1):
        split = split_block_market(market1, 1)
        np.testing.assert_array_equal(split.sigma, block1.sigma)
        np.testing.assert_array_equal(split.b, block1.b)

    def test_split_rejects_coupled_first_block(self):
        market = MarketModel(r=0.0, b=[0.1, 0.1], sigma=[[0.2, 0.1], [0.0, 0.3]])
        with pytest.raises(DimensionMismatch):
            split_block_market(market, 1)

    @pytest.mark.parametrize("m", [0, 3])
    def test_split_rejects_bad_m(self, market1, m):
        with pytest.raises(DimensionMismatch):
            split_block_market(market1, m)

    def test_theta_values(self, block1, market1):
        """theta1 = 0.07 / 0.2 and theta1^2 + theta2^2 = ||sigma^-1 b||^2."""
        assert block1.theta1 == pytest.approx(0.35, abs=1e-14)
        assert block1.theta2 == pytest.approx(0.798648, abs=1e-5)
        assert block1.theta1**2 + block1.theta2**2 == pytest.approx(market1.price_of_risk_norm**2, rel=1e-12)

    def test_with_sigma11_keeps_other_blocks(self, block1):
        scaled = block1.with_sigma11(1.5)
        assert scaled.sigma11[0, 0] == 1.5
        np.testing.assert_array_equal(scaled.sigma21, block1.sigma21)
        np.testing.assert_array_equal(scaled.sigma22, block1.sigma22)


class TestGrowthOptimalBenchmark:
    """Growth-optimal portfolio of the first-type assets."""

    def test_scalar_example(self, block1):
        benchmark = growth_optimal_benchmark(block1)
        np.testing.assert_allclose(benchmark.eta, [1.75, 0.0, 0.0], atol=1e-14)
        assert benchmark.exposure_norm == pytest.approx(0.35, abs=1e-14)
        assert benchmark.excess_return == pytest.approx(0.1225, abs=1e-14)

    @pytest.mark.parametrize("dataset_id", ["1", "2"])
    def test_identities(self, dataset_id, request):
        benchmark = growth_optimal_benchmark(request.getfixturevalue(f"block{dataset_id}"))
        assert max(benchmark.identity_residuals.values()) <= 1e-10

    def test_identities_random_blocks(self):
        """The three benchmark identities hold on random block markets with m in {1, 2}."""
        rng = np.random.default_rng(17)
        for _ in range(100):
            d = int(rng.integers(2, 6))
            m = int(rng.integers(1, d))
            sigma = build_volatility_from_correlation(rng.uniform(0.1, 0.4, size=d), random_correlation(rng, d))
            market = MarketModel(r=0.01, b=rng.uniform(0.005, 0.1, size=d), sigma=sigma)
            benchmark = growth_optimal_benchmark(split_block_market(market, m))
            assert max(benchmark.identity_residuals.values()) <= 1e-10

    def test_zero_first_type_excess_return(self):
        block = assemble_block_market(
            sigma11=[[0.2]],
            sigma21=[[0.1]],
            sigma22=[[0.3]],
            b1=[0.0],
            b2=[0.05],
            r=0.0,
            require_positive_excess=False,
        )
        with pytest.raises(DegenerateBenchmark):
            growth_optimal_benchmark(block)


class TestConstraintSpec:
    @pytest.mark.parametrize("delta", [-0.1, 1.0, 1.5])
    def test_threshold_range(self, block1, delta):
        with pytest.raises(InvalidThreshold):
            ConstraintSpec(eta=growth_optimal_benchmark(block1), delta=delta)
