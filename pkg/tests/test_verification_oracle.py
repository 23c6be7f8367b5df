"""
Tests for the numerical oracle and the Monte Carlo engine.
"""

import numpy as np
import pytest

from car_portfolio.errors import NoConvergence, OutOfRange
from car_portfolio.models.all_models import MarketModel, RiskSpec
from car_portfolio.models.verification_models import McConfig, OracleConfig
from car_portfolio.services.closed_form_solvers import default_constraint, solve_constrained, solve_unconstrained
from car_portfolio.services.market_model import growth_optimal_benchmark
from car_portfolio.services.risk_measures import is_feasible, log_return_quantile, wealth_law
from car_portfolio.services.verification_oracle import (
    MonteCarloEngine,
    NumericalOracle,
    mc_correlation_check,
    mc_moment_check,
    mc_quantile_check,
    mc_terminal_samples,
    numeric_min_car,
)


class TestNumericalOracle:
    def test_clamped_scalar_market(self, fast_oracle):
        """The oracle also lands on the riskless portfolio when the clamp is active."""
        market = MarketModel(r=0.0, b=[0.5], sigma=[[1.0]])
        result = numeric_min_car(market, RiskSpec(alpha=0.05, T=1.0), None, fast_oracle)
        assert abs(result.pi[0]) <= 1e-6
        assert result.car == pytest.approx(0.0, abs=1e-9)
        assert result.violation == 0.0

    def test_unconstrained_dataset1(self, market1, spec, fast_oracle):
        closed = solve_unconstrained(market1, spec)
        result = NumericalOracle(market1, spec, None, fast_oracle).solve()
        np.testing.assert_allclose(result.pi, closed.pi, atol=1e-4)
        assert result.agreeing_restarts >= 2
        assert len(result.restart_cars) == fast_oracle.restarts

    def test_constrained_point_is_feasible(self, block1, market1, long_spec, fast_oracle):
        constraint = default_constraint(block1, 0.6)
        result = numeric_min_car(market1, long_spec, constraint, fast_oracle)
        assert result.violation <= fast_oracle.feasibility_tol
        assert is_feasible(market1, result.pi, constraint, tol=1e-8 * constraint.eta.exposure_norm)

    def test_constrained_dataset1_long_horizon(self, block1, market1, long_spec, fast_oracle):
        constraint = default_constraint(block1, 0.6)
        closed = solve_constrained(market1, long_spec, constraint)
        result = numeric_min_car(market1, long_spec, constraint, fast_oracle)
        np.testing.assert_allclose(result.pi, closed.pi, atol=1e-4)
        assert result.car == pytest.approx(closed.car, abs=1e-6)

    def test_constrained_riskless_optimum(self, block1, market1, spec, fast_oracle):
        """Dataset 1 at T = 5 and delta = 0.9: the oracle finds the zero portfolio too."""
        constraint = default_constraint(block1, 0.9)
        result = numeric_min_car(market1, spec, constraint, fast_oracle)
        np.testing.assert_allclose(result.pi, np.zeros(3), atol=1e-4)
        assert result.car == pytest.approx(0.0, abs=1e-6)

    def test_starting_points_are_seeded(self, market2, spec, fast_oracle):
        first = list(NumericalOracle(market2, spec, None, fast_oracle).starting_points())
        second = list(NumericalOracle(market2, spec, None, fast_oracle).starting_points())
        assert len(first) == fast_oracle.restarts
        np.testing.assert_array_equal(first[0], np.zeros(3))
        for a, b in zip(first, second):
            np.testing.assert_array_equal(a, b)

    def test_no_convergence(self, market2, spec):
        """With a single iteration the restarts cannot agree."""
        config = OracleConfig(max_iterations=1, restarts=4, seed=3)
        with pytest.raises(NoConvergence):
            numeric_min_car(market2, spec, None, config)

    def test_config_validation(self):
        with pytest.raises(OutOfRange):
            OracleConfig(restarts=3)
        with pytest.raises(OutOfRange):
            OracleConfig(penalty_growth=1.0)


class TestMonteCarloEngine:
    def test_riskless_portfolio_is_deterministic(self, market1, spec):
        config = McConfig(paths=1000, seed=1, block_size=300)
        samples = mc_terminal_samples(market1, np.zeros(3), spec, x=2.0, mc_config=config)
        assert samples.shape == (1000,)
        np.testing.assert_allclose(samples, np.log(2.0) + market1.r * spec.T, rtol=0.0, atol=1e-15)

    def test_riskless_checks_pass_exactly(self, market1, spec):
        config = McConfig(paths=1000, seed=1, block_size=300)
        quantile = mc_quantile_check(market1, np.zeros(3), spec, mc_config=config)
        assert quantile.passed
        assert quantile.lower == quantile.upper == pytest.approx(market1.r * spec.T, abs=1e-15)
        moments = mc_moment_check(market1, np.zeros(3), spec, mc_config=config)
        assert moments.passed
        assert all(c.standard_error <= 1e-15 for c in moments.comparisons)

    def test_same_seed_same_samples(self, market2, spec):
        config = McConfig(paths=10_000, seed=5, block_size=2_500)
        pi = np.array([0.3, 0.2, 0.1])
        first = MonteCarloEngine(market2, spec, config).terminal_log_samples(pi)
        second = MonteCarloEngine(market2, spec, config).terminal_log_samples(pi)
        np.testing.assert_array_equal(first, second)

    def test_different_seed_different_samples(self, market2, spec):
        pi = np.array([0.3, 0.2, 0.1])
        first = mc_terminal_samples(market2, pi, spec, mc_config=McConfig(paths=100, seed=1))
        second = mc_terminal_samples(market2, pi, spec, mc_config=McConfig(paths=100, seed=2))
        assert not np.array_equal(first, second)

    def test_block_layout(self, market2, spec):
        engine = MonteCarloEngine(market2, spec, McConfig(paths=1050, seed=5, block_size=500))
        sizes = [block.shape for block in engine.normal_blocks()]
        assert sizes == [(500, 3), (500, 3), (50, 3)]

    def test_perfect_correlation(self, block1, market1, spec):
        benchmark = growth_optimal_benchmark(block1)
        config = McConfig(paths=5000, seed=8, block_size=5000)
        same = mc_correlation_check(market1, benchmark.eta, benchmark, spec, mc_config=config)
        opposite = mc_correlation_check(market1, -benchmark.eta, benchmark, spec, mc_config=config)
        assert same.passed and same.closed_form == pytest.approx(1.0, abs=1e-14)
        assert opposite.passed and opposite.closed_form == pytest.approx(-1.0, abs=1e-14)

    def test_quantile_of_optimum(self, block2, market2, spec, small_mc):
        solution = solve_constrained(market2, spec, default_constraint(block2, 0.3))
        check = mc_quantile_check(market2, solution.pi, spec, mc_config=small_mc)
        assert check.passed
        assert check.lower <= check.empirical <= check.upper
        assert check.closed_form == pytest.approx(log_return_quantile(market2, solution.pi, spec), abs=1e-15)

    def test_moments_of_optimum(self, market2, spec, small_mc):
        solution = solve_unconstrained(market2, spec)
        check = mc_moment_check(market2, solution.pi, spec, x=1.5, mc_config=small_mc)
        law = wealth_law(market2, solution.pi, spec, x=1.5)
        assert check.passed
        by_name = {c.name: c for c in check.comparisons}
        assert set(by_name) == {"wealth_mean", "wealth_variance", "log_wealth_mean", "log_wealth_variance"}
        assert by_name["wealth_mean"].closed_form == pytest.approx(law.mean, rel=1e-15)

    def test_constrained_correlation(self, block2, market2, spec, small_mc):
        constraint = default_constraint(block2, 0.3)
        solution = solve_constrained(market2, spec, constraint)
        check = mc_correlation_check(market2, solution.pi, constraint.eta, spec, mc_config=small_mc)
        assert check.passed
        assert check.closed_form == pytest.approx(-0.3, abs=1e-10)
        assert check.lower < -0.3 < check.upper

    @pytest.mark.slow
    @pytest.mark.parametrize("dataset_id", ["1", "2"])
    @pytest.mark.parametrize("delta", [0.3, 0.6, 0.9])
    def test_full_path_count(self, dataset_id, delta, spec, request):
        """The default one million paths, as used by the verify command."""
        block = request.getfixturevalue(f"block{dataset_id}")
        market = block.to_market()
        constraint = default_constraint(block, delta)
        unconstrained = solve_unconstrained(market, spec)
        constrained = solve_constrained(market, spec, constraint)
        engine = MonteCarloEngine(market, spec, McConfig())

        for solution in (unconstrained, constrained):
            quantile = engine.quantile_check(solution.pi)
            assert quantile.passed
            assert engine.moment_check(solution.pi).passed

        if not constrained.is_riskless:
            correlation = engine.correlation_check(constrained.pi, constraint.eta)
            assert correlation.passed
            assert correlation.lower < -delta < correlation.upper

    def test_config_validation(self):
        with pytest.raises(OutOfRange):
            McConfig(paths=1)
        with pytest.raises(OutOfRange):
            McConfig(confidence=1.0)
