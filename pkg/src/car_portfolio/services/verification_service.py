"""
End-to-end verification of the closed forms on the configured datasets.

Each check yields one CheckOutcome; a failure or exception in one check is recorded
and the suite moves on.
"""

from pathlib import Path
from typing import Any, Callable, Dict, Optional, Tuple

import numpy as np

from car_portfolio.errors import CarPortfolioError, DegenerateInstanceError
from car_portfolio.models.all_models import BlockMarket, ConstraintSpec, MarketModel, PortfolioSolution
from car_portfolio.models.verification_models import CheckOutcome, VerificationReport
from car_portfolio.services.closed_form_solvers import (
    asymptotic_portfolios,
    epsilon_star,
    solve_constrained,
    solve_pricing_kernel,
    solve_unconstrained,
    two_fund_residual,
    variance_comparison,
)
from car_portfolio.services.datasets import base_block_market
from car_portfolio.services.market_model import growth_optimal_benchmark
from car_portfolio.services.risk_measures import capital_at_risk, log_correlation
from car_portfolio.services.verification_oracle import MonteCarloEngine, kkt_stationarity_residual, numeric_min_car
from car_portfolio.utils.app_logger import LoggerTimingContext, logger
from car_portfolio.utils.config_manager import ExperimentConfig
from car_portfolio.utils.file_utils import save_json
from car_portfolio.utils.numerics import IDENTITY_RTOL, relative_error

ORACLE_PI_ATOL = 1e-4
ORACLE_CAR_ATOL = 1e-6
KKT_ATOL = 1e-8
ASYMPTOTIC_SIGMA11 = 1e3
ASYMPTOTIC_ATOL = 1e-3
ASYMPTOTIC_RTOL = 1e-3

CheckFn = Callable[[], Tuple[bool, Dict[str, Any]]]


def limit_variance_error(value: float, limit: float) -> float:
    """Relative error against a limit variance; a zero limit must be met exactly."""
    if limit == 0.0:
        return 0.0 if value == 0.0 else float("inf")
    return relative_error(value, limit)


class VerificationService:
    """Service for running the verification suite against one configuration."""

    def __init__(self, config: ExperimentConfig):
        self.config = config
        self.spec = config.risk_spec()
        self.report = VerificationReport(config=config.to_dict())

    def _check(self, name: str, dataset: str, fn: CheckFn) -> CheckOutcome:
        try:
            passed, detail = fn()
            outcome = CheckOutcome(name=name, dataset=dataset, passed=bool(passed), detail=detail)
        except CarPortfolioError as e:
            outcome = CheckOutcome(
                name=name,
                dataset=dataset,
                passed=False,
                error=f"{type(e).__name__}: {e}",
                degenerate=isinstance(e, DegenerateInstanceError),
            )
        except Exception as e:
            logger.exception(f"Unexpected error in check {name} on dataset {dataset}")
            outcome = CheckOutcome(name=name, dataset=dataset, passed=False, error=f"{type(e).__name__}: {e}")

        if outcome.passed:
            logger.debug(f"[{dataset}] {name}: passed")
        else:
            logger.error(f"[{dataset}] {name}: FAILED {outcome.error or outcome.detail}")
        self.report.add(outcome)
        return outcome

    # ------------------------------------------------------------------
    # Closed-form identities
    # ------------------------------------------------------------------

    def _identity_checks(self, block: BlockMarket, market: MarketModel, delta: float) -> Tuple[bool, Dict[str, Any]]:
        spec = self.spec
        benchmark = growth_optimal_benchmark(block)
        constraint = ConstraintSpec(eta=benchmark, delta=delta)
        general = solve_constrained(market, spec, constraint)
        kernel = solve_pricing_kernel(block, spec, delta)
        unconstrained = solve_unconstrained(market, spec)
        comparison = variance_comparison(block, spec, delta)

        detail: Dict[str, Any] = {
            "delta": delta,
            "pricing_kernel_gap": float(np.max(np.abs(general.pi - kernel.pi))),
            "car_gap": abs(kernel.car - capital_at_risk(market, kernel.pi, spec)),
            "epsilon_gap": abs(epsilon_star(general.lam, market, spec, benchmark, delta) - general.epsilon),
            "car_ordering": general.car >= unconstrained.car - 1e-12,
            "variance_gap": max(
                abs(comparison.var_unconstrained - spec.T * unconstrained.epsilon**2),
                abs(comparison.var_constrained - spec.T * general.epsilon**2),
            ),
            "lambda_positive": general.lam > 0.0,
        }
        checks = [
            detail["pricing_kernel_gap"] <= IDENTITY_RTOL,
            detail["car_gap"] <= IDENTITY_RTOL,
            detail["epsilon_gap"] <= IDENTITY_RTOL,
            detail["car_ordering"],
            detail["variance_gap"] <= IDENTITY_RTOL,
            detail["lambda_positive"],
        ]

        if not general.is_riskless:
            detail["correlation_gap"] = abs(log_correlation(market, general.pi, benchmark) + delta)
            detail["two_fund_residual"] = two_fund_residual(market, general.pi, benchmark)
            detail["kkt_residual"] = kkt_stationarity_residual(market, spec, constraint, general.pi, general.lam)
            checks += [
                general.binding,
                detail["correlation_gap"] <= IDENTITY_RTOL,
                detail["two_fund_residual"] <= IDENTITY_RTOL,
                detail["kkt_residual"] <= KKT_ATOL,
            ]
        return all(checks), detail

    def _oracle_check(
        self, market: MarketModel, closed: PortfolioSolution, constraint: Optional[ConstraintSpec]
    ) -> Tuple[bool, Dict[str, Any]]:
        oracle = numeric_min_car(market, self.spec, constraint, self.config.oracle)
        pi_gap = float(np.max(np.abs(oracle.pi - closed.pi)))
        car_gap = oracle.car - closed.car
        detail = {
            "pi_gap": pi_gap,
            "car_gap": car_gap,
            "oracle_car": oracle.car,
            "closed_form_car": closed.car,
            "violation": oracle.violation,
            "agreeing_restarts": oracle.agreeing_restarts,
        }
        # The closed form may not be beaten by more than the tolerance
        passed = pi_gap <= ORACLE_PI_ATOL and car_gap >= -ORACLE_CAR_ATOL and abs(car_gap) <= ORACLE_CAR_ATOL
        return passed, detail

    def _asymptotic_check(self, block: BlockMarket, delta: float) -> Tuple[bool, Dict[str, Any]]:
        limits = asymptotic_portfolios(block, self.spec, delta)
        far = block.with_sigma11(ASYMPTOTIC_SIGMA11)
        market = far.to_market()
        unconstrained = solve_unconstrained(market, self.spec)
        constrained = solve_pricing_kernel(far, self.spec, delta)

        var_u = self.spec.T * unconstrained.epsilon**2
        var_c = self.spec.T * constrained.epsilon**2
        detail = {
            "delta": delta,
            "pi_unconstrained_gap": float(np.max(np.abs(unconstrained.pi - limits.pi_unconstrained))),
            "pi_constrained_gap": float(np.max(np.abs(constrained.pi - limits.pi_constrained))),
            "pi0_constrained_limit": float(limits.pi_constrained[0]),
            "var_unconstrained_error": limit_variance_error(var_u, limits.var_unconstrained),
            "var_constrained_error": limit_variance_error(var_c, limits.var_constrained),
        }
        passed = (
            detail["pi_unconstrained_gap"] <= ASYMPTOTIC_ATOL
            and detail["pi_constrained_gap"] <= ASYMPTOTIC_ATOL
            and detail["pi0_constrained_limit"] == 0.0
            and detail["var_unconstrained_error"] <= ASYMPTOTIC_RTOL
            and detail["var_constrained_error"] <= ASYMPTOTIC_RTOL
        )
        return passed, detail

    # ------------------------------------------------------------------
    # Monte Carlo
    # ------------------------------------------------------------------

    def _mc_checks(self, dataset: str, market: MarketModel, label: str, solution: PortfolioSolution, benchmark=None):
        engine = MonteCarloEngine(market, self.spec, self.config.mc)
        x = self.config.x

        def quantile():
            check = engine.quantile_check(solution.pi, x)
            return check.passed, check.to_dict()

        def moments():
            check = engine.moment_check(solution.pi, x)
            return check.passed, check.to_dict()

        self._check(f"mc_quantile_{label}", dataset, quantile)
        self._check(f"mc_moments_{label}", dataset, moments)

        if benchmark is not None and not solution.is_riskless:

            def correlation():
                check = engine.correlation_check(solution.pi, benchmark)
                return check.passed, check.to_dict()

            self._check(f"mc_correlation_{label}", dataset, correlation)

    # ------------------------------------------------------------------
    # Suite
    # ------------------------------------------------------------------

    def _verify_dataset(self, dataset) -> None:
        name = dataset.name
        holder: Dict[str, BlockMarket] = {}

        def build():
            holder["block"] = base_block_market(dataset, r=self.config.r, m=self.config.m)
            return True, {"d": holder["block"].d, "m": holder["block"].m}

        if not self._check("market", name, build).passed:
            return
        block = holder["block"]
        market = block.to_market()

        def identities():
            residuals = growth_optimal_benchmark(block).identity_residuals
            return max(residuals.values()) <= IDENTITY_RTOL, residuals

        self._check("pricing_kernel_identities", name, identities)

        # Step 1: Unconstrained problem
        unconstrained = solve_unconstrained(market, self.spec)
        self._check("oracle_unconstrained", name, lambda: self._oracle_check(market, unconstrained, None))
        self._mc_checks(name, market, "unconstrained", unconstrained)

        # Step 2: Constrained problem per delta
        for delta in self.config.deltas:
            label = f"delta={delta:g}"
            self._check(f"closed_form_identities[{label}]", name, lambda d=delta: self._identity_checks(block, market, d))

            try:
                benchmark = growth_optimal_benchmark(block)
                constraint = ConstraintSpec(eta=benchmark, delta=delta)
                constrained = solve_constrained(market, self.spec, constraint)
            except CarPortfolioError as e:
                self.report.add(
                    CheckOutcome(
                        name=f"constrained[{label}]",
                        dataset=name,
                        passed=False,
                        error=f"{type(e).__name__}: {e}",
                        degenerate=isinstance(e, DegenerateInstanceError),
                    )
                )
                continue

            self._check(f"oracle_constrained[{label}]", name, lambda: self._oracle_check(market, constrained, constraint))
            self._mc_checks(name, market, f"constrained[{label}]", constrained, benchmark)

            if self.config.m == 1:
                self._check(f"asymptotics[{label}]", name, lambda d=delta: self._asymptotic_check(block, d))

    def run_verify(self, output_dir: Optional[Path] = None) -> VerificationReport:
        """
        Run oracle agreement, Monte Carlo checks and the closed-form identity suite for
        every configured dataset, then write ``verification_report.json``.

        Returns:
            The report; ``report.passed`` is False if any check failed.
        """
        output_dir = output_dir or self.config.output_dir
        datasets = self.config.market_datasets()
        logger.info(f"Starting verification of {len(datasets)} dataset(s) at deltas {self.config.deltas}")

        with LoggerTimingContext("Verification suite", level="INFO"):
            for dataset in datasets:
                with LoggerTimingContext(f"Verification of dataset {dataset.name}"):
                    self._verify_dataset(dataset)

        save_json(
            {"passed": self.report.passed, "verdicts": self.report.verdicts(), **self.report.to_dict()},
            output_dir,
            "verification_report.json",
        )

        failed = self.report.failed
        if failed:
            logger.error(f"Verification failed: {len(failed)} of {len(self.report.checks)} checks")
        else:
            logger.success(f"Verification passed: {len(self.report.checks)} checks")
        return self.report


def run_verify(config: ExperimentConfig) -> VerificationReport:
    return VerificationService(config).run_verify()
