"""
Independent numerical checks of the closed forms.

- NumericalOracle re-solves the CaR problem with multi-start Nelder-Mead and an
  exterior quadratic penalty on the correlation constraint.
- MonteCarloEngine samples the exact lognormal terminal law and checks quantiles,
  moments and correlations against their closed forms.
"""

from math import ceil
from typing import Iterator, Optional, Tuple

import numpy as np
from scipy import linalg, optimize

from car_portfolio.errors import NoConvergence
from car_portfolio.models.all_models import BenchmarkPortfolio, ConstraintSpec, MarketModel, RiskSpec
from car_portfolio.models.verification_models import (
    CorrelationCheck,
    McConfig,
    MomentCheck,
    MomentComparison,
    OracleConfig,
    OracleResult,
    QuantileCheck,
)
from car_portfolio.services.closed_form_solvers import lagrangian
from car_portfolio.services.risk_measures import (
    capital_at_risk,
    correlation_constraint,
    log_correlation,
    log_return_quantile,
    wealth_law,
)
from car_portfolio.utils.app_logger import LoggerTimingContext, logger


# ---------------------------------------------------------------------------
# Derivative-free oracle
# ---------------------------------------------------------------------------


class NumericalOracle:
    """
    Minimises CaR over the Brownian loading y = sigma' pi, where the objective reads

        -T (sigma^-1 b)' y + T ||y||^2 / 2 - z_alpha sqrt(T) ||y||

    and the constraint becomes delta ||sigma' eta|| ||y|| + y' sigma' eta <= 0.
    The change of variables removes the conditioning of sigma from the simplex search.
    """

    def __init__(
        self,
        market: MarketModel,
        spec: RiskSpec,
        constraint: Optional[ConstraintSpec] = None,
        config: Optional[OracleConfig] = None,
    ):
        self.market = market
        self.spec = spec
        self.constraint = constraint
        self.config = config or OracleConfig()

        self._price_of_risk = market.sigma_inv_b
        self._scale = max(market.price_of_risk_norm, 1e-3)
        self._lu = linalg.lu_factor(market.sigma.T)
        if constraint is not None:
            self._h = market.exposure(constraint.eta.eta)
            self._e = float(np.linalg.norm(self._h))

    def portfolio(self, y: np.ndarray) -> np.ndarray:
        """pi = (sigma')^-1 y."""
        return linalg.lu_solve(self._lu, y)

    def _car(self, y: np.ndarray) -> float:
        T = self.spec.T
        radius = np.sqrt(y @ y)
        return -T * (self._price_of_risk @ y) + 0.5 * T * radius**2 - self.spec.z_alpha * self.spec.sqrt_T * radius

    def _scaled_violation(self, y: np.ndarray) -> float:
        """g / ||sigma' eta||."""
        return self.constraint.delta * np.sqrt(y @ y) + (y @ self._h) / self._e

    def _penalised(self, y: np.ndarray, mu: float) -> float:
        return self._car(y) + mu * max(0.0, self._scaled_violation(y)) ** 2

    def _nelder_mead(self, objective, start: np.ndarray, step: float) -> np.ndarray:
        d = start.size
        x = start
        # Second pass restarts the simplex around the first pass's point
        for pass_step in (step, 1e-3 * step):
            simplex = np.vstack([x, x + pass_step * np.eye(d)])
            result = optimize.minimize(
                objective,
                x,
                method="Nelder-Mead",
                options={
                    "initial_simplex": simplex,
                    "maxiter": self.config.max_iterations,
                    "maxfev": 2 * self.config.max_iterations,
                    "xatol": 1e-12,
                    "fatol": 1e-15,
                    "adaptive": True,
                },
            )
            x = result.x
        return x

    def _project(self, y: np.ndarray) -> np.ndarray:
        """
        Map y onto the feasible cone along -sigma' eta; feasible points are returned unchanged.

        With a = y'u and w = y - a u, the boundary is reached at t = a + delta ||w|| / sqrt(1 - delta^2).
        """
        unit = self._h / self._e
        a = float(y @ unit)
        orthogonal = y - a * unit
        t = a + self.constraint.delta * float(np.linalg.norm(orthogonal)) / np.sqrt(1.0 - self.constraint.delta**2)
        if t <= 0.0:
            return y
        projected = y - t * unit
        # Roundoff can leave the point a few ulps outside
        nudge = 1e-15 * max(1.0, abs(t))
        while self._scaled_violation(projected) > 0.0:
            t += nudge
            nudge *= 2.0
            projected = y - t * unit
        return projected

    def _single_run(self, start: np.ndarray) -> np.ndarray:
        if self.constraint is None:
            return self._nelder_mead(self._car, start, 0.5 * self._scale)

        y = start
        step = 0.5 * self._scale
        mu = self.config.penalty_initial
        for _ in range(self.config.penalty_steps):
            y = self._nelder_mead(lambda v, mu=mu: self._penalised(v, mu), y, step)
            mu *= self.config.penalty_growth
            step = 0.05 * self._scale

        # Polish on the projected objective, which is exact on the boundary
        y = self._nelder_mead(lambda v: self._car(self._project(v)), y, 0.05 * self._scale)
        return self._project(y)

    def starting_points(self) -> Iterator[np.ndarray]:
        """The origin, then seeded Gaussian points scaled by ||sigma^-1 b||."""
        rng = np.random.default_rng(self.config.seed)
        yield np.zeros(self.market.d)
        for _ in range(self.config.restarts - 1):
            yield self._scale * rng.standard_normal(self.market.d)

    def solve(self) -> OracleResult:
        """
        Run all restarts and return the best point.

        Raises:
            NoConvergence: If fewer than two restarts agree on the optimal CaR.
        """
        label = "unconstrained" if self.constraint is None else f"constrained delta={self.constraint.delta}"
        with LoggerTimingContext(f"Numerical oracle ({label}, {self.config.restarts} restarts)"):
            candidates = [self._single_run(start) for start in self.starting_points()]

        cars = np.array([self._car(y) for y in candidates])
        best = int(np.argmin(cars))
        tol = self.config.tolerance * max(1.0, abs(cars[best]))
        agreeing = int(np.sum(cars - cars[best] <= tol))
        logger.debug(f"Oracle restart CaRs: {np.array2string(cars, precision=12)}; {agreeing} agree")
        if agreeing < 2:
            raise NoConvergence(
                f"Only {agreeing} of {len(cars)} restarts reached CaR {cars[best]:.12g} within {self.config.tolerance}"
            )

        pi = self.portfolio(candidates[best])
        violation = 0.0
        if self.constraint is not None:
            g = correlation_constraint(self.market, pi, self.constraint.eta, self.constraint.delta)
            violation = max(0.0, g) / self._e
            if violation > self.config.feasibility_tol:
                raise NoConvergence(f"Oracle point violates the correlation constraint by {violation:.3e}")

        return OracleResult(
            pi=pi,
            car=capital_at_risk(self.market, pi, self.spec),
            violation=violation,
            agreeing_restarts=agreeing,
            restart_cars=[float(c) for c in cars],
        )


def numeric_min_car(
    market: MarketModel,
    spec: RiskSpec,
    constraint: Optional[ConstraintSpec] = None,
    oracle_config: Optional[OracleConfig] = None,
) -> OracleResult:
    """Minimise CaR numerically, with the correlation constraint when one is given."""
    return NumericalOracle(market, spec, constraint, oracle_config).solve()


def kkt_stationarity_residual(
    market: MarketModel, spec: RiskSpec, constraint: ConstraintSpec, pi: np.ndarray, lam: float, step: float = 1e-6
) -> float:
    """Norm of the central-difference gradient of L(., lambda) at pi."""
    pi = np.asarray(pi, dtype=float)
    gradient = np.empty_like(pi)
    for i in range(pi.size):
        h = step * max(1.0, abs(pi[i]))
        bump = np.zeros_like(pi)
        bump[i] = h
        gradient[i] = (
            lagrangian(market, spec, constraint, pi + bump, lam) - lagrangian(market, spec, constraint, pi - bump, lam)
        ) / (2.0 * h)
    return float(np.linalg.norm(gradient))


# ---------------------------------------------------------------------------
# Monte Carlo
# ---------------------------------------------------------------------------


class MonteCarloEngine:
    """
    Exact terminal sampling of constant-proportion wealth.

    Paths are drawn in blocks of ``block_size``; block k uses the k-th child of
    ``SeedSequence(seed)``, so any split of the blocks across workers reproduces the
    serial stream. Wealth and benchmark share the same normal draw per path.
    """

    def __init__(self, market: MarketModel, spec: RiskSpec, config: Optional[McConfig] = None):
        self.market = market
        self.spec = spec
        self.config = config or McConfig()

    def normal_blocks(self) -> Iterator[np.ndarray]:
        """Yield (n, d) standard normal blocks covering ``paths`` rows."""
        n_blocks = ceil(self.config.paths / self.config.block_size)
        children = np.random.SeedSequence(self.config.seed).spawn(n_blocks)
        remaining = self.config.paths
        for child in children:
            n = min(self.config.block_size, remaining)
            remaining -= n
            yield np.random.default_rng(child).standard_normal((n, self.market.d))

    def _drift_and_loading(self, weights: np.ndarray) -> Tuple[float, np.ndarray]:
        loading = self.market.exposure(weights)
        drift = (self.market.r + float(self.market.b @ weights) - 0.5 * float(loading @ loading)) * self.spec.T
        return drift, self.spec.sqrt_T * loading

    def log_returns(self, pi: np.ndarray, eta: Optional[np.ndarray] = None) -> Tuple[np.ndarray, Optional[np.ndarray]]:
        """
        Samples of log(X(T)/x), and of log(Y(T)/y) when a benchmark is given.

        Returns:
            (portfolio log returns, benchmark log returns or None).
        """
        drift_x, loading_x = self._drift_and_loading(np.asarray(pi, dtype=float))
        log_x = np.empty(self.config.paths)
        log_y = None
        if eta is not None:
            drift_y, loading_y = self._drift_and_loading(np.asarray(eta, dtype=float))
            log_y = np.empty(self.config.paths)

        start = 0
        with LoggerTimingContext(f"Monte Carlo sampling ({self.config.paths} paths)"):
            for z in self.normal_blocks():
                stop = start + z.shape[0]
                log_x[start:stop] = drift_x + z @ loading_x
                if log_y is not None:
                    log_y[start:stop] = drift_y + z @ loading_y
                start = stop
        return log_x, log_y

    def terminal_log_samples(self, pi: np.ndarray, x: float = 1.0) -> np.ndarray:
        """Samples of log X(T) = log x + (r + b'pi - ||sigma'pi||^2/2) T + sqrt(T) (sigma'pi)' Z."""
        log_x, _ = self.log_returns(pi)
        return np.log(x) + log_x

    def quantile_check(self, pi: np.ndarray, x: float = 1.0) -> QuantileCheck:
        """
        Order statistic at index ceil(alpha N) with a Dvoretzky-Kiefer-Wolfowitz band:
        the true quantile lies between the ceil((alpha -/+ eps) N)-th order statistics with
        probability >= confidence, eps = sqrt(ln(2 / (1 - confidence)) / (2N)).
        """
        samples, _ = self.log_returns(pi)
        n = samples.size
        alpha = self.spec.alpha
        eps = np.sqrt(np.log(2.0 / (1.0 - self.config.confidence)) / (2.0 * n))

        k = min(max(ceil(alpha * n), 1), n)
        k_lo = min(max(ceil((alpha - eps) * n), 1), n)
        k_hi = min(max(ceil((alpha + eps) * n), 1), n)
        ordered = np.partition(samples, sorted({k_lo - 1, k - 1, k_hi - 1}))

        closed_form = log_return_quantile(self.market, pi, self.spec, x)
        lower, upper, empirical = float(ordered[k_lo - 1]), float(ordered[k_hi - 1]), float(ordered[k - 1])
        atol = 1e-12 * max(1.0, abs(closed_form))
        passed = lower - atol <= closed_form <= upper + atol
        logger.debug(f"Quantile check: q={closed_form:.8g}, band=[{lower:.8g}, {upper:.8g}], passed={passed}")
        return QuantileCheck(
            empirical=empirical, lower=lower, upper=upper, closed_form=closed_form, paths=n, passed=bool(passed)
        )

    def correlation_check(self, pi: np.ndarray, eta: BenchmarkPortfolio) -> CorrelationCheck:
        """Pearson correlation of paired log returns, banded in Fisher-z space."""
        closed_form = log_correlation(self.market, pi, eta)
        log_x, log_y = self.log_returns(pi, eta.eta)
        n = log_x.size
        sample = float(np.corrcoef(log_x, log_y)[0, 1])

        if abs(closed_form) >= 1.0 - 1e-12:
            lower = upper = closed_form
            passed = abs(sample - closed_form) <= 1e-9
        else:
            half_width = self.config.band_sigmas / np.sqrt(n - 3)
            centre = np.arctanh(closed_form)
            lower, upper = float(np.tanh(centre - half_width)), float(np.tanh(centre + half_width))
            passed = lower <= sample <= upper

        logger.debug(f"Correlation check: closed form {closed_form:.8g}, sample {sample:.8g}, passed={passed}")
        return CorrelationCheck(
            sample=sample, closed_form=closed_form, lower=lower, upper=upper, paths=n, passed=bool(passed)
        )

    def moment_check(self, pi: np.ndarray, x: float = 1.0) -> MomentCheck:
        """Sample mean and variance of X(T) and log X(T) against the wealth law."""
        law = wealth_law(self.market, pi, self.spec, x)
        log_x = np.log(x) + self.log_returns(pi)[0]
        wealth = np.exp(log_x)
        n = log_x.size

        comparisons = []
        for name, samples, mean_cf, var_cf in (
            ("wealth", wealth, law.mean, law.variance),
            ("log_wealth", log_x, law.log_mean, law.log_variance),
        ):
            mean = float(samples.mean())
            centred = samples - mean
            var = float(centred @ centred / (n - 1))
            fourth = float(np.mean(centred**4))
            comparisons.append(self._compare(f"{name}_mean", mean, mean_cf, np.sqrt(var / n)))
            comparisons.append(self._compare(f"{name}_variance", var, var_cf, np.sqrt(max(fourth - var**2, 0.0) / n)))

        return MomentCheck(comparisons=comparisons, paths=n)

    def _compare(self, name: str, sample: float, closed_form: float, standard_error: float) -> MomentComparison:
        # Degenerate laws have (almost) zero standard error; allow for summation roundoff
        tolerance = max(self.config.band_sigmas * standard_error, 1e-12 * max(1.0, abs(closed_form)))
        passed = abs(sample - closed_form) <= tolerance
        return MomentComparison(
            name=name, sample=sample, closed_form=float(closed_form), standard_error=float(standard_error), passed=bool(passed)
        )


def mc_terminal_samples(
    market: MarketModel, pi: np.ndarray, spec: RiskSpec, x: float = 1.0, mc_config: Optional[McConfig] = None
) -> np.ndarray:
    return MonteCarloEngine(market, spec, mc_config).terminal_log_samples(pi, x)


def mc_quantile_check(
    market: MarketModel, pi: np.ndarray, spec: RiskSpec, x: float = 1.0, mc_config: Optional[McConfig] = None
) -> QuantileCheck:
    return MonteCarloEngine(market, spec, mc_config).quantile_check(pi, x)


def mc_correlation_check(
    market: MarketModel, pi: np.ndarray, eta: BenchmarkPortfolio, spec: RiskSpec, mc_config: Optional[McConfig] = None
) -> CorrelationCheck:
    return MonteCarloEngine(market, spec, mc_config).correlation_check(pi, eta)


def mc_moment_check(
    market: MarketModel, pi: np.ndarray, spec: RiskSpec, x: float = 1.0, mc_config: Optional[McConfig] = None
) -> MomentCheck:
    return MonteCarloEngine(market, spec, mc_config).moment_check(pi, x)
