"""
Data models for the numerical oracle, the Monte Carlo engine and verification reports.
"""

from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

import numpy as np

from car_portfolio.models.base import DataclassJsonMixin, frozen_array
from car_portfolio.errors import OutOfRange


@dataclass
class OracleConfig(DataclassJsonMixin):
    """Settings of the derivative-free penalty optimizer."""

    max_iterations: int = 20000
    tolerance: float = 1e-9  # CaR agreement required between restarts
    penalty_initial: float = 10.0
    penalty_growth: float = 10.0
    penalty_steps: int = 6
    restarts: int = 6
    seed: int = 7
    feasibility_tol: float = 1e-8

    def __post_init__(self):
        if self.tolerance <= 0.0:
            raise OutOfRange(f"Oracle tolerance must be positive, got {self.tolerance}")
        if self.restarts < 4:
            raise OutOfRange(f"Oracle needs at least 4 restarts, got {self.restarts}")
        if self.penalty_growth <= 1.0 or self.penalty_initial <= 0.0 or self.penalty_steps < 1:
            raise OutOfRange("Penalty schedule must start positive and grow geometrically")
        if self.max_iterations < 1:
            raise OutOfRange("max_iterations must be positive")


@dataclass
class McConfig(DataclassJsonMixin):
    """
    Monte Carlo controls. Sampling is exact at the terminal date (one step);
    each block of ``block_size`` paths draws from its own spawned seed sequence.
    """

    paths: int = 1_000_000
    seed: int = 2024
    block_size: int = 100_000
    confidence: float = 0.99  # distribution-free quantile band
    band_sigmas: float = 4.0  # standard-error band for moments and correlation

    def __post_init__(self):
        if self.paths < 2:
            raise OutOfRange(f"Need at least 2 paths, got {self.paths}")
        if self.block_size < 1:
            raise OutOfRange("block_size must be positive")
        if not (0.0 < self.confidence < 1.0):
            raise OutOfRange(f"Band confidence must lie in (0, 1), got {self.confidence}")
        if self.band_sigmas <= 0.0:
            raise OutOfRange("band_sigmas must be positive")


@dataclass(frozen=True, eq=False)
class OracleResult(DataclassJsonMixin):
    """Best feasible point found by the numerical oracle."""

    pi: np.ndarray
    car: float
    violation: float  # max(0, g(pi)) / ||sigma' eta||; 0 for the unconstrained problem
    agreeing_restarts: int
    restart_cars: List[float] = field(default_factory=list)

    def __post_init__(self):
        object.__setattr__(self, "pi", frozen_array(self.pi))


@dataclass(frozen=True)
class QuantileCheck(DataclassJsonMixin):
    """Empirical alpha-quantile of the log return with a DKW confidence band."""

    empirical: float
    lower: float
    upper: float
    closed_form: float
    paths: int
    passed: bool


@dataclass(frozen=True)
class CorrelationCheck(DataclassJsonMixin):
    """Pearson correlation of paired (log X(T), log Y(T)) samples against the closed form."""

    sample: float
    closed_form: float
    lower: float
    upper: float
    paths: int
    passed: bool


@dataclass(frozen=True)
class MomentComparison(DataclassJsonMixin):
    name: str
    sample: float
    closed_form: float
    standard_error: float
    passed: bool


@dataclass(frozen=True)
class MomentCheck(DataclassJsonMixin):
    """Sample moments of X(T) and log X(T) against the closed-form wealth law."""

    comparisons: List[MomentComparison]
    paths: int

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.comparisons)


@dataclass
class CheckOutcome(DataclassJsonMixin):
    """A single verification verdict."""

    name: str
    dataset: str
    passed: bool
    detail: Dict[str, Any] = field(default_factory=dict)
    error: Optional[str] = None
    # Set when the check hit an instance the closed forms are undefined on
    degenerate: bool = False


@dataclass
class VerificationReport(DataclassJsonMixin):
    """Aggregated verification verdicts."""

    checks: List[CheckOutcome] = field(default_factory=list)
    config: Dict[str, Any] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    @property
    def exit_code(self) -> int:
        """0 if every check passed, 3 if a failure came from a degenerate instance, else 2."""
        if self.passed:
            return 0
        return 3 if any(c.degenerate for c in self.failed) else 2

    @property
    def failed(self) -> List[CheckOutcome]:
        return [c for c in self.checks if not c.passed]

    def add(self, outcome: CheckOutcome) -> None:
        self.checks.append(outcome)

    def verdicts(self) -> Dict[str, bool]:
        return {f"{c.dataset}:{c.name}": c.passed for c in self.checks}
