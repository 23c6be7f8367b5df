"""
Exception hierarchy for CaR Portfolio.

Every error carries the CLI exit code it maps to, so the command line layer can
translate failures without a lookup table of its own.
"""


class CarPortfolioError(Exception):
    """Base class for all errors raised by the package."""

    exit_code: int = 1


# ---------------------------------------------------------------------------
# Validation errors (exit code 1)
# ---------------------------------------------------------------------------


class ValidationError(CarPortfolioError):
    """Inputs violate a documented precondition."""

    exit_code = 1


class DimensionMismatch(ValidationError):
    """Vector/matrix shapes disagree."""


class NotPositiveDefinite(ValidationError):
    """Cholesky pivots are non-positive: the correlation data is inadmissible."""


class InvalidCorrelation(ValidationError):
    """Matrix is not a correlation matrix (asymmetric, non-unit diagonal, entries outside [-1, 1])."""


class SingularBlock(ValidationError):
    """A diagonal block of a block-partitioned volatility matrix is numerically singular."""


class InvalidMarket(ValidationError):
    """Market description violates its invariants (singular sigma, non-positive excess returns)."""


class OutOfRange(ValidationError):
    """A scalar parameter lies outside its admissible range."""


class InvalidThreshold(ValidationError):
    """Correlation threshold outside [0, 1)."""


class UnsupportedPartition(ValidationError):
    """Operation requires a different first-type asset count."""


class ConfigurationError(ValidationError):
    """Experiment configuration file or overrides are invalid."""


# ---------------------------------------------------------------------------
# Degenerate instances (exit code 3)
# ---------------------------------------------------------------------------


class DegenerateInstanceError(CarPortfolioError):
    """The problem instance sits where the closed forms are undefined."""

    exit_code = 3


class DegenerateDirection(DegenerateInstanceError):
    """Benchmark is parallel to the Merton direction; the constrained solution's denominator vanishes."""


class DegenerateBenchmark(DegenerateInstanceError):
    """Benchmark has no positive excess return (b'eta <= 0)."""


class ZeroVolatilityPortfolio(DegenerateInstanceError):
    """Correlation requested for a portfolio with ||sigma' pi|| = 0."""


# ---------------------------------------------------------------------------
# Verification failures (exit code 2)
# ---------------------------------------------------------------------------


class VerificationFailure(CarPortfolioError):
    """One or more verification checks failed."""

    exit_code = 2


class NoConvergence(VerificationFailure):
    """The numerical oracle could not agree with itself across restarts."""
