"""
Shared numerical tolerances and small helpers.
"""

# Reject sigma (or a diagonal block) whose 2-norm condition number exceeds this
MAX_CONDITION = 1e12

# Cholesky pivots below PIVOT_RTOL * max(diag) signal inadmissible correlation data
PIVOT_RTOL = 1e-12

# Cauchy-Schwarz gap ||sigma^-1 b||^2 ||sigma' eta||^2 - (b' eta)^2 relative to its first term
DEGENERACY_RTOL = 1e-12

# Closed-form identities (benchmark identities, block inverse, cross-implementation checks)
IDENTITY_RTOL = 1e-10

# Correlation matrix entries: symmetry and unit diagonal
CORRELATION_ATOL = 1e-12


def positive_part(value: float) -> float:
    """(x)^+ = max(x, 0)."""
    return max(float(value), 0.0)


def relative_error(actual: float, expected: float, floor: float = 1e-300) -> float:
    """|actual - expected| / max(|expected|, floor)."""
    return abs(float(actual) - float(expected)) / max(abs(float(expected)), floor)
