"""
CaR Portfolio - Capital-at-Risk optimal constant-proportion portfolios.

This package provides functionality to:
1. Describe Black-Scholes markets (Cholesky volatility, block partitions, growth-optimal benchmark)
2. Evaluate log-return risk functionals (quantile, CaR, wealth moments, benchmark correlation)
3. Solve the unconstrained and correlation-constrained CaR problems in closed form
4. Verify the closed forms against a numerical optimizer and Monte Carlo simulation
5. Run the diversification experiments and emit CSV tables and SVG figures
"""

__version__ = "0.1.0"
