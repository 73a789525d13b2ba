"""Production copulas: GB2 marginals, copula models, fitting and simulation
for firm-level (labor, capital, value added) data."""

__version__ = "0.1.0"
