"""Error taxonomy shared across the package.

Two failure classes map onto the CLI exit codes: bad inputs or
configuration (exit 1) and numerical failure at run time (exit 2).
"""


class ConfigurationError(ValueError):
    """Invalid parameters, config keys, or violated preconditions."""


class NumericalFailureError(RuntimeError):
    """A computation produced NaN/Inf or missed its error tolerance."""
