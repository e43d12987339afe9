"""Exception types shared across the package.

The CLI maps these onto exit codes: ConfigError -> 2, GeometryError and
PreconditionError -> 3, NumericalCheckError -> 4.
"""


class ConfigError(ValueError):
    """Malformed or inconsistent experiment configuration."""


class PreconditionError(ValueError):
    """An operation's precondition is violated (ranges, dimensions, horizons)."""


class GeometryError(PreconditionError):
    """Window geometry incompatible with the interaction range or the chain."""


class NumericalCheckError(RuntimeError):
    """A numerical verification did not meet its stated tolerance."""
