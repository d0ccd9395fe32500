"""Exception hierarchy shared across the package."""


class GcphError(Exception):
    """Base class for all package errors."""


class ConfigurationError(GcphError, ValueError):
    """Invalid grid, config, or a design that cannot be fitted."""


class InputError(GcphError, ValueError):
    """Malformed arguments: shape mismatches, negative norms, non-finite scores."""


class DataError(GcphError, ValueError):
    """Problems with a dataset: missing columns, unparseable cells, no events."""


class NumericalError(GcphError, ArithmeticError):
    """Training produced a non-finite loss."""


class UndefinedMetricError(GcphError, ValueError):
    """A metric has no defined value for the given inputs."""
