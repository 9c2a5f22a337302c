"""Exceptions raised by irtcoresets."""


class IRTError(Exception):
    """Base class for all errors raised by this package."""


class InvalidArgumentError(IRTError, ValueError):
    """An argument is outside its documented domain."""


class DimensionMismatchError(InvalidArgumentError):
    """Shapes of a response matrix and parameter vectors do not agree."""


class NotStandardizedError(InvalidArgumentError):
    """Metrics were requested on fits that were not standardized."""


class DegenerateLabelsError(IRTError):
    """A design holds a single label class where both are required."""


class DegenerateScaleError(IRTError):
    """The ability scale collapsed (zero standard deviation)."""


class UndefinedComplexityError(IRTError):
    """mu-complexity is undefined for the given matrix."""


class EmptyCoresetError(IRTError):
    """A coreset context holds no positively weighted rows."""


class ConfigError(IRTError):
    """An experiment configuration or command line is invalid."""


class NumericalError(IRTError):
    """An objective or gradient became non-finite."""
