"""Exception hierarchy.

Every error raised on purpose by the package derives from :class:`QelmError`,
so callers (and the CLI) can catch one type and map it to an exit code.
"""


class QelmError(Exception):
    """Base class for all package errors."""


class ContractViolation(QelmError, ValueError):
    """An input broke a documented precondition (shape, hermiticity, form)."""


class NumericalError(QelmError, ArithmeticError):
    """A decomposition or solver did not reach the required accuracy."""


class PovmValidityError(NumericalError):
    """Effects produced a probability outside [0, 1] beyond tolerance."""


class EmptyStatisticsError(QelmError, ValueError):
    """A counts vector with no recorded events cannot be normalized."""


class TrainingError(NumericalError):
    """Training data is degenerate (e.g. all zeros)."""


class ConfigError(QelmError, ValueError):
    """A configuration file is missing, malformed, or inconsistent."""
