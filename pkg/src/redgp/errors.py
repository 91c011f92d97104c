"""Exception hierarchy; each class carries the CLI exit code it maps to."""


class RedError(Exception):
    exit_code = 1


class ConfigError(RedError, ValueError):
    exit_code = 2


class DataError(RedError, ValueError):
    exit_code = 3


class NumericalError(RedError, ArithmeticError):
    exit_code = 4


class FactorizationError(NumericalError):
    """Cholesky factorization failed even after jitter escalation."""


class NoMisclassificationError(DataError):
    """The base classifier made no mistakes on the RED training data.

    RED learns from misclassified samples; with none there is nothing to fit.
    """
