"""Exception hierarchy shared by the library and the CLI."""


class ExpansionError(Exception):
    """Base class for every error raised by :mod:`rootexpand`."""


class UsageError(ExpansionError, ValueError):
    """Inconsistent arguments (order mismatch, bad index, wrong length)."""


class SingularInputError(ExpansionError, ArithmeticError):
    """A leading coefficient that must be invertible is (numerically) zero."""


class DomainError(ExpansionError, ValueError):
    """A parameter or statistic lies outside the model's domain."""


class ResourceError(ExpansionError):
    """Requested computation exceeds the supported combinatorial size."""
