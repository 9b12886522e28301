"""Exception types shared across the package."""


class PoolTraceError(Exception):
    """Base class for all package errors."""


class ParameterError(PoolTraceError, ValueError):
    """An argument is outside its documented domain."""


class NumericError(PoolTraceError, ArithmeticError):
    """A computation left the range where results are trustworthy."""
