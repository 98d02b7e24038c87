"""Exception types shared across the package."""


class DimProfileError(Exception):
    """Base class for all package errors."""


class InvalidParameterError(DimProfileError, ValueError):
    """A parameter lies outside its documented domain."""


class ResourceLimitError(DimProfileError):
    """An operation would exceed the configured point cap."""


class NumericalError(DimProfileError):
    """A numerical routine failed to reach its tolerance.

    ``residual`` carries the achieved error estimate when one is available.
    """

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual
