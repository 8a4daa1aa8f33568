"""Exception types raised across the package."""


class RffpError(Exception):
    """Base class for all package errors."""


class InvalidInputError(RffpError, ValueError):
    """An argument violates an operation's preconditions."""


class DegenerateDataError(RffpError, ValueError):
    """Data carries no usable variation (e.g. all rows identical)."""


class FormatError(RffpError, ValueError):
    """A serialized file is malformed.

    Parameters
    ----------
    field : str
        Name of the header field or section that failed validation.
    message : str
        Human readable description.
    """

    def __init__(self, field, message):
        self.field = field
        super().__init__(f"{field}: {message}")
