"""Exception types shared across the package."""


class SetDynError(Exception):
    """Base class for all errors raised by setdyn."""


class DomainError(SetDynError, ValueError):
    """An argument lies outside the domain of an operation."""


class UnsupportedError(SetDynError):
    """The space or map lacks the structure an operation needs."""


class TotalityError(SetDynError):
    """A relation has an empty image row where a total map is required."""

    def __init__(self, message, point=None):
        super().__init__(message)
        self.point = point


class InconclusiveError(SetDynError):
    """A horizon or cap was exhausted before a bound could be established."""

    def __init__(self, message, worst_pair=None):
        super().__init__(message)
        self.worst_pair = worst_pair


class ConfigError(SetDynError, ValueError):
    """A configuration document failed validation.

    ``errors`` holds every problem found, not just the first.
    """

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))
