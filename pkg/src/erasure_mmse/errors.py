"""Exception types shared across the package."""


class InvalidInputError(ValueError):
    """An argument violates a documented precondition."""


class InvalidPatternError(InvalidInputError):
    """A sampling pattern is malformed for the given model."""


class UnsupportedChannelError(InvalidInputError):
    """The channel mode/noise combination is outside the supported set."""


class ResourceLimitError(RuntimeError):
    """Exact enumeration was requested above the dimension cap."""


class NumericalFailureError(RuntimeError):
    """A numerical routine produced a non-finite result."""


class ReproductionError(RuntimeError):
    """A frozen reference value could not be reproduced."""
