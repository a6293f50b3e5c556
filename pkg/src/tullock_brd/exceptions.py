"""Exception types raised across the package."""


class UnsupportedConfigError(ValueError):
    """The operation is not defined for the given contest configuration."""


class NumericalRangeError(ArithmeticError):
    """A root could not be bracketed inside the representable range."""


class BetaContractError(ValueError):
    """A discount coefficient fell outside ``[0, B]``."""


class FitError(ValueError):
    """Rate fitting was given degenerate data."""


class ScheduleExhausted(LookupError):
    """An explicit selection schedule has no further entries."""
