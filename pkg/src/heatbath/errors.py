"""Exception types shared across the package."""


class HeatbathError(Exception):
    """Base class for errors raised by this package."""


class StateCapExceeded(HeatbathError):
    """A state space or candidate enumeration would exceed the configured cap."""


class ScheduleSyntaxError(HeatbathError, ValueError):
    """Schedule or space-spec text failed to parse.

    Carries the character offset of the failure in ``position``.
    """

    def __init__(self, message, position=None):
        if position is not None:
            message = f"{message} (at position {position})"
        super().__init__(message)
        self.position = position


class SpaceMismatchError(HeatbathError, ValueError):
    """Operands live on different state spaces or use different scalar modes."""


class VerificationFailure(HeatbathError):
    """A verification run hit a failed check that was required to pass."""
