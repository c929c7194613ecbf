"""Exception types raised across the package."""


class SplitflowError(Exception):
    """Base class for all library errors."""


class DimensionMismatchError(SplitflowError):
    """Binary vector operation on vectors of different dimensions."""


class NonFiniteError(SplitflowError):
    """An operation produced or received a NaN/Inf entry."""


class DivergenceError(SplitflowError):
    """An iteration left the finite/bounded regime.

    Carries the last finite state so callers can report how far the run got.
    """

    def __init__(self, message, state=None):
        super().__init__(message)
        self.state = state


class InnerSolveError(SplitflowError):
    """An implicit step's inner fixed-point loop failed to contract."""


class OperatorValidationError(SplitflowError):
    """A declared operator failed its construction-time property check."""


class IncompatiblePairingError(SplitflowError):
    """Method and problem do not expose compatible operator access."""


class ConfigError(SplitflowError):
    """Invalid experiment configuration. Carries an itemized error list."""

    def __init__(self, errors):
        if isinstance(errors, str):
            errors = [errors]
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))
