"""Exception and warning types shared across the toolkit."""


class StnnError(Exception):
    """Base class for all toolkit errors."""


class DimensionError(StnnError):
    """Shapes of operands do not line up.

    Messages always carry both the expected and the actual dimensions.
    """

    @classmethod
    def mismatch(cls, what, expected, actual):
        return cls(f"{what}: expected shape {tuple(expected)}, got {tuple(actual)}")


class InvalidInputError(StnnError):
    """An argument violates the operation's contract."""


class InvalidConfigError(StnnError):
    """A configuration value or combination is not usable."""


class ParseError(StnnError):
    """A data file is malformed; message names the offending position."""


class DivergenceError(StnnError):
    """A numerical procedure produced non-finite values."""

    def __init__(self, message, epoch=None):
        super().__init__(message)
        self.epoch = epoch


class NoConvergenceError(StnnError):
    """An iterative fit failed to improve from every start.

    Carries the best fit seen so far in ``best_fit``.
    """

    def __init__(self, message, best_fit=None):
        super().__init__(message)
        self.best_fit = best_fit


class SingularSystemError(StnnError):
    """A linear system is rank deficient."""


class DataWarning(UserWarning):
    """Non-fatal data-quality issue (clamped values, non-monotone cumulatives)."""
