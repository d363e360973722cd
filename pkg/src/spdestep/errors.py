"""Exception types shared across the package."""


class NonFiniteError(FloatingPointError):
    """A pointwise evaluation produced a non-finite value.

    ``index`` is the offending physical grid index and ``value`` the input
    that produced it, when known.
    """

    def __init__(self, message, index=None, value=None):
        super().__init__(message)
        self.index = index
        self.value = value


class BlowUpError(FloatingPointError):
    """A time-stepping run produced a non-finite state."""

    def __init__(self, message, step, stream_id=None):
        super().__init__(message)
        self.step = step
        self.stream_id = stream_id


class ConditioningError(ArithmeticError):
    """Gaussian conditioning failed (covariance not numerically SPD)."""


class ConfigError(ValueError):
    """Invalid experiment configuration."""
