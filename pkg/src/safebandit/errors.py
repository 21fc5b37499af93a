"""Exception types raised across the package."""


class BanditError(Exception):
    """Base class for package errors."""


class InvalidArgument(BanditError, ValueError):
    """An argument violates a documented precondition."""


class InvalidState(BanditError, RuntimeError):
    """An object was used in a state it does not support (e.g. empty history)."""


class SamplingFailure(BanditError, RuntimeError):
    """Rejection sampling exhausted its attempt cap."""


class ConfigError(BanditError, ValueError):
    """An experiment configuration or CLI flag combination is invalid."""
