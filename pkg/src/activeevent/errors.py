"""Exception types shared across the package."""


class ActiveEventError(Exception):
    """Base class for all package errors."""


class ConfigError(ActiveEventError, ValueError):
    """Invalid configuration value. ``field`` names the offending key."""

    def __init__(self, field, message):
        self.field = field
        super().__init__(f"{field}: {message}")


class ShapeError(ActiveEventError, ValueError):
    pass


class UsageError(ActiveEventError, ValueError):
    pass


class DataError(ActiveEventError, ValueError):
    pass


class FormatError(ActiveEventError, ValueError):
    pass


class NumericFault(ActiveEventError, FloatingPointError):
    pass
