"""Exception hierarchy shared by every module."""


class CensorCostError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(CensorCostError, ValueError):
    """Invalid configuration. ``field`` names the offending parameter."""

    def __init__(self, field: str, message: str):
        self.field = field
        self.message = message
        super().__init__(f"{field}: {message}")


class MeasurementUnavailable(CensorCostError, LookupError):
    """A feature needs a measurement the flow does not carry."""


class TrainingError(CensorCostError, ValueError):
    """The censor cannot fit a model to the supplied training traffic."""
