"""Shared exception types."""


class CapacityError(RuntimeError):
    """Search space or qubit count exceeds what can be simulated densely."""


class ConfigError(ValueError):
    """Experiment configuration file is malformed."""
