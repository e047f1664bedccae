"""Exception types shared across the package."""


class NumericalError(RuntimeError):
    """A linear-algebra operation failed even after jitter escalation."""


class InferenceError(RuntimeError):
    """The hyperparameter sampler could not produce a valid chain."""


class ConfigError(ValueError):
    """An experiment configuration is malformed (unknown key, bad value)."""
