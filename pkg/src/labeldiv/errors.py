"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Invalid argument or experiment configuration (CLI exit code 2)."""


class OutOfRangeError(ValueError):
    """A target value falls outside a discretization's support."""


class NumericalError(RuntimeError):
    """Non-finite loss or a failed numerical check (CLI exit code 3)."""


class NormalizationWarning(RuntimeWarning):
    """A probability vector failed its sum-to-one check."""
