"""Exception hierarchy shared across the package.

The CLI maps these onto process exit codes, so every failure that can reach
the command line should be one of them.
"""


class FlowIDSError(Exception):
    """Base class for all package errors."""


class ConfigError(FlowIDSError, ValueError):
    """Invalid configuration, flags or hyperparameters."""


class SchemaError(ConfigError):
    """Input columns do not match the dataset schema."""


class DataError(FlowIDSError, ValueError):
    """Malformed or unusable input data."""


class DimensionError(FlowIDSError, ValueError):
    """Tensor shapes are incompatible for an operation."""


class UsageError(FlowIDSError, RuntimeError):
    """An API was called in a way its contract forbids."""


class NonFiniteError(FlowIDSError, FloatingPointError):
    """An operation produced NaN or Inf."""


class DivergenceError(FlowIDSError, RuntimeError):
    """Training produced a non-finite loss."""

    def __init__(self, message: str, *, epoch: int = -1, batch: int = -1, param_norms=None):
        super().__init__(message)
        self.epoch = epoch
        self.batch = batch
        self.param_norms = dict(param_norms or {})


class ResourceError(FlowIDSError, MemoryError):
    """A structure would exceed the configured size budget."""
