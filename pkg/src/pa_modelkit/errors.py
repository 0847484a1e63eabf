"""Exception types shared across the toolkit."""


class ModelkitError(Exception):
    """Base class for all toolkit errors."""


class ConfigurationError(ModelkitError, ValueError):
    """Invalid or unsupported configuration."""


class ArgumentError(ModelkitError, ValueError):
    """Invalid argument passed to an operation."""


class ShapeError(ModelkitError, ValueError):
    """Tensor or parameter dimensions do not match."""


class PipelineError(ModelkitError, RuntimeError):
    """Dataset synthesis failed (e.g. alignment could not be established)."""


class TrainingError(ModelkitError, RuntimeError):
    """Training diverged."""

    def __init__(self, message, stage=None, epoch=None):
        super().__init__(message)
        self.stage = stage
        self.epoch = epoch
