"""Exception types shared across the package."""


class DimensionError(ValueError):
    """Tensor shapes are incompatible with an operation."""


class ConfigurationError(ValueError):
    """A configuration value is unknown or out of range."""


class ValidationError(ValueError):
    """Input data violates a precondition (e.g. a non-binary mask)."""


class NumericalError(ArithmeticError):
    """A non-finite value appeared where a finite one is required."""


class GenerationError(RuntimeError):
    """The synthetic sample generator exhausted its rejection budget."""


class CheckpointError(ValueError):
    """A checkpoint is unreadable or incompatible with the model."""
