"""Exception types shared across the package."""


class CoralError(Exception):
    """Base class for all package errors."""


class UnknownTask(CoralError):
    """Task name not present in the registry."""


class LayoutUnsolvable(CoralError):
    """Layout generation exhausted its retry budget without a solvable grid."""


class StepAfterTerminal(CoralError):
    """step() called on a state whose episode already ended."""


class ShapeMismatch(CoralError):
    """Operands have incompatible shapes or dtypes."""


class NonFiniteValue(CoralError):
    """A NaN or Inf appeared in a sanctioned numeric computation."""


class NonFiniteLoss(CoralError):
    """A training loss became NaN/Inf; raised with a diagnostics dump."""


class MissingCheckpoint(CoralError):
    """Required checkpoint file does not exist."""


class IncompatibleCheckpoint(CoralError):
    """Checkpoint dimensions do not match the requested configuration."""


class ConfigInvalid(CoralError):
    """Experiment configuration failed validation."""


class TooFewSamples(CoralError):
    """Statistical routine called with fewer samples than it supports."""


class EmptyInput(CoralError):
    """Analysis routine received no curves/records."""


class MissingChannel(CoralError):
    """Requested metric channel absent from the input curves."""
