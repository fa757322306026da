"""Exception types shared across the package."""


class NeuroskinError(Exception):
    """Base class for all package-specific errors."""


class ModelError(NeuroskinError, ValueError):
    """Invalid model definition: bad mesh dimensions, ids, material values."""


class AssemblyError(NeuroskinError):
    """Global system cannot be assembled (e.g. singular free-DOF stiffness)."""


class StepError(NeuroskinError):
    """A time step failed to converge.

    Carries the last force residual so callers can report how far the
    inner fixed-point iteration was from convergence.
    """

    def __init__(self, message: str, residual: float | None = None):
        super().__init__(message)
        self.residual = residual


class ShapeError(NeuroskinError, ValueError):
    """Array arguments have inconsistent shapes or lengths."""


class ConfigError(NeuroskinError, ValueError):
    """Invalid configuration value or combination."""


class ParseError(NeuroskinError, ValueError):
    """A text file could not be parsed.

    ``line`` is the 1-based line number of the offending row, when known.
    """

    def __init__(self, message: str, line: int | None = None):
        super().__init__(message)
        self.line = line


class EvaluationError(NeuroskinError):
    """An objective evaluation failed.

    ``x`` is the parameter vector that triggered the failure and ``index``
    the position of the evaluation within its batch, when applicable.
    """

    def __init__(self, message: str, x=None, index: int | None = None):
        super().__init__(message)
        self.x = x
        self.index = index


class OptimizationError(NeuroskinError):
    """An optimization run could not proceed (e.g. no usable fitness values)."""
