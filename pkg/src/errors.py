"""Exception hierarchy shared by every Dec-SBPR module."""

from typing import Optional


class DecSbprError(Exception):
    """Base class for all library errors."""


class ConfigError(DecSbprError, ValueError):
    """Invalid or missing configuration value."""


class ModelFormatError(DecSbprError, ValueError):
    """Syntax error in a `.dpomdp` document."""

    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class StochasticityError(DecSbprError, ValueError):
    """A probability table row or vector does not sum to one."""


class DimensionError(DecSbprError, ValueError):
    """Array shapes of a model, controller or episode do not agree."""


class EpisodeDataError(DecSbprError, ValueError):
    """Malformed, empty or inconsistent episode data."""


class InferenceError(DecSbprError, ArithmeticError):
    """Internal numerical failure inside the learning engine."""

    def __init__(self, message: str, step: Optional[int] = None):
        self.step = step
        if step is not None:
            message = f"step {step}: {message}"
        super().__init__(message)


class NonConvergenceError(DecSbprError):
    """Iteration budget exhausted before the convergence test passed."""

    def __init__(self, message: str, trace=None):
        self.trace = trace
        super().__init__(message)
