# app/core/exceptions.py
from typing import Optional

import numpy as np


class MinMaxError(Exception):
    """Base class for every error raised by the library."""


class DimensionMismatchError(MinMaxError, ValueError):
    pass


class NonFiniteInputError(MinMaxError, ValueError):
    pass


class InvalidSetError(MinMaxError, ValueError):
    pass


class BoundExceededError(MinMaxError, ValueError):
    """A value is larger in magnitude than the bound the schedules were built on."""


class FeedbackModeError(MinMaxError):
    pass


class ScheduleMismatchError(MinMaxError):
    pass


class ConfigurationError(MinMaxError):
    pass


class SolverConvergenceError(MinMaxError):
    """Raised when the solver hits its iteration cap.

    The best iterate found so far and the last gap estimate travel with the
    exception so callers can still act on them.
    """

    def __init__(self, message: str, best_x: Optional[np.ndarray] = None, gap: float = float("nan")):
        super().__init__(message)
        self.best_x = best_x
        self.gap = gap
