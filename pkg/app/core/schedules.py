# app/core/schedules.py
import math
from dataclasses import dataclass
from enum import Enum
from typing import Optional

import numpy as np

from app.core.exceptions import ScheduleMismatchError


@dataclass(frozen=True)
class ProblemBounds:
    """|f_t^k(x)| <= B, gradient norms <= G, set diameter D."""

    B: float
    G: float
    D: float

    def __post_init__(self):
        for name in ("B", "G", "D"):
            value = getattr(self, name)
            if not math.isfinite(value) or value <= 0:
                raise ValueError(f"Bound {name} must be strictly positive, got {value}")


class ScheduleKind(str, Enum):
    FULL_THETA = "full-theta"
    BANDIT_THETA = "bandit-theta"
    FULL_X = "full-x"
    BANDIT1 = "bandit1"
    BANDIT2 = "bandit2"
    INVERSE_T = "inverse-t"
    CONSTANT = "constant"


@dataclass(frozen=True)
class StepSchedule:
    kind: ScheduleKind
    bounds: Optional[ProblemBounds] = None
    k: int = 2
    d: int = 1
    c: float = 1.0

    def __post_init__(self):
        needs_bounds = self.kind not in (ScheduleKind.INVERSE_T, ScheduleKind.CONSTANT)
        if needs_bounds and self.bounds is None:
            raise ValueError(f"Schedule {self.kind.value} needs problem bounds")
        if not needs_bounds and (not math.isfinite(self.c) or self.c <= 0):
            raise ValueError(f"Schedule scale must be positive, got {self.c}")

    @property
    def _log_k(self) -> float:
        # Hedge is inert for K = 1; ln 2 keeps the step strictly positive
        return math.log(max(self.k, 2))

    def eta(self, t: int) -> float:
        if t < 1:
            raise ValueError(f"Rounds start at 1, got {t}")
        b = self.bounds
        if self.kind == ScheduleKind.FULL_THETA:
            return math.sqrt(2.0 * self._log_k / (b.B ** 2 * t))
        if self.kind == ScheduleKind.BANDIT_THETA:
            return math.sqrt(self._log_k) / (b.B * math.sqrt(t))
        if self.kind == ScheduleKind.FULL_X:
            return b.D / (b.G * math.sqrt(t))
        if self.kind == ScheduleKind.BANDIT1:
            return b.D / (b.G * math.sqrt(self.d) * t ** 0.75)
        if self.kind == ScheduleKind.BANDIT2:
            return b.D / (b.G * math.sqrt(self.d) * math.sqrt(t))
        if self.kind == ScheduleKind.INVERSE_T:
            return self.c / t
        return self.c

    def delta(self, t: int) -> float:
        if t < 1:
            raise ValueError(f"Rounds start at 1, got {t}")
        if self.kind == ScheduleKind.BANDIT1:
            return t ** -0.25
        if self.kind == ScheduleKind.BANDIT2:
            return t ** -0.5
        raise ScheduleMismatchError(f"Schedule {self.kind.value} has no smoothing radius")

    def etas(self, horizon: int) -> np.ndarray:
        return np.array([self.eta(t) for t in range(1, horizon + 1)])

    def describe(self) -> dict:
        return {"kind": self.kind.value, "k": self.k, "d": self.d, "c": self.c}


@dataclass(frozen=True)
class Schedules:
    """The pair of step schedules an online run reads (x-steps and theta-steps)."""

    eta_x: StepSchedule
    eta_theta: StepSchedule
