# app/core/sets.py
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, Optional, Sequence

import numpy as np
import numpy.typing as npt

from app.core.exceptions import DimensionMismatchError, InvalidSetError, NonFiniteInputError
from app.core.rng import RandomSource

# A point of the feasible set (the play x_t)
Action = npt.NDArray[np.float64]


class SetKind(str, Enum):
    INTERVAL = "interval"
    BOX = "box"
    BALL = "ball"
    SIMPLEX = "simplex"


@dataclass(frozen=True, eq=False)
class FeasibleSet:
    """Closed convex set with a closed-form Euclidean projection."""

    kind: SetKind
    dim: int
    lower: Optional[np.ndarray] = field(default=None, repr=False)
    upper: Optional[np.ndarray] = field(default=None, repr=False)
    center: Optional[np.ndarray] = field(default=None, repr=False)
    radius: float = 0.0

    @classmethod
    def interval(cls, lower: float, upper: float) -> "FeasibleSet":
        if not (math.isfinite(lower) and math.isfinite(upper)) or lower >= upper:
            raise InvalidSetError(f"Interval needs finite lower < upper, got [{lower}, {upper}]")
        return cls(SetKind.INTERVAL, 1, np.array([float(lower)]), np.array([float(upper)]))

    @classmethod
    def box(cls, lower: Sequence[float], upper: Sequence[float]) -> "FeasibleSet":
        lo = np.asarray(lower, dtype=float).ravel()
        hi = np.asarray(upper, dtype=float).ravel()
        if lo.shape != hi.shape or lo.size == 0:
            raise InvalidSetError("Box bounds must be nonempty vectors of equal length")
        if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))) or np.any(lo > hi):
            raise InvalidSetError("Box needs finite bounds with lower <= upper coordinatewise")
        if np.allclose(lo, hi, rtol=0.0, atol=0.0):
            raise InvalidSetError("Box collapses to a single point")
        return cls(SetKind.BOX, lo.size, lo, hi)

    @classmethod
    def ball(cls, center: Sequence[float], radius: float) -> "FeasibleSet":
        c = np.asarray(center, dtype=float).ravel()
        if c.size == 0 or not np.all(np.isfinite(c)):
            raise InvalidSetError("Ball center must be a finite nonempty vector")
        if not math.isfinite(radius) or radius <= 0:
            raise InvalidSetError(f"Ball radius must be positive, got {radius}")
        return cls(SetKind.BALL, c.size, center=c, radius=float(radius))

    @classmethod
    def simplex(cls, k: int) -> "FeasibleSet":
        if k < 2:
            raise InvalidSetError(f"Simplex needs at least 2 vertices, got {k}")
        return cls(SetKind.SIMPLEX, int(k))

    def _check_point(self, point) -> np.ndarray:
        p = np.atleast_1d(np.asarray(point, dtype=float)).ravel()
        if p.size != self.dim:
            raise DimensionMismatchError(f"Point has length {p.size}, set has dimension {self.dim}")
        if not np.all(np.isfinite(p)):
            raise NonFiniteInputError("Cannot project a point with non-finite coordinates")
        return p

    def project(self, point) -> Action:
        p = self._check_point(point)
        if self.kind in (SetKind.INTERVAL, SetKind.BOX):
            return np.clip(p, self.lower, self.upper)
        if self.kind == SetKind.BALL:
            offset = p - self.center
            norm = float(np.linalg.norm(offset))
            if norm <= self.radius:
                return p
            return self.center + offset * (self.radius / norm)
        return _project_simplex(p)

    def contains(self, point, tol: float = 1e-12) -> bool:
        p = self._check_point(point)
        if self.kind in (SetKind.INTERVAL, SetKind.BOX):
            return bool(np.all(p >= self.lower - tol) and np.all(p <= self.upper + tol))
        if self.kind == SetKind.BALL:
            return float(np.linalg.norm(p - self.center)) <= self.radius + tol
        return bool(np.all(p >= -tol) and abs(float(p.sum()) - 1.0) <= tol)

    def diameter(self) -> float:
        if self.kind == SetKind.INTERVAL:
            return float(self.upper[0] - self.lower[0])
        if self.kind == SetKind.BOX:
            return float(np.linalg.norm(self.upper - self.lower))
        if self.kind == SetKind.BALL:
            return 2.0 * self.radius
        return math.sqrt(2.0)

    def l1_bound(self) -> float:
        """Upper bound on max ||x||_1 over the set."""
        if self.kind in (SetKind.INTERVAL, SetKind.BOX):
            return float(np.maximum(np.abs(self.lower), np.abs(self.upper)).sum())
        if self.kind == SetKind.BALL:
            return float(np.abs(self.center).sum() + self.radius * math.sqrt(self.dim))
        return 1.0

    def norm_bound(self) -> float:
        """Upper bound on max ||x||_2 over the set."""
        if self.kind in (SetKind.INTERVAL, SetKind.BOX):
            return float(np.linalg.norm(np.maximum(np.abs(self.lower), np.abs(self.upper))))
        if self.kind == SetKind.BALL:
            return float(np.linalg.norm(self.center) + self.radius)
        return 1.0

    def initial_point(self) -> Action:
        if self.kind in (SetKind.INTERVAL, SetKind.BOX):
            return 0.5 * (self.lower + self.upper)
        if self.kind == SetKind.BALL:
            return self.center.copy()
        return np.full(self.dim, 1.0 / self.dim)

    def sample(self, rng: RandomSource) -> Action:
        """Random feasible point (uniform for interval, box, ball and simplex)."""
        if self.kind in (SetKind.INTERVAL, SetKind.BOX):
            return self.lower + (self.upper - self.lower) * rng.random(self.dim)
        if self.kind == SetKind.BALL:
            direction = rng.normal(size=self.dim)
            direction /= max(float(np.linalg.norm(direction)), 1e-300)
            return self.center + direction * self.radius * rng.random() ** (1.0 / self.dim)
        e = -np.log1p(-rng.random(self.dim))
        return e / e.sum()

    def describe(self) -> Dict[str, Any]:
        if self.kind == SetKind.INTERVAL:
            return {"kind": self.kind.value, "lower": float(self.lower[0]), "upper": float(self.upper[0])}
        if self.kind == SetKind.BOX:
            return {"kind": self.kind.value, "lower": self.lower.tolist(), "upper": self.upper.tolist()}
        if self.kind == SetKind.BALL:
            return {"kind": self.kind.value, "center": self.center.tolist(), "radius": self.radius}
        return {"kind": self.kind.value, "k": self.dim}


def _project_simplex(p: np.ndarray) -> np.ndarray:
    # sort-and-threshold: largest rho with u_rho > (cumsum_rho - 1) / rho
    u = np.sort(p)[::-1]
    css = np.cumsum(u) - 1.0
    ind = np.arange(1, p.size + 1)
    rho = int(np.nonzero(u - css / ind > 0)[0][-1])
    tau = css[rho] / (rho + 1.0)
    return np.maximum(p - tau, 0.0)


def project(feasible_set: FeasibleSet, point) -> Action:
    return feasible_set.project(point)


def diameter(feasible_set: FeasibleSet) -> float:
    return feasible_set.diameter()
