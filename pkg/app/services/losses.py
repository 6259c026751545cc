# app/services/losses.py
import logging
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Any, Dict, List, Optional

import numpy as np
from scipy.special import expit

from app.core.exceptions import InvalidSetError
from app.core.rng import RandomSource
from app.core.schedules import ProblemBounds
from app.core.sets import FeasibleSet, SetKind
from app.services.functions import ConvexFamily, LogisticLosses, QuadraticForm, aggregate_rounds

logger = logging.getLogger(__name__)

QUADRATIC_CENTERS = np.arange(-9, 10)
# Gaussian norm tail: P(||g|| > sqrt(d) + s) <= exp(-s^2 / 2)
NORM_TAIL = 6.0


@dataclass(frozen=True, eq=False)
class LossBundle:
    """Values of the K functions at one point, with gradients under full feedback."""

    values: np.ndarray
    grads: Optional[np.ndarray] = None


@dataclass(frozen=True, eq=False)
class MeanLossEstimate:
    values: np.ndarray
    stderr: np.ndarray
    samples: int
    closed_form: bool


class LossOracle(ABC):
    """Per-round family of K convex functions.

    Round t is drawn from ``rng.child(t)`` and cached, so queries are a pure
    function of (seed, t, x). Stream 0 is reserved for per-oracle parameters.
    """

    name: str = "oracle"
    iid: bool = True
    strong_convexity: float = 0.0

    def __init__(self, k: int, feasible_set: FeasibleSet, rng: RandomSource):
        if k < 1:
            raise ValueError(f"Need at least one loss sequence, got K={k}")
        self.k = int(k)
        self.feasible_set = feasible_set
        self.rng = rng
        self._rounds: Dict[int, ConvexFamily] = {}

    @property
    def d(self) -> int:
        return self.feasible_set.dim

    @abstractmethod
    def _draw(self, rng: RandomSource, t: int) -> ConvexFamily: ...

    @abstractmethod
    def declared_bounds(self) -> tuple[float, float]:
        """(B, G) valid over the feasible set."""

    def mean_objective(self) -> Optional[ConvexFamily]:
        """Closed-form mean functions mu(x) when the generator admits one."""
        return None

    def params(self) -> Dict[str, Any]:
        return {}

    def round(self, t: int) -> ConvexFamily:
        if t < 1:
            raise ValueError(f"Rounds start at 1, got {t}")
        cached = self._rounds.get(t)
        if cached is None:
            cached = self._draw(self.rng.child(t), t)
            self._rounds[t] = cached
        return cached

    def rounds(self, horizon: int) -> List[ConvexFamily]:
        return [self.round(t) for t in range(1, horizon + 1)]

    def evaluate(self, t: int, x, with_grads: bool = True) -> LossBundle:
        fn = self.round(t)
        return LossBundle(fn.values(x), fn.grads(x) if with_grads else None)

    def problem_bounds(self) -> ProblemBounds:
        b, g = self.declared_bounds()
        return ProblemBounds(B=b, G=g, D=self.feasible_set.diameter())

    def sample_rounds(self, n: int, rng: RandomSource) -> List[ConvexFamily]:
        """Fresh draws from the round distribution, independent of the cached rounds."""
        if not self.iid:
            raise ValueError(f"Oracle {self.name} is not i.i.d. across rounds")
        return [self._draw(rng.child(i), i) for i in range(1, n + 1)]

    def estimate_mean(self, x, samples: Optional[int] = None, rng: Optional[RandomSource] = None) -> MeanLossEstimate:
        if samples is None:
            mean = self.mean_objective()
            if mean is None:
                raise ValueError(f"Oracle {self.name} has no closed-form mean; pass a sample count")
            return MeanLossEstimate(mean.values(x), np.zeros(self.k), 0, True)
        if samples < 2:
            raise ValueError("Monte-Carlo estimation needs at least two samples")
        rng = rng if rng is not None else self.rng.child(-1)
        draws = np.array([fn.values(x) for fn in self.sample_rounds(samples, rng)])
        return MeanLossEstimate(
            draws.mean(axis=0),
            draws.std(axis=0, ddof=1) / math.sqrt(samples),
            samples,
            False,
        )

    def monte_carlo_objective(self, samples: int, rng: RandomSource) -> ConvexFamily:
        rounds = self.sample_rounds(samples, rng)
        return aggregate_rounds(rounds, np.full((samples, self.k), 1.0 / samples))

    def descriptor(self) -> Dict[str, Any]:
        return {
            "generator": self.name,
            "k": self.k,
            "d": self.d,
            "seed": self.rng.seed,
            "feasible_set": self.feasible_set.describe(),
            **self.params(),
        }


class RandomLinearOracle(LossOracle):
    name = "linear"

    def _draw(self, rng, t):
        return QuadraticForm.linear(rng.uniform(0.0, 1.0, (self.k, self.d)))

    def declared_bounds(self):
        # coefficients lie in [0, 1]: |<a, x>| <= ||x||_1
        return self.feasible_set.l1_bound(), math.sqrt(self.d)

    def mean_objective(self):
        return QuadraticForm.linear(np.full((self.k, self.d), 0.5))


class RandomQuadraticOracle(LossOracle):
    name = "quadratic"
    strong_convexity = 2.0

    def _draw(self, rng, t):
        centers = QUADRATIC_CENTERS[rng.integers(0, QUADRATIC_CENTERS.size, self.k)]
        return QuadraticForm.squared_distance(centers[:, None].astype(float))

    def declared_bounds(self):
        lo, hi = float(self.feasible_set.lower[0]), float(self.feasible_set.upper[0])
        reach = max(abs(lo - QUADRATIC_CENTERS.min()), abs(hi - QUADRATIC_CENTERS.min()),
                    abs(lo - QUADRATIC_CENTERS.max()), abs(hi - QUADRATIC_CENTERS.max()))
        return float(reach ** 2), float(2 * reach)

    def mean_objective(self):
        second_moment = float(np.mean(QUADRATIC_CENTERS.astype(float) ** 2))
        return QuadraticForm(np.ones(self.k), np.zeros((self.k, 1)), np.full(self.k, second_moment))


class ExpertLossOracle(LossOracle):
    name = "experts"

    def __init__(self, k, low, high, feasible_set, rng):
        super().__init__(k, feasible_set, rng)
        self.low = float(low)
        self.high = float(high)

    def _draw(self, rng, t):
        return QuadraticForm.linear(np.diag(rng.uniform(self.low, self.high, self.k)))

    def declared_bounds(self):
        return self.high, self.high

    def mean_objective(self):
        return QuadraticForm.linear(np.diag(np.full(self.k, 0.5 * (self.low + self.high))))

    def params(self):
        return {"low": self.low, "high": self.high}


class FairClassificationOracle(LossOracle):
    name = "fairclf"

    def __init__(self, k, m, kappa, feasible_set, rng, sigma: float = 1.0):
        super().__init__(k, feasible_set, rng)
        self.m = int(m)
        self.kappa = float(kappa)
        self.sigma = float(sigma)
        hidden = rng.child(0)
        self.w_star = hidden.normal(size=(self.k, self.d))
        self.group_means = hidden.normal(size=(self.k, self.d))

    def shift(self, t: int) -> np.ndarray:
        return np.zeros((self.k, self.d))

    def _draw(self, rng, t):
        centers = self.group_means + self.shift(t)
        z = centers[:, None, :] + self.sigma * rng.normal(size=(self.k, self.m, self.d))
        p = expit(np.einsum("kmd,kd->km", z, self.w_star))
        y = np.where(rng.random((self.k, self.m)) < p, 1.0, -1.0)
        return LogisticLosses.minibatch(z, y, self.kappa)

    def _feature_reach(self) -> float:
        return (float(np.linalg.norm(self.group_means, axis=1).max())
                + self.sigma * (math.sqrt(self.d) + NORM_TAIL))

    def declared_bounds(self):
        radius = self.feasible_set.norm_bound()
        reach = self._feature_reach()
        # log(1 + e^u) <= |u| + log 2
        b = radius * reach + math.log(2.0) + self.kappa * radius ** 2
        g = reach + 2.0 * self.kappa * radius
        return b, g

    def params(self):
        return {"m": self.m, "kappa": self.kappa, "sigma": self.sigma}


class SwitchingFairOracle(FairClassificationOracle):
    """Fair classification where the hard group rotates every ``switch_interval`` rounds."""

    name = "switching"
    iid = False

    def __init__(self, k, switch_interval, shift_magnitude, m, kappa, feasible_set, rng, sigma: float = 1.0):
        if switch_interval < 1:
            raise ValueError(f"switch_interval must be at least 1, got {switch_interval}")
        super().__init__(k, m, kappa, feasible_set, rng, sigma)
        self.switch_interval = int(switch_interval)
        self.shift_magnitude = float(shift_magnitude)

    def hard_group(self, t: int) -> int:
        return ((t - 1) // self.switch_interval) % self.k

    def shift(self, t):
        out = np.zeros((self.k, self.d))
        out[self.hard_group(t)] = self.shift_magnitude
        return out

    def _feature_reach(self):
        return super()._feature_reach() + abs(self.shift_magnitude) * math.sqrt(self.d)

    def params(self):
        return {**super().params(), "switch_interval": self.switch_interval, "shift_magnitude": self.shift_magnitude}


class AdversarialPairOracle(LossOracle):
    """Deterministic alternating pair on [0, 1]:
    odd t:  f = 1.2 - 0.2x, g = x
    even t: f = x,          g = 0.8 + 0.2x
    """

    name = "adversarial"
    iid = False

    ODD = QuadraticForm.linear([[-0.2], [1.0]], [1.2, 0.0])
    EVEN = QuadraticForm.linear([[1.0], [0.2]], [0.0, 0.8])

    def _draw(self, rng, t):
        return self.ODD if t % 2 == 1 else self.EVEN

    def declared_bounds(self):
        return 1.2, 1.0

    def mean_objective(self):
        return QuadraticForm.aggregate([self.ODD, self.EVEN], np.full((2, 2), 0.5))


def make_random_linear(d: int, k: int, rng: RandomSource, feasible_set: Optional[FeasibleSet] = None) -> LossOracle:
    if d < 1:
        raise ValueError(f"Dimension must be at least 1, got {d}")
    feasible_set = feasible_set or FeasibleSet.ball(np.zeros(d), 1.0)
    if feasible_set.dim != d:
        raise InvalidSetError(f"Feasible set has dimension {feasible_set.dim}, expected {d}")
    return RandomLinearOracle(k, feasible_set, rng)


def make_random_quadratic(k: int, rng: RandomSource, feasible_set: Optional[FeasibleSet] = None) -> LossOracle:
    feasible_set = feasible_set or FeasibleSet.interval(-1.0, 1.0)
    if feasible_set.kind != SetKind.INTERVAL:
        raise InvalidSetError("The quadratic generator lives on an interval")
    return RandomQuadraticOracle(k, feasible_set, rng)


def make_expert_losses(
    k: int, a: float, b: float, rng: RandomSource, feasible_set: Optional[FeasibleSet] = None
) -> LossOracle:
    if not 0.0 <= a < b <= 1.0:
        raise ValueError(f"Expert losses need 0 <= a < b <= 1, got a={a}, b={b}")
    feasible_set = feasible_set or FeasibleSet.simplex(k)
    if feasible_set.kind != SetKind.SIMPLEX or feasible_set.dim != k:
        raise InvalidSetError(f"Expert losses are played on simplex({k})")
    return ExpertLossOracle(k, a, b, feasible_set, rng)


def make_fair_classification(
    d: int,
    k: int,
    m: int,
    kappa: float,
    rng: RandomSource,
    feasible_set: Optional[FeasibleSet] = None,
    sigma: float = 1.0,
) -> LossOracle:
    if min(d, k, m) < 1 or kappa <= 0:
        raise ValueError("Fair classification needs positive d, K, m and kappa")
    # diameter 5 by default
    feasible_set = feasible_set or FeasibleSet.ball(np.zeros(d), 2.5)
    if feasible_set.dim != d:
        raise InvalidSetError(f"Feasible set has dimension {feasible_set.dim}, expected {d}")
    return FairClassificationOracle(k, m, kappa, feasible_set, rng, sigma)


def make_switching_fair(
    k: int,
    switch_interval: int,
    shift_magnitude: float,
    rng: RandomSource,
    d: int = 20,
    m: int = 50,
    kappa: float = 1e-3,
    feasible_set: Optional[FeasibleSet] = None,
    sigma: float = 1.0,
) -> LossOracle:
    if d < 1:
        raise ValueError(f"Dimension must be at least 1, got {d}")
    feasible_set = feasible_set or FeasibleSet.ball(np.zeros(d), 2.5)
    if feasible_set.dim != d:
        raise InvalidSetError(f"Feasible set has dimension {feasible_set.dim}, expected {d}")
    return SwitchingFairOracle(k, switch_interval, shift_magnitude, m, kappa, feasible_set, rng, sigma)


def make_adversarial_pair(feasible_set: Optional[FeasibleSet] = None) -> LossOracle:
    feasible_set = feasible_set or FeasibleSet.interval(0.0, 1.0)
    if (feasible_set.kind != SetKind.INTERVAL
            or feasible_set.lower[0] != 0.0 or feasible_set.upper[0] != 1.0):
        raise InvalidSetError("The adversarial pair is defined on [0, 1]")
    return AdversarialPairOracle(2, feasible_set, RandomSource(0))
