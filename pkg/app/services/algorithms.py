# app/services/algorithms.py
"""
Online algorithms for min-max multi-objective OCO.

Every step is a pure transition ``(AlgoState, ...) -> (AlgoState, Action)``.
The state carries the last round's feedback, which the next OGD step reads:
the x-update at round t uses the gradients of round t-1 at x_{t-1}.
"""
import logging
import math
from dataclasses import dataclass, replace
from enum import Enum
from typing import Dict, List, Optional, Tuple

import numpy as np

from app.core.exceptions import (
    DimensionMismatchError,
    FeedbackModeError,
    NonFiniteInputError,
    ScheduleMismatchError,
)
from app.core.rng import RandomSource, sample_unit_sphere
from app.core.schedules import ProblemBounds, ScheduleKind, Schedules
from app.core.sets import Action, FeasibleSet
from app.core.weights import SimplexWeights, hedge_update
from app.models.experiment import AlgorithmKind
from app.services.functions import ConvexFamily
from app.services.losses import LossBundle, LossOracle
from app.services.solver import minimize_max

logger = logging.getLogger(__name__)


class FeedbackMode(str, Enum):
    FULL = "full"
    ONE_POINT = "bandit-one-point"
    TWO_POINT = "bandit-two-point"


REQUIRED_SCHEDULE = {
    FeedbackMode.ONE_POINT: ScheduleKind.BANDIT1,
    FeedbackMode.TWO_POINT: ScheduleKind.BANDIT2,
}


@dataclass(frozen=True, eq=False)
class Feedback:
    mode: FeedbackMode
    t: int
    points: Tuple[np.ndarray, ...]
    payload: Tuple[LossBundle, ...]

    def __post_init__(self):
        arity = 2 if self.mode == FeedbackMode.TWO_POINT else 1
        if len(self.payload) != arity or len(self.points) != arity:
            raise FeedbackModeError(f"{self.mode.value} feedback carries {arity} bundle(s), got {len(self.payload)}")
        has_grads = [bundle.grads is not None for bundle in self.payload]
        if self.mode == FeedbackMode.FULL and not all(has_grads):
            raise FeedbackModeError("Full feedback must include gradients")
        if self.mode != FeedbackMode.FULL and any(has_grads):
            raise FeedbackModeError("Bandit feedback reveals values only")

    @classmethod
    def full(cls, t: int, x: Action, bundle: LossBundle) -> "Feedback":
        return cls(FeedbackMode.FULL, t, (x,), (bundle,))


@dataclass(frozen=True, eq=False)
class WeightedLoss:
    """Lambda(x, theta) = sum_k theta_k f^k(x) and its gradient."""

    value: float
    grad: Optional[np.ndarray] = None

    @classmethod
    def from_bundle(cls, bundle: LossBundle, theta: np.ndarray) -> "WeightedLoss":
        value = float(theta @ bundle.values)
        grad = None if bundle.grads is None else theta @ bundle.grads
        return cls(value, grad)


@dataclass(frozen=True)
class MultiTree:
    """Balanced binary tree of two-expert MULTI instances over the index range [0, k).

    ``probs[i]`` is the left-branch probability of the i-th internal node, nodes
    numbered in preorder.
    """

    k: int
    horizon: int
    splits: Tuple[Tuple[int, int, int], ...]
    probs: Tuple[float, ...]

    @classmethod
    def build(cls, k: int, horizon: int) -> "MultiTree":
        if horizon < 1:
            raise ValueError("MULTI needs the horizon in advance")
        splits: List[Tuple[int, int, int]] = []

        def visit(lo: int, hi: int):
            if hi - lo < 2:
                return
            mid = lo + (hi - lo) // 2
            splits.append((lo, mid, hi))
            visit(lo, mid)
            visit(mid, hi)

        visit(0, k)
        return cls(k, horizon, tuple(splits), tuple(0.5 for _ in splits))

    @property
    def _index(self) -> Dict[Tuple[int, int], int]:
        return {(lo, hi): i for i, (lo, _, hi) in enumerate(self.splits)}

    def _dist(self, lo: int, hi: int, index, probs) -> np.ndarray:
        if hi - lo == 1:
            return np.ones(1)
        i = index[(lo, hi)]
        _, mid, _ = self.splits[i]
        p = probs[i]
        return np.concatenate([p * self._dist(lo, mid, index, probs), (1.0 - p) * self._dist(mid, hi, index, probs)])

    def distribution(self) -> np.ndarray:
        return self._dist(0, self.k, self._index, self.probs)

    def update(self, losses: np.ndarray) -> "MultiTree":
        index = self._index
        new_probs = list(self.probs)
        root_t = math.sqrt(self.horizon)

        def subtree_loss(lo: int, hi: int) -> float:
            if hi - lo == 1:
                return float(losses[lo])
            i = index[(lo, hi)]
            _, mid, _ = self.splits[i]
            left, right = subtree_loss(lo, mid), subtree_loss(mid, hi)
            x1 = self.probs[i]
            x1_next = x1 + ((1.0 - x1) * right - x1 * left) / root_t
            new_probs[i] = min(max(x1_next, 0.0), 1.0)
            return float(self._dist(lo, hi, index, self.probs) @ losses[lo:hi])

        subtree_loss(0, self.k)
        return replace(self, probs=tuple(new_probs))


@dataclass(frozen=True, eq=False)
class AlgoState:
    x: Action
    weights: SimplexWeights
    t: int
    cumulative: np.ndarray
    schedules: Schedules
    bounds: ProblemBounds
    feedback: Optional[Feedback] = None
    history: Optional[ConvexFamily] = None
    tree: Optional[MultiTree] = None

    @classmethod
    def initial(
        cls,
        feasible_set: FeasibleSet,
        k: int,
        schedules: Schedules,
        bounds: ProblemBounds,
        x0: Optional[Action] = None,
    ) -> "AlgoState":
        x = feasible_set.initial_point() if x0 is None else feasible_set.project(x0)
        return cls(x, SimplexWeights.uniform(k), 0, np.zeros(k), schedules, bounds)

    @property
    def theta(self) -> np.ndarray:
        return self.weights.probabilities


def _check_grad(grad: np.ndarray) -> np.ndarray:
    if not np.all(np.isfinite(grad)):
        raise NonFiniteInputError("Non-finite gradient in OGD step")
    return grad


def _ogd_move(state: AlgoState, grad: np.ndarray, feasible_set: FeasibleSet, t: int) -> Action:
    return feasible_set.project(state.x - state.schedules.eta_x.eta(t) * _check_grad(grad))


def hedge_ogd_step(
    state: AlgoState, prev_feedback: Optional[Feedback], oracle: LossOracle, feasible_set: FeasibleSet
) -> Tuple[AlgoState, Action]:
    if prev_feedback is not None and prev_feedback.mode != FeedbackMode.FULL:
        raise FeedbackModeError("hedge_ogd_step needs full-information feedback")
    t = state.t + 1
    if prev_feedback is None:
        # f_0 = 0, so the first play is x_0
        grad = np.zeros(feasible_set.dim)
    else:
        grad = WeightedLoss.from_bundle(prev_feedback.payload[0], state.theta).grad
    x_t = _ogd_move(state, grad, feasible_set, t)
    bundle = oracle.evaluate(t, x_t, with_grads=True)
    weights = hedge_update(state.weights, bundle.values, state.schedules.eta_theta.eta(t))
    return (
        replace(
            state,
            x=x_t,
            weights=weights,
            t=t,
            cumulative=state.cumulative + bundle.values,
            feedback=Feedback.full(t, x_t, bundle),
        ),
        x_t,
    )


def one_point_estimate(value: float, u: np.ndarray, delta: float) -> np.ndarray:
    """(d / delta) * Lambda(x + delta u) * u."""
    return (u.size / delta) * value * u


def two_point_estimate(value_plus: float, value_minus: float, u: np.ndarray, delta: float) -> np.ndarray:
    """(d / 2 delta) * (Lambda(x + delta u) - Lambda(x - delta u)) * u."""
    return (u.size / (2.0 * delta)) * (value_plus - value_minus) * u


def bandit_step(
    state: AlgoState,
    oracle: LossOracle,
    feasible_set: FeasibleSet,
    mode: FeedbackMode,
    rng: RandomSource,
) -> Tuple[AlgoState, Action]:
    """One round of the bandit variant; returns the action charged this round.

    One-point plays the perturbed point; two-point plays x_{t-1} and queries
    x_{t-1} +/- delta u around it.
    """
    if mode == FeedbackMode.FULL:
        raise FeedbackModeError("bandit_step needs a bandit feedback mode")
    expected = REQUIRED_SCHEDULE[mode]
    if state.schedules.eta_x.kind != expected:
        raise ScheduleMismatchError(
            f"{mode.value} feedback needs the {expected.value} schedule, got {state.schedules.eta_x.kind.value}"
        )
    t = state.t + 1
    theta = state.theta
    delta = state.schedules.eta_x.delta(t)
    u = sample_unit_sphere(rng, feasible_set.dim)

    if mode == FeedbackMode.ONE_POINT:
        played = feasible_set.project(state.x + delta * u)
        bundle = oracle.evaluate(t, played, with_grads=False)
        estimate = one_point_estimate(WeightedLoss.from_bundle(bundle, theta).value, u, delta)
        feedback = Feedback(mode, t, (played,), (bundle,))
        charged = bundle.values
    else:
        played = state.x
        x_plus, x_minus = state.x + delta * u, state.x - delta * u
        plus = oracle.evaluate(t, x_plus, with_grads=False)
        minus = oracle.evaluate(t, x_minus, with_grads=False)
        estimate = two_point_estimate(
            WeightedLoss.from_bundle(plus, theta).value, WeightedLoss.from_bundle(minus, theta).value, u, delta
        )
        feedback = Feedback(mode, t, (x_plus, x_minus), (plus, minus))
        charged = oracle.evaluate(t, played, with_grads=False).values

    x_t = _ogd_move(state, estimate, feasible_set, t)
    gains = oracle.evaluate(t, x_t, with_grads=False).values
    weights = hedge_update(state.weights, gains, state.schedules.eta_theta.eta(t))
    return (
        replace(state, x=x_t, weights=weights, t=t, cumulative=state.cumulative + charged, feedback=feedback),
        played,
    )


def greedy_step(state: AlgoState, oracle: LossOracle, feasible_set: FeasibleSet) -> Tuple[AlgoState, Action]:
    """Plays the single-round min-max point; sees round t before acting."""
    t = state.t + 1
    fn = oracle.round(t)
    x_t = minimize_max(fn, feasible_set, x0=state.x).x
    values = fn.values(x_t)
    return replace(state, x=x_t, t=t, cumulative=state.cumulative + values), x_t


def avg_ogd_step(
    state: AlgoState, prev_feedback: Optional[Feedback], feasible_set: FeasibleSet, oracle: LossOracle
) -> Tuple[AlgoState, Action]:
    if prev_feedback is not None and prev_feedback.mode != FeedbackMode.FULL:
        raise FeedbackModeError("avg_ogd_step needs full-information feedback")
    t = state.t + 1
    if prev_feedback is None:
        grad = np.zeros(feasible_set.dim)
    else:
        grad = prev_feedback.payload[0].grads.mean(axis=0)
    x_t = _ogd_move(state, grad, feasible_set, t)
    bundle = oracle.evaluate(t, x_t, with_grads=True)
    return (
        replace(state, x=x_t, t=t, cumulative=state.cumulative + bundle.values, feedback=Feedback.full(t, x_t, bundle)),
        x_t,
    )


def ftrl_action(
    history: Optional[ConvexFamily],
    feasible_set: FeasibleSet,
    regularizer_scale: float = 1.0,
    x0: Optional[Action] = None,
) -> Action:
    """argmin_x max_k sum_{s<t} f_s^k(x) + (regularizer_scale / 2) ||x||^2."""
    if history is None:
        return feasible_set.project(np.zeros(feasible_set.dim))
    objective = history.regularized(regularizer_scale)
    return minimize_max(objective, feasible_set, x0=x0, tol=1e-6, raise_on_cap=True, refine=False).x


def ftrl_step(
    state: AlgoState, oracle: LossOracle, feasible_set: FeasibleSet, regularizer_scale: float = 1.0
) -> Tuple[AlgoState, Action]:
    t = state.t + 1
    x_t = ftrl_action(state.history, feasible_set, regularizer_scale, x0=state.x)
    fn = oracle.round(t)
    history = fn if state.history is None else state.history + fn
    return replace(state, x=x_t, t=t, cumulative=state.cumulative + fn.values(x_t), history=history), x_t


def multi_step(state: AlgoState, losses) -> Tuple[AlgoState, np.ndarray]:
    """Advances the MULTI tree on one loss vector and returns the next distribution."""
    ell = np.asarray(losses, dtype=float).ravel()
    if state.tree is None:
        raise ValueError("MULTI state needs a tree; build it with the horizon first")
    if ell.size != state.tree.k:
        raise DimensionMismatchError(f"Expected {state.tree.k} losses, got {ell.size}")
    if not np.all(np.isfinite(ell)) or np.any(ell < 0.0) or np.any(ell > 1.0):
        raise ValueError("MULTI losses must lie in [0, 1]")
    tree = state.tree.update(ell)
    probabilities = tree.distribution()
    return replace(state, tree=tree, x=probabilities, t=state.t + 1), probabilities


def standalone_hedge(gains, eta: float) -> Tuple[float, np.ndarray]:
    """Experts Hedge in the gains version from uniform weights.

    ``gains`` is a T x N array. Returns (regret against the best expert, final
    probabilities).
    """
    g = np.asarray(gains, dtype=float)
    if g.ndim != 2:
        raise DimensionMismatchError("Gains must be a T x N array")
    weights = SimplexWeights.uniform(g.shape[1])
    earned = 0.0
    for row in g:
        earned += float(weights.probabilities @ row)
        weights = hedge_update(weights, row, eta)
    return float(g.sum(axis=0).max()) - earned, weights.probabilities


@dataclass(frozen=True, eq=False)
class Trajectory:
    actions: np.ndarray
    thetas: np.ndarray
    final_theta: np.ndarray
    cumulative: np.ndarray
    max_cum_loss: np.ndarray
    eta_x: np.ndarray
    eta_theta: np.ndarray

    @property
    def horizon(self) -> int:
        return int(self.actions.shape[0])

    @property
    def c_alg(self) -> float:
        return float(self.cumulative.max())


def run_online(
    algo: AlgorithmKind,
    mode: FeedbackMode,
    oracle: LossOracle,
    feasible_set: FeasibleSet,
    schedules: Schedules,
    bounds: ProblemBounds,
    horizon: int,
    rng: Optional[RandomSource] = None,
    regularizer_scale: float = 1.0,
) -> Trajectory:
    if mode != FeedbackMode.FULL and algo != AlgorithmKind.HEDGE_OGD:
        raise FeedbackModeError(f"{algo.value} runs with full feedback only")
    if mode != FeedbackMode.FULL and rng is None:
        raise ValueError("Bandit runs need a random source for the sphere directions")
    state = AlgoState.initial(feasible_set, oracle.k, schedules, bounds)
    if algo == AlgorithmKind.MULTI:
        state = replace(state, tree=MultiTree.build(oracle.k, horizon))
        state = replace(state, x=state.tree.distribution())

    actions: List[np.ndarray] = []
    thetas: List[np.ndarray] = []
    running_max: List[float] = []
    for t in range(1, horizon + 1):
        thetas.append(state.theta)
        if algo == AlgorithmKind.HEDGE_OGD and mode == FeedbackMode.FULL:
            state, played = hedge_ogd_step(state, state.feedback, oracle, feasible_set)
        elif algo == AlgorithmKind.HEDGE_OGD:
            state, played = bandit_step(state, oracle, feasible_set, mode, rng)
        elif algo == AlgorithmKind.AVG_OGD:
            state, played = avg_ogd_step(state, state.feedback, feasible_set, oracle)
        elif algo == AlgorithmKind.GREEDY:
            state, played = greedy_step(state, oracle, feasible_set)
        elif algo == AlgorithmKind.FTRL:
            state, played = ftrl_step(state, oracle, feasible_set, regularizer_scale)
        else:
            played = state.x
            bundle = oracle.evaluate(t, played, with_grads=True)
            state = replace(state, cumulative=state.cumulative + bundle.values)
            # f_t^k(x) = x_k * l_k: the loss vector sits on the gradient diagonal
            state, _ = multi_step(state, np.diag(bundle.grads))
        actions.append(np.asarray(played, dtype=float).copy())
        running_max.append(float(state.cumulative.max()))

    return Trajectory(
        actions=np.array(actions),
        thetas=np.array(thetas),
        final_theta=state.theta,
        cumulative=state.cumulative,
        max_cum_loss=np.array(running_max),
        eta_x=schedules.eta_x.etas(horizon),
        eta_theta=schedules.eta_theta.etas(horizon),
    )
