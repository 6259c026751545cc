# app/services/benchmark.py
import logging
import math
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

from app.core.config import settings
from app.core.exceptions import DimensionMismatchError, NonFiniteInputError
from app.core.rng import RandomSource
from app.core.schedules import ProblemBounds
from app.core.sets import FeasibleSet
from app.core.weights import SimplexWeights, kl_divergence
from app.models.report import RegretDiagnostics, RegretReport, SolverInfo
from app.services.functions import ConvexFamily, aggregate_rounds
from app.services.losses import LossOracle
from app.services.solver import SolverResult, minimize_max

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class SaddlePoint:
    x: np.ndarray
    theta: SimplexWeights
    value: float
    iterations: int
    gap: float
    method: str = "golden"
    approximate: bool = False

    @classmethod
    def from_result(cls, result: SolverResult) -> "SaddlePoint":
        theta, _ = max_over_simplex(result.values)
        return cls(result.x, theta, result.value, result.iterations, result.gap, result.method, result.approximate)

    def solver_info(self) -> SolverInfo:
        return SolverInfo(method=self.method, iterations=self.iterations, gap=self.gap, approximate=self.approximate)


def max_over_simplex(cumulative) -> Tuple[SimplexWeights, float]:
    """A linear form over the simplex peaks at a vertex; ties go to the lowest index."""
    s = np.asarray(cumulative, dtype=float).ravel()
    if s.size == 0:
        raise DimensionMismatchError("Cannot maximise over an empty simplex")
    if not np.all(np.isfinite(s)):
        raise NonFiniteInputError("Cumulative losses must be finite")
    k = int(np.argmax(s))
    indicator = np.zeros(s.size)
    indicator[k] = 1.0
    return SimplexWeights.from_probabilities(indicator), float(s[k])


def solve_offline_minmax(
    rounds: Sequence[ConvexFamily], feasible_set: FeasibleSet, x0: Optional[np.ndarray] = None
) -> SaddlePoint:
    if not rounds:
        raise ValueError("Offline benchmark needs at least one round")
    result = minimize_max(aggregate_rounds(rounds), feasible_set, x0=x0)
    if result.approximate:
        logger.warning(f"Offline optimum is approximate (gap {result.gap:.3g}) over {len(rounds)} rounds")
    return SaddlePoint.from_result(result)


def per_slot_benchmark(rounds: Sequence[ConvexFamily], feasible_set: FeasibleSet) -> float:
    total = 0.0
    # deterministic generators repeat the same objects; solve each once
    solved = {}
    for fn in rounds:
        key = id(fn)
        if key not in solved:
            solved[key] = minimize_max(fn, feasible_set).value
        total += solved[key]
    return total


def expected_benchmark(
    oracle: LossOracle,
    feasible_set: Optional[FeasibleSet] = None,
    samples: Optional[int] = None,
    rng: Optional[RandomSource] = None,
) -> Tuple[SaddlePoint, float]:
    """Per-round min_x max_k mu_k(x) and the standard error of the reported value."""
    feasible_set = feasible_set or oracle.feasible_set
    mean = oracle.mean_objective()
    if mean is not None:
        return SaddlePoint.from_result(minimize_max(mean, feasible_set)), 0.0
    samples = samples or settings.MC_SAMPLES
    rng = rng or oracle.rng.child(-1)
    result = minimize_max(oracle.monte_carlo_objective(samples, rng.child(0)), feasible_set)
    estimate = oracle.estimate_mean(result.x, samples, rng.child(1))
    stderr = float(estimate.stderr[int(np.argmax(result.values))])
    logger.info(f"Expected benchmark {result.value:.6g} +/- {stderr:.2g} from {samples} samples")
    return SaddlePoint.from_result(result), stderr


def regret_diagnostics(
    thetas: np.ndarray,
    final_theta: Optional[np.ndarray],
    bounds: ProblemBounds,
    eta_x: np.ndarray,
    eta_theta: np.ndarray,
) -> RegretDiagnostics:
    horizon, k = thetas.shape
    path = thetas if final_theta is None else np.vstack([thetas, final_theta])
    steps = np.abs(np.diff(path, axis=0)).sum(axis=1)
    pinsker = np.array([math.sqrt(2.0 * kl_divergence(p, q)) for p, q in zip(path[:-1], path[1:])])
    dispersion = float(np.abs(thetas - thetas.mean(axis=0)).sum())
    variation = float(steps.sum())
    b, g, d = bounds.B, bounds.G, bounds.D
    n_steps = steps.size
    return RegretDiagnostics(
        hedge_regret_bound=math.log(k) / eta_theta[-1] + float(eta_theta.sum()) * b ** 2 / 2.0,
        ogd_regret_bound=d ** 2 / (2.0 * eta_x[-1]) + float(eta_x.sum()) * g ** 2 / 2.0,
        ogd_regret_bound_tight=d * g * math.sqrt(horizon),
        theta_path_variation=variation,
        theta_dispersion=dispersion,
        dispersion_bound=b * dispersion,
        variation_bound=2.0 * b * horizon * variation,
        adversarial_mismatch_bound=2.0 * b ** 2 * horizon * float(eta_theta.sum()),
        hedge_step_excess=float(np.max(steps - eta_theta[:n_steps] * b)) if n_steps else 0.0,
        pinsker_excess=float(np.max(steps - pinsker)) if n_steps else 0.0,
    )


def decompose_regret(
    actions,
    thetas,
    rounds: Sequence[ConvexFamily],
    feasible_set: FeasibleSet,
    c_opt: Optional[SaddlePoint] = None,
    final_theta=None,
    bounds: Optional[ProblemBounds] = None,
    eta_x=None,
    eta_theta=None,
    per_slot: Optional[float] = None,
) -> RegretReport:
    """C_A - C_OPT = R1 + R2 + R3.

    R1 = max_k S_k - sum_t <theta_t, lambda_t(x_t)>
    R2 = sum_t <theta_t, lambda_t(x_t)> - m
    R3 = m - C_OPT
    with m = min_x sum_t <theta_t, lambda_t(x)>; m enters R2 and R3 as the same float.
    """
    actions = np.atleast_2d(np.asarray(actions, dtype=float))
    thetas = np.atleast_2d(np.asarray(thetas, dtype=float))
    horizon = len(rounds)
    if actions.shape[0] != horizon or thetas.shape[0] != horizon:
        raise DimensionMismatchError(
            f"Trajectory has {actions.shape[0]} actions and {thetas.shape[0]} weights for {horizon} rounds"
        )
    if thetas.shape[1] != rounds[0].k:
        raise DimensionMismatchError(f"Weights have {thetas.shape[1]} entries, rounds have K={rounds[0].k}")

    losses = np.array([fn.values(x) for fn, x in zip(rounds, actions)])
    # cumsum accumulates in round order, matching the online bookkeeping bit for bit
    running = np.cumsum(losses, axis=0)
    c_alg = float(running[-1].max())
    weighted = float(np.cumsum(np.einsum("tk,tk->t", thetas, losses))[-1])

    c_opt = c_opt or solve_offline_minmax(rounds, feasible_set)
    inner = minimize_max(aggregate_rounds(rounds, thetas).collapse(), feasible_set, x0=c_opt.x)
    inner_min = inner.value

    diagnostics = None
    if bounds is not None and eta_x is not None and eta_theta is not None:
        diagnostics = regret_diagnostics(
            thetas,
            None if final_theta is None else np.asarray(final_theta, dtype=float),
            bounds,
            np.asarray(eta_x, dtype=float),
            np.asarray(eta_theta, dtype=float),
        )

    report = RegretReport(
        c_alg=c_alg,
        c_opt=c_opt.value,
        regret=c_alg - c_opt.value,
        r1=c_alg - weighted,
        r2=weighted - inner_min,
        r3=inner_min - c_opt.value,
        inner_min=inner_min,
        weighted_loss=weighted,
        per_slot_benchmark=per_slot,
        x_star=c_opt.x.tolist(),
        theta_star=c_opt.theta.probabilities.tolist(),
        opt_solver=c_opt.solver_info(),
        inner_solver=SolverInfo(
            method=inner.method, iterations=inner.iterations, gap=inner.gap, approximate=inner.approximate
        ),
        max_cum_loss=running.max(axis=1).tolist(),
        diagnostics=diagnostics,
    )
    logger.debug(f"Decomposition R1={report.r1:.6g} R2={report.r2:.6g} R3={report.r3:.6g}")
    return report
