# app/core/weights.py
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.special import logsumexp

from app.core.exceptions import BoundExceededError, DimensionMismatchError, NonFiniteInputError

# exp() of this is exactly 0.0 while staying finite under later additions
ZERO_LOG_WEIGHT = -1e300


@dataclass(frozen=True, eq=False)
class SimplexWeights:
    """Hedge state kept in the log domain; probabilities are cached."""

    log_weights: np.ndarray
    probabilities: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        logs = np.asarray(self.log_weights, dtype=float).ravel()
        if logs.size == 0 or not np.all(np.isfinite(logs)):
            raise NonFiniteInputError("Log-weights must be a finite nonempty vector")
        object.__setattr__(self, "log_weights", logs)
        object.__setattr__(self, "probabilities", np.exp(logs - logsumexp(logs)))

    @classmethod
    def uniform(cls, k: int) -> "SimplexWeights":
        return cls(np.zeros(int(k)))

    @classmethod
    def from_probabilities(cls, probabilities) -> "SimplexWeights":
        p = np.asarray(probabilities, dtype=float).ravel()
        with np.errstate(divide="ignore"):
            logs = np.log(p)
        # zero-probability coordinates stay representable
        return cls(np.where(np.isfinite(logs), logs, ZERO_LOG_WEIGHT))

    @property
    def k(self) -> int:
        return int(self.log_weights.size)

    def argmax(self) -> int:
        return int(np.argmax(self.probabilities))


def hedge_update(
    weights: SimplexWeights,
    gains,
    eta: float,
    bound: Optional[float] = None,
) -> SimplexWeights:
    """Gains-version multiplicative update w_i <- w_i * exp(eta * gain_i)."""
    g = np.asarray(gains, dtype=float).ravel()
    if g.size != weights.k:
        raise DimensionMismatchError(f"Expected {weights.k} gains, got {g.size}")
    if not np.all(np.isfinite(g)):
        raise NonFiniteInputError("Hedge gains must be finite")
    if not np.isfinite(eta) or eta < 0:
        raise NonFiniteInputError(f"Hedge step must be a nonnegative finite number, got {eta}")
    if bound is not None and np.any(np.abs(g) > bound * (1 + 1e-12)):
        raise BoundExceededError(f"Gain magnitude {np.abs(g).max()} exceeds declared bound {bound}")
    logs = weights.log_weights + eta * g
    # keep the largest log-weight at zero so the vector never drifts toward overflow
    return SimplexWeights(logs - logs.max())


def kl_divergence(p, q) -> float:
    """KL(p || q) as log E_p[exp(c)], c = log(q / p) centred under p.

    Rounding error scales with |c|, so nearly equal inputs give a small
    nonnegative value instead of a cancelled sum.
    """
    p = np.asarray(p, dtype=float).ravel()
    q = np.asarray(q, dtype=float).ravel()
    if p.size != q.size:
        raise DimensionMismatchError(f"Distributions have {p.size} and {q.size} entries")
    support = p > 0.0
    if np.any(q[support] <= 0.0):
        return math.inf
    ps = p[support]
    r = np.log(q[support]) - np.log(ps)
    c = r - ps @ r
    # q mass off the support of p adds -log(1 - mass)
    outside = float(q[~support].sum())
    return max(float(np.log1p(ps @ np.expm1(c))) - math.log1p(-outside), 0.0)


def total_variation_l1(p, q) -> float:
    return float(np.abs(np.asarray(p, dtype=float) - np.asarray(q, dtype=float)).sum())
