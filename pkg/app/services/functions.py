# app/services/functions.py
"""
Convex function families.

Each instance holds K convex functions of x in R^d. Nonnegative weighted sums
of instances of one family stay in that family, which is what lets cumulative
objectives (sum over rounds, theta-weighted sums, FTRL histories) be solved as
a single object instead of a loop over rounds.
"""
from abc import ABC, abstractmethod
from typing import Optional, Sequence

import numpy as np
from scipy.special import expit


class ConvexFamily(ABC):
    @property
    @abstractmethod
    def k(self) -> int: ...

    @property
    @abstractmethod
    def d(self) -> int: ...

    @abstractmethod
    def values(self, x: np.ndarray) -> np.ndarray:
        """Vector of the K function values at x."""

    @abstractmethod
    def grads(self, x: np.ndarray) -> np.ndarray:
        """K x d matrix of gradients at x."""

    @classmethod
    @abstractmethod
    def aggregate(cls, parts: Sequence["ConvexFamily"], weights: Optional[np.ndarray] = None) -> "ConvexFamily":
        """Sum_t w_{t,k} f_t^k, one function per k."""

    @abstractmethod
    def collapse(self) -> "ConvexFamily":
        """Single function sum_k f^k."""

    @abstractmethod
    def regularized(self, scale: float) -> "ConvexFamily":
        """Adds (scale / 2) ||x||^2 to every function."""

    def __add__(self, other: "ConvexFamily") -> "ConvexFamily":
        return type(self).aggregate([self, other])


def _weight_matrix(count: int, k: int, weights: Optional[np.ndarray]) -> np.ndarray:
    if weights is None:
        return np.ones((count, k))
    w = np.asarray(weights, dtype=float)
    if w.shape != (count, k):
        raise ValueError(f"Weights must have shape {(count, k)}, got {w.shape}")
    return w


class QuadraticForm(ConvexFamily):
    """f^k(x) = q_k ||x||^2 + <b_k, x> + c_k with q_k >= 0.

    Covers linear losses (q = 0), squared distances (x - a)^2 and the
    quadratic regulariser.
    """

    def __init__(self, q, b, c):
        self.q = np.asarray(q, dtype=float).ravel()
        self.b = np.atleast_2d(np.asarray(b, dtype=float))
        self.c = np.asarray(c, dtype=float).ravel()
        if not (self.q.size == self.b.shape[0] == self.c.size):
            raise ValueError("q, b and c must describe the same number of functions")
        if np.any(self.q < 0):
            raise ValueError("Quadratic coefficients must be nonnegative for convexity")

    @classmethod
    def linear(cls, coef, offset=None) -> "QuadraticForm":
        coef = np.atleast_2d(np.asarray(coef, dtype=float))
        offset = np.zeros(coef.shape[0]) if offset is None else offset
        return cls(np.zeros(coef.shape[0]), coef, offset)

    @classmethod
    def squared_distance(cls, centers) -> "QuadraticForm":
        """f^k(x) = ||x - a_k||^2."""
        a = np.atleast_2d(np.asarray(centers, dtype=float))
        return cls(np.ones(a.shape[0]), -2.0 * a, np.sum(a * a, axis=1))

    @property
    def k(self) -> int:
        return int(self.q.size)

    @property
    def d(self) -> int:
        return int(self.b.shape[1])

    def values(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float).ravel()
        return self.q * float(x @ x) + self.b @ x + self.c

    def grads(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float).ravel()
        return 2.0 * self.q[:, None] * x[None, :] + self.b

    @classmethod
    def aggregate(cls, parts, weights=None) -> "QuadraticForm":
        w = _weight_matrix(len(parts), parts[0].k, weights)
        q = np.stack([p.q for p in parts])
        b = np.stack([p.b for p in parts])
        c = np.stack([p.c for p in parts])
        return cls((w * q).sum(axis=0), np.einsum("tk,tkd->kd", w, b), (w * c).sum(axis=0))

    def collapse(self) -> "QuadraticForm":
        return QuadraticForm([self.q.sum()], self.b.sum(axis=0, keepdims=True), [self.c.sum()])

    def regularized(self, scale: float) -> "QuadraticForm":
        return QuadraticForm(self.q + 0.5 * scale, self.b, self.c)

    @property
    def strong_convexity(self) -> float:
        return 2.0 * float(self.q.min())


class LogisticLosses(ConvexFamily):
    """f^k(x) = sum_i w_{k,i} log(1 + exp(-y_{k,i} <x, z_{k,i}>)) + r_k ||x||^2.

    Labels are in {-1, +1}.
    """

    def __init__(self, features, labels, sample_weights, ridge):
        self.features = np.asarray(features, dtype=float)
        self.labels = np.asarray(labels, dtype=float)
        self.sample_weights = np.asarray(sample_weights, dtype=float)
        self.ridge = np.asarray(ridge, dtype=float).ravel()
        if self.features.ndim != 3:
            raise ValueError("Features must have shape (K, n, d)")
        if self.labels.shape != self.features.shape[:2] or self.sample_weights.shape != self.labels.shape:
            raise ValueError("Labels and sample weights must have shape (K, n)")

    @classmethod
    def minibatch(cls, features, labels, kappa: float) -> "LogisticLosses":
        k, m, _ = np.shape(features)
        return cls(features, labels, np.full((k, m), 1.0 / m), np.full(k, float(kappa)))

    @property
    def k(self) -> int:
        return int(self.features.shape[0])

    @property
    def d(self) -> int:
        return int(self.features.shape[2])

    def _margins(self, x: np.ndarray) -> np.ndarray:
        return self.labels * (self.features @ np.asarray(x, dtype=float).ravel())

    def values(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float).ravel()
        losses = np.logaddexp(0.0, -self._margins(x))
        return (self.sample_weights * losses).sum(axis=1) + self.ridge * float(x @ x)

    def grads(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float).ravel()
        scale = -self.sample_weights * self.labels * expit(-self._margins(x))
        return np.einsum("kn,knd->kd", scale, self.features) + 2.0 * self.ridge[:, None] * x[None, :]

    @classmethod
    def aggregate(cls, parts, weights=None) -> "LogisticLosses":
        w = _weight_matrix(len(parts), parts[0].k, weights)
        features = np.concatenate([p.features for p in parts], axis=1)
        labels = np.concatenate([p.labels for p in parts], axis=1)
        sample_weights = np.concatenate([w[t][:, None] * p.sample_weights for t, p in enumerate(parts)], axis=1)
        ridge = sum(w[t] * p.ridge for t, p in enumerate(parts))
        return cls(features, labels, sample_weights, ridge)

    def collapse(self) -> "LogisticLosses":
        k, n, d = self.features.shape
        return LogisticLosses(
            self.features.reshape(1, k * n, d),
            self.labels.reshape(1, k * n),
            self.sample_weights.reshape(1, k * n),
            [self.ridge.sum()],
        )

    def regularized(self, scale: float) -> "LogisticLosses":
        return LogisticLosses(self.features, self.labels, self.sample_weights, self.ridge + 0.5 * scale)


def aggregate_rounds(rounds: Sequence[ConvexFamily], weights: Optional[np.ndarray] = None) -> ConvexFamily:
    if not rounds:
        raise ValueError("Cannot aggregate an empty list of rounds")
    return type(rounds[0]).aggregate(list(rounds), weights)
