# app/services/solver.py
"""
Shared solver for min_x max_k f^k(x) over a feasible set.

One-dimensional sets are handled by golden-section search on the (convex,
hence unimodal) max function with an endpoint check. Higher dimensions go
through an epigraph SLSQP solve followed by projected subgradient descent
from the polished point, keeping the best iterate. The same routine serves
the offline optimum, the inner minimum of the regret decomposition, the
greedy per-round action and FTRL.
"""
import logging
import math
from dataclasses import dataclass
from typing import Callable, Optional, Tuple

import numpy as np
from scipy.optimize import minimize

from app.core.config import settings
from app.core.exceptions import NonFiniteInputError, SolverConvergenceError
from app.core.sets import FeasibleSet, SetKind
from app.services.functions import ConvexFamily

logger = logging.getLogger(__name__)

INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True, eq=False)
class SolverResult:
    x: np.ndarray
    value: float
    values: np.ndarray
    method: str
    iterations: int
    gap: float
    approximate: bool = False


def max_value(family: ConvexFamily, x: np.ndarray) -> float:
    return float(np.max(family.values(x)))


def active_subgradient(family: ConvexFamily, x: np.ndarray) -> Tuple[float, np.ndarray]:
    """Value of the max and the gradient of its lowest-index active function."""
    values = family.values(x)
    k = int(np.argmax(values))
    return float(values[k]), family.grads(x)[k]


def golden_section(fun: Callable[[float], float], lower: float, upper: float, tol: float) -> Tuple[float, float, int]:
    a, b = lower, upper
    c = b - INV_PHI * (b - a)
    d = a + INV_PHI * (b - a)
    fc, fd = fun(c), fun(d)
    iterations = 0
    while b - a > tol:
        iterations += 1
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - INV_PHI * (b - a)
            fc = fun(c)
        else:
            a, c, fc = c, d, fd
            d = a + INV_PHI * (b - a)
            fd = fun(d)
    best_x = 0.5 * (a + b)
    best_f = fun(best_x)
    # the minimiser of a max of affine pieces often sits on the boundary
    for edge in (lower, upper):
        f_edge = fun(edge)
        if f_edge < best_f:
            best_x, best_f = edge, f_edge
    return best_x, best_f, iterations


def _set_constraints(feasible_set: FeasibleSet):
    d = feasible_set.dim
    free = (None, None)
    if feasible_set.kind in (SetKind.INTERVAL, SetKind.BOX):
        return list(zip(feasible_set.lower, feasible_set.upper)) + [free], []
    if feasible_set.kind == SetKind.SIMPLEX:
        eq = {
            "type": "eq",
            "fun": lambda z: np.array([z[:-1].sum() - 1.0]),
            "jac": lambda z: np.append(np.ones(d), 0.0)[None, :],
        }
        return [(0.0, 1.0)] * d + [free], [eq]
    center, radius = feasible_set.center, feasible_set.radius
    ball = {
        "type": "ineq",
        "fun": lambda z: np.array([radius ** 2 - float((z[:-1] - center) @ (z[:-1] - center))]),
        "jac": lambda z: np.append(-2.0 * (z[:-1] - center), 0.0)[None, :],
    }
    return None, [ball]


def polish(family: ConvexFamily, feasible_set: FeasibleSet, x0: np.ndarray) -> Tuple[Optional[np.ndarray], bool, int]:
    """Epigraph form: minimise s subject to s >= f^k(x) for every k and x in the set.

    Returns (point or None, whether SLSQP reported success, its iteration count).
    """
    d, k = family.d, family.k
    bounds, constraints = _set_constraints(feasible_set)
    epigraph = {
        "type": "ineq",
        "fun": lambda z: z[-1] - family.values(z[:-1]),
        "jac": lambda z: np.hstack([-family.grads(z[:-1]), np.ones((k, 1))]),
    }
    start = np.append(x0, max_value(family, x0))
    unit = np.zeros(d + 1)
    unit[-1] = 1.0
    try:
        res = minimize(
            lambda z: z[-1],
            start,
            jac=lambda z: unit,
            method="SLSQP",
            bounds=bounds,
            constraints=[epigraph, *constraints],
            options={"maxiter": 500, "ftol": 1e-14},
        )
    except (ValueError, ArithmeticError) as e:
        logger.debug(f"SLSQP polish failed: {e}")
        return None, False, 0
    if not np.all(np.isfinite(res.x)):
        return None, False, int(res.nit)
    # status 8: the line search stalled at the precision floor
    converged = bool(res.success) or res.status == 8
    return feasible_set.project(res.x[:-1]), converged, int(res.nit)


def minimize_max(
    family: ConvexFamily,
    feasible_set: FeasibleSet,
    x0: Optional[np.ndarray] = None,
    tol: Optional[float] = None,
    max_iter: Optional[int] = None,
    stall_window: Optional[int] = None,
    use_polish: Optional[bool] = None,
    raise_on_cap: bool = False,
    refine: bool = True,
) -> SolverResult:
    """min_x max_k f^k(x). With ``refine=False`` a converged SLSQP solve is returned as is."""
    if family.d != feasible_set.dim:
        raise ValueError(f"Objective has dimension {family.d}, set has dimension {feasible_set.dim}")

    if feasible_set.kind == SetKind.INTERVAL:
        lo, hi = float(feasible_set.lower[0]), float(feasible_set.upper[0])
        x, value, iterations = golden_section(
            lambda s: max_value(family, np.array([s])), lo, hi, settings.GOLDEN_TOL
        )
        point = np.array([x])
        return SolverResult(point, value, family.values(point), "golden", iterations, 0.0)

    tol = settings.SOLVER_STALL_TOL if tol is None else tol
    max_iter = settings.SOLVER_MAX_ITER if max_iter is None else max_iter
    stall_window = settings.SOLVER_STALL_WINDOW if stall_window is None else stall_window
    use_polish = settings.SOLVER_POLISH if use_polish is None else use_polish

    x = feasible_set.project(feasible_set.initial_point() if x0 is None else x0)
    method = "subgradient"
    if use_polish:
        polished, converged, polish_iterations = polish(family, feasible_set, x)
        if polished is not None and max_value(family, polished) <= max_value(family, x):
            x = polished
            method = "slsqp+subgradient"
            if converged and not refine:
                values = family.values(x)
                return SolverResult(x, float(values.max()), values, "slsqp", polish_iterations, 0.0)

    best_x, best_value = x, math.inf
    window_start_value = math.inf
    diameter = feasible_set.diameter()
    grad_scale = 0.0
    gap = math.inf
    iterations = 0
    for s in range(1, max_iter + 1):
        iterations = s
        value, g = active_subgradient(family, x)
        if not math.isfinite(value) or not np.all(np.isfinite(g)):
            raise NonFiniteInputError("Objective returned a non-finite value or gradient")
        if value < best_value:
            best_x, best_value = x, value
        if s % stall_window == 0:
            gap = window_start_value - best_value
            if gap < tol * max(1.0, abs(best_value)):
                break
            window_start_value = best_value
        g_norm = float(np.linalg.norm(g))
        if g_norm == 0.0:
            # zero subgradient of the active piece: global minimiser
            gap = 0.0
            break
        grad_scale = max(grad_scale, g_norm)
        x = feasible_set.project(x - (diameter / grad_scale) / math.sqrt(s) * g)
    else:
        logger.warning(f"Solver hit the iteration cap ({max_iter}); last improvement {gap:.3g}")
        if raise_on_cap:
            raise SolverConvergenceError(
                f"No convergence after {max_iter} iterations", best_x=best_x, gap=gap
            )
        return SolverResult(best_x, best_value, family.values(best_x), method, iterations, gap, True)

    logger.debug(f"Solver ({method}) stopped after {iterations} iterations at {best_value:.12g}")
    return SolverResult(best_x, best_value, family.values(best_x), method, iterations, max(gap, 0.0))
