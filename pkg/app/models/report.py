# app/models/report.py
from typing import List, Optional

from pydantic import BaseModel

CSV_FIELDS = [
    "experiment",
    "algo",
    "feedback",
    "seed",
    "T",
    "K",
    "d",
    "C_alg",
    "C_opt",
    "regret",
    "R1",
    "R2",
    "R3",
    "per_slot_benchmark",
    "wall_ms",
]


class SolverInfo(BaseModel):
    method: str
    iterations: int
    gap: float
    approximate: bool = False


class RegretDiagnostics(BaseModel):
    """Reference bounds evaluated on one trajectory."""

    hedge_regret_bound: float
    ogd_regret_bound: float
    ogd_regret_bound_tight: float
    theta_path_variation: float
    theta_dispersion: float
    dispersion_bound: float
    variation_bound: float
    adversarial_mismatch_bound: float
    hedge_step_excess: float
    pinsker_excess: float


class RegretReport(BaseModel):
    c_alg: float
    c_opt: float
    regret: float
    r1: float
    r2: float
    r3: float
    inner_min: float
    weighted_loss: float
    per_slot_benchmark: Optional[float] = None
    x_star: List[float]
    theta_star: List[float]
    opt_solver: SolverInfo
    inner_solver: SolverInfo
    max_cum_loss: List[float]
    diagnostics: Optional[RegretDiagnostics] = None

    @property
    def decomposition_residual(self) -> float:
        return (self.r1 + self.r2 + self.r3) - self.regret


class RunRecord(BaseModel):
    experiment: str
    algo: str
    feedback: str
    seed: int
    T: int
    K: int
    d: int
    C_alg: float
    C_opt: float
    regret: float
    R1: float
    R2: float
    R3: float
    per_slot_benchmark: float
    wall_ms: float

    def sort_key(self):
        return (self.seed, self.T)


class RunTrace(BaseModel):
    """Per-round series of one run, one entry per round t = 1..T."""

    seed: int
    T: int
    max_cum_loss: List[float]
    thetas: List[List[float]]
    eta_x: List[float]
    eta_theta: List[float]
