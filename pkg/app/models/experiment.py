# app/models/experiment.py
from copy import deepcopy
from enum import Enum
from typing import Any, Dict, List, Optional

import numpy as np
from pydantic import BaseModel, Field, model_validator

from app.core.config import settings
from app.core.exceptions import ConfigurationError
from app.core.sets import FeasibleSet, SetKind


class ExperimentKind(str, Enum):
    LINEAR = "linear"
    QUADRATIC = "quadratic"
    EXPERTS = "experts"
    FAIRCLF = "fairclf"
    SWITCHING = "switching"
    ADVERSARIAL = "adversarial"


class AlgorithmKind(str, Enum):
    HEDGE_OGD = "hedge-ogd"
    GREEDY = "greedy"
    AVG_OGD = "avg-ogd"
    FTRL = "ftrl"
    MULTI = "multi"


class FeedbackKind(str, Enum):
    FULL = "full"
    BANDIT1 = "bandit1"
    BANDIT2 = "bandit2"


class SetDescriptor(BaseModel):
    kind: SetKind
    lower: Optional[List[float]] = None
    upper: Optional[List[float]] = None
    center: Optional[List[float]] = None
    radius: Optional[float] = None

    def build(self, d: int, k: int) -> FeasibleSet:
        try:
            if self.kind == SetKind.INTERVAL:
                return FeasibleSet.interval(self.lower[0], self.upper[0])
            if self.kind == SetKind.BOX:
                lower = self.lower if len(self.lower) == d else self.lower * d
                upper = self.upper if len(self.upper) == d else self.upper * d
                return FeasibleSet.box(lower, upper)
            if self.kind == SetKind.BALL:
                center = self.center if self.center is not None else [0.0] * d
                return FeasibleSet.ball(center, self.radius)
            return FeasibleSet.simplex(k)
        except (TypeError, IndexError) as e:
            raise ConfigurationError(f"Incomplete {self.kind.value} descriptor: {e}")


class BoundsOverride(BaseModel):
    B: Optional[float] = Field(None, gt=0)
    G: Optional[float] = Field(None, gt=0)


PRESETS: Dict[str, Dict[str, Any]] = {
    "linear": {
        "experiment": "linear",
        "k": 10,
        "d": 10,
        "feasible_set": {"kind": "ball", "radius": 1.0},
        "horizons": [10, 50, 100, 200, 300],
    },
    "quadratic": {
        "experiment": "quadratic",
        "k": 1,
        "d": 1,
        "feasible_set": {"kind": "interval", "lower": [-1.0], "upper": [1.0]},
        "horizons": [10, 50, 100, 200, 300],
    },
    "experts": {
        "experiment": "experts",
        "k": 2,
        "expert_low": 0.2,
        "expert_high": 0.8,
        "horizons": [100, 500, 1000],
    },
    "fairclf": {
        "experiment": "fairclf",
        "k": 10,
        "d": 20,
        "m": 50,
        "kappa": 1e-3,
        "feasible_set": {"kind": "ball", "radius": 2.5},
        "horizons": [100, 200, 300, 400],
    },
    "switching": {
        "experiment": "switching",
        "k": 3,
        "d": 20,
        "m": 50,
        "kappa": 1e-3,
        "switch_interval": 100,
        "shift_magnitude": 5.0,
        "feasible_set": {"kind": "ball", "radius": 2.5},
        "horizons": [10, 50, 100, 300, 500],
    },
    "adversarial": {
        "experiment": "adversarial",
        "algo": "greedy",
        "k": 2,
        "d": 1,
        "feasible_set": {"kind": "interval", "lower": [0.0], "upper": [1.0]},
        "horizons": [20, 200, 2000],
    },
}


class ExperimentConfig(BaseModel):
    experiment: ExperimentKind
    algo: AlgorithmKind = AlgorithmKind.HEDGE_OGD
    feedback: FeedbackKind = FeedbackKind.FULL
    horizons: List[int] = Field(..., min_length=1)
    k: int = Field(2, ge=1)
    d: int = Field(1, ge=1)
    feasible_set: Optional[SetDescriptor] = None
    bounds: Optional[BoundsOverride] = None
    seeds: int = Field(default_factory=lambda: settings.DEFAULT_SEEDS, ge=1)
    base_seed: int = Field(default_factory=lambda: settings.DEFAULT_BASE_SEED, ge=0)
    out: Optional[str] = None
    trace: bool = False
    decompose: bool = True
    # None: computed on one-dimensional sets only
    per_slot: Optional[bool] = None
    jobs: Optional[int] = None

    m: int = Field(50, ge=1)
    kappa: float = Field(1e-3, gt=0)
    sigma: float = Field(1.0, gt=0)
    expert_low: float = 0.2
    expert_high: float = 0.8
    switch_interval: int = Field(100, ge=1)
    shift_magnitude: float = 5.0
    eta_x_scale: Optional[float] = Field(None, gt=0)
    regularizer_scale: float = Field(1.0, gt=0)

    @model_validator(mode="after")
    def check_combination(self) -> "ExperimentConfig":
        if any(t < 1 for t in self.horizons):
            raise ValueError("Every horizon must be at least 1")
        if self.feedback != FeedbackKind.FULL and self.algo != AlgorithmKind.HEDGE_OGD:
            raise ValueError(f"{self.algo.value} needs full feedback; bandit feedback runs hedge-ogd only")
        if self.algo == AlgorithmKind.MULTI and self.experiment != ExperimentKind.EXPERTS:
            raise ValueError("multi is defined for the experts experiment only")
        if self.experiment == ExperimentKind.EXPERTS:
            if self.k < 2:
                raise ValueError("The experts experiment needs K >= 2")
            if self.feasible_set is not None and self.feasible_set.kind != SetKind.SIMPLEX:
                raise ValueError("The experts experiment is played on the simplex")
            if not 0.0 <= self.expert_low < self.expert_high <= 1.0:
                raise ValueError("Expert losses need 0 <= expert_low < expert_high <= 1")
            self.feasible_set = SetDescriptor(kind=SetKind.SIMPLEX)
            self.d = self.k
        if self.experiment in (ExperimentKind.QUADRATIC, ExperimentKind.ADVERSARIAL):
            self.d = 1
        if self.experiment == ExperimentKind.ADVERSARIAL and self.k != 2:
            raise ValueError("The adversarial pair has exactly K = 2 sequences")
        return self

    @classmethod
    def from_preset(cls, name: str, **overrides) -> "ExperimentConfig":
        if name not in PRESETS:
            raise ConfigurationError(f"Unknown preset '{name}'; choose from {sorted(PRESETS)}")
        fields = deepcopy(PRESETS[name])
        fields.update({key: value for key, value in overrides.items() if value is not None})
        return cls(**fields)

    def build_set(self) -> FeasibleSet:
        if self.feasible_set is not None:
            return self.feasible_set.build(self.d, self.k)
        if self.experiment == ExperimentKind.LINEAR:
            return FeasibleSet.ball(np.zeros(self.d), 1.0)
        if self.experiment in (ExperimentKind.FAIRCLF, ExperimentKind.SWITCHING):
            return FeasibleSet.ball(np.zeros(self.d), 2.5)
        if self.experiment == ExperimentKind.QUADRATIC:
            return FeasibleSet.interval(-1.0, 1.0)
        return FeasibleSet.interval(0.0, 1.0)

    def wants_per_slot(self) -> bool:
        if self.per_slot is not None:
            return self.per_slot
        return self.d == 1 and self.experiment != ExperimentKind.EXPERTS
