# app/core/config.py
import os
from pydantic_settings import BaseSettings


class Settings(BaseSettings):
    PROJECT_NAME: str = "Min-Max Online Convex Optimization"

    OUTPUT_DIR: str = os.getenv("OUTPUT_DIR", "outputs")
    LOG_LEVEL: str = os.getenv("LOG_LEVEL", "INFO")
    # Empty string disables the file handler
    LOG_FILE: str = os.getenv("LOG_FILE", "minmax_oco.log")

    # 0 means size the pool from the machine
    N_JOBS: int = int(os.getenv("N_JOBS", "0"))

    SOLVER_MAX_ITER: int = int(os.getenv("SOLVER_MAX_ITER", "50000"))
    SOLVER_STALL_WINDOW: int = int(os.getenv("SOLVER_STALL_WINDOW", "200"))
    SOLVER_STALL_TOL: float = float(os.getenv("SOLVER_STALL_TOL", "1e-8"))
    SOLVER_POLISH: bool = os.getenv("SOLVER_POLISH", "true").lower() == "true"
    GOLDEN_TOL: float = float(os.getenv("GOLDEN_TOL", "1e-10"))

    MEMBERSHIP_TOL: float = 1e-12
    MC_SAMPLES: int = int(os.getenv("MC_SAMPLES", "2000"))

    DEFAULT_SEEDS: int = int(os.getenv("DEFAULT_SEEDS", "10"))
    DEFAULT_BASE_SEED: int = int(os.getenv("DEFAULT_BASE_SEED", "20240601"))

    class Config:
        env_file = ".env"
        case_sensitive = True
        extra = "ignore"


settings = Settings()
