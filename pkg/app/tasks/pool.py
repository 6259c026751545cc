# app/tasks/pool.py
import logging
import os
from typing import Callable, List, Optional, Sequence, TypeVar

from joblib import Parallel, delayed
from tqdm import tqdm

try:
    import psutil
except Exception:  # pragma: no cover - optional
    psutil = None
from app.core.config import settings

logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")


def calculate_workers(task_count: Optional[int] = None) -> int:
    """CPU count, capped at two workers per free GiB and at the number of tasks."""
    cpus = os.cpu_count() or 1
    try:
        mem_gb = psutil.virtual_memory().available // (1024 ** 3) if psutil else 1
    except Exception:
        mem_gb = 1
    workers = max(1, min(cpus, mem_gb * 2))
    if task_count is not None:
        workers = max(1, min(workers, task_count))
    return workers


def resolve_jobs(requested: Optional[int], task_count: int) -> int:
    if requested is None or requested == 0:
        requested = settings.N_JOBS
    if requested and requested > 0:
        return min(requested, max(task_count, 1))
    return calculate_workers(task_count)


def run_parallel(
    fn: Callable[[T], R],
    items: Sequence[T],
    n_jobs: Optional[int] = None,
    desc: str = "seeds",
    progress: bool = False,
) -> List[R]:
    """Maps ``fn`` over ``items`` in worker processes; results keep the input order."""
    jobs = resolve_jobs(n_jobs, len(items))
    logger.info(f"Running {len(items)} {desc} on {jobs} worker(s)")
    results = Parallel(n_jobs=jobs, return_as="generator")(delayed(fn)(item) for item in items)
    return list(tqdm(results, total=len(items), desc=desc, disable=not progress))
