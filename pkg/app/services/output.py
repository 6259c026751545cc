# app/services/output.py
import logging
import os
from typing import List, Sequence

import numpy as np
import pandas as pd

from app.models.report import CSV_FIELDS, RunRecord, RunTrace

logger = logging.getLogger(__name__)

# 17 significant digits parse back to the same double
FLOAT_FORMAT = "%.17g"
INT_FIELDS = ["seed", "T", "K", "d"]
TEXT_FIELDS = ["experiment", "algo", "feedback"]


def _ensure_parent(path: str):
    parent = os.path.dirname(os.path.abspath(path))
    os.makedirs(parent, exist_ok=True)


def _write(df: pd.DataFrame, path: str) -> None:
    _ensure_parent(path)
    df.to_csv(path, index=False, float_format=FLOAT_FORMAT, na_rep="nan", lineterminator="\n")


def records_frame(records: Sequence[RunRecord]) -> pd.DataFrame:
    df = pd.DataFrame([record.model_dump() for record in records], columns=CSV_FIELDS)
    float_fields = [name for name in CSV_FIELDS if name not in INT_FIELDS and name not in TEXT_FIELDS]
    return df.astype({**{name: "int64" for name in INT_FIELDS}, **{name: "float64" for name in float_fields}})


def emit_csv(records: Sequence[RunRecord], path: str) -> None:
    if not records:
        raise ValueError("No records to write")
    _write(records_frame(records), path)
    logger.info(f"Wrote {len(records)} record(s) to {path}")


def read_csv(path: str) -> List[RunRecord]:
    df = pd.read_csv(
        path,
        float_precision="round_trip",
        dtype={name: str for name in TEXT_FIELDS},
        keep_default_na=False,
        na_values=["nan"],
    )
    if df.columns.tolist() != CSV_FIELDS:
        raise ValueError(f"Unexpected header in {path}: {df.columns.tolist()}")
    return [RunRecord(**row) for row in df.to_dict(orient="records")]


def trace_path(out_path: str, seed: int, horizon: int) -> str:
    stem, _ = os.path.splitext(out_path)
    return f"{stem}.trace.seed{seed}.T{horizon}.csv"


def trace_frame(trace: RunTrace) -> pd.DataFrame:
    thetas = np.asarray(trace.thetas, dtype=float)
    df = pd.DataFrame({"t": np.arange(1, len(trace.max_cum_loss) + 1), "max_cum_loss": trace.max_cum_loss})
    for i in range(thetas.shape[1]):
        df[f"theta_{i}"] = thetas[:, i]
    df["step_eta_x"] = np.asarray(trace.eta_x, dtype=float)
    df["step_eta_theta"] = np.asarray(trace.eta_theta, dtype=float)
    return df


def emit_trace(trace: RunTrace, path: str) -> None:
    if not trace.max_cum_loss:
        raise ValueError("No rounds to write")
    _write(trace_frame(trace), path)
    logger.debug(f"Wrote trace of {len(trace.max_cum_loss)} rounds to {path}")


def summarize_runs(paths: Sequence[str]) -> pd.DataFrame:
    """Mean regret and its standard error per (experiment, algo, feedback, K, T) over the runs in ``paths``."""
    df = pd.concat([records_frame(read_csv(path)) for path in paths], ignore_index=True)
    grouped = df.groupby(["experiment", "algo", "feedback", "K", "T"], sort=True)["regret"]
    summary = grouped.agg(["mean", "sem", "count"]).reset_index()
    return summary.rename(columns={"mean": "regret_mean", "sem": "regret_stderr", "count": "runs"})
