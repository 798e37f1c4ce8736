"""CSV traces and JSON reports.

Trace columns: ``k, V, mean`` then, when per-agent MSE is kept, ``mse_0 .. mse_{N-1}``,
then ``events`` (negativity plus guard events so far). Floats are written with ``repr``
so a trace read back holds exactly the values that were recorded.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np
import structlog
from pydantic import BaseModel

from overair.models.analysis import MetricsTrace

logger = structlog.get_logger(__name__)


def should_record(k: int, horizon: int, stride: int) -> bool:
    """Every ``stride``-th step, plus the final one."""
    return k % stride == 0 or k == horizon


def trace_header(n_agents: int, per_agent_mse: bool) -> list[str]:
    header = ["k", "V", "mean"]
    if per_agent_mse:
        header += [f"mse_{i}" for i in range(n_agents)]
    header.append("events")
    return header


def trace_path(out_dir: str | Path, scenario: str, trial: int) -> Path:
    return Path(out_dir) / f"{scenario}_trial{trial:05d}.csv"


def write_trace(trace: MetricsTrace, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(trace_header(trace.n_agents, trace.keep_mse))
        for row, k in enumerate(trace.steps):
            values: list[object] = [k, repr(trace.lyapunov[row]), repr(trace.network_mean[row])]
            if trace.keep_mse:
                values += [repr(float(v)) for v in trace.mse[row]]
            values.append(trace.events[row])
            writer.writerow(values)
    return path


def read_trace(path: str | Path, *, initial_average: float | None = None) -> MetricsTrace:
    path = Path(path)
    with path.open(encoding="utf-8", newline="") as handle:
        rows = list(csv.DictReader(handle))
    mse_columns = sorted(
        (name for name in (rows[0].keys() if rows else ()) if name.startswith("mse_")),
        key=lambda name: int(name.removeprefix("mse_")),
    )
    first_mean = float(rows[0]["mean"]) if rows else 0.0
    trace = MetricsTrace(
        initial_average=first_mean if initial_average is None else initial_average,
        keep_mse=bool(mse_columns),
        n_agents=len(mse_columns),
    )
    for row in rows:
        trace.steps.append(int(row["k"]))
        trace.lyapunov.append(float(row["V"]))
        trace.network_mean.append(float(row["mean"]))
        trace.events.append(int(row["events"]))
        if mse_columns:
            trace.mse.append(np.array([float(row[name]) for name in mse_columns]))
    return trace


def write_report(report: BaseModel, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(report.model_dump(mode="json"), indent=2) + "\n", encoding="utf-8")
    logger.info("Report written", path=str(path))
    return path
