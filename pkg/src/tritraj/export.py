"""Writers for the files a planning run leaves in its output directory."""
from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Iterable

from tritraj.dynamics import CarModel, DynamicsModel
from tritraj.metrics import TrajectoryMetrics
from tritraj.search import SearchStats
from tritraj.transcription import TrajectorySpline, sample

TRAJECTORY_HEADER = ("t", "x", "y", "psi_or_zr", "zi", "u", "v", "r", "u1", "u2")
METRICS_KEYS = ("time_s", "distance_m", "energy_kJ", "max_abs_curvature",
                "nodes_expanded", "nodes_pruned", "solver_calls", "wall_time_s")


def _fmt(value: float | None) -> str:
    return "" if value is None else format(float(value), ".9g")


def trajectory_row(model: DynamicsModel, t: float, state, control) -> list[str]:
    """One CSV row in the shared car/vessel schema. The car's turn-rate control fills the r column."""
    if isinstance(model, CarModel):
        values = [t, state[0], state[1], state[2], None, None, None, control[0], None, None]
    else:
        values = [t, *state[:7], control[0], control[1]]
    return [_fmt(v) for v in values]


def write_trajectory_csv(path: str | Path, spline: TrajectorySpline, model: DynamicsModel,
                         samples_per_segment: int = 20) -> int:
    """Write segments * samples_per_segment + 1 rows; returns the row count."""
    rows = sample(spline, samples_per_segment + 1)
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(TRAJECTORY_HEADER)
        for s in rows:
            writer.writerow(trajectory_row(model, s.t, s.state, s.control))
    return len(rows)


def metrics_document(m: TrajectoryMetrics, stats: SearchStats) -> dict:
    doc = m.as_dict()
    doc.update({k: v for k, v in stats.as_dict().items() if k in METRICS_KEYS})
    return {k: doc[k] for k in METRICS_KEYS}


def write_metrics_json(path: str | Path, m: TrajectoryMetrics, stats: SearchStats) -> dict:
    doc = metrics_document(m, stats)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(doc, f, indent=2)
        f.write("\n")
    return doc


def write_curvature_csv(path: str | Path, m: TrajectoryMetrics) -> None:
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(("t", "kappa"))
        for t, kappa in m.curvature:
            writer.writerow((_fmt(t), _fmt(kappa)))


def write_trace_jsonl(path: str | Path, events: Iterable[dict]) -> int:
    count = 0
    with open(path, "w", encoding="utf-8") as f:
        for event in events:
            f.write(json.dumps(event) + "\n")
            count += 1
    return count


def write_comparison_json(path: str | Path, table: dict[str, TrajectoryMetrics], reference: dict | None = None) -> dict:
    doc = {"plans": {name: m.as_dict() for name, m in table.items()}}
    if reference:
        doc["reference"] = reference
    with open(path, "w", encoding="utf-8") as f:
        json.dump(doc, f, indent=2)
        f.write("\n")
    return doc
