from __future__ import annotations

import math
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from matplotlib.collections import PolyCollection
from matplotlib.figure import Figure

from tritraj.cdt import Triangulation
from tritraj.mapio import MapDocument
from tritraj.transcription import TrajectorySpline, sample

ARROWS = 12


def searched_values(trace: Iterable[dict], final: Sequence[int] = ()) -> dict[int, float]:
    """
    Smallest lower bound recorded for any sequence ending in each triangle.
    Completed sequences contribute their fixed-endpoint value.

    Triangles of the `final` sequence instead carry the free-endpoint value V
    of the prefix ending in them, and the last one the value of the plan.
    """
    final = tuple(final)
    prefixes = {final[: k + 1]: final[k] for k in range(len(final))}
    best: dict[int, float] = {}
    along: dict[int, float] = {}
    for event in trace:
        if event.get("event") != "solved" or not event.get("sequence"):
            continue
        seq = tuple(event["sequence"])
        if seq in prefixes:
            value = event.get("Q") if seq == final else event.get("V")
            if value is not None and math.isfinite(value):
                along[prefixes[seq]] = float(value)
        value = event.get("lower_bound")
        if value is None:
            value = event.get("Q")
        if value is None or not math.isfinite(value):
            continue
        best[seq[-1]] = min(best.get(seq[-1], math.inf), float(value))
    best.update(along)
    return best


def render_svg(map_doc: MapDocument, triangulation: Triangulation, path: str | Path,
               spline: TrajectorySpline | None = None, trace: Iterable[dict] | None = None,
               final: Sequence[int] = ()) -> Path:
    path = Path(path)
    fig = Figure(figsize=(8, 8))
    ax = fig.add_subplot()
    ax.set_aspect("equal")
    pts = triangulation.points

    values = searched_values(trace or [], final)
    if values:
        ids = sorted(values)
        coll = PolyCollection([pts[list(triangulation.triangles[i])] for i in ids],
                              array=np.array([values[i] for i in ids]), cmap="viridis",
                              edgecolors="none", alpha=0.8)
        ax.add_collection(coll)
        fig.colorbar(coll, ax=ax, label="lower bound, V along the plan")

    for obstacle in map_doc.obstacles:
        ring = obstacle.as_array()
        ax.fill(ring[:, 0], ring[:, 1], color="0.35", zorder=2)
    outer = map_doc.domain.as_array()
    ax.plot(np.append(outer[:, 0], outer[0, 0]), np.append(outer[:, 1], outer[0, 1]), color="black", lw=1.2)
    ax.triplot(pts[:, 0], pts[:, 1], np.array(triangulation.triangles), color="0.6", lw=0.4, zorder=3)

    if spline is not None:
        samples = sample(spline, 25)
        xy = np.array([s.state[:2] for s in samples])
        ax.plot(xy[:, 0], xy[:, 1], color="tab:red", lw=1.8, zorder=4)
        picks = np.linspace(0, len(xy) - 2, min(ARROWS, len(xy) - 1)).astype(int)
        d = xy[picks + 1] - xy[picks]
        ax.quiver(xy[picks, 0], xy[picks, 1], d[:, 0], d[:, 1], color="tab:red",
                  angles="xy", scale_units="xy", scale=None, width=0.004, zorder=5)

    ax.set_xlabel("x [m]")
    ax.set_ylabel("y [m]")
    fig.savefig(path, format="svg", bbox_inches="tight")
    return path
