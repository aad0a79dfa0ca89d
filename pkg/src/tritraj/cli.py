import argparse
import asyncio
import sys
from pathlib import Path

import numpy as np
from rich.console import Console
from rich.table import Table

from tritraj.cdt import adjacency, triangulate
from tritraj.config_manager import load_config, update_config
from tritraj.dynamics import MODELS, DynamicsModel, VesselModel, make_model
from tritraj.errors import ConfigError, InputError, MapError, NoPathError, PlannerError, TritrajError
from tritraj.export import (
    write_comparison_json,
    write_curvature_csv,
    write_metrics_json,
    write_trace_jsonl,
    write_trajectory_csv,
)
from tritraj.mapio import load_map
from tritraj.metrics import TrajectoryMetrics, metrics
from tritraj.objectives import Objective, ObjectiveKind
from tritraj.pluralize import pluralize_numbers
from tritraj.render import render_svg
from tritraj.search import OptimalPlan, PlannerConfig, parallel_plan_async, plan
from tritraj.transcription import audit_membership

console = Console(color_system="truecolor")

# Harbor-crossing results the vessel comparison is usually read against.
REFERENCE = {"time_s": 811.81, "distance_m": 1450.58, "energy_kJ": 269.96}

_TAGS = ((MapError, "MAP"), (ConfigError, "CONFIG"), (NoPathError, "SEARCH"), (PlannerError, "SEARCH"))


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise InputError(message)


def parse_args(argv: list[str] | None = None) -> argparse.Namespace:
    """Parse command-line arguments."""
    parser = _Parser(prog="tritraj", description="Plan globally optimal trajectories through a triangulated map")
    parser.add_argument("--map", help="GeoJSON FeatureCollection with one domain polygon and obstacle polygons")
    parser.add_argument("--model", choices=sorted(MODELS), default="car", help="Vehicle model")
    parser.add_argument("--objective", choices=[k.value for k in ObjectiveKind], default="time", help="Cost to minimize")
    parser.add_argument("--start", help='Start state "x,y[,psi]" (car) or "x,y[,zr,zi,u,v,r]" (vessel)')
    parser.add_argument("--goal", help="Goal state, same format as --start")
    parser.add_argument("--degree", type=int, help="Collocation degree per triangle (default 3)")
    parser.add_argument("--epsilon", type=float, help="Smoothing of absolute values in costs (default 1e-6)")
    parser.add_argument("--time-cap", type=float, help="Maximum duration of energy-optimal plans (default 1200)")
    parser.add_argument("--workers", type=int, help="Parallel search workers (default 1)")
    parser.add_argument("--prune-eps", type=float, help="Dominance pruning threshold, 0 disables (default 0)")
    parser.add_argument("--backend", choices=["ipm", "slsqp"], help="NLP solver backend (default ipm)")
    parser.add_argument("--out", default="tritraj-out", help="Output directory")
    parser.add_argument("--svg", action="store_true", help="Also render plan.svg")
    parser.add_argument("--trace", action="store_true", help="Also write search_trace.jsonl")
    parser.add_argument("--compare", action="store_true", help="Plan every objective and print the cross-metric table")
    parser.add_argument("--config", help="Extra TOML config file layered over the user config")
    parser.add_argument("--set", action="append", metavar="SECTION.KEY=VALUE", help="Update the user config and exit")
    return parser.parse_args(argv)


def parse_state_arg(text: str, model: DynamicsModel, what: str) -> np.ndarray:
    try:
        values = [float(v) for v in text.split(",")]
    except ValueError:
        raise InputError(f"{what} must be comma-separated numbers, got {text!r}") from None
    return model.parse_state(values)


def apply_overrides(config: dict, args: argparse.Namespace) -> dict:
    """Layer command-line flags over the loaded configuration."""
    flags = {
        ("planner", "degree"): args.degree,
        ("planner", "workers"): args.workers,
        ("planner", "prune_eps"): args.prune_eps,
        ("solver", "backend"): args.backend,
        ("objective", "epsilon"): args.epsilon,
        ("objective", "time_cap"): args.time_cap,
    }
    for (section, key), value in flags.items():
        if value is not None:
            config.setdefault(section, {})[key] = value
    return config


def make_objective(kind: str, config: dict) -> Objective:
    kind = ObjectiveKind(kind)
    section = config.get("objective", {})
    cap = float(section["time_cap"]) if kind is ObjectiveKind.ENERGY and "time_cap" in section else None
    return Objective(kind, epsilon=float(section.get("epsilon", 1e-6)), time_cap=cap)


async def _plan(t, graph, model, objective, x0, x_f, cfg: PlannerConfig) -> OptimalPlan:
    if cfg.workers > 1:
        return await parallel_plan_async(t, graph, model, objective, x0, x_f, cfg)
    return plan(t, graph, model, objective, x0, x_f, cfg)


def comparison_table(rows: dict[str, TrajectoryMetrics]) -> Table:
    table = Table(title="Cross-objective comparison")
    table.add_column("plan")
    columns = (("time_s", "Time [s]"), ("distance_m", "Distance [m]"), ("energy_kJ", "Energy [kJ]"))
    for _, header in columns:
        table.add_column(header, justify="right")
    best = {}
    for key, _ in columns:
        values = [m.as_dict()[key] for m in rows.values() if m.as_dict()[key] is not None]
        best[key] = min(values, default=None)
    for name, m in rows.items():
        cells = []
        for key, _ in columns:
            value = m.as_dict()[key]
            if value is None:
                cells.append("-")
            elif value == best[key]:
                cells.append(f"[bold]{value:.2f}[/bold]")
            else:
                cells.append(f"{value:.2f}")
        table.add_row(name, *cells)
    return table


async def run(args: argparse.Namespace) -> int:
    if args.set:
        for item in args.set:
            key, sep, value = item.partition("=")
            if not sep:
                raise InputError(f"--set expects SECTION.KEY=VALUE, got {item!r}")
            update_config(key.strip(), value.strip())
        return 0

    for flag in ("map", "start", "goal"):
        if getattr(args, flag) is None:
            raise InputError(f"--{flag} is required")

    config = apply_overrides(load_config(args.config), args)
    model = make_model(args.model)
    x0 = parse_state_arg(args.start, model, "start")
    x_f = parse_state_arg(args.goal, model, "goal")
    objective = make_objective(args.objective, config)
    objective.validate(model)
    cfg = PlannerConfig.from_config(config)
    samples = int(config.get("output", {}).get("samples_per_segment", 20))

    with console.status("[green][MAP][/green] Loading map", spinner="dots", spinner_style="white", speed=0.9):
        doc = load_map(args.map)
    console.print(pluralize_numbers(
        f"[green][MAP][/green] Loaded [dodger_blue1]{args.map}[/dodger_blue1] with [orange1]{len(doc.obstacles)}[/orange1] obstacle"
    ))

    with console.status("[green][CDT][/green] Triangulating", spinner="dots", spinner_style="white", speed=0.9):
        t = triangulate(doc.domain, doc.obstacles)
        graph = adjacency(t)
    console.print(pluralize_numbers(
        f"[green][CDT][/green] [orange1]{len(t.triangles)}[/orange1] triangle, "
        f"[orange1]{len(t.free_ids())}[/orange1] free, [orange1]{len(t.vertices)}[/orange1] vertex"
    ))

    with console.status(
        f"[green][SEARCH][/green] Planning {args.model} / {objective.kind.value} with "
        f"{pluralize_numbers(f'{cfg.workers} worker')}",
        spinner="dots",
        spinner_style="white",
        speed=0.9,
    ):
        result = await _plan(t, graph, model, objective, x0, x_f, cfg)
    stats = result.stats
    console.print(pluralize_numbers(
        f"[green][SEARCH][/green] Optimal value [orange1]{result.value:.6g}[/orange1] over "
        f"[orange1]{len(result.sequence)}[/orange1] triangle, [orange1]{stats.nodes_expanded}[/orange1] sequence refined, "
        f"[orange1]{stats.nodes_pruned}[/orange1] pruned in {stats.wall_time_s:.1f} s"
    ))
    audit_membership(result.result)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    m = metrics(result.spline, model, samples)
    rows = write_trajectory_csv(out / "trajectory.csv", result.spline, model, samples)
    write_metrics_json(out / "metrics.json", m, stats)
    write_curvature_csv(out / "curvature.csv", m)
    written = ["trajectory.csv", "metrics.json", "curvature.csv"]
    if args.trace:
        write_trace_jsonl(out / "search_trace.jsonl", result.trace)
        written.append("search_trace.jsonl")
    if args.svg:
        render_svg(doc, t, out / "plan.svg", result.spline, result.trace, result.sequence)
        written.append("plan.svg")
    console.print(pluralize_numbers(
        f"[green][EXPORT][/green] Wrote [orange1]{len(written)}[/orange1] file ({rows} trajectory rows) "
        f"to [dodger_blue1]{out}[/dodger_blue1]"
    ))

    if args.compare:
        await compare(t, graph, model, x0, x_f, config, cfg, samples, out, {objective.kind.value: m})
    return 0


async def compare(t, graph, model, x0, x_f, config: dict, cfg: PlannerConfig, samples: int, out: Path,
                  done: dict[str, TrajectoryMetrics]) -> dict[str, TrajectoryMetrics]:
    kinds = [k for k in ObjectiveKind if k is not ObjectiveKind.ENERGY or isinstance(model, VesselModel)]
    rows: dict[str, TrajectoryMetrics] = {}
    for kind in kinds:
        if kind.value in done:
            rows[kind.value] = done[kind.value]
            continue
        with console.status(f"[green][SEARCH][/green] Planning {kind.value}", spinner="dots", spinner_style="white", speed=0.9):
            result = await _plan(t, graph, model, make_objective(kind.value, config), x0, x_f, cfg)
        rows[kind.value] = metrics(result.spline, model, samples)
    console.print(comparison_table(rows))
    reference = REFERENCE if isinstance(model, VesselModel) else None
    if reference:
        console.print(
            f"[yellow][SEARCH][/yellow] Reference harbor crossing: {REFERENCE['time_s']} s, "
            f"{REFERENCE['distance_m']} m, {REFERENCE['energy_kJ']} kJ (different map, for orientation only)"
        )
    write_comparison_json(out / "comparison.json", rows, reference)
    return rows


def _tag(e: TritrajError) -> str:
    for cls, tag in _TAGS:
        if isinstance(e, cls):
            return tag
    return "INPUT"


async def main(argv: list[str] | None = None) -> int:
    try:
        args = parse_args(argv)
        return await run(args)
    except TritrajError as e:
        console.print(f"[red][{_tag(e)}][/red] {e}")
        return e.exit_code


if __name__ == "__main__":
    sys.exit(asyncio.run(main()))


# Synchronous entry point for setuptools console_script
def cli_main() -> None:
    """Console script entry point that runs the async main function."""
    sys.exit(asyncio.run(main()))
