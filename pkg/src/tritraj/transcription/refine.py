from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from rich.console import Console

from tritraj.dynamics import DynamicsModel
from tritraj.geometry import halfspaces_of
from tritraj.nlp import SolveReport, SolverOptions, Status, solve
from tritraj.objectives import Objective
from tritraj.transcription.builder import DT_MAX, DT_MIN, Corridor, Transcription, initial_guess, warm_guess
from tritraj.transcription.spline import TrajectorySpline, sample

console = Console(color_system="truecolor")

AUDIT_TOL = 1e-6


@dataclass
class RefinementResult:
    value: float
    spline: TrajectorySpline | None
    endpoint: np.ndarray | None
    status: Status
    report: SolveReport
    problem: Transcription

    @property
    def ok(self) -> bool:
        return self.status is Status.OPTIMAL

    @property
    def sequence(self) -> tuple[int, ...]:
        return self.problem.corridor.ids

    @property
    def w(self) -> np.ndarray:
        return self.report.w


def _refine(problem: Transcription, guess: np.ndarray, options: SolverOptions | None) -> RefinementResult:
    report = solve(problem, guess, options)
    if report.status is Status.OPTIMAL:
        return RefinementResult(
            value=float(report.objective),
            spline=problem.spline(report.w),
            endpoint=problem.endpoint(report.w),
            status=report.status,
            report=report,
            problem=problem,
        )
    return RefinementResult(float("inf"), None, None, report.status, report, problem)


def solve_V(
    model: DynamicsModel,
    objective: Objective,
    corridor: Corridor,
    x0,
    degree: int = 3,
    warm: RefinementResult | None = None,
    options: SolverOptions | None = None,
    dt_bounds: tuple[float, float] = (DT_MIN, DT_MAX),
) -> RefinementResult:
    """Cheapest trajectory through the corridor with the endpoint left free."""
    problem = Transcription(model, objective, corridor, x0, None, degree, *dt_bounds)
    if warm is not None and warm.ok and warm.problem.degree == degree:
        guess = warm_guess(problem, warm.problem, warm.w)
    else:
        guess = initial_guess(problem)
    return _refine(problem, guess, options)


def solve_Q(
    model: DynamicsModel,
    objective: Objective,
    corridor: Corridor,
    x0,
    x_f,
    degree: int = 3,
    warm: RefinementResult | None = None,
    options: SolverOptions | None = None,
    dt_bounds: tuple[float, float] = (DT_MIN, DT_MAX),
) -> RefinementResult:
    """Cheapest trajectory through the corridor that ends exactly at x_f."""
    problem = Transcription(model, objective, corridor, x0, x_f, degree, *dt_bounds)
    if warm is not None and warm.ok and warm.problem.degree == degree:
        guess = warm_guess(problem, warm.problem, warm.w)
    else:
        guess = initial_guess(problem)
    return _refine(problem, guess, options)


def audit_membership(result: RefinementResult, samples: int = 50, warn: bool = True) -> float:
    """
    Largest half-space violation of densely sampled positions against the
    triangle each segment belongs to. Collocation only enforces membership
    at the nodes, so small excursions in between are possible.
    """
    if result.spline is None:
        return float("inf")
    problem = result.problem
    worst = 0.0
    for s in sample(result.spline, samples):
        hs = halfspaces_of(problem.corridor.triangles[s.segment])
        excess = float(np.max(hs.evaluate(s.state[problem.pos]) / np.linalg.norm(hs.A, axis=1)))
        worst = max(worst, excess)
    if warn and worst > AUDIT_TOL:
        console.print(
            f"[yellow][REFINE][/yellow] trajectory leaves its corridor by up to {worst:.3g} m between collocation nodes"
        )
    return worst
