"""
Ground truth for the planner: closed-form Dubins paths for the car in free
space and brute-force enumeration of every simple triangle sequence.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterator

import numpy as np

from tritraj.cdt import AdjacencyGraph, Triangulation, locate
from tritraj.dynamics import DynamicsModel
from tritraj.errors import NoPathError
from tritraj.objectives import Objective
from tritraj.search import PlannerConfig
from tritraj.transcription import Corridor, solve_Q


class DubinsWord(str, Enum):
    LSL = "LSL"
    LSR = "LSR"
    RSL = "RSL"
    RSR = "RSR"
    RLR = "RLR"
    LRL = "LRL"


def _mod2pi(theta: float) -> float:
    return theta - 2.0 * math.pi * math.floor(theta / (2.0 * math.pi))


@dataclass(frozen=True)
class DubinsQuery:
    start: tuple[float, float, float]
    goal: tuple[float, float, float]
    rho: float = 1.0

    def __post_init__(self):
        if not self.rho > 0:
            raise ValueError(f"turn radius must be positive, got {self.rho}")


@dataclass(frozen=True)
class DubinsPath:
    word: DubinsWord
    params: tuple[float, float, float]
    rho: float
    start: tuple[float, float, float]

    @property
    def length(self) -> float:
        return sum(self.params) * self.rho

    def sample(self, s: float) -> tuple[float, float, float]:
        """Pose after travelling arc length s along the path."""
        s = min(max(s, 0.0), self.length) / self.rho
        x, y, psi = 0.0, 0.0, self.start[2]
        for kind, seg in zip(self.word.value, self.params):
            step = min(s, seg)
            x, y, psi = _advance(x, y, psi, kind, step)
            s -= step
            if s <= 0:
                break
        return self.start[0] + x * self.rho, self.start[1] + y * self.rho, psi


def _advance(x: float, y: float, psi: float, kind: str, t: float) -> tuple[float, float, float]:
    if kind == "L":
        return x + math.sin(psi + t) - math.sin(psi), y - math.cos(psi + t) + math.cos(psi), psi + t
    if kind == "R":
        return x - math.sin(psi - t) + math.sin(psi), y + math.cos(psi - t) - math.cos(psi), psi - t
    return x + math.cos(psi) * t, y + math.sin(psi) * t, psi


# Per-word segment lengths in the normalized frame (start at the origin,
# unit turn radius, goal on the positive x axis at distance d).

def _lsl(alpha, beta, d):
    sa, sb, ca, cb = math.sin(alpha), math.sin(beta), math.cos(alpha), math.cos(beta)
    p_sq = 2 + d * d - 2 * math.cos(alpha - beta) + 2 * d * (sa - sb)
    if p_sq < 0:
        return None
    tmp = math.atan2(cb - ca, d + sa - sb)
    return _mod2pi(-alpha + tmp), math.sqrt(p_sq), _mod2pi(beta - tmp)


def _rsr(alpha, beta, d):
    sa, sb, ca, cb = math.sin(alpha), math.sin(beta), math.cos(alpha), math.cos(beta)
    p_sq = 2 + d * d - 2 * math.cos(alpha - beta) + 2 * d * (sb - sa)
    if p_sq < 0:
        return None
    tmp = math.atan2(ca - cb, d - sa + sb)
    return _mod2pi(alpha - tmp), math.sqrt(p_sq), _mod2pi(-beta + tmp)


def _lsr(alpha, beta, d):
    sa, sb, ca, cb = math.sin(alpha), math.sin(beta), math.cos(alpha), math.cos(beta)
    p_sq = -2 + d * d + 2 * math.cos(alpha - beta) + 2 * d * (sa + sb)
    if p_sq < 0:
        return None
    p = math.sqrt(p_sq)
    tmp = math.atan2(-ca - cb, d + sa + sb) - math.atan2(-2.0, p)
    return _mod2pi(-alpha + tmp), p, _mod2pi(-_mod2pi(beta) + tmp)


def _rsl(alpha, beta, d):
    sa, sb, ca, cb = math.sin(alpha), math.sin(beta), math.cos(alpha), math.cos(beta)
    p_sq = d * d - 2 + 2 * math.cos(alpha - beta) - 2 * d * (sa + sb)
    if p_sq < 0:
        return None
    p = math.sqrt(p_sq)
    tmp = math.atan2(ca + cb, d - sa - sb) - math.atan2(2.0, p)
    return _mod2pi(alpha - tmp), p, _mod2pi(beta - tmp)


def _rlr(alpha, beta, d):
    sa, sb, ca, cb = math.sin(alpha), math.sin(beta), math.cos(alpha), math.cos(beta)
    c = (6.0 - d * d + 2 * math.cos(alpha - beta) + 2 * d * (sa - sb)) / 8.0
    if abs(c) > 1:
        return None
    p = _mod2pi(2 * math.pi - math.acos(c))
    t = _mod2pi(alpha - math.atan2(ca - cb, d - sa + sb) + _mod2pi(p / 2.0))
    return t, p, _mod2pi(alpha - beta - t + _mod2pi(p))


def _lrl(alpha, beta, d):
    sa, sb, ca, cb = math.sin(alpha), math.sin(beta), math.cos(alpha), math.cos(beta)
    c = (6.0 - d * d + 2 * math.cos(alpha - beta) + 2 * d * (sb - sa)) / 8.0
    if abs(c) > 1:
        return None
    p = _mod2pi(2 * math.pi - math.acos(c))
    t = _mod2pi(-alpha - math.atan2(ca - cb, d + sa - sb) + p / 2.0)
    return t, p, _mod2pi(_mod2pi(beta) - alpha - t + _mod2pi(p))


_WORDS = {
    DubinsWord.LSL: _lsl,
    DubinsWord.LSR: _lsr,
    DubinsWord.RSL: _rsl,
    DubinsWord.RSR: _rsr,
    DubinsWord.RLR: _rlr,
    DubinsWord.LRL: _lrl,
}


def dubins_candidates(q: DubinsQuery) -> list[DubinsPath]:
    """Every admissible word for the query, unsorted."""
    dx, dy = q.goal[0] - q.start[0], q.goal[1] - q.start[1]
    d = math.hypot(dx, dy) / q.rho
    theta = _mod2pi(math.atan2(dy, dx)) if d > 0 else 0.0
    alpha = _mod2pi(q.start[2] - theta)
    beta = _mod2pi(q.goal[2] - theta)
    out = []
    for word, solver in _WORDS.items():
        params = solver(alpha, beta, d)
        if params is not None:
            out.append(DubinsPath(word, tuple(float(p) for p in params), q.rho, tuple(q.start)))
    return out


def dubins_shortest(q: DubinsQuery) -> DubinsPath:
    return min(dubins_candidates(q), key=lambda p: p.length)


@dataclass
class EnumerationResult:
    sequence: tuple[int, ...]
    value: float
    evaluated: list[tuple[tuple[int, ...], float]] = field(default_factory=list)


def simple_paths(graph: AdjacencyGraph, start: int, goal: int, max_len: int,
                 prefix: tuple[int, ...] = ()) -> Iterator[tuple[int, ...]]:
    """
    Depth-first walk over simple paths of at most max_len triangles that end
    the first time they reach `goal`. A non-empty prefix must start at
    `start`; only its extensions are produced.
    """
    path = tuple(prefix) or (start,)
    if path[0] != start:
        return
    stack = [path]
    while stack:
        path = stack.pop()
        if path[-1] == goal:
            yield path
            continue
        if len(path) >= max_len:
            continue
        for t in reversed(graph.neighbours[path[-1]]):
            if t not in path:
                stack.append(path + (t,))


def count_simple_paths(graph: AdjacencyGraph, start: int, goal: int, max_len: int) -> int:
    """Number of simple paths from start to goal, counted by plain recursion."""

    def walk(node: int, seen: frozenset[int]) -> int:
        if node == goal:
            return 1
        if len(seen) >= max_len:
            return 0
        return sum(walk(t, seen | {t}) for t in graph.neighbours[node] if t not in seen)

    return walk(start, frozenset((start,)))


def enumerate_optimal(triangulation: Triangulation, graph: AdjacencyGraph, model: DynamicsModel,
                      objective: Objective, x0, x_f, max_len: int, cfg: PlannerConfig | None = None,
                      prefix: tuple[int, ...] = ()) -> EnumerationResult:
    """Solve the fixed-endpoint problem on every simple sequence to the goal and keep the cheapest."""
    cfg = cfg or PlannerConfig()
    x0 = np.asarray(x0, dtype=float)
    x_f = np.asarray(x_f, dtype=float)
    start = locate(triangulation, model.position_of(x0), "start")
    goal = locate(triangulation, model.position_of(x_f), "goal")
    best: EnumerationResult | None = None
    evaluated = []
    for sequence in simple_paths(graph, start, goal, max_len, prefix):
        corridor = Corridor.of(triangulation, graph, sequence)
        result = solve_Q(model, objective, corridor, x0, x_f, cfg.degree, None, cfg.solver, (cfg.dt_min, cfg.dt_max))
        if not result.ok:
            continue
        evaluated.append((sequence, result.value))
        if best is None or result.value < best.value:
            best = EnumerationResult(sequence, result.value)
    if best is None:
        raise NoPathError("no feasible triangle sequence reaches the goal")
    best.evaluated = evaluated
    return best
