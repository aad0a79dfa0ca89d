"""
Best-first search over triangle sequences.

Every open node carries the free-endpoint value V of its sequence and the
lower bound V + h(x_N, x_f) on any completion of it. The search pops the
node with the smallest lower bound, refines one child per unvisited Free
neighbour, and stops as soon as no open node can beat the best complete
sequence found so far.
"""
from __future__ import annotations

import asyncio
import concurrent.futures
import heapq
import time
from dataclasses import asdict, dataclass, field
from enum import Enum
from typing import Callable

import numpy as np

from tritraj.cdt import AdjacencyGraph, Triangulation, locate
from tritraj.dynamics import DynamicsModel
from tritraj.errors import InputError, NoPathError, PlannerError
from tritraj.nlp import SolverOptions
from tritraj.objectives import Objective
from tritraj.transcription import Corridor, RefinementResult, TrajectorySpline, solve_Q, solve_V
from tritraj.transcription.builder import DT_MAX, DT_MIN

Event = dict
EventHook = Callable[[Event], None]


@dataclass(frozen=True)
class PlannerConfig:
    degree: int = 3
    prune_eps: float = 0.0
    prune_weight: np.ndarray | None = None
    workers: int = 1
    solver: SolverOptions = field(default_factory=SolverOptions)
    dt_min: float = DT_MIN
    dt_max: float = DT_MAX
    warm_start: bool = True
    record_open: bool = False

    def __post_init__(self):
        if self.degree < 1:
            raise InputError(f"collocation degree must be at least 1, got {self.degree}")
        if self.workers < 1:
            raise InputError(f"worker count must be at least 1, got {self.workers}")
        if self.prune_eps < 0:
            raise InputError(f"prune threshold must be non-negative, got {self.prune_eps}")
        if not 0 < self.dt_min < self.dt_max:
            raise InputError(f"segment duration bounds must satisfy 0 < dt_min < dt_max, got {self.dt_min}, {self.dt_max}")
        if self.prune_weight is not None:
            W = np.asarray(self.prune_weight, dtype=float)
            if W.ndim != 2 or W.shape[0] != W.shape[1] or not np.allclose(W, W.T):
                raise InputError("prune weight must be a symmetric square matrix")
            try:
                np.linalg.cholesky(W)
            except np.linalg.LinAlgError:
                raise InputError("prune weight must be positive definite") from None

    @classmethod
    def from_config(cls, config: dict, **overrides) -> "PlannerConfig":
        planner = config.get("planner", {})
        solver = config.get("solver", {})
        transcription = config.get("transcription", {})
        values = dict(
            degree=int(planner.get("degree", 3)),
            prune_eps=float(planner.get("prune_eps", 0.0)),
            workers=int(planner.get("workers", 1)),
            warm_start=bool(planner.get("warm_start", True)),
            solver=SolverOptions(
                feas_tol=float(solver.get("feas_tol", 1e-6)),
                opt_tol=float(solver.get("opt_tol", 1e-5)),
                max_iter=int(solver.get("max_iter", 500)),
                backend=str(solver.get("backend", "ipm")),
            ),
            dt_min=float(transcription.get("dt_min", DT_MIN)),
            dt_max=float(transcription.get("dt_max", DT_MAX)),
        )
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**values)

    def weight(self, model: DynamicsModel) -> np.ndarray:
        return model.pruning_weight() if self.prune_weight is None else np.asarray(self.prune_weight, dtype=float)


@dataclass(eq=False)
class SearchNode:
    sequence: tuple[int, ...]
    V: float
    endpoint: np.ndarray
    lower_bound: float
    parent: "SearchNode | None"
    result: RefinementResult
    corridor: Corridor
    closed: bool = False

    @property
    def last(self) -> int:
        return self.sequence[-1]

    @property
    def spline(self) -> TrajectorySpline | None:
        return self.result.spline


class PruneDecision(str, Enum):
    ADMIT = "admit"
    REJECT = "reject"


class OpenList:
    """
    Min-heap on (lower bound, sequence length, sequence). Removal is lazy.
    Every admitted node stays indexed by its last triangle so later nodes
    can be checked for dominance against it.
    """

    def __init__(self):
        self._heap: list[tuple[float, int, tuple[int, ...], SearchNode]] = []
        self._live = 0
        self.admitted: dict[int, list[SearchNode]] = {}

    def push(self, node: SearchNode) -> None:
        heapq.heappush(self._heap, (node.lower_bound, len(node.sequence), node.sequence, node))
        self.admitted.setdefault(node.last, []).append(node)
        self._live += 1

    def _drop_dead(self) -> None:
        while self._heap and self._heap[0][3].closed:
            heapq.heappop(self._heap)

    def pop(self) -> SearchNode | None:
        self._drop_dead()
        if not self._heap:
            return None
        node = heapq.heappop(self._heap)[3]
        node.closed = True
        self._live -= 1
        return node

    def remove(self, node: SearchNode) -> None:
        if not node.closed:
            node.closed = True
            self._live -= 1

    def min_bound(self) -> float:
        self._drop_dead()
        return self._heap[0][0] if self._heap else float("inf")

    def nodes(self) -> list[SearchNode]:
        return sorted((e[3] for e in self._heap if not e[3].closed), key=lambda n: (n.lower_bound, len(n.sequence), n.sequence))

    def ending_in(self, t: int) -> list[SearchNode]:
        return self.admitted.get(t, [])

    def __len__(self) -> int:
        return self._live


def _weighted_gap(a: np.ndarray, b: np.ndarray, W: np.ndarray) -> float:
    diff = np.nan_to_num(a - b)
    return float(diff @ W @ diff)


def prune(open_list: OpenList, new_node: SearchNode, W: np.ndarray, eps: float) -> PruneDecision:
    """
    Reject a node when an admitted node ends in the same triangle, no more
    than eps away in the W-norm, with no larger V. eps = 0 leaves only exact
    endpoint matches.
    """
    for other in open_list.ending_in(new_node.last):
        if other is new_node:
            continue
        if other.V <= new_node.V and _weighted_gap(other.endpoint, new_node.endpoint, W) <= eps:
            return PruneDecision.REJECT
    return PruneDecision.ADMIT


@dataclass
class SearchStats:
    nodes_expanded: int = 0
    nodes_pruned: int = 0
    solver_calls: int = 0
    infeasible: int = 0
    wall_time_s: float = 0.0

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass
class OptimalPlan:
    sequence: tuple[int, ...]
    value: float
    result: RefinementResult
    stats: SearchStats
    trace: list[Event] = field(default_factory=list)
    completions: list[tuple[tuple[int, ...], float]] = field(default_factory=list)
    lower_bounds: dict[tuple[int, ...], float] = field(default_factory=dict)
    open_nodes: list[SearchNode] = field(default_factory=list)

    @property
    def spline(self) -> TrajectorySpline:
        return self.result.spline


@dataclass
class Expansion:
    """Refinements of one node's children, computed without touching shared search state."""

    node: SearchNode
    children: list[SearchNode] = field(default_factory=list)
    completions: list[RefinementResult] = field(default_factory=list)
    failures: list[RefinementResult] = field(default_factory=list)


class Planner:
    def __init__(self, triangulation: Triangulation, graph: AdjacencyGraph, model: DynamicsModel,
                 objective: Objective, x0, x_f, cfg: PlannerConfig | None = None,
                 on_event: EventHook | None = None):
        objective.validate(model)
        self.t = triangulation
        self.graph = graph
        self.model = model
        self.objective = objective
        self.x0 = np.asarray(x0, dtype=float)
        self.x_f = np.asarray(x_f, dtype=float)
        self.cfg = cfg or PlannerConfig()
        self.on_event = on_event
        self.start = locate(triangulation, model.position_of(self.x0), "start")
        self.goal = locate(triangulation, model.position_of(self.x_f), "goal")
        self.W = self.cfg.weight(model)
        self.open = OpenList()
        self.stats = SearchStats()
        self.trace: list[Event] = []
        self.incumbent: RefinementResult | None = None
        self.completions: list[tuple[tuple[int, ...], float]] = []
        self.lower_bounds: dict[tuple[int, ...], float] = {}
        self.in_flight: list[SearchNode] = []
        self._started = time.perf_counter()

    # --- events -------------------------------------------------------------

    def emit(self, event: str, sequence=(), V=None, lower_bound=None, Q=None, **extra) -> None:
        record = {
            "event": event,
            "sequence": list(sequence),
            "V": None if V is None else float(V),
            "lower_bound": None if lower_bound is None else float(lower_bound),
            "Q": None if Q is None else float(Q),
            "open": len(self.open),
        }
        record.update(extra)
        self.trace.append(record)
        if self.on_event is not None:
            self.on_event(record)

    # --- refinement -----------------------------------------------------------

    def _solve_V(self, corridor: Corridor, warm: RefinementResult | None) -> RefinementResult:
        cfg = self.cfg
        return solve_V(self.model, self.objective, corridor, self.x0, cfg.degree,
                       warm if cfg.warm_start else None, cfg.solver, (cfg.dt_min, cfg.dt_max))

    def _solve_Q(self, corridor: Corridor) -> RefinementResult:
        cfg = self.cfg
        return solve_Q(self.model, self.objective, corridor, self.x0, self.x_f, cfg.degree,
                       None, cfg.solver, (cfg.dt_min, cfg.dt_max))

    def _node(self, result: RefinementResult, corridor: Corridor, parent: SearchNode | None) -> SearchNode:
        h = self.objective.heuristic(self.model, result.endpoint, self.x_f)
        return SearchNode(corridor.ids, result.value, result.endpoint, result.value + h, parent, result, corridor)

    def expand(self, node: SearchNode) -> Expansion:
        out = Expansion(node)
        for t in self.graph.neighbours[node.last]:
            if t in node.sequence:
                continue
            corridor = node.corridor.extend(self.t, self.graph, t)
            if t == self.goal:
                out.completions.append(self._solve_Q(corridor))
                continue
            result = self._solve_V(corridor, node.result)
            if result.ok:
                out.children.append(self._node(result, corridor, node))
            else:
                out.failures.append(result)
        return out

    # --- shared state -----------------------------------------------------------

    def _admit(self, node: SearchNode) -> None:
        self.lower_bounds[node.sequence] = node.lower_bound
        self.emit("solved", node.sequence, V=node.V, lower_bound=node.lower_bound)
        if self.cfg.prune_eps > 0:
            if prune(self.open, node, self.W, self.cfg.prune_eps) is PruneDecision.REJECT:
                self.stats.nodes_pruned += 1
                self.emit("pruned", node.sequence, V=node.V, lower_bound=node.lower_bound)
                return
            for other in self.open.ending_in(node.last):
                if other.closed or other is node:
                    continue
                if node.V <= other.V and _weighted_gap(node.endpoint, other.endpoint, self.W) <= self.cfg.prune_eps:
                    self.open.remove(other)
                    self.stats.nodes_pruned += 1
                    self.emit("pruned", other.sequence, V=other.V, lower_bound=other.lower_bound)
        self.open.push(node)

    def _record_failure(self, result: RefinementResult) -> None:
        self.stats.infeasible += 1
        self.emit("infeasible", result.sequence, status=result.status.value)

    def _offer(self, result: RefinementResult) -> None:
        self.completions.append((result.sequence, result.value))
        self.emit("solved", result.sequence, Q=result.value)
        if self.incumbent is None or result.value < self.incumbent.value:
            self.incumbent = result
            self.emit("incumbent", result.sequence, Q=result.value)

    def integrate(self, expansion: Expansion) -> None:
        refined = len(expansion.children) + len(expansion.completions) + len(expansion.failures)
        self.stats.nodes_expanded += refined
        self.stats.solver_calls += refined
        for result in expansion.failures:
            self._record_failure(result)
        for result in expansion.completions:
            if result.ok:
                self._offer(result)
            else:
                self._record_failure(result)
        for child in expansion.children:
            self._admit(child)

    def should_stop(self) -> bool:
        return self.incumbent is not None and self.open.min_bound() >= self.incumbent.value

    def pop(self) -> SearchNode | None:
        extra = {}
        if self.cfg.record_open:
            extra["open_sequences"] = [list(n.sequence) for n in self.open.nodes() + self.in_flight]
        node = self.open.pop()
        if node is not None:
            self.emit("popped", node.sequence, V=node.V, lower_bound=node.lower_bound, **extra)
        return node

    # --- driver -----------------------------------------------------------------

    def seed(self) -> OptimalPlan | None:
        """Refine the start triangle; returns the finished plan when start and goal share it."""
        corridor = Corridor.of(self.t, self.graph, [self.start])
        self.stats.nodes_expanded += 1
        self.stats.solver_calls += 1
        if self.start == self.goal:
            result = self._solve_Q(corridor)
            if not result.ok:
                self._record_failure(result)
                raise NoPathError(f"no feasible trajectory inside triangle {self.start}")
            self._offer(result)
            return self.finish()
        result = self._solve_V(corridor, None)
        if not result.ok:
            self._record_failure(result)
            raise NoPathError(f"no feasible trajectory leaves the start triangle {self.start}")
        root = self._node(result, corridor, None)
        self.lower_bounds[root.sequence] = root.lower_bound
        self.emit("solved", root.sequence, V=root.V, lower_bound=root.lower_bound)
        self.open.push(root)
        return None

    def finish(self) -> OptimalPlan:
        self.stats.wall_time_s = time.perf_counter() - self._started
        if self.incumbent is None:
            raise NoPathError("no feasible triangle sequence reaches the goal")
        self.emit("terminated", self.incumbent.sequence, lower_bound=self.open.min_bound(), Q=self.incumbent.value)
        return OptimalPlan(
            sequence=self.incumbent.sequence,
            value=self.incumbent.value,
            result=self.incumbent,
            stats=self.stats,
            trace=self.trace,
            completions=self.completions,
            lower_bounds=self.lower_bounds,
            open_nodes=self.open.nodes(),
        )

    def run(self) -> OptimalPlan:
        done = self.seed()
        if done is not None:
            return done
        while len(self.open) and not self.should_stop():
            node = self.pop()
            self.integrate(self.expand(node))
        return self.finish()

    async def run_async(self) -> OptimalPlan:
        """
        Coordinator for worker threads. Only this coroutine touches the open
        list and the incumbent; workers run `expand`. A node handed to a
        worker still counts as open for the stopping test, so the search only
        ends once nothing is in flight.
        """
        done = self.seed()
        if done is not None:
            return done
        loop = asyncio.get_running_loop()
        pending: dict[asyncio.Future, SearchNode] = {}
        with concurrent.futures.ThreadPoolExecutor(max_workers=self.cfg.workers) as executor:
            while True:
                while len(pending) < self.cfg.workers and len(self.open) and not self.should_stop():
                    node = self.pop()
                    self.in_flight.append(node)
                    future = loop.run_in_executor(executor, self.expand, node)
                    pending[future] = node
                if not pending:
                    break
                finished, _ = await asyncio.wait(pending, return_when=asyncio.FIRST_COMPLETED)
                for future in sorted(finished, key=lambda f: pending[f].sequence):
                    node = pending.pop(future)
                    self.in_flight.remove(node)
                    try:
                        expansion = future.result()
                    except Exception as e:
                        for other in pending:
                            other.cancel()
                        raise PlannerError(f"worker failed while expanding {list(node.sequence)}: {e}") from e
                    self.integrate(expansion)
        return self.finish()


def expand(planner: Planner, node: SearchNode) -> list[SearchNode]:
    """Children of `node` after refinement; goal-reaching children are offered as incumbents instead."""
    expansion = planner.expand(node)
    planner.integrate(expansion)
    return expansion.children


def plan(triangulation: Triangulation, graph: AdjacencyGraph, model: DynamicsModel, objective: Objective,
         x0, x_f, cfg: PlannerConfig | None = None, on_event: EventHook | None = None) -> OptimalPlan:
    return Planner(triangulation, graph, model, objective, x0, x_f, cfg, on_event).run()


async def parallel_plan_async(triangulation: Triangulation, graph: AdjacencyGraph, model: DynamicsModel,
                              objective: Objective, x0, x_f, cfg: PlannerConfig | None = None,
                              on_event: EventHook | None = None) -> OptimalPlan:
    return await Planner(triangulation, graph, model, objective, x0, x_f, cfg, on_event).run_async()


def parallel_plan(triangulation: Triangulation, graph: AdjacencyGraph, model: DynamicsModel, objective: Objective,
                  x0, x_f, cfg: PlannerConfig | None = None, on_event: EventHook | None = None) -> OptimalPlan:
    """
    Synchronous entry point for the threaded search. Works from inside a
    running event loop too, by running the coordinator on a helper thread.
    """
    coro = parallel_plan_async(triangulation, graph, model, objective, x0, x_f, cfg, on_event)
    try:
        asyncio.get_running_loop()
    except RuntimeError:
        return asyncio.run(coro)
    with concurrent.futures.ThreadPoolExecutor(max_workers=1) as executor:
        return executor.submit(asyncio.run, coro).result()
