"""
Free-time collocation transcription of a triangle corridor.

Every triangle of the corridor holds one polynomial segment. A segment's
block of decision variables is laid out as

    [X (d+1) x nx | U d x nu | dt]

with the position columns of X in the triangle's local frame p = C p' + d
and every other state component global. U is stored divided by the model's
control scale. The blocks are independent apart from the linking rows
(continuity, boundary conditions, time cap), which are linear.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import sparse

from tritraj.cdt import AdjacencyGraph, Triangulation
from tritraj.dynamics import DynamicsModel
from tritraj.errors import SequenceError, StateDimensionError
from tritraj.geometry import Triangle, contains, local_frame
from tritraj.nlp.problem import NLPProblem
from tritraj.objectives import Objective
from tritraj.transcription.collocation import CollocationScheme, collocation_scheme
from tritraj.transcription.spline import TrajectorySpline

DT_MIN = 1e-3
DT_MAX = 1e4
ENDPOINT_TOL = 1e-6

# local-frame row that corresponds to each triangle edge, keyed by vertex slots
_EDGE_ROW = {frozenset((1, 2)): 0, frozenset((0, 1)): 1, frozenset((2, 0)): 2}


@dataclass(frozen=True)
class Corridor:
    """A sequence of pairwise distinct, consecutively adjacent Free triangles."""

    ids: tuple[int, ...]
    triangles: tuple[Triangle, ...]
    vertex_ids: tuple[tuple[int, int, int], ...]
    shared_edges: tuple[tuple[int, int], ...]

    @classmethod
    def of(cls, triangulation: Triangulation, graph: AdjacencyGraph, sequence) -> "Corridor":
        ids = tuple(int(i) for i in sequence)
        if not ids:
            raise SequenceError("empty triangle sequence")
        if len(set(ids)) != len(ids):
            raise SequenceError(f"sequence {list(ids)} visits a triangle twice")
        for i in ids:
            if i not in graph.neighbours:
                raise SequenceError(f"triangle {i} is not a Free triangle")
        shared = []
        for a, b in zip(ids, ids[1:]):
            if not graph.adjacent(a, b):
                raise SequenceError(f"triangles {a} and {b} do not share an edge")
            shared.append(graph.shared_edge(a, b))
        return cls(
            ids,
            tuple(triangulation.triangle(i) for i in ids),
            tuple(triangulation.triangles[i] for i in ids),
            tuple(shared),
        )

    def extend(self, triangulation: Triangulation, graph: AdjacencyGraph, t: int) -> "Corridor":
        return Corridor.of(triangulation, graph, self.ids + (t,))

    def __len__(self) -> int:
        return len(self.ids)

    @property
    def last(self) -> int:
        return self.ids[-1]

    def edge_row(self, segment: int, edge: tuple[int, int]) -> int:
        slots = self.vertex_ids[segment]
        return _EDGE_ROW[frozenset((slots.index(edge[0]), slots.index(edge[1])))]

    def edge_midpoint(self, junction: int) -> np.ndarray:
        """Midpoint of the edge shared by segments junction-1 and junction."""
        tri = self.triangles[junction]
        slots = self.vertex_ids[junction]
        a, b = self.shared_edges[junction - 1]
        verts = tri.as_array()
        return 0.5 * (verts[slots.index(a)] + verts[slots.index(b)])

    def edge_points(self, junction: int) -> tuple[np.ndarray, np.ndarray]:
        tri = self.triangles[junction]
        slots = self.vertex_ids[junction]
        a, b = self.shared_edges[junction - 1]
        verts = tri.as_array()
        return verts[slots.index(a)], verts[slots.index(b)]


def _check_state(model: DynamicsModel, x, what: str) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape != (model.state_dim,):
        raise StateDimensionError(f"{what} needs {model.state_dim} components for the {model.name} model, got {x.size}")
    if np.isnan(x[list(model.position_indices)]).any():
        raise StateDimensionError(f"{what} must fix its position")
    return x


class Transcription(NLPProblem):
    def __init__(
        self,
        model: DynamicsModel,
        objective: Objective,
        corridor: Corridor,
        x0,
        x_f=None,
        degree: int = 3,
        dt_min: float = DT_MIN,
        dt_max: float = DT_MAX,
    ):
        objective.validate(model)
        self.model = model
        self.obj = objective
        self.corridor = corridor
        self.x0 = _check_state(model, x0, "start state")
        self.x_f = None if x_f is None else _check_state(model, x_f, "goal state")
        p0 = self.x0[list(model.position_indices)]
        if not contains(corridor.triangles[0], p0, ENDPOINT_TOL):
            raise SequenceError(f"start position {tuple(p0)} is outside triangle {corridor.ids[0]}")
        if self.x_f is not None:
            pf = self.x_f[list(model.position_indices)]
            if not contains(corridor.triangles[-1], pf, ENDPOINT_TOL):
                raise SequenceError(f"goal position {tuple(pf)} is outside triangle {corridor.last}")
        self.scheme: CollocationScheme = collocation_scheme(degree)
        self.degree = degree
        self.dt_min = dt_min
        self.dt_max = dt_max
        self.objective_scale = objective.scale
        self.nx = model.state_dim
        self.nu = model.control_dim
        self.S = len(corridor)
        self.block = (degree + 1) * self.nx + degree * self.nu + 1
        self.u_scale = model.control_scale()
        self.pos = np.array(model.position_indices)

        self.lift = []
        self.lift_inv = []
        self.offset = []
        for tri in corridor.triangles:
            frame = local_frame(tri)
            L = np.eye(self.nx)
            L[np.ix_(self.pos, self.pos)] = frame.C
            o = np.zeros(self.nx)
            o[self.pos] = frame.d.as_array()
            self.lift.append(L)
            self.lift_inv.append(np.linalg.inv(L))
            self.offset.append(o)
        self._layout()

    # --- layout -------------------------------------------------------------

    def x_index(self, segment: int, node: int, component: int) -> int:
        return segment * self.block + node * self.nx + component

    def u_index(self, segment: int, node: int, component: int) -> int:
        return segment * self.block + (self.degree + 1) * self.nx + node * self.nu + component

    def dt_index(self, segment: int) -> int:
        return segment * self.block + self.block - 1

    def _algebraic_nodes(self, segment: int) -> list[int]:
        if not self.model.algebraic_count:
            return []
        alg = list(self.model.algebraic_indices())
        nodes = list(range(1, self.degree + 1))
        if segment == 0 and np.isnan(self.x0[alg]).any():
            nodes.insert(0, 0)
        if segment == self.S - 1 and self.x_f is not None and not np.isnan(self.x_f[alg]).any():
            nodes.remove(self.degree)
        return nodes

    def _layout(self) -> None:
        d, nx = self.degree, self.nx
        rows, cols, cl, cu = [], [], [], []
        const_vals = []
        r = 0
        self.seg_rows = []
        self.alg_nodes = []
        na = self.model.algebraic_count
        alg_idx = list(self.model.algebraic_indices())
        # fixed pattern of the collocation rows over one block
        coll_r, coll_c = np.meshgrid(np.arange(d * nx), np.arange(self.block), indexing="ij")
        coll_r, coll_c = coll_r.ravel(), coll_c.ravel()
        for i in range(self.S):
            base = i * self.block
            start = r
            # collocation
            rows.append(r + coll_r)
            cols.append(base + coll_c)
            cl.append(np.zeros(d * nx))
            cu.append(np.zeros(d * nx))
            r += d * nx
            # membership, three rows per node
            mr, mc, mv = [], [], []
            mlo = np.full(3 * (d + 1), -np.inf)
            mhi = np.zeros(3 * (d + 1))
            for k in range(d + 1):
                q1, q2 = self.x_index(i, k, self.pos[0]), self.x_index(i, k, self.pos[1])
                mr += [r + 3 * k, r + 3 * k + 1, r + 3 * k + 2, r + 3 * k + 2]
                mc += [q1, q2, q2, q1]
                mv += [1.0, -1.0, 1.0, -1.0]
            if i > 0:
                mhi[0:3] = np.inf
            if i < self.S - 1:
                edge = self.corridor.edge_row(i, self.corridor.shared_edges[i])
                mlo[3 * d + edge] = 0.0
            rows.append(np.array(mr))
            cols.append(np.array(mc))
            const_vals.append(np.array(mv))
            cl.append(mlo)
            cu.append(mhi)
            r += 3 * (d + 1)
            # algebraic path constraints
            nodes = self._algebraic_nodes(i)
            self.alg_nodes.append(nodes)
            if nodes:
                ar, ac = [], []
                for n_i, k in enumerate(nodes):
                    for a in range(na):
                        for c in alg_idx:
                            ar.append(r + n_i * na + a)
                            ac.append(self.x_index(i, k, c))
                rows.append(np.array(ar))
                cols.append(np.array(ac))
                cl.append(np.zeros(len(nodes) * na))
                cu.append(np.zeros(len(nodes) * na))
                r += len(nodes) * na
            self.seg_rows.append((start, r))

        # continuity across each shared edge, in global coordinates
        link_r, link_c, link_v = [], [], []
        for i in range(1, self.S):
            Lp, Ln = self.lift[i - 1], self.lift[i]
            for c in range(nx):
                for c2 in range(nx):
                    if Lp[c, c2] != 0.0:
                        link_r.append(r + c)
                        link_c.append(self.x_index(i - 1, d, c2))
                        link_v.append(Lp[c, c2])
                    if Ln[c, c2] != 0.0:
                        link_r.append(r + c)
                        link_c.append(self.x_index(i, 0, c2))
                        link_v.append(-Ln[c, c2])
            cl.append(self.offset[i] - self.offset[i - 1])
            cu.append(self.offset[i] - self.offset[i - 1])
            r += nx
        # boundary conditions on the fixed components
        self.initial_components = np.flatnonzero(np.isfinite(self.x0))
        for c in self.initial_components:
            for c2 in range(nx):
                if self.lift[0][c, c2] != 0.0:
                    link_r.append(r)
                    link_c.append(self.x_index(0, 0, c2))
                    link_v.append(self.lift[0][c, c2])
            cl.append([self.x0[c] - self.offset[0][c]])
            cu.append([self.x0[c] - self.offset[0][c]])
            r += 1
        self.terminal_components = np.array([], dtype=int) if self.x_f is None else np.flatnonzero(np.isfinite(self.x_f))
        for c in self.terminal_components:
            for c2 in range(nx):
                if self.lift[-1][c, c2] != 0.0:
                    link_r.append(r)
                    link_c.append(self.x_index(self.S - 1, d, c2))
                    link_v.append(self.lift[-1][c, c2])
            cl.append([self.x_f[c] - self.offset[-1][c]])
            cu.append([self.x_f[c] - self.offset[-1][c]])
            r += 1
        self.time_cap_row = None
        if self.obj.uses_time_cap:
            self.time_cap_row = r
            for i in range(self.S):
                link_r.append(r)
                link_c.append(self.dt_index(i))
                link_v.append(1.0)
            cl.append([-np.inf])
            cu.append([self.obj.time_cap])
            r += 1
        rows.append(np.array(link_r, dtype=int))
        cols.append(np.array(link_c, dtype=int))
        self._link_vals = np.array(link_v, dtype=float)

        self._m = r
        self._rows = np.concatenate(rows).astype(int)
        self._cols = np.concatenate(cols).astype(int)
        self._cl = np.concatenate([np.asarray(v, dtype=float) for v in cl])
        self._cu = np.concatenate([np.asarray(v, dtype=float) for v in cu])
        self._member_vals = const_vals

    # --- NLPProblem -----------------------------------------------------------

    @property
    def n(self) -> int:
        return self.S * self.block

    @property
    def m(self) -> int:
        return self._m

    def bounds(self):
        xl, xu = self.model.state_bounds()
        ul, uh = self.model.control_bounds()
        d = self.degree
        seg_lo = np.concatenate([np.tile(np.where(np.isin(np.arange(self.nx), self.pos), -np.inf, xl), d + 1),
                                 np.tile(ul / self.u_scale, d), [self.dt_min]])
        seg_hi = np.concatenate([np.tile(np.where(np.isin(np.arange(self.nx), self.pos), np.inf, xu), d + 1),
                                 np.tile(uh / self.u_scale, d), [self.dt_max]])
        return np.tile(seg_lo, self.S), np.tile(seg_hi, self.S)

    def constraint_bounds(self):
        return self._cl, self._cu

    def blocks(self):
        return [np.arange(i * self.block, (i + 1) * self.block) for i in range(self.S)]

    def unpack(self, w) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Local node states (S, d+1, nx), physical controls (S, d, nu) and durations (S,)."""
        d, nx, nu = self.degree, self.nx, self.nu
        W = np.asarray(w, dtype=float).reshape(self.S, self.block)
        X = W[:, : (d + 1) * nx].reshape(self.S, d + 1, nx)
        U = W[:, (d + 1) * nx: (d + 1) * nx + d * nu].reshape(self.S, d, nu) * self.u_scale
        return X, U, W[:, -1]

    def pack(self, X, U, dt) -> np.ndarray:
        X = np.asarray(X, dtype=float).reshape(self.S, -1)
        U = (np.asarray(U, dtype=float) / self.u_scale).reshape(self.S, -1)
        return np.concatenate([X, U, np.asarray(dt, dtype=float).reshape(self.S, 1)], axis=1).ravel()

    def to_global(self, i: int, X_local: np.ndarray) -> np.ndarray:
        return X_local @ self.lift[i].T + self.offset[i]

    def to_local(self, i: int, X_global: np.ndarray) -> np.ndarray:
        return (X_global - self.offset[i]) @ self.lift_inv[i].T

    def global_states(self, w) -> np.ndarray:
        X, _, _ = self.unpack(w)
        return np.stack([self.to_global(i, X[i]) for i in range(self.S)])

    def objective(self, w) -> float:
        X, U, dt = self.unpack(w)
        b = self.scheme.b
        total = 0.0
        for i in range(self.S):
            Xg = self.to_global(i, X[i, 1:])
            total += dt[i] * float(b @ self.obj.cost(self.model, Xg, U[i]))
        return total

    def gradient(self, w) -> np.ndarray:
        X, U, dt = self.unpack(w)
        b = self.scheme.b
        d, nx = self.degree, self.nx
        g = np.zeros(self.n)
        for i in range(self.S):
            Xg = self.to_global(i, X[i, 1:])
            J = self.obj.cost(self.model, Xg, U[i])
            gx, gu = self.obj.cost_gradient(self.model, Xg, U[i])
            base = i * self.block
            gX = (dt[i] * b)[:, None] * (gx @ self.lift[i])
            g[base + nx: base + (d + 1) * nx] = gX.ravel()
            gU = (dt[i] * b)[:, None] * gu * self.u_scale
            g[base + (d + 1) * nx: base + (d + 1) * nx + d * self.nu] = gU.ravel()
            g[base + self.block - 1] = float(b @ J)
        return g

    def constraints(self, w) -> np.ndarray:
        X, U, dt = self.unpack(w)
        D = self.scheme.D
        out = []
        for i in range(self.S):
            Xg = self.to_global(i, X[i])
            F = self.model.rhs(Xg[1:], U[i]) @ self.lift_inv[i].T
            out.append((D @ X[i] - dt[i] * F).ravel())
            q1, q2 = X[i, :, self.pos[0]], X[i, :, self.pos[1]]
            out.append(np.stack([q1 - 1.0, -q2, q2 - q1], axis=1).ravel())
            nodes = self.alg_nodes[i]
            if nodes:
                g, _ = self.model.algebraic(Xg[nodes])
                out.append(g.ravel())
        G = self.global_states(w)
        for i in range(1, self.S):
            out.append(G[i - 1, -1] - G[i, 0] + self.offset[i] - self.offset[i - 1])
        if len(self.initial_components):
            out.append(G[0, 0, self.initial_components] - self.offset[0][self.initial_components])
        if len(self.terminal_components):
            out.append(G[-1, -1, self.terminal_components] - self.offset[-1][self.terminal_components])
        if self.time_cap_row is not None:
            out.append([float(dt.sum())])
        return np.concatenate([np.asarray(v, dtype=float).ravel() for v in out])

    def _collocation_jacobian(self, i: int, X: np.ndarray, U: np.ndarray, dt: float) -> np.ndarray:
        d, nx, nu = self.degree, self.nx, self.nu
        D = self.scheme.D
        L, Linv = self.lift[i], self.lift_inv[i]
        Xg = self.to_global(i, X)
        fx, fu = self.model.rhs_jacobian(Xg[1:], U)
        F = self.model.rhs(Xg[1:], U) @ Linv.T
        nodes = np.arange(d)
        XX = D[:, None, :, None] * np.eye(nx)[None, :, None, :]
        XX[nodes, :, nodes + 1, :] -= dt * (Linv @ fx @ L)
        UU = np.zeros((d, nx, d, nu))
        UU[nodes, :, nodes, :] = -dt * (Linv @ fu) * self.u_scale
        jac = np.concatenate([XX.reshape(d, nx, -1), UU.reshape(d, nx, -1), -F[..., None]], axis=2)
        return jac.reshape(-1)

    def jacobian(self, w) -> sparse.csr_matrix:
        X, U, dt = self.unpack(w)
        vals = []
        member = iter(self._member_vals)
        for i in range(self.S):
            vals.append(self._collocation_jacobian(i, X[i], U[i], dt[i]))
            vals.append(next(member))
            nodes = self.alg_nodes[i]
            if nodes:
                Xg = self.to_global(i, X[i, nodes])
                _, gx = self.model.algebraic(Xg)
                vals.append(gx[..., list(self.model.algebraic_indices())].ravel())
        vals.append(self._link_vals)
        data = np.concatenate(vals)
        return sparse.csr_matrix((data, (self._rows, self._cols)), shape=(self.m, self.n))

    def jacobian_structure(self):
        return self._rows, self._cols

    # --- trajectory -------------------------------------------------------------

    def spline(self, w, t0: float = 0.0) -> TrajectorySpline:
        _, U, dt = self.unpack(w)
        return TrajectorySpline.from_nodes(
            t0, self.scheme.tau, self.global_states(w), U, dt,
            self.model.state_names, self.model.control_names,
        )

    def endpoint(self, w) -> np.ndarray:
        return self.global_states(w)[-1, -1].copy()


def build(model: DynamicsModel, objective: Objective, corridor: Corridor, x0, x_f=None,
          degree: int = 3, dt_min: float = DT_MIN, dt_max: float = DT_MAX) -> Transcription:
    return Transcription(model, objective, corridor, x0, x_f, degree, dt_min, dt_max)


def _fill_nodes(problem: Transcription, i: int, a: np.ndarray, b: np.ndarray, heading: float,
                speed: float) -> tuple[np.ndarray, np.ndarray, float]:
    model = problem.model
    tau = problem.scheme.tau
    pts = a[None, :] + tau[:, None] * (b - a)[None, :]
    Xg = np.stack([model.guess_state(p, heading, speed) for p in pts])
    U = np.tile(model.guess_control(speed), (problem.degree, 1))
    length = float(np.hypot(*(b - a)))
    dt = max(length / speed, 10 * problem.dt_min) if speed > 0 else 10 * problem.dt_min
    return Xg, U, min(dt, problem.dt_max)


def _heading(a: np.ndarray, b: np.ndarray, fallback: float) -> float:
    delta = b - a
    if math.hypot(*delta) < 1e-12:
        return fallback
    return math.atan2(delta[1], delta[0])


def _target(problem: Transcription) -> np.ndarray:
    if problem.x_f is not None:
        return problem.x_f[problem.pos]
    return problem.corridor.triangles[-1].as_array().mean(axis=0)


def _apply_boundary(problem: Transcription, Xg: np.ndarray) -> None:
    """Overwrite the fixed components of x0 / x_f in global node states."""
    fixed0 = np.isfinite(problem.x0)
    Xg[0, 0, fixed0] = problem.x0[fixed0]
    if problem.x_f is not None:
        fixedf = np.isfinite(problem.x_f)
        Xg[-1, -1, fixedf] = problem.x_f[fixedf]


def initial_guess(problem: Transcription) -> np.ndarray:
    """
    Straight pieces through the shared-edge midpoints, x0 to x_f (or to the
    centroid of the last triangle), travelled at the model's nominal speed.
    """
    model = problem.model
    speed = model.nominal_speed
    waypoints = [problem.x0[problem.pos]]
    waypoints += [problem.corridor.edge_midpoint(j) for j in range(1, problem.S)]
    waypoints.append(_target(problem))
    fallback = model.heading_of(np.nan_to_num(problem.x0, nan=0.0)) if np.isfinite(problem.x0).all() else 0.0
    states, controls, durations = [], [], []
    for i in range(problem.S):
        a, b = waypoints[i], waypoints[i + 1]
        heading = _heading(a, b, fallback)
        fallback = heading
        Xg, U, dt = _fill_nodes(problem, i, a, b, heading, speed)
        states.append(Xg)
        controls.append(U)
        durations.append(dt)
    Xg = np.stack(states)
    _apply_boundary(problem, Xg)
    X = np.stack([problem.to_local(i, Xg[i]) for i in range(problem.S)])
    return problem.pack(X, np.stack(controls), durations)


def warm_guess(problem: Transcription, parent: Transcription, parent_w: np.ndarray) -> np.ndarray:
    """
    Reuse a solved prefix corridor: its segments are copied and the new
    segments run from the parent's endpoint, projected onto the next shared
    edge, towards x_f or the last centroid.
    """
    k = parent.S
    if problem.corridor.ids[:k] != parent.corridor.ids or problem.S <= k:
        return initial_guess(problem)
    model = problem.model
    Xp, Up, dtp = parent.unpack(parent_w)
    Gp = parent.global_states(parent_w)
    end = Gp[-1, -1].copy()
    ea, eb = problem.corridor.edge_points(k)
    edge = eb - ea
    s = float(np.clip((end[problem.pos] - ea) @ edge / (edge @ edge), 0.1, 0.9))
    crossing = ea + s * edge
    Gp[-1, -1, problem.pos] = crossing

    waypoints = [crossing] + [problem.corridor.edge_midpoint(j) for j in range(k + 1, problem.S)] + [_target(problem)]
    speed = max(model.nominal_speed, 1e-3)
    states = list(Gp)
    controls = list(Up)
    durations = list(dtp)
    fallback = model.heading_of(end)
    for j, i in enumerate(range(k, problem.S)):
        a, b = waypoints[j], waypoints[j + 1]
        Xg, U, dt = _fill_nodes(problem, i, a, b, _heading(a, b, fallback), speed)
        free = np.ones(problem.nx, dtype=bool)
        free[problem.pos] = False
        Xg[:, free] = end[free]
        states.append(Xg)
        controls.append(np.tile(Up[-1][-1], (problem.degree, 1)))
        durations.append(dt)
    Xg = np.stack(states)
    _apply_boundary(problem, Xg)
    X = np.stack([problem.to_local(i, Xg[i]) for i in range(problem.S)])
    return problem.pack(X, np.stack(controls), np.clip(durations, problem.dt_min, problem.dt_max))
