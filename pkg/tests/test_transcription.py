from collections import deque

import numpy as np
import pytest
from shapely.geometry import Point
from shapely.geometry import Polygon as ShapelyPolygon

from tritraj.cdt import locate
from tritraj.dynamics import CarModel, VesselModel
from tritraj.errors import SequenceError, StateDimensionError
from tritraj.nlp import check_derivatives
from tritraj.objectives import Objective
from tritraj.transcription import (
    Corridor,
    Transcription,
    TrajectorySpline,
    audit_membership,
    collocation_scheme,
    initial_guess,
    sample,
    solve_Q,
    solve_V,
    warm_guess,
)
from tritraj.transcription.collocation import radau_points


def test_radau_points():
    assert radau_points(1) == pytest.approx([1.0])
    assert radau_points(3) == pytest.approx([0.155051025721682, 0.644948974278318, 1.0])
    with pytest.raises(ValueError):
        radau_points(0)


@pytest.mark.parametrize("degree", [1, 2, 3, 5])
def test_differentiation_and_quadrature_are_exact(degree):
    s = collocation_scheme(degree)
    for k in range(degree + 1):
        expected = k * s.collocation_points ** (k - 1) if k else np.zeros(degree)
        assert s.D @ s.tau ** k == pytest.approx(expected, abs=1e-10)
    for k in range(2 * degree - 1):
        assert s.b @ s.collocation_points ** k == pytest.approx(1.0 / (k + 1), abs=1e-12)


def test_scheme_arrays_are_read_only():
    s = collocation_scheme(3)
    with pytest.raises(ValueError):
        s.tau[0] = 1.0


def test_spline_interpolates_nodes():
    tau = collocation_scheme(3).tau
    states = np.stack([np.column_stack([tau, tau ** 2, np.ones_like(tau)]),
                       np.column_stack([1 + tau, 1 + 2 * tau, np.ones_like(tau)])])
    controls = np.zeros((2, 3, 1))
    spline = TrajectorySpline.from_nodes(0.0, tau, states, controls, np.array([2.0, 1.0]))
    assert spline.duration == pytest.approx(3.0)
    assert spline.state_at(1.0) == pytest.approx([0.5, 0.25, 1.0])
    assert spline.end == pytest.approx([2.0, 3.0, 1.0])
    # d/dt of tau^2 with tau = t / 2
    assert spline.segments[0].state_derivative(0.5)[1] == pytest.approx(0.5)
    samples = sample(spline, 5)
    assert len(samples) == 2 * 4 + 1
    assert all(b.t > a.t for a, b in zip(samples, samples[1:]))
    with pytest.raises(ValueError):
        sample(spline, 1)


def ring_corridor(ring, length=2):
    _, t, graph = ring
    start = locate(t, (3.0, 1.0))
    seq = [start]
    while len(seq) < length:
        seq.append(next(n for n in graph.neighbours[seq[-1]] if n not in seq))
    return t, graph, Corridor.of(t, graph, seq)


def test_corridor_validation(ring):
    _, t, graph = ring
    start = locate(t, (3.0, 1.0))
    with pytest.raises(SequenceError):
        Corridor.of(t, graph, [])
    with pytest.raises(SequenceError):
        Corridor.of(t, graph, [start, start])
    far = next(i for i in graph.nodes if i != start and not graph.adjacent(i, start))
    with pytest.raises(SequenceError):
        Corridor.of(t, graph, [start, far])
    blocked = next(i for i in range(len(t.triangles)) if i not in graph.neighbours)
    with pytest.raises(SequenceError):
        Corridor.of(t, graph, [blocked])


def test_start_outside_first_triangle(ring, car):
    _, _, corridor = ring_corridor(ring)
    with pytest.raises(SequenceError):
        Transcription(car, Objective("time"), corridor, [11.0, 11.0, 0.0])
    with pytest.raises(StateDimensionError):
        Transcription(car, Objective("time"), corridor, [3.0, 1.0])


@pytest.mark.parametrize("model,objective,x0", [
    (CarModel(), Objective("time"), [3.0, 1.0, 0.3]),
    (CarModel(), Objective("distance"), [3.0, 1.0, np.nan]),
    (VesselModel(), Objective("time"), [3.0, 1.0, 1.0, 0.0, 0.2, 0.0, 0.0]),
    (VesselModel(), Objective("distance"), [3.0, 1.0, np.nan, np.nan, 0.0, 0.0, 0.0]),
    (VesselModel(), Objective("energy", epsilon=1.0), [3.0, 1.0, 1.0, 0.0, 0.0, 0.0, 0.0]),
])
def test_derivatives_match_differences(ring, model, objective, x0):
    t, graph, corridor = ring_corridor(ring, 3)
    goal = t.triangle(corridor.last).centroid
    x_f = model.parse_state([goal.x, goal.y])
    rng = np.random.default_rng(3)
    for x_end in (None, x_f):
        p = Transcription(model, objective, corridor, np.array(x0), x_end)
        w0 = initial_guess(p)
        assert w0.size == p.n
        rows, cols = p.jacobian_structure()
        assert p.jacobian(w0).shape == (p.m, p.n)
        for _ in range(2):
            w = w0 + 0.05 * rng.standard_normal(p.n) * np.maximum(np.abs(w0), 1.0)
            lb, _ = p.bounds()
            w = np.maximum(w, np.where(np.isfinite(lb), lb + 1e-3, -np.inf))
            assert check_derivatives(p, w) <= 1e-5


def test_free_endpoint_value_is_small_in_one_triangle(ring, car):
    t, graph, _ = ring_corridor(ring)
    corridor = Corridor.of(t, graph, [locate(t, (3.0, 1.0))])
    result = solve_V(car, Objective("time"), corridor, [3.0, 1.0, 0.0])
    assert result.ok
    assert 0.0 <= result.value <= 1e-2


def test_fixed_endpoint_dominates_free_endpoint(ring, car):
    t, graph, corridor = ring_corridor(ring, 2)
    goal = t.triangle(corridor.last).centroid
    x0 = [3.0, 1.0, np.nan]
    V = solve_V(car, Objective("distance"), corridor, x0)
    Q = solve_Q(car, Objective("distance"), corridor, x0, [goal.x, goal.y, np.nan])
    assert V.ok and Q.ok
    assert Q.value >= V.value - 1e-6 * (1 + abs(V.value))
    straight = np.hypot(goal.x - 3.0, goal.y - 1.0)
    assert Q.value >= straight - 1e-6
    assert Q.spline.end[:2] == pytest.approx([goal.x, goal.y], abs=1e-5)
    assert 0.0 <= audit_membership(Q, warn=False) < 0.1


def test_warm_guess_reuses_parent_prefix(ring, car):
    t, graph, corridor = ring_corridor(ring, 2)
    parent = solve_V(car, Objective("time"), corridor, [3.0, 1.0, 0.0])
    assert parent.ok
    nxt = next(n for n in graph.neighbours[corridor.last] if n not in corridor.ids)
    child = Transcription(car, Objective("time"), corridor.extend(t, graph, nxt), [3.0, 1.0, 0.0])
    w = warm_guess(child, parent.problem, parent.w)
    assert w.size == child.n
    Xc, _, dtc = child.unpack(w)
    _, _, dtp = parent.problem.unpack(parent.w)
    assert dtc[: len(dtp)] == pytest.approx(dtp)
    end = child.global_states(w)[1, -1, :2]
    a, b = corridor.triangles[1].as_array(), child.corridor.triangles[2].as_array()
    shared = [p for p in a if any(np.allclose(p, q) for q in b)]
    assert len(shared) == 2
    cross = (shared[1] - shared[0])[0] * (end - shared[0])[1] - (shared[1] - shared[0])[1] * (end - shared[0])[0]
    assert abs(cross) <= 1e-9


def straight_corridor(scene, start=(1.0, 2.0), goal=(19.0, 2.0)):
    _, t, graph = scene
    first, last = locate(t, start), locate(t, goal)
    paths = {first: [first]}
    queue = deque([first])
    while queue:
        i = queue.popleft()
        for n in graph.neighbours[i]:
            if n not in paths:
                paths[n] = paths[i] + [n]
                queue.append(n)
    return t, graph, Corridor.of(t, graph, paths[last])


def test_higher_degree_agrees_on_fixed_endpoint_value(ring, car):
    t, graph, corridor = ring_corridor(ring, 3)
    goal = t.triangle(corridor.last).centroid
    x0, x_f = [3.0, 1.0, 0.0], [goal.x, goal.y, np.nan]
    low = solve_Q(car, Objective("time"), corridor, x0, x_f, degree=3)
    high = solve_Q(car, Objective("time"), corridor, x0, x_f, degree=6)
    assert low.ok and high.ok
    assert abs(low.value - high.value) <= 5e-3 * high.value


def test_warm_start_reaches_the_cold_start_value(corridor, car):
    t, graph, full = straight_corridor(corridor)
    x0 = [1.0, 2.0, np.nan]
    parent = solve_V(car, Objective("distance"), Corridor.of(t, graph, full.ids[:-1]), x0)
    assert parent.ok
    cold = solve_V(car, Objective("distance"), full, x0)
    warm = solve_V(car, Objective("distance"), full, x0, warm=parent)
    assert cold.ok and warm.ok
    assert warm.value == pytest.approx(cold.value, rel=1e-5, abs=1e-5)


def test_fixed_endpoint_at_free_optimum_matches_free_value(ring, car):
    t, _, corridor = ring_corridor(ring, 3)
    x0 = [3.0, 1.0, 0.0]
    V = solve_V(car, Objective("time"), corridor, x0)
    assert V.ok
    # pull the endpoint off the entry edge so it sits strictly inside
    centroid = t.triangle(corridor.last).centroid
    x_f = np.array(V.endpoint, dtype=float)
    x_f[:2] += 1e-6 * (np.array([centroid.x, centroid.y]) - x_f[:2])
    Q = solve_Q(car, Objective("time"), corridor, x0, x_f)
    assert Q.ok
    assert Q.value == pytest.approx(V.value, rel=1e-5, abs=1e-5)


def test_free_endpoint_value_in_straight_corridor_is_distance_to_last_triangle(corridor, car):
    t, graph, full = straight_corridor(corridor)
    assert len(full.ids) >= 2
    V = solve_V(car, Objective("distance"), full, [1.0, 2.0, np.nan])
    assert V.ok
    reach = ShapelyPolygon(t.triangle(full.last).as_array()).distance(Point(1.0, 2.0))
    assert V.value == pytest.approx(reach, abs=5e-3)
    assert V.spline.start[:2] == pytest.approx([1.0, 2.0], abs=1e-6)
