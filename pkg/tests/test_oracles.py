import math

import numpy as np
import pytest

from tritraj.cdt import locate
from tritraj.errors import NoPathError
from tritraj.objectives import Objective
from tritraj.oracles import (
    DubinsQuery,
    DubinsWord,
    count_simple_paths,
    dubins_candidates,
    dubins_shortest,
    enumerate_optimal,
    simple_paths,
)
from tritraj.search import PlannerConfig, plan

ORACLE_CASES = [
    ("square", [2.0, 5.0, 0.0], [8.0, 5.0, 0.0]),
    ("corridor", [1.0, 2.0, 0.0], [19.0, 2.0, np.nan]),
    ("ring", [3.0, 1.0, 0.0], [9.0, 11.0, np.nan]),
    ("lshape", [10.0, 2.5, math.pi], [2.5, 10.0, np.nan]),
    ("islet", [1.0, 6.0, 0.0], [11.0, 6.0, np.nan]),
]


def angle_gap(a, b):
    return abs((a - b + math.pi) % (2 * math.pi) - math.pi)


def test_straight_line():
    path = dubins_shortest(DubinsQuery((0.0, 0.0, 0.0), (10.0, 0.0, 0.0)))
    assert path.length == pytest.approx(10.0)
    assert path.word in (DubinsWord.LSL, DubinsWord.RSR)
    assert path.sample(4.0) == pytest.approx((4.0, 0.0, 0.0))


def test_rho_must_be_positive():
    with pytest.raises(ValueError):
        DubinsQuery((0.0, 0.0, 0.0), (1.0, 0.0, 0.0), rho=0.0)


@pytest.mark.parametrize("rho", [0.5, 1.0, 3.0])
def test_every_candidate_reaches_the_goal(rho):
    rng = np.random.default_rng(11)
    for _ in range(50):
        start = (*rng.uniform(0, 10, 2), rng.uniform(-math.pi, math.pi))
        goal = (*rng.uniform(0, 10, 2), rng.uniform(-math.pi, math.pi))
        q = DubinsQuery(start, goal, rho)
        candidates = dubins_candidates(q)
        assert candidates
        for path in candidates:
            x, y, psi = path.sample(path.length)
            assert (x, y) == pytest.approx(goal[:2], abs=1e-6)
            assert angle_gap(psi, goal[2]) <= 1e-6
        best = dubins_shortest(q)
        assert best.length == min(p.length for p in candidates)
        assert best.length >= math.hypot(goal[0] - start[0], goal[1] - start[1]) - 1e-9


def test_simple_paths_agree_with_recursive_count(load_scene):
    for name in ("ring", "islet", "pillars"):
        _, t, graph = load_scene(name)
        nodes = sorted(graph.nodes)
        start, goal = nodes[0], nodes[-1]
        paths = list(simple_paths(graph, start, goal, 12))
        assert len(paths) == count_simple_paths(graph, start, goal, 12)
        assert len(set(paths)) == len(paths)
        for p in paths:
            assert p[0] == start and p[-1] == goal
            assert len(set(p)) == len(p)
            assert all(graph.adjacent(a, b) for a, b in zip(p, p[1:]))


def test_simple_paths_respect_prefix(ring):
    _, t, graph = ring
    start = locate(t, (3.0, 1.0))
    goal = locate(t, (9.0, 11.0))
    first = graph.neighbours[start][0]
    everything = list(simple_paths(graph, start, goal, 12))
    extended = list(simple_paths(graph, start, goal, 12, prefix=(start, first)))
    assert extended == [p for p in everything if p[:2] == (start, first)]
    assert list(simple_paths(graph, start, goal, 12, prefix=(first,))) == []


def test_enumeration_without_route_raises(square, car):
    _, t, graph = square
    with pytest.raises(NoPathError):
        enumerate_optimal(t, graph, car, Objective("time", time_cap=None), [0.2, 5.0, math.pi], [0.1, 5.0, 0.0],
                          max_len=12, cfg=PlannerConfig(dt_max=0.05))


@pytest.mark.slow
def test_free_space_car_distance_matches_dubins(load_scene, car):
    _, t, graph = load_scene("field")
    rng = np.random.default_rng(2)
    cfg = PlannerConfig(degree=8)
    for _ in range(20):
        while True:
            a, b = rng.uniform(5, 35, 2), rng.uniform(5, 35, 2)
            if np.hypot(*(b - a)) >= 10:
                break
        bearing = math.atan2(b[1] - a[1], b[0] - a[0])
        start = (a[0], a[1], bearing + rng.uniform(-0.3, 0.3))
        goal = (b[0], b[1], bearing + rng.uniform(-0.3, 0.3))
        expected = dubins_shortest(DubinsQuery(start, goal, car.turn_radius)).length
        result = plan(t, graph, car, Objective("distance"), list(start), list(goal), cfg)
        assert result.value == pytest.approx(expected, rel=1e-2)


@pytest.mark.slow
@pytest.mark.parametrize("kind", ["time", "distance"])
@pytest.mark.parametrize("name,x0,x_f", ORACLE_CASES)
def test_search_matches_enumeration(load_scene, car, kind, name, x0, x_f):
    _, t, graph = load_scene(name)
    assert len(graph.nodes) <= 12
    objective = Objective(kind)
    result = plan(t, graph, car, objective, x0, x_f)
    best = enumerate_optimal(t, graph, car, objective, x0, x_f, max_len=12)
    assert result.value == pytest.approx(best.value, rel=1e-4)


@pytest.mark.slow
@pytest.mark.parametrize("name,x0,x_f", ORACLE_CASES)
def test_open_nodes_cannot_beat_incumbent(load_scene, car, name, x0, x_f):
    _, t, graph = load_scene(name)
    objective = Objective("time")
    result = plan(t, graph, car, objective, x0, x_f)
    for node in result.open_nodes:
        try:
            completed = enumerate_optimal(t, graph, car, objective, x0, x_f, max_len=12, prefix=node.sequence)
        except NoPathError:
            continue
        assert completed.value >= result.value * (1 - 1e-4)
