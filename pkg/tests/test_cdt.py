import numpy as np
import pytest
from shapely.geometry import Point
from shapely.geometry import Polygon as ShapelyPolygon

from tritraj.cdt import Label, adjacency, locate, triangulate
from tritraj.errors import CrossingConstraintsError, ObstacleError, OutOfDomainError
from tritraj.geometry import Polygon


def square(x0, y0, size, hole=False, name=""):
    return Polygon.from_coords([(x0, y0), (x0 + size, y0), (x0 + size, y0 + size), (x0, y0 + size)], hole, name)


def incircle_ok(t, tri_a, tri_b, edge):
    a, b = edge
    c = next(v for v in tri_a if v not in edge)
    d = next(v for v in tri_b if v not in edge)
    pa, pb, pc, pd = (t.points[v] for v in (a, b, c, d))
    # d must not lie strictly inside the circumcircle of (a, b, c)
    m = np.array([
        [pa[0] - pd[0], pa[1] - pd[1], (pa[0] - pd[0]) ** 2 + (pa[1] - pd[1]) ** 2],
        [pb[0] - pd[0], pb[1] - pd[1], (pb[0] - pd[0]) ** 2 + (pb[1] - pd[1]) ** 2],
        [pc[0] - pd[0], pc[1] - pd[1], (pc[0] - pd[0]) ** 2 + (pc[1] - pd[1]) ** 2],
    ])
    orient = (pb[0] - pa[0]) * (pc[1] - pa[1]) - (pb[1] - pa[1]) * (pc[0] - pa[0])
    scale = max(np.abs(m).max(), 1.0) ** 2
    return np.linalg.det(m) * np.sign(orient) <= 1e-9 * scale


def check_scene(domain, obstacles):
    t = triangulate(domain, obstacles)
    edges = t.edges()
    for a, b in t.constrained_edges:
        assert (a, b) in edges
    free = ShapelyPolygon(domain.as_array(), [o.as_array() for o in obstacles])
    areas = t.areas()
    assert np.all(areas > 0)
    free_area = areas[[i for i, lab in enumerate(t.labels) if lab is Label.FREE]].sum()
    assert free_area == pytest.approx(free.area, rel=1e-6)
    assert areas.sum() == pytest.approx(ShapelyPolygon(domain.as_array()).area, rel=1e-6)
    for i, lab in enumerate(t.labels):
        c = t.centroids()[i]
        inside = any(ShapelyPolygon(o.as_array()).contains(Point(c)) for o in obstacles)
        assert (lab is Label.BLOCKED) == inside
    graph = adjacency(t)
    by_edge = {}
    for i, tri in enumerate(t.triangles):
        for u, v in ((tri[0], tri[1]), (tri[1], tri[2]), (tri[2], tri[0])):
            by_edge.setdefault((min(u, v), max(u, v)), []).append(i)
    for edge, owners in by_edge.items():
        if len(owners) == 2 and edge not in t.constrained_edges:
            i, j = owners
            assert incircle_ok(t, t.triangles[i], t.triangles[j], edge)
    return t, graph


def test_square_domain_gives_two_triangles(square):
    _, t, graph = square
    assert len(t.triangles) == 2
    assert t.free_ids() == [0, 1]
    assert graph.neighbours == {0: (1,), 1: (0,)}
    assert graph.edge_count() == 1


def test_ring_has_blocked_core_and_free_annulus(ring):
    _, t, graph = ring
    labels = list(t.labels)
    assert labels.count(Label.BLOCKED) == 2
    assert labels.count(Label.FREE) == 8
    for i in graph.nodes:
        assert t.labels[i] is Label.FREE
        for j in graph.neighbours[i]:
            assert t.labels[j] is Label.FREE
            a, b = graph.shared_edge(i, j)
            assert a in t.triangles[i] and b in t.triangles[j]


def test_locate_reports_obstacle_and_outside(ring):
    _, t, _ = ring
    assert t.labels[locate(t, (1.0, 1.0), "start")] is Label.FREE
    with pytest.raises(ObstacleError, match="goal in obstacle"):
        locate(t, (6.0, 6.0), "goal")
    with pytest.raises(OutOfDomainError):
        locate(t, (20.0, 6.0), "goal")


def test_locate_on_shared_edge_picks_lowest_id(square):
    _, t, graph = square
    a, b = graph.shared_edge(0, 1)
    mid = 0.5 * (t.points[a] + t.points[b])
    assert locate(t, mid) == 0


def test_crossing_obstacles_rejected():
    domain = square(0, 0, 10)
    with pytest.raises(CrossingConstraintsError):
        triangulate(domain, [square(2, 2, 3, True, "a"), square(4, 4, 3, True, "b")])


def test_collinear_boundary_vertices_are_kept(corridor):
    _, t, _ = corridor
    for a, b in [((10, 0), (10, 4))]:
        assert any(np.allclose(p, a) for p in t.points)
        assert any(np.allclose(p, b) for p in t.points)
    check_scene(t.domain, t.obstacles)


def test_randomized_scenes_are_valid():
    rng = np.random.default_rng(11)
    for _ in range(100):
        w, h = rng.uniform(10, 30, size=2)
        domain = Polygon.from_coords([(0, 0), (w, 0), (w, h), (0, h)])
        obstacles = []
        cells = [(i, j) for i in range(3) for j in range(3)]
        for k in rng.choice(len(cells), size=rng.integers(0, 4), replace=False):
            i, j = cells[k]
            cw, ch = w / 3, h / 3
            x0 = i * cw + rng.uniform(0.1, 0.3) * cw
            y0 = j * ch + rng.uniform(0.1, 0.3) * ch
            x1 = x0 + rng.uniform(0.2, 0.5) * cw
            y1 = y0 + rng.uniform(0.2, 0.5) * ch
            n = rng.integers(3, 7)
            angles = np.sort(rng.uniform(0, 2 * np.pi, size=n))
            cx, cy, rx, ry = (x0 + x1) / 2, (y0 + y1) / 2, (x1 - x0) / 2, (y1 - y0) / 2
            ring = [(cx + rx * np.cos(a), cy + ry * np.sin(a)) for a in angles]
            if abs(ShapelyPolygon(ring).area) < 1e-3:
                continue
            obstacles.append(Polygon.from_coords(ring, True, f"o{k}"))
        check_scene(domain, obstacles)
