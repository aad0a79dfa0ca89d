from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property, lru_cache
from typing import Sequence

import numpy as np
import shapely
from rich.console import Console
from scipy.spatial import cKDTree
from shapely.geometry import LineString
from shapely.geometry import Polygon as ShapelyPolygon
from shapely.strtree import STRtree

from tritraj.errors import CrossingConstraintsError, InputError, ObstacleError, OutOfDomainError
from tritraj.geometry import MEMBERSHIP_TOL, Point2, Polygon, Triangle, contains
from tritraj.pluralize import pluralize_numbers

console = Console(color_system="truecolor")

MERGE_REL_TOL = 1e-9


class Label(str, Enum):
    FREE = "free"
    BLOCKED = "blocked"


@dataclass(frozen=True)
class Triangulation:
    vertices: tuple[Point2, ...]
    triangles: tuple[tuple[int, int, int], ...]
    constrained_edges: frozenset[tuple[int, int]]
    labels: tuple[Label, ...]
    domain: Polygon | None = field(default=None, compare=False)
    obstacles: tuple[Polygon, ...] = field(default=(), compare=False)

    @cached_property
    def points(self) -> np.ndarray:
        return np.array([[p.x, p.y] for p in self.vertices])

    def triangle(self, i: int) -> Triangle:
        a, b, c = self.triangles[i]
        return Triangle(self.vertices[a], self.vertices[b], self.vertices[c], index=i)

    def free_ids(self) -> list[int]:
        return [i for i, lab in enumerate(self.labels) if lab is Label.FREE]

    def edges(self) -> set[tuple[int, int]]:
        out = set()
        for a, b, c in self.triangles:
            for u, v in ((a, b), (b, c), (c, a)):
                out.add((min(u, v), max(u, v)))
        return out

    def centroids(self) -> np.ndarray:
        return self.points[np.array(self.triangles)].mean(axis=1)

    def areas(self) -> np.ndarray:
        tri = self.points[np.array(self.triangles)]
        ab = tri[:, 1] - tri[:, 0]
        ac = tri[:, 2] - tri[:, 0]
        return 0.5 * (ab[:, 0] * ac[:, 1] - ab[:, 1] * ac[:, 0])


@dataclass(frozen=True)
class AdjacencyGraph:
    neighbours: dict[int, tuple[int, ...]]
    shared_edges: dict[tuple[int, int], tuple[int, int]]

    @property
    def nodes(self) -> list[int]:
        return sorted(self.neighbours)

    def edge_count(self) -> int:
        return len(self.shared_edges)

    def shared_edge(self, t1: int, t2: int) -> tuple[int, int]:
        try:
            return self.shared_edges[(min(t1, t2), max(t1, t2))]
        except KeyError:
            raise InputError(f"triangles {t1} and {t2} are not adjacent") from None

    def adjacent(self, t1: int, t2: int) -> bool:
        return (min(t1, t2), max(t1, t2)) in self.shared_edges


def _orient(p, q, r) -> float:
    return (q[0] - p[0]) * (r[1] - p[1]) - (q[1] - p[1]) * (r[0] - p[0])


def _incircle(a, b, c, d) -> float:
    """
    Positive when d lies strictly inside the circumcircle of the
    counter-clockwise triangle abc, zero within round-off.
    """
    rows = []
    for p in (a, b, c):
        dx, dy = p[0] - d[0], p[1] - d[1]
        rows.append((dx, dy, dx * dx + dy * dy))
    (adx, ady, ad2), (bdx, bdy, bd2), (cdx, cdy, cd2) = rows
    det = (
        ad2 * (bdx * cdy - cdx * bdy)
        + bd2 * (cdx * ady - adx * cdy)
        + cd2 * (adx * bdy - bdx * ady)
    )
    permanent = (
        ad2 * (abs(bdx * cdy) + abs(cdx * bdy))
        + bd2 * (abs(cdx * ady) + abs(adx * cdy))
        + cd2 * (abs(adx * bdy) + abs(bdx * ady))
    )
    if abs(det) <= 1e-12 * permanent:
        return 0.0
    return det


class _Mesh:
    """Mutable triangle soup with a directed-edge index, used only while building."""

    def __init__(self, points: np.ndarray):
        self.pts = points
        span = points.max(axis=0) - points.min(axis=0)
        self.eps = 1e-13 * float(span @ span)
        self.tris: dict[int, tuple[int, int, int]] = {}
        self.edge_tri: dict[tuple[int, int], int] = {}
        self.constrained: set[tuple[int, int]] = set()
        self._next = 0

    def orient(self, a: int, b: int, c: int) -> float:
        o = _orient(self.pts[a], self.pts[b], self.pts[c])
        return 0.0 if abs(o) <= self.eps else o

    def add(self, a: int, b: int, c: int) -> int:
        if self.orient(a, b, c) < 0:
            b, c = c, b
        t = self._next
        self._next += 1
        self.tris[t] = (a, b, c)
        for e in ((a, b), (b, c), (c, a)):
            self.edge_tri[e] = t
        return t

    def remove(self, t: int) -> tuple[int, int, int]:
        a, b, c = self.tris.pop(t)
        for e in ((a, b), (b, c), (c, a)):
            if self.edge_tri.get(e) == t:
                del self.edge_tri[e]
        return a, b, c

    def is_constrained(self, a: int, b: int) -> bool:
        return (min(a, b), max(a, b)) in self.constrained

    def illegal(self, a: int, b: int) -> bool:
        """True when the edge a->b fails the empty-circumcircle test and can be flipped."""
        if self.is_constrained(a, b):
            return False
        t1 = self.edge_tri.get((a, b))
        t2 = self.edge_tri.get((b, a))
        if t1 is None or t2 is None:
            return False
        c = _third(self.tris[t1], a, b)
        d = _third(self.tris[t2], a, b)
        return _incircle(self.pts[a], self.pts[b], self.pts[c], self.pts[d]) > 0

    def flip(self, a: int, b: int) -> tuple[int, int]:
        t1 = self.edge_tri[(a, b)]
        t2 = self.edge_tri[(b, a)]
        c = _third(self.tris[t1], a, b)
        d = _third(self.tris[t2], a, b)
        self.remove(t1)
        self.remove(t2)
        self.add(a, d, c)
        self.add(d, b, c)
        return c, d

    def legalize(self, stack: list[tuple[int, int]]) -> None:
        while stack:
            a, b = stack.pop()
            if (a, b) not in self.edge_tri or not self.illegal(a, b):
                continue
            c, d = self.flip(a, b)
            stack.extend([(a, d), (d, b), (b, c), (c, a)])

    def insert(self, v: int) -> None:
        p = self.pts[v]
        for t, (a, b, c) in self.tris.items():
            o = (self.orient(a, b, v), self.orient(b, c, v), self.orient(c, a, v))
            if min(o) < 0:
                continue
            zeros = [i for i, val in enumerate(o) if val == 0.0]
            if len(zeros) >= 2:
                # coincides with an existing vertex; merged upstream
                return
            if not zeros:
                self.remove(t)
                for u, w in ((a, b), (b, c), (c, a)):
                    self.add(u, w, v)
                self.legalize([(a, b), (b, c), (c, a)])
                return
            u, w = ((a, b), (b, c), (c, a))[zeros[0]]
            x = _third((a, b, c), u, w)
            other = self.edge_tri.get((w, u))
            self.remove(t)
            self.add(u, v, x)
            self.add(v, w, x)
            outer = [(w, x), (x, u)]
            if other is not None:
                y = _third(self.tris[other], w, u)
                self.remove(other)
                self.add(w, v, y)
                self.add(v, u, y)
                outer += [(u, y), (y, w)]
            self.legalize(outer)
            return
        raise InputError(f"vertex {v} at ({p[0]:g}, {p[1]:g}) could not be located")

    def enforce(self, a: int, b: int) -> None:
        key = (min(a, b), max(a, b))
        if (a, b) in self.edge_tri or (b, a) in self.edge_tri:
            self.constrained.add(key)
            return
        start = None
        for t, tri in self.tris.items():
            if a not in tri:
                continue
            k = tri.index(a)
            u, w = tri[(k + 1) % 3], tri[(k + 2) % 3]
            if self.orient(a, u, b) > 0 and self.orient(a, b, w) > 0:
                start = t
                break
        if start is None:
            raise InputError(f"constraint edge ({a}, {b}) could not be recovered")
        crossed = [start]
        left, right = [w], [u]
        while True:
            if self.is_constrained(u, w):
                raise CrossingConstraintsError(key, (min(u, w), max(u, w)))
            nxt = self.edge_tri.get((w, u))
            if nxt is None:
                raise InputError(f"constraint edge ({a}, {b}) leaves the mesh")
            crossed.append(nxt)
            x = _third(self.tris[nxt], w, u)
            if x == b:
                break
            side = self.orient(a, b, x)
            if side > 0:
                left.append(x)
                w = x
            elif side < 0:
                right.append(x)
                u = x
            else:
                raise InputError(f"vertex {x} lies on constraint edge ({a}, {b})")
        for t in crossed:
            self.remove(t)
        self._fill(a, b, left)
        self._fill(a, b, right)
        self.constrained.add(key)

    def _fill(self, a: int, b: int, chain: list[int]) -> None:
        """Delaunay fill of the pseudo-polygon a, chain..., b on one side of ab."""
        if not chain:
            return
        best = 0
        for j in range(1, len(chain)):
            if self._in_circle_of(a, b, chain[best], chain[j]):
                best = j
        c = chain[best]
        self.add(a, b, c)
        self._fill(a, c, chain[:best])
        self._fill(c, b, chain[best + 1:])

    def _in_circle_of(self, a: int, b: int, c: int, d: int) -> bool:
        if self.orient(a, b, c) < 0:
            a, b = b, a
        return _incircle(self.pts[a], self.pts[b], self.pts[c], self.pts[d]) > 0

    def relax(self, max_passes: int = 50) -> None:
        """Flip every illegal unconstrained edge until the mesh is locally Delaunay."""
        for _ in range(max_passes):
            stack = [e for e in self.edge_tri if e[0] < e[1] and self.illegal(*e)]
            if not stack:
                return
            self.legalize(stack)


def _third(tri: tuple[int, int, int], a: int, b: int) -> int:
    for v in tri:
        if v != a and v != b:
            return v
    raise ValueError(f"edge ({a}, {b}) does not belong to {tri}")


def _merge_vertices(points: np.ndarray, tol: float) -> np.ndarray:
    """Union-find over near-duplicate points; returns the representative of each index."""
    parent = np.arange(len(points))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i, j in sorted(cKDTree(points).query_pairs(r=tol)):
        ri, rj = find(i), find(j)
        if ri != rj:
            parent[max(ri, rj)] = min(ri, rj)
    return np.array([find(i) for i in range(len(points))])


def _split_collinear(points: np.ndarray, segments: list[tuple[int, int]], used: Sequence[int], tol: float):
    """Split every segment at the input vertices lying on it."""
    used = np.asarray(sorted(set(used)))
    out = []
    for a, b in segments:
        pa, pb = points[a], points[b]
        d = pb - pa
        length2 = float(d @ d)
        rel = points[used] - pa
        t = rel @ d / length2
        dist = np.abs(rel[:, 0] * d[1] - rel[:, 1] * d[0]) / np.sqrt(length2)
        mask = (t > 0) & (t < 1) & (dist <= tol) & (used != a) & (used != b)
        stops = [a] + [int(v) for _, v in sorted(zip(t[mask], used[mask]))] + [b]
        out.extend(zip(stops[:-1], stops[1:]))
    return out


def _check_crossings(points: np.ndarray, segments: list[tuple[int, int]]) -> None:
    lines = [LineString([points[a], points[b]]) for a, b in segments]
    tree = STRtree(lines)
    src, dst = tree.query(lines, predicate="crosses")
    for i, j in zip(src, dst):
        if i < j:
            raise CrossingConstraintsError(segments[i], segments[j])


@lru_cache(maxsize=4096)
def _shapely_ring(poly: Polygon) -> ShapelyPolygon:
    geom = ShapelyPolygon(poly.as_array())
    shapely.prepare(geom)
    return geom


def classify(tri_centroid, obstacles: Sequence[Polygon], tol: float = MEMBERSHIP_TOL) -> Label:
    """
    Even-odd point-in-polygon label of a triangle centroid. A centroid on an
    obstacle edge means a constraint was not recovered and raises InputError.
    """
    p = Point2.of(tri_centroid)
    inside = 0
    for poly in obstacles:
        ring = _shapely_ring(poly)
        if ring.exterior.distance(shapely.Point(p.x, p.y)) <= tol:
            raise InputError(f"centroid ({p.x:g}, {p.y:g}) lies on the edge of obstacle {poly.name or '?'}")
        if shapely.contains_xy(ring, p.x, p.y):
            inside += 1
    return Label.BLOCKED if inside % 2 else Label.FREE


def triangulate(domain: Polygon, obstacles: Sequence[Polygon] = ()) -> Triangulation:
    """
    Constrained Delaunay triangulation of a domain ring with obstacle rings.
    Every ring edge becomes a mesh edge; triangles outside the domain are
    dropped and the rest labelled Free or Blocked.
    """
    obstacles = tuple(obstacles)
    rings = [domain, *obstacles]
    coords = np.vstack([r.as_array() for r in rings])
    span = coords.max(axis=0) - coords.min(axis=0)
    diag = float(np.hypot(*span))
    tol = MERGE_REL_TOL * diag

    rep = _merge_vertices(coords, tol)
    merged = int(np.sum(rep != np.arange(len(rep))))
    if merged:
        console.print(
            pluralize_numbers(f"[yellow][CDT][/yellow] Merged [orange1]{merged}[/orange1] duplicate vertex")
        )

    segments = []
    offset = 0
    for ring in rings:
        n = len(ring.vertices)
        for i in range(n):
            a, b = int(rep[offset + i]), int(rep[offset + (i + 1) % n])
            if a != b:
                segments.append((a, b))
        offset += n
    used = sorted(set(rep.tolist()))
    segments = _split_collinear(coords, segments, used, tol)
    segments = sorted({(min(a, b), max(a, b)) for a, b in segments if a != b})
    _check_crossings(coords, segments)

    center = coords.min(axis=0) + 0.5 * span
    size = max(float(span.max()), 1.0) * 20.0
    sup = np.array([
        [center[0] - 2 * size, center[1] - size],
        [center[0] + 2 * size, center[1] - size],
        [center[0], center[1] + 2 * size],
    ])
    pts = np.vstack([coords, sup])
    n_real = len(coords)
    mesh = _Mesh(pts)
    mesh.add(n_real, n_real + 1, n_real + 2)
    for v in used:
        mesh.insert(v)
    for a, b in segments:
        mesh.enforce(a, b)
    mesh.relax()

    domain_geom = _shapely_ring(domain)
    kept = []
    for a, b, c in mesh.tris.values():
        if max(a, b, c) >= n_real:
            continue
        cx, cy = pts[[a, b, c]].mean(axis=0)
        if shapely.contains_xy(domain_geom, cx, cy):
            kept.append((a, b, c))

    index = {v: i for i, v in enumerate(sorted({v for tri in kept for v in tri}))}
    canon = []
    for tri in kept:
        tri = tuple(index[v] for v in tri)
        k = tri.index(min(tri))
        canon.append(tri[k:] + tri[:k])
    canon.sort()
    vertices = tuple(Point2(float(coords[v, 0]), float(coords[v, 1])) for v in sorted(index, key=index.get))
    constrained = frozenset(
        (min(index[a], index[b]), max(index[a], index[b]))
        for a, b in mesh.constrained
        if a in index and b in index
    )
    xy = np.array([[v.x, v.y] for v in vertices])
    centroids = xy[np.array(canon)].mean(axis=1)
    labels = tuple(classify(c, obstacles, tol) for c in centroids)
    return Triangulation(vertices, tuple(canon), constrained, labels, domain, obstacles)


def adjacency(t: Triangulation) -> AdjacencyGraph:
    """Free triangles joined through their shared full edges."""
    edge_owner: dict[tuple[int, int], list[int]] = {}
    for i, (a, b, c) in enumerate(t.triangles):
        if t.labels[i] is not Label.FREE:
            continue
        for u, v in ((a, b), (b, c), (c, a)):
            edge_owner.setdefault((min(u, v), max(u, v)), []).append(i)
    neighbours: dict[int, list[int]] = {i: [] for i in t.free_ids()}
    shared: dict[tuple[int, int], tuple[int, int]] = {}
    for edge, owners in edge_owner.items():
        if len(owners) != 2:
            continue
        i, j = sorted(owners)
        neighbours[i].append(j)
        neighbours[j].append(i)
        shared[(i, j)] = edge
    return AdjacencyGraph({i: tuple(sorted(n)) for i, n in neighbours.items()}, shared)


def locate(t: Triangulation, p, what: str = "point", tol: float = MEMBERSHIP_TOL) -> int:
    """
    Id of the Free triangle containing p, lowest id on shared edges.
    Raises ObstacleError when only Blocked triangles contain p and
    OutOfDomainError when none does.
    """
    p = Point2.of(p)
    hits = [i for i in range(len(t.triangles)) if contains(t.triangle(i), p, tol)]
    if not hits:
        raise OutOfDomainError(f"{what} ({p.x:g}, {p.y:g}) is outside the domain")
    free = [i for i in hits if t.labels[i] is Label.FREE]
    if not free:
        raise ObstacleError(what)
    return min(free)
