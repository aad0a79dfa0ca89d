from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from shapely.geometry import LinearRing

from tritraj.errors import DegenerateTriangleError, InputError

# +90 deg / -90 deg rotations used to turn an edge direction into an outward normal
R_CCW = np.array([[0.0, 1.0], [-1.0, 0.0]])
R_CW = -R_CCW

DEGENERATE_REL_TOL = 1e-12
MEMBERSHIP_TOL = 1e-9


@dataclass(frozen=True)
class Point2:
    x: float
    y: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise InputError(f"non-finite coordinates ({self.x}, {self.y})")

    @classmethod
    def of(cls, p) -> "Point2":
        if isinstance(p, Point2):
            return p
        return cls(float(p[0]), float(p[1]))

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y])

    def __iter__(self):
        yield self.x
        yield self.y


def _signed_area_xy(xy: np.ndarray) -> float:
    x, y = xy[:, 0], xy[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


@dataclass(frozen=True)
class Polygon:
    """
    A simple polygon ring. `is_hole` marks obstacles (and holes of the domain),
    domain boundaries carry `is_hole=False`.
    Domain rings are stored counter-clockwise, obstacle rings clockwise.
    """
    vertices: tuple[Point2, ...]
    is_hole: bool = False
    name: str = ""

    def __post_init__(self):
        if len(self.vertices) < 3:
            raise InputError(f"polygon {self.name or '?'} needs at least 3 vertices")

    @classmethod
    def from_coords(cls, coords: Iterable[Sequence[float]], is_hole: bool = False, name: str = "") -> "Polygon":
        """
        Build a polygon from raw coordinates, dropping a repeated closing vertex
        and normalizing orientation. Raises InputError for self-intersecting or
        zero-area rings.
        """
        pts = [Point2.of(c) for c in coords]
        if len(pts) > 1 and pts[0] == pts[-1]:
            pts = pts[:-1]
        if len(pts) < 3:
            raise InputError(f"polygon {name or '?'} needs at least 3 vertices")
        xy = np.array([[p.x, p.y] for p in pts])
        if not LinearRing(xy).is_simple:
            raise InputError(f"polygon {name or '?'} is not simple")
        area = _signed_area_xy(xy)
        if area == 0.0:
            raise InputError(f"polygon {name or '?'} has zero area")
        if (area > 0) == is_hole:
            pts.reverse()
        return cls(tuple(pts), is_hole, name)

    def as_array(self) -> np.ndarray:
        return np.array([[p.x, p.y] for p in self.vertices])

    def edges(self) -> list[tuple[Point2, Point2]]:
        n = len(self.vertices)
        return [(self.vertices[i], self.vertices[(i + 1) % n]) for i in range(n)]


def signed_area(poly: Polygon | Sequence[Sequence[float]]) -> float:
    """Shoelace area, positive for counter-clockwise rings."""
    xy = poly.as_array() if isinstance(poly, Polygon) else np.asarray(poly, dtype=float)
    return _signed_area_xy(xy)


def _orient(a: np.ndarray, b: np.ndarray, c: np.ndarray) -> float:
    return float((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]))


def _degenerate(a: np.ndarray, b: np.ndarray, c: np.ndarray) -> bool:
    xy = np.vstack([a, b, c])
    diag2 = float(np.sum((xy.max(axis=0) - xy.min(axis=0)) ** 2))
    return abs(0.5 * _orient(a, b, c)) < DEGENERATE_REL_TOL * diag2 or diag2 == 0.0


@dataclass(frozen=True)
class Triangle:
    v1: Point2
    v2: Point2
    v3: Point2
    index: int | None = field(default=None, compare=False)

    def __post_init__(self):
        a, b, c = self.v1.as_array(), self.v2.as_array(), self.v3.as_array()
        if _degenerate(a, b, c):
            raise DegenerateTriangleError(f"degenerate triangle {self.describe()}")
        if _orient(a, b, c) < 0:
            raise InputError(f"triangle {self.describe()} is not counter-clockwise")

    @classmethod
    def of(cls, a, b, c, index: int | None = None) -> "Triangle":
        """Counter-clockwise triangle from three points in any order."""
        a, b, c = Point2.of(a), Point2.of(b), Point2.of(c)
        if _orient(a.as_array(), b.as_array(), c.as_array()) < 0:
            b, c = c, b
        return cls(a, b, c, index)

    def describe(self) -> str:
        label = f"#{self.index} " if self.index is not None else ""
        return f"{label}[({self.v1.x:g}, {self.v1.y:g}), ({self.v2.x:g}, {self.v2.y:g}), ({self.v3.x:g}, {self.v3.y:g})]"

    def as_array(self) -> np.ndarray:
        return np.array([[self.v1.x, self.v1.y], [self.v2.x, self.v2.y], [self.v3.x, self.v3.y]])

    @property
    def centroid(self) -> Point2:
        c = self.as_array().mean(axis=0)
        return Point2(float(c[0]), float(c[1]))

    @property
    def area(self) -> float:
        a, b, c = self.as_array()
        return 0.5 * _orient(a, b, c)


@dataclass(frozen=True)
class HalfSpaces:
    A: np.ndarray
    b: np.ndarray

    def evaluate(self, p) -> np.ndarray:
        """Row residuals A p - b; non-positive rows are satisfied."""
        return self.A @ np.asarray(tuple(p), dtype=float) - self.b


@dataclass(frozen=True)
class LocalFrame:
    C: np.ndarray
    d: Point2

    @property
    def C_inv(self) -> np.ndarray:
        return np.linalg.inv(self.C)


def halfspaces_from_vertices(v1, v2, v3) -> HalfSpaces:
    """
    Half-space form of a triangle given in either orientation; the edge normal
    rotation flips sign with the winding.
    """
    pts = [np.asarray(tuple(v), dtype=float) for v in (v1, v2, v3)]
    if _degenerate(*pts):
        raise DegenerateTriangleError(f"degenerate triangle {[tuple(p) for p in pts]}")
    R = R_CCW if _orient(*pts) > 0 else R_CW
    rows = []
    offsets = []
    for i in range(3):
        start, end = pts[i], pts[(i + 1) % 3]
        normal = R @ (end - start)
        rows.append(normal)
        offsets.append(normal @ start)
    return HalfSpaces(np.array(rows), np.array(offsets))


def halfspaces_of(tri: Triangle) -> HalfSpaces:
    return halfspaces_from_vertices(tri.v1, tri.v2, tri.v3)


def contains(tri: Triangle, p, tol: float = MEMBERSHIP_TOL) -> bool:
    if tol < 0:
        raise InputError("tol must be non-negative")
    hs = halfspaces_of(tri)
    return bool(np.all(hs.evaluate(p) <= tol))


def local_frame(tri: Triangle) -> LocalFrame:
    a, b, c = tri.as_array()
    C = np.column_stack([b - a, c - b])
    if abs(np.linalg.det(C)) == 0.0:
        raise DegenerateTriangleError(f"singular local frame for triangle {tri.describe()}")
    return LocalFrame(C, tri.v1)


def to_local(f: LocalFrame, p) -> Point2:
    q = np.linalg.solve(f.C, np.asarray(tuple(p), dtype=float) - f.d.as_array())
    return Point2(float(q[0]), float(q[1]))


def to_global(f: LocalFrame, p_local) -> Point2:
    q = f.C @ np.asarray(tuple(p_local), dtype=float) + f.d.as_array()
    return Point2(float(q[0]), float(q[1]))


def local_membership(p_local) -> np.ndarray:
    """
    Residuals of the local-frame triangle inequalities, in the order
    p1' <= 1, -p2' <= 0, p2' - p1' <= 0.
    """
    q1, q2 = tuple(p_local)
    return np.array([q1 - 1.0, -q2, q2 - q1])


def contains_local(f: LocalFrame, p, tol: float = MEMBERSHIP_TOL) -> bool:
    return bool(np.all(local_membership(to_local(f, p)) <= tol))
