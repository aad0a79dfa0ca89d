from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from pathlib import Path

import geojson
from shapely.geometry import Polygon as ShapelyPolygon

from tritraj.errors import (
    CrossingPolygonsError,
    InputError,
    MapParseError,
    MapValidationError,
    MissingDomainError,
)
from tritraj.geometry import Polygon

LOCAL_CRS = "local-meters"


@dataclass(frozen=True)
class MapDocument:
    """
    A planar scene in local metres: one domain ring plus obstacle rings.
    Holes of the domain polygon are carried as obstacles.
    """

    domain: Polygon
    obstacles: tuple[Polygon, ...]
    crs: str = LOCAL_CRS
    source: str = ""

    @property
    def obstacle_ids(self) -> tuple[str, ...]:
        return tuple(o.name for o in self.obstacles)


def _rings(geometry: dict, fid: str) -> list[list]:
    kind = geometry.get("type")
    if kind == "Polygon":
        return [geometry["coordinates"]]
    if kind == "MultiPolygon":
        return list(geometry["coordinates"])
    raise MapValidationError(f"feature {fid} has geometry {kind!r}; expected Polygon or MultiPolygon")


def _polygon(coords, is_hole: bool, name: str) -> Polygon:
    try:
        return Polygon.from_coords(coords, is_hole=is_hole, name=name)
    except InputError as e:
        raise MapValidationError(str(e)) from None


def parse_map(text: str, source: str = "<string>") -> MapDocument:
    try:
        doc = geojson.loads(text)
    except ValueError as e:
        raise MapParseError(f"{source}: not valid JSON ({e})") from None
    if not isinstance(doc, dict) or doc.get("type") != "FeatureCollection":
        raise MapParseError(f"{source}: expected a GeoJSON FeatureCollection")
    if not doc.is_valid:
        raise MapParseError(f"{source}: {doc.errors()}")

    domains = []
    obstacles: list[Polygon] = []
    seen: set[str] = set()
    for k, feature in enumerate(doc["features"]):
        props = feature.get("properties") or {}
        role = props.get("role")
        fid = str(feature.get("id") or props.get("id") or props.get("name") or f"{role or 'feature'}-{k}")
        geometry = feature.get("geometry") or {}
        if role == "domain":
            domains.append((fid, _rings(geometry, fid)))
        elif role == "obstacle":
            rings = _rings(geometry, fid)
            for j, poly in enumerate(rings):
                name = fid if len(rings) == 1 else f"{fid}.{j}"
                if name in seen:
                    raise MapValidationError(f"duplicate obstacle id {name!r}")
                seen.add(name)
                obstacles.append(_polygon(poly[0], True, name))
                for h, hole in enumerate(poly[1:]):
                    obstacles.append(_polygon(hole, True, f"{name}.hole{h}"))
        else:
            raise MapValidationError(f"feature {fid} has role {role!r}; expected 'domain' or 'obstacle'")

    if not domains:
        raise MissingDomainError(f"{source}: no feature with role 'domain'")
    if len(domains) > 1 or len(domains[0][1]) > 1:
        raise MapValidationError(f"{source}: exactly one domain polygon is allowed")
    fid, (rings,) = domains[0]
    domain = _polygon(rings[0], False, fid)
    for h, hole in enumerate(rings[1:]):
        obstacles.append(_polygon(hole, True, f"{fid}.hole{h}"))

    validate_scene(domain, obstacles)
    return MapDocument(domain, tuple(obstacles), LOCAL_CRS, source)


def validate_scene(domain: Polygon, obstacles: list[Polygon]) -> None:
    """Obstacles must lie inside the domain and their boundaries may touch but never cross."""
    outer = ShapelyPolygon(domain.as_array())
    shapes = [ShapelyPolygon(o.as_array()) for o in obstacles]
    for o, shape in zip(obstacles, shapes):
        if not outer.covers(shape):
            raise MapValidationError(f"obstacle {o.name} lies outside the domain")
    for (a, sa), (b, sb) in combinations(zip(obstacles, shapes), 2):
        if sa.boundary.crosses(sb.boundary):
            raise CrossingPolygonsError(f"obstacles {a.name} and {b.name} cross")


def load_map(path: str | Path) -> MapDocument:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise MapParseError(f"cannot read map {path}: {e.strerror or e}") from None
    return parse_map(text, str(path))
