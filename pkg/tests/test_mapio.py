import json

import pytest

from tritraj.cdt import adjacency, locate, triangulate
from tritraj.errors import (
    CrossingPolygonsError,
    MapParseError,
    MapValidationError,
    MissingDomainError,
    ObstacleError,
)
from tritraj.mapio import LOCAL_CRS, load_map, parse_map


def feature(role, coords, fid=None, kind="Polygon", **props):
    out = {"type": "Feature", "properties": {"role": role, **props}, "geometry": {"type": kind, "coordinates": coords}}
    if fid is not None:
        out["id"] = fid
    return out


def collection(*features):
    return json.dumps({"type": "FeatureCollection", "features": list(features)})


BOX = [[[0, 0], [10, 0], [10, 10], [0, 10], [0, 0]]]


def test_square_has_no_obstacles(fixtures):
    doc = load_map(fixtures / "square.geojson")
    assert doc.obstacles == ()
    assert doc.crs == LOCAL_CRS
    assert doc.source.endswith("square.geojson")


def test_obstacle_ids_come_from_feature_id(fixtures):
    doc = load_map(fixtures / "harbor.geojson")
    assert doc.obstacle_ids == ("pier", "islet")


@pytest.mark.parametrize("name,error", [
    ("obstacle_outside", MapValidationError),
    ("crossing", CrossingPolygonsError),
    ("no_domain", MissingDomainError),
])
def test_invalid_fixtures(fixtures, name, error):
    with pytest.raises(error):
        load_map(fixtures / f"{name}.geojson")


def test_bad_json():
    with pytest.raises(MapParseError):
        parse_map("{not json")
    with pytest.raises(MapParseError):
        parse_map(json.dumps({"type": "Feature", "properties": {}, "geometry": None}))


def test_missing_file(tmp_path):
    with pytest.raises(MapParseError, match="cannot read map"):
        load_map(tmp_path / "absent.geojson")


def test_unknown_role():
    with pytest.raises(MapValidationError, match="role"):
        parse_map(collection(feature("domain", BOX), feature("buoy", [[[1, 1], [2, 1], [2, 2], [1, 1]]])))


def test_duplicate_obstacle_ids():
    a = feature("obstacle", [[[1, 1], [2, 1], [2, 2], [1, 1]]], fid="rock")
    b = feature("obstacle", [[[5, 5], [6, 5], [6, 6], [5, 5]]], fid="rock")
    with pytest.raises(MapValidationError, match="duplicate"):
        parse_map(collection(feature("domain", BOX), a, b))


def test_two_domains_rejected():
    with pytest.raises(MapValidationError, match="one domain"):
        parse_map(collection(feature("domain", BOX), feature("domain", BOX)))


def test_multipolygon_and_holes_become_obstacles():
    domain = feature("domain", [BOX[0], [[4, 4], [4, 6], [6, 6], [6, 4], [4, 4]]], name="bay")
    rocks = feature("obstacle", [[[[1, 1], [2, 1], [2, 2], [1, 1]]], [[[7, 7], [8, 7], [8, 8], [7, 7]]]],
                    kind="MultiPolygon", name="rocks")
    doc = parse_map(collection(domain, rocks))
    assert doc.obstacle_ids == ("rocks.0", "rocks.1", "bay.hole0")
    t = triangulate(doc.domain, doc.obstacles)
    with pytest.raises(ObstacleError):
        locate(t, (5.0, 5.0))


def test_fallback_ids():
    doc = parse_map(collection(feature("domain", BOX), feature("obstacle", [[[1, 1], [2, 1], [2, 2], [1, 1]]])))
    assert doc.obstacle_ids == ("obstacle-1",)


def test_harbor_triangulates(fixtures):
    doc = load_map(fixtures / "harbor.geojson")
    t = triangulate(doc.domain, doc.obstacles)
    graph = adjacency(t)
    assert len(graph.nodes) > 4
    with pytest.raises(ObstacleError):
        locate(t, (67.0, 30.0))
    assert locate(t, (20.0, 20.0)) in graph.neighbours
