from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings

from tritraj.cdt import adjacency, triangulate
from tritraj.dynamics import CarModel, VesselModel
from tritraj.mapio import load_map

settings.register_profile("default", max_examples=100, deadline=None)
settings.register_profile("fast", max_examples=20, deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

FIXTURES = Path(__file__).parent / "fixtures"


def scene(name: str):
    doc = load_map(FIXTURES / f"{name}.geojson")
    t = triangulate(doc.domain, doc.obstacles)
    return doc, t, adjacency(t)


@pytest.fixture
def fixtures() -> Path:
    return FIXTURES


@pytest.fixture
def car() -> CarModel:
    return CarModel()


@pytest.fixture
def vessel() -> VesselModel:
    return VesselModel()


@pytest.fixture
def square():
    return scene("square")


@pytest.fixture
def corridor():
    return scene("corridor")


@pytest.fixture
def ring():
    return scene("ring")


@pytest.fixture
def load_scene():
    return scene
