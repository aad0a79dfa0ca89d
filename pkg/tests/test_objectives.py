import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from tritraj.dynamics import CarModel, VesselModel
from tritraj.errors import ObjectiveError
from tritraj.objectives import DEFAULT_TIME_CAP, Objective, ObjectiveKind, smooth_abs

small = st.floats(min_value=-2.0, max_value=2.0, allow_nan=False, allow_infinity=False)


def test_time_cost_is_one(car):
    obj = Objective(ObjectiveKind.TIME)
    assert obj.cost(car, np.zeros((5, 3)), np.zeros((5, 1))) == pytest.approx(np.ones(5))


def test_energy_needs_thrusters(car):
    with pytest.raises(ObjectiveError):
        Objective(ObjectiveKind.ENERGY).validate(car)


def test_energy_defaults_time_cap():
    assert Objective("energy").time_cap == DEFAULT_TIME_CAP
    assert Objective("time").time_cap is None
    with pytest.raises(ObjectiveError):
        Objective("time", epsilon=0.0)


def test_smooth_abs_bounds_abs():
    a = np.linspace(-3, 3, 31)
    s = smooth_abs(a, 1e-6)
    assert np.all(s >= np.abs(a))
    assert np.all(s - np.abs(a) <= 1e-3 + 1e-12)


def test_heuristics(car, vessel):
    x = np.array([0.0, 0.0, 0.0])
    goal = np.array([3.0, 4.0, 0.0])
    assert Objective("distance").heuristic(car, x, goal) == pytest.approx(5.0)
    assert Objective("time").heuristic(car, x, goal) == pytest.approx(5.0)
    xv = np.array([0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0])
    gv = np.array([3.0, 4.0, np.nan, np.nan, 0.0, 0.0, 0.0])
    assert Objective("time").heuristic(vessel, xv, gv) == pytest.approx(5.0 / vessel.u_max)
    assert Objective("energy").heuristic(vessel, xv, gv) == 0.0


@given(arrays(float, 7, elements=small), arrays(float, 2, elements=st.floats(0.0, 1.0)),
       st.sampled_from([ObjectiveKind.DISTANCE, ObjectiveKind.ENERGY]))
def test_vessel_cost_gradient(x, u, kind):
    vessel = VesselModel()
    u = u * np.array([400.0, 0.7])
    obj = Objective(kind, epsilon=1.0 if kind is ObjectiveKind.ENERGY else 1e-6)
    gx, gu = obj.cost_gradient(vessel, x, u)
    for i in range(7):
        e = np.zeros(7)
        e[i] = 1e-6
        fd = (obj.cost(vessel, x + e, u) - obj.cost(vessel, x - e, u)) / 2e-6
        assert gx[i] == pytest.approx(fd, abs=1e-3, rel=1e-4)
    for j in range(2):
        e = np.zeros(2)
        e[j] = 1e-6
        fd = (obj.cost(vessel, x, u + e) - obj.cost(vessel, x, u - e)) / 2e-6
        assert gu[j] == pytest.approx(fd, abs=1e-3, rel=1e-4)


def test_car_distance_rate_is_speed():
    car = CarModel(speed=2.0)
    assert Objective("distance").cost(car, np.zeros(3), np.zeros(1)) == pytest.approx(2.0)
