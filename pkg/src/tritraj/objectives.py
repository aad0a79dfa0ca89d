from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from tritraj.dynamics import CarModel, DynamicsModel, VesselModel
from tritraj.errors import ObjectiveError

DEFAULT_EPSILON = 1e-6
DEFAULT_TIME_CAP = 1200.0


class ObjectiveKind(str, Enum):
    TIME = "time"
    DISTANCE = "distance"
    ENERGY = "energy"


def smooth_abs(a, epsilon: float) -> np.ndarray:
    return np.sqrt(np.asarray(a, dtype=float) ** 2 + epsilon)


def car_distance_cost(x, u, speed: float = 1.0) -> np.ndarray:
    """Arc-length rate of the car, |v|; constant so distance equals time at unit speed."""
    x = np.asarray(x, dtype=float)
    return np.full(x.shape[:-1], abs(speed))


@dataclass(frozen=True)
class Objective:
    """
    Instantaneous cost J(x, u) and the admissible cost-to-go h(x, x_f).
    `u_max` overrides the model's top speed for the time heuristic and
    `time_cap` bounds the total duration of energy-optimal plans.
    """

    kind: ObjectiveKind = ObjectiveKind.TIME
    epsilon: float = DEFAULT_EPSILON
    u_max: float | None = None
    time_cap: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", ObjectiveKind(self.kind))
        if not self.epsilon > 0:
            raise ObjectiveError(f"smoothing epsilon must be positive, got {self.epsilon}")
        if self.kind is ObjectiveKind.ENERGY and self.time_cap is None:
            object.__setattr__(self, "time_cap", DEFAULT_TIME_CAP)
        if self.time_cap is not None and not self.time_cap > 0:
            raise ObjectiveError(f"time cap must be positive, got {self.time_cap}")

    def validate(self, model: DynamicsModel) -> None:
        if self.kind is ObjectiveKind.ENERGY and not isinstance(model, VesselModel):
            raise ObjectiveError(f"the energy objective needs thruster forces; {model.name} has none")

    @property
    def scale(self) -> float:
        """Multiplier applied to the cost inside the optimizer (energy is integrated in joules)."""
        return 1e-3 if self.kind is ObjectiveKind.ENERGY else 1.0

    @property
    def uses_time_cap(self) -> bool:
        return self.kind is ObjectiveKind.ENERGY and self.time_cap is not None

    def cost(self, model: DynamicsModel, x, u) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        u = np.asarray(u, dtype=float)
        if self.kind is ObjectiveKind.TIME:
            return np.ones(x.shape[:-1])
        if self.kind is ObjectiveKind.DISTANCE:
            if isinstance(model, CarModel):
                return car_distance_cost(x, u, model.speed)
            return smooth_abs(np.hypot(x[..., 4], x[..., 5]), self.epsilon)
        self.validate(model)
        tau = model.thrust(u)
        nu = x[..., 4:7]
        return np.sum(smooth_abs(tau * nu, self.epsilon), axis=-1)

    def cost_gradient(self, model: DynamicsModel, x, u) -> tuple[np.ndarray, np.ndarray]:
        x = np.asarray(x, dtype=float)
        u = np.asarray(u, dtype=float)
        gx = np.zeros(x.shape)
        gu = np.zeros(u.shape)
        if self.kind is ObjectiveKind.TIME or isinstance(model, CarModel):
            return gx, gu
        if self.kind is ObjectiveKind.DISTANCE:
            root = smooth_abs(np.hypot(x[..., 4], x[..., 5]), self.epsilon)
            gx[..., 4] = x[..., 4] / root
            gx[..., 5] = x[..., 5] / root
            return gx, gu
        tau = model.thrust(u)
        nu = x[..., 4:7]
        power = tau * nu
        dpower = power / smooth_abs(power, self.epsilon)
        gx[..., 4:7] = dpower * tau
        gu[...] = np.einsum("...k,...kj->...j", dpower * nu, model.thrust_jacobian(u))
        return gx, gu

    def heuristic(self, model: DynamicsModel, x, x_f) -> float:
        if self.kind is ObjectiveKind.ENERGY:
            return 0.0
        p, q = model.position_of(x), model.position_of(x_f)
        dist = math.hypot(p.x - q.x, p.y - q.y)
        if self.kind is ObjectiveKind.DISTANCE:
            return dist
        return dist / (self.u_max if self.u_max is not None else model.u_max)


def cost(obj: Objective, model: DynamicsModel, x, u) -> np.ndarray:
    return obj.cost(model, x, u)


def heuristic(obj: Objective, model: DynamicsModel, x, x_f) -> float:
    return obj.heuristic(model, x, x_f)
