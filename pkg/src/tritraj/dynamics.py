from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np
from scipy.optimize import brentq

from tritraj.errors import InputError, StateDimensionError
from tritraj.geometry import Point2


class DynamicsModel:
    """
    A dynamical system x' = f(x, u) with box bounds. All evaluators accept a
    single state of shape (nx,) or a stack of shape (k, nx) and broadcast.
    Position always occupies the first two state components.
    """

    name: str = "model"
    state_names: tuple[str, ...] = ()
    control_names: tuple[str, ...] = ()
    position_indices: tuple[int, int] = (0, 1)
    algebraic_count: int = 0

    @property
    def state_dim(self) -> int:
        return len(self.state_names)

    @property
    def control_dim(self) -> int:
        return len(self.control_names)

    def rhs(self, x: np.ndarray, u: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def rhs_jacobian(self, x: np.ndarray, u: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        raise NotImplementedError

    def algebraic(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Equality path constraints g(x) = 0 and their Jacobian."""
        x = np.asarray(x, dtype=float)
        lead = x.shape[:-1]
        return np.zeros(lead + (0,)), np.zeros(lead + (0, self.state_dim))

    def algebraic_indices(self) -> tuple[int, ...]:
        """State components the algebraic constraints act on."""
        return ()

    def state_bounds(self) -> tuple[np.ndarray, np.ndarray]:
        raise NotImplementedError

    def control_bounds(self) -> tuple[np.ndarray, np.ndarray]:
        raise NotImplementedError

    def control_scale(self) -> np.ndarray:
        return np.ones(self.control_dim)

    @property
    def u_max(self) -> float:
        raise NotImplementedError

    @property
    def nominal_speed(self) -> float:
        return self.u_max

    def position_of(self, x) -> Point2:
        i, j = self.position_indices
        return Point2(float(x[i]), float(x[j]))

    def parse_state(self, values: Sequence[float]) -> np.ndarray:
        """Complete a user-supplied state; NaN marks components left free."""
        raise NotImplementedError

    def guess_state(self, position, heading: float, speed: float) -> np.ndarray:
        raise NotImplementedError

    def guess_control(self, speed: float) -> np.ndarray:
        raise NotImplementedError

    def heading_of(self, x) -> float:
        raise NotImplementedError

    def pruning_weight(self) -> np.ndarray:
        w = np.full(self.state_dim, 1e-6)
        w[list(self.position_indices)] = 1.0
        return np.diag(w)


def bounds(model: DynamicsModel) -> tuple[tuple[np.ndarray, np.ndarray], tuple[np.ndarray, np.ndarray]]:
    return model.state_bounds(), model.control_bounds()


def position_of(model: DynamicsModel, x) -> Point2:
    return model.position_of(x)


@dataclass(frozen=True)
class CarModel(DynamicsModel):
    """Kinematic car at constant speed with a bounded turning rate."""

    speed: float = 1.0
    r_max: float = 1.0

    name = "car"
    state_names = ("x", "y", "psi")
    control_names = ("r",)

    def rhs(self, x, u):
        x = np.asarray(x, dtype=float)
        u = np.asarray(u, dtype=float)
        psi = x[..., 2]
        return np.stack([self.speed * np.cos(psi), self.speed * np.sin(psi), u[..., 0]], axis=-1)

    def rhs_jacobian(self, x, u):
        x = np.asarray(x, dtype=float)
        psi = x[..., 2]
        lead = x.shape[:-1]
        fx = np.zeros(lead + (3, 3))
        fx[..., 0, 2] = -self.speed * np.sin(psi)
        fx[..., 1, 2] = self.speed * np.cos(psi)
        fu = np.zeros(lead + (3, 1))
        fu[..., 2, 0] = 1.0
        return fx, fu

    def state_bounds(self):
        return np.full(3, -np.inf), np.full(3, np.inf)

    def control_bounds(self):
        return np.array([-self.r_max]), np.array([self.r_max])

    @property
    def u_max(self) -> float:
        return self.speed

    @property
    def turn_radius(self) -> float:
        return self.speed / self.r_max

    def parse_state(self, values):
        values = [float(v) for v in values]
        if len(values) == 2:
            return np.array(values + [np.nan])
        if len(values) == 3:
            return np.array(values)
        raise StateDimensionError(f"car states take 2 or 3 values (x,y[,psi]), got {len(values)}")

    def guess_state(self, position, heading, speed):
        p = tuple(position)
        return np.array([p[0], p[1], heading])

    def guess_control(self, speed):
        return np.zeros(1)

    def heading_of(self, x):
        return float(x[2])


def car_rhs(x, u, speed: float = 1.0) -> np.ndarray:
    return CarModel(speed=speed).rhs(x, u)


@dataclass(frozen=True)
class VesselModel(DynamicsModel):
    """
    3-DOF surface vessel with one azimuth thruster. Heading is carried as a
    unit complex number (zr, zi); body velocities are surge u, sway v and yaw
    rate r.
    """

    mass: tuple[float, float, float] = (2138.0, 2528.0, 3942.0)
    linear_damping: tuple[float, float, float] = (10.3, 13.0, 201.0)
    quadratic_damping: tuple[float, float, float] = (114.6, 200.8, 424.1)
    thruster_lever: float = 2.0
    max_thrust: float = 400.0
    max_azimuth: float = math.pi / 4
    surge_limits: tuple[float, float] = (-1.0, 3.0)
    max_sway: float = 2.0
    max_yaw_rate: float = 1.0

    name = "vessel"
    state_names = ("x", "y", "zr", "zi", "u", "v", "r")
    control_names = ("u1", "u2")
    algebraic_count = 1

    def thrust(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        f, a = u[..., 0], u[..., 1]
        return np.stack([f * np.cos(a), f * np.sin(a), -self.thruster_lever * f * np.sin(a)], axis=-1)

    def thrust_jacobian(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        f, a = u[..., 0], u[..., 1]
        c, s = np.cos(a), np.sin(a)
        jac = np.zeros(u.shape[:-1] + (3, 2))
        jac[..., 0, 0] = c
        jac[..., 0, 1] = -f * s
        jac[..., 1, 0] = s
        jac[..., 1, 1] = f * c
        jac[..., 2, 0] = -self.thruster_lever * s
        jac[..., 2, 1] = -self.thruster_lever * f * c
        return jac

    def resistance(self, nu) -> np.ndarray:
        """Combined Coriolis and damping forces C(nu) nu + D(nu) nu."""
        nu = np.asarray(nu, dtype=float)
        su, sv, sr = nu[..., 0], nu[..., 1], nu[..., 2]
        mu, mv, _ = self.mass
        d1, d2, d3 = self.linear_damping
        q1, q2, q3 = self.quadratic_damping
        return np.stack([
            d1 * su + q1 * np.abs(su) * su - mv * sv * sr,
            d2 * sv + q2 * np.abs(sv) * sv + mu * su * sr,
            d3 * sr + q3 * np.abs(sr) * sr + (mv - mu) * su * sv,
        ], axis=-1)

    def resistance_jacobian(self, nu) -> np.ndarray:
        nu = np.asarray(nu, dtype=float)
        su, sv, sr = nu[..., 0], nu[..., 1], nu[..., 2]
        mu, mv, _ = self.mass
        d1, d2, d3 = self.linear_damping
        q1, q2, q3 = self.quadratic_damping
        jac = np.zeros(nu.shape[:-1] + (3, 3))
        jac[..., 0, 0] = d1 + 2 * q1 * np.abs(su)
        jac[..., 0, 1] = -mv * sr
        jac[..., 0, 2] = -mv * sv
        jac[..., 1, 0] = mu * sr
        jac[..., 1, 1] = d2 + 2 * q2 * np.abs(sv)
        jac[..., 1, 2] = mu * su
        jac[..., 2, 0] = (mv - mu) * sv
        jac[..., 2, 1] = (mv - mu) * su
        jac[..., 2, 2] = d3 + 2 * q3 * np.abs(sr)
        return jac

    def rhs(self, x, u):
        x = np.asarray(x, dtype=float)
        zr, zi = x[..., 2], x[..., 3]
        su, sv, sr = x[..., 4], x[..., 5], x[..., 6]
        nu_dot = (self.thrust(u) - self.resistance(x[..., 4:7])) / np.asarray(self.mass)
        return np.concatenate([
            np.stack([zr * su - zi * sv, zi * su + zr * sv, -zi * sr, zr * sr], axis=-1),
            nu_dot,
        ], axis=-1)

    def rhs_jacobian(self, x, u):
        x = np.asarray(x, dtype=float)
        zr, zi = x[..., 2], x[..., 3]
        su, sv, sr = x[..., 4], x[..., 5], x[..., 6]
        lead = x.shape[:-1]
        fx = np.zeros(lead + (7, 7))
        fx[..., 0, 2] = su
        fx[..., 0, 3] = -sv
        fx[..., 0, 4] = zr
        fx[..., 0, 5] = -zi
        fx[..., 1, 2] = sv
        fx[..., 1, 3] = su
        fx[..., 1, 4] = zi
        fx[..., 1, 5] = zr
        fx[..., 2, 3] = -sr
        fx[..., 2, 6] = -zi
        fx[..., 3, 2] = sr
        fx[..., 3, 6] = zr
        m = np.asarray(self.mass)
        fx[..., 4:7, 4:7] = -self.resistance_jacobian(x[..., 4:7]) / m[:, None]
        fu = np.zeros(lead + (7, 2))
        fu[..., 4:7, :] = self.thrust_jacobian(u) / m[:, None]
        return fx, fu

    def algebraic(self, x):
        x = np.asarray(x, dtype=float)
        zr, zi = x[..., 2], x[..., 3]
        g = (zr * zr + zi * zi - 1.0)[..., None]
        gx = np.zeros(x.shape[:-1] + (1, 7))
        gx[..., 0, 2] = 2 * zr
        gx[..., 0, 3] = 2 * zi
        return g, gx

    def algebraic_indices(self):
        return (2, 3)

    def state_bounds(self):
        lo = np.array([-np.inf, -np.inf, -np.inf, -np.inf, self.surge_limits[0], -self.max_sway, -self.max_yaw_rate])
        hi = np.array([np.inf, np.inf, np.inf, np.inf, self.surge_limits[1], self.max_sway, self.max_yaw_rate])
        return lo, hi

    def control_bounds(self):
        return np.array([0.0, -self.max_azimuth]), np.array([self.max_thrust, self.max_azimuth])

    def control_scale(self):
        return np.array([100.0, 1.0])

    @cached_property
    def u_max(self) -> float:
        """Steady surge speed at full thrust: max_thrust = d1 u + q1 |u| u."""
        d1, q1 = self.linear_damping[0], self.quadratic_damping[0]
        return float(brentq(lambda s: d1 * s + q1 * s * s - self.max_thrust, 0.0, self.surge_limits[1] * 10))

    @property
    def nominal_speed(self) -> float:
        return 0.5 * self.u_max

    def parse_state(self, values):
        values = [float(v) for v in values]
        if len(values) == 2:
            return np.array(values + [np.nan, np.nan, 0.0, 0.0, 0.0])
        if len(values) == 7:
            state = np.array(values)
            norm = math.hypot(state[2], state[3])
            if abs(norm - 1.0) > 1e-6:
                raise StateDimensionError(f"orientation ({state[2]:g}, {state[3]:g}) must have unit norm")
            return state
        raise StateDimensionError(f"vessel states take 2 or 7 values (x,y[,zr,zi,u,v,r]), got {len(values)}")

    def guess_state(self, position, heading, speed):
        p = tuple(position)
        return np.array([p[0], p[1], math.cos(heading), math.sin(heading), speed, 0.0, 0.0])

    def guess_control(self, speed):
        d1, q1 = self.linear_damping[0], self.quadratic_damping[0]
        force = min(d1 * speed + q1 * abs(speed) * speed, self.max_thrust)
        return np.array([max(force, 0.0), 0.0])

    def heading_of(self, x):
        return math.atan2(float(x[3]), float(x[2]))


def vessel_rhs(x, u) -> np.ndarray:
    return VesselModel().rhs(x, u)


MODELS = {"car": CarModel, "vessel": VesselModel}


def make_model(name: str) -> DynamicsModel:
    try:
        return MODELS[name]()
    except KeyError:
        raise InputError(f"unknown model {name!r}") from None
