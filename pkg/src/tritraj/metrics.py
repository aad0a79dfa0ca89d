from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import simpson

from tritraj.dynamics import DynamicsModel, VesselModel
from tritraj.transcription import TrajectorySpline

SPEED_GUARD = 1e-9


@dataclass
class TrajectoryMetrics:
    time_s: float
    distance_m: float
    energy_kJ: float | None
    max_abs_curvature: float
    curvature: list[tuple[float, float | None]] = field(default_factory=list)

    def as_dict(self) -> dict:
        return {
            "time_s": self.time_s,
            "distance_m": self.distance_m,
            "energy_kJ": self.energy_kJ,
            "max_abs_curvature": self.max_abs_curvature,
        }


def curvature(velocity: np.ndarray, acceleration: np.ndarray) -> np.ndarray:
    """
    Signed planar curvature (x' y'' - y' x'') / |v|^3 per row. NaN where the
    speed is below the guard.
    """
    vx, vy = velocity[..., 0], velocity[..., 1]
    ax, ay = acceleration[..., 0], acceleration[..., 1]
    speed = np.hypot(vx, vy)
    kappa = np.full(speed.shape, np.nan)
    ok = speed >= SPEED_GUARD
    kappa[ok] = (vx[ok] * ay[ok] - vy[ok] * ax[ok]) / speed[ok] ** 3
    return kappa


def power(model: VesselModel, states: np.ndarray, controls: np.ndarray) -> np.ndarray:
    """Unsmoothed mechanical power sum_k |tau_k nu_k| in watts."""
    return np.sum(np.abs(model.thrust(controls) * states[..., 4:7]), axis=-1)


def metrics(spline: TrajectorySpline, model: DynamicsModel, samples_per_segment: int = 20) -> TrajectoryMetrics:
    """
    Totals and the curvature profile of a planned trajectory, all read from
    the same dense samples. Distance and energy use Simpson's rule per
    segment on analytic spline derivatives. Energy is None for models
    without thrusters.
    """
    n = max(int(samples_per_segment), 2) + 1
    i, j = model.position_indices
    tau = np.linspace(0.0, 1.0, n)
    distance = 0.0
    energy = 0.0 if isinstance(model, VesselModel) else None
    profile: list[tuple[float, float | None]] = []
    for k, seg in enumerate(spline.segments):
        t = seg.t0 + tau * seg.dt
        vel = np.atleast_2d(seg.state_derivative(tau, 1))[:, [i, j]]
        acc = np.atleast_2d(seg.state_derivative(tau, 2))[:, [i, j]]
        distance += float(simpson(np.hypot(vel[:, 0], vel[:, 1]), x=t))
        if energy is not None:
            X = np.atleast_2d(seg.state(tau))
            U = np.atleast_2d(seg.control(tau))
            energy += float(simpson(power(model, X, U), x=t)) / 1000.0
        kappa = curvature(vel, acc)
        start = 0 if k == 0 else 1
        profile.extend((float(tt), None if np.isnan(kk) else float(kk)) for tt, kk in zip(t[start:], kappa[start:]))
    defined = [abs(kk) for _, kk in profile if kk is not None]
    return TrajectoryMetrics(
        time_s=spline.duration,
        distance_m=distance,
        energy_kJ=energy,
        max_abs_curvature=max(defined, default=0.0),
        curvature=profile,
    )
