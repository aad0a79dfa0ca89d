from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.polynomial import polynomial as P


@dataclass(frozen=True)
class SplineSegment:
    """
    One polynomial piece over [t0, t0 + dt]. Coefficients are monomial in the
    normalized time tau in [0, 1], lowest order first, one column per
    component, in global coordinates.
    """

    t0: float
    dt: float
    state_coeffs: np.ndarray
    control_coeffs: np.ndarray

    @property
    def t1(self) -> float:
        return self.t0 + self.dt

    def state(self, tau) -> np.ndarray:
        return P.polyval(np.asarray(tau, dtype=float), self.state_coeffs).T

    def control(self, tau) -> np.ndarray:
        return P.polyval(np.asarray(tau, dtype=float), self.control_coeffs).T

    def state_derivative(self, tau, order: int = 1) -> np.ndarray:
        """Time derivative of the state, d^k x / dt^k."""
        coeffs = P.polyder(self.state_coeffs, order, axis=0) if order else self.state_coeffs
        return P.polyval(np.asarray(tau, dtype=float), coeffs).T / self.dt ** order


@dataclass(frozen=True)
class TrajectorySpline:
    segments: tuple[SplineSegment, ...]
    state_names: tuple[str, ...]
    control_names: tuple[str, ...]

    @classmethod
    def from_nodes(cls, t0: float, tau: np.ndarray, states: np.ndarray, controls: np.ndarray,
                   durations: np.ndarray, state_names=(), control_names=()) -> "TrajectorySpline":
        """
        Interpolate node values: states has shape (segments, d+1, nx) on
        tau, controls has shape (segments, d, nu) on tau[1:].
        """
        d = tau.size - 1
        segments = []
        t = float(t0)
        for X, U, dt in zip(states, controls, durations):
            sc = P.polyfit(tau, X, d)
            uc = P.polyfit(tau[1:], U, d - 1)
            segments.append(SplineSegment(t, float(dt), sc, uc))
            t += float(dt)
        return cls(tuple(segments), tuple(state_names), tuple(control_names))

    def __len__(self) -> int:
        return len(self.segments)

    @property
    def t0(self) -> float:
        return self.segments[0].t0

    @property
    def t_end(self) -> float:
        return self.segments[-1].t1

    @property
    def duration(self) -> float:
        return float(sum(s.dt for s in self.segments))

    @property
    def start(self) -> np.ndarray:
        return self.segments[0].state(0.0)

    @property
    def end(self) -> np.ndarray:
        return self.segments[-1].state(1.0)

    def locate(self, t: float) -> tuple[int, float]:
        for i, seg in enumerate(self.segments):
            if t <= seg.t1 or i == len(self.segments) - 1:
                return i, min(max((t - seg.t0) / seg.dt, 0.0), 1.0)
        raise ValueError("empty spline")

    def state_at(self, t: float) -> np.ndarray:
        i, tau = self.locate(t)
        return self.segments[i].state(tau)


@dataclass(frozen=True)
class Sample:
    t: float
    state: np.ndarray
    control: np.ndarray
    segment: int


def sample(spline: TrajectorySpline, n_per_segment: int) -> list[Sample]:
    """
    n_per_segment evenly spaced points per segment, the shared boundary point
    counted once, so the result holds segments * (n - 1) + 1 samples.
    """
    if n_per_segment < 2:
        raise ValueError(f"need at least 2 samples per segment, got {n_per_segment}")
    out: list[Sample] = []
    tau = np.linspace(0.0, 1.0, n_per_segment)
    for i, seg in enumerate(spline.segments):
        taus = tau if i == 0 else tau[1:]
        X = np.atleast_2d(seg.state(taus))
        U = np.atleast_2d(seg.control(taus))
        for k, s in enumerate(taus):
            out.append(Sample(seg.t0 + s * seg.dt, X[k], U[k], i))
    return out
