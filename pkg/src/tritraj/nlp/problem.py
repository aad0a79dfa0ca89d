from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable

import numpy as np
from scipy import sparse


class Status(str, Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    MAX_ITER = "max-iter"
    DIVERGED = "diverged"


@dataclass(frozen=True)
class SolverOptions:
    feas_tol: float = 1e-6
    opt_tol: float = 1e-5
    max_iter: int = 500
    backend: str = "ipm"
    mu_init: float = 0.1

    def replace(self, **changes) -> "SolverOptions":
        values = {**self.__dict__, **changes}
        return SolverOptions(**values)


@dataclass
class SolveReport:
    status: Status
    objective: float
    w: np.ndarray
    violation: float
    kkt: float
    iterations: int
    wall_time: float
    multipliers: np.ndarray = field(default_factory=lambda: np.zeros(0))
    message: str = ""

    @property
    def ok(self) -> bool:
        return self.status is Status.OPTIMAL


class NLPProblem(ABC):
    """
    minimize F(w) subject to cl <= c(w) <= cu and lb <= w <= ub.
    Rows with cl == cu are equalities. The Jacobian is returned as a sparse
    matrix whose pattern never changes between evaluations.
    """

    objective_scale: float = 1.0

    @property
    @abstractmethod
    def n(self) -> int: ...

    @property
    @abstractmethod
    def m(self) -> int: ...

    @abstractmethod
    def bounds(self) -> tuple[np.ndarray, np.ndarray]: ...

    @abstractmethod
    def constraint_bounds(self) -> tuple[np.ndarray, np.ndarray]: ...

    @abstractmethod
    def objective(self, w: np.ndarray) -> float: ...

    @abstractmethod
    def gradient(self, w: np.ndarray) -> np.ndarray: ...

    @abstractmethod
    def constraints(self, w: np.ndarray) -> np.ndarray: ...

    @abstractmethod
    def jacobian(self, w: np.ndarray) -> sparse.csr_matrix: ...

    def jacobian_structure(self) -> tuple[np.ndarray, np.ndarray]:
        jac = self.jacobian(np.zeros(self.n)).tocoo()
        return jac.row, jac.col

    def blocks(self) -> list[np.ndarray]:
        """
        Index sets over which the Lagrangian Hessian is block diagonal.
        Variables not listed get their own 1x1 block.
        """
        return [np.arange(self.n)]


class FunctionProblem(NLPProblem):
    """Small dense problem assembled from plain callables."""

    def __init__(
        self,
        objective: Callable[[np.ndarray], float],
        gradient: Callable[[np.ndarray], np.ndarray],
        n: int,
        constraints: Callable[[np.ndarray], np.ndarray] | None = None,
        jacobian: Callable[[np.ndarray], np.ndarray] | None = None,
        m: int = 0,
        lb=None,
        ub=None,
        cl=None,
        cu=None,
    ):
        self._f = objective
        self._g = gradient
        self._c = constraints
        self._j = jacobian
        self._n = n
        self._m = m
        self._lb = np.full(n, -np.inf) if lb is None else np.asarray(lb, dtype=float)
        self._ub = np.full(n, np.inf) if ub is None else np.asarray(ub, dtype=float)
        self._cl = np.zeros(m) if cl is None else np.asarray(cl, dtype=float)
        self._cu = np.zeros(m) if cu is None else np.asarray(cu, dtype=float)

    @property
    def n(self):
        return self._n

    @property
    def m(self):
        return self._m

    def bounds(self):
        return self._lb, self._ub

    def constraint_bounds(self):
        return self._cl, self._cu

    def objective(self, w):
        return float(self._f(w))

    def gradient(self, w):
        return np.asarray(self._g(w), dtype=float)

    def constraints(self, w):
        if self._m == 0:
            return np.zeros(0)
        return np.asarray(self._c(w), dtype=float)

    def jacobian(self, w):
        if self._m == 0:
            return sparse.csr_matrix((0, self._n))
        dense = np.asarray(self._j(w), dtype=float).reshape(self._m, self._n)
        # keep a fixed full pattern so structural zeros never disappear
        rows, cols = np.indices(dense.shape)
        return sparse.csr_matrix((dense.ravel(), (rows.ravel(), cols.ravel())), shape=dense.shape)


def constraint_violation(p: NLPProblem, w: np.ndarray) -> float:
    """Infinity-norm violation of variable bounds and constraint bounds at w."""
    lb, ub = p.bounds()
    viol = [np.maximum(lb - w, 0.0), np.maximum(w - ub, 0.0)]
    if p.m:
        c = p.constraints(w)
        cl, cu = p.constraint_bounds()
        viol += [np.maximum(cl - c, 0.0), np.maximum(c - cu, 0.0)]
    flat = np.concatenate(viol)
    if not np.all(np.isfinite(flat)):
        return float("inf")
    return float(flat.max()) if flat.size else 0.0


def check_derivatives(p: NLPProblem, w: np.ndarray, step: float = 1e-6) -> float:
    """
    Largest relative mismatch between the analytic gradient/Jacobian and
    central differences, each entry measured against max(1, |fd|).
    """
    w = np.asarray(w, dtype=float)
    grad = p.gradient(w)
    jac = p.jacobian(w).toarray() if p.m else np.zeros((0, p.n))
    fd_grad = np.empty(p.n)
    fd_jac = np.empty((p.m, p.n))
    for i in range(p.n):
        h = step * max(1.0, abs(w[i]))
        wp, wm = w.copy(), w.copy()
        wp[i] += h
        wm[i] -= h
        fd_grad[i] = (p.objective(wp) - p.objective(wm)) / (2 * h)
        if p.m:
            fd_jac[:, i] = (p.constraints(wp) - p.constraints(wm)) / (2 * h)
    err = np.abs(grad - fd_grad) / np.maximum(1.0, np.abs(fd_grad))
    worst = float(err.max()) if err.size else 0.0
    if p.m:
        jerr = np.abs(jac - fd_jac) / np.maximum(1.0, np.abs(fd_jac))
        worst = max(worst, float(jerr.max()))
    return worst
