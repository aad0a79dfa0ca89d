from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.polynomial import legendre


def radau_points(degree: int) -> np.ndarray:
    """
    Right Radau points on [0, 1]: the roots of P_{d-1} - P_d shifted from
    [-1, 1]. The last point is always 1.
    """
    if degree < 1:
        raise ValueError(f"collocation degree must be at least 1, got {degree}")
    coef = np.zeros(degree + 1)
    coef[degree - 1] = 1.0
    coef[degree] = -1.0
    roots = np.sort(np.real(legendre.legroots(coef)))
    tau = (roots + 1.0) / 2.0
    tau[-1] = 1.0
    return tau


def barycentric_weights(nodes: np.ndarray) -> np.ndarray:
    diff = nodes[:, None] - nodes[None, :]
    np.fill_diagonal(diff, 1.0)
    return 1.0 / diff.prod(axis=1)


def differentiation_matrix(nodes: np.ndarray) -> np.ndarray:
    """D[j, k] = derivative of the k-th Lagrange basis polynomial at nodes[j]."""
    w = barycentric_weights(nodes)
    diff = nodes[:, None] - nodes[None, :]
    np.fill_diagonal(diff, 1.0)
    D = (w[None, :] / w[:, None]) / diff
    np.fill_diagonal(D, 0.0)
    np.fill_diagonal(D, -D.sum(axis=1))
    return D


def lagrange_basis(nodes: np.ndarray, t) -> np.ndarray:
    """Values of every Lagrange basis polynomial over `nodes` at the points t, shape (len(t), len(nodes))."""
    t = np.atleast_1d(np.asarray(t, dtype=float))
    out = np.ones((t.size, nodes.size))
    for k in range(nodes.size):
        for m in range(nodes.size):
            if m != k:
                out[:, k] *= (t - nodes[m]) / (nodes[k] - nodes[m])
    return out


def quadrature_weights(nodes: np.ndarray) -> np.ndarray:
    """Weights b with sum_j b_j nodes_j^k = 1/(k+1) for k < len(nodes)."""
    k = np.arange(nodes.size)
    V = nodes[None, :] ** k[:, None]
    return np.linalg.solve(V, 1.0 / (k + 1.0))


@dataclass(frozen=True)
class CollocationScheme:
    """
    Radau collocation on the unit interval. `tau` holds the d+1
    interpolation nodes (0 followed by the d collocation points), `D` the
    d x (d+1) differentiation rows at the collocation points and `b` the
    quadrature weights over the collocation points.
    """

    degree: int
    tau: np.ndarray
    D: np.ndarray
    b: np.ndarray

    @property
    def collocation_points(self) -> np.ndarray:
        return self.tau[1:]


@lru_cache(maxsize=None)
def collocation_scheme(degree: int) -> CollocationScheme:
    tau = np.concatenate([[0.0], radau_points(degree)])
    D = differentiation_matrix(tau)[1:]
    b = quadrature_weights(tau[1:])
    for arr in (tau, D, b):
        arr.setflags(write=False)
    return CollocationScheme(degree, tau, D, b)
