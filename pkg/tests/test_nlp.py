import numpy as np
import pytest

from tritraj.errors import InputError
from tritraj.nlp import ipm
from tritraj.nlp import FunctionProblem, SolverOptions, Status, check_derivatives, constraint_violation, solve

BACKENDS = ["ipm", "slsqp"]


def projection_problem():
    # closest point to (1, 2) on the line x + y = 1
    return FunctionProblem(
        objective=lambda w: (w[0] - 1) ** 2 + (w[1] - 2) ** 2,
        gradient=lambda w: np.array([2 * (w[0] - 1), 2 * (w[1] - 2)]),
        n=2,
        constraints=lambda w: np.array([w[0] + w[1]]),
        jacobian=lambda w: np.array([[1.0, 1.0]]),
        m=1,
        cl=[1.0],
        cu=[1.0],
    )


def hs071():
    def f(w):
        return w[0] * w[3] * (w[0] + w[1] + w[2]) + w[2]

    def g(w):
        return np.array([
            w[3] * (2 * w[0] + w[1] + w[2]),
            w[0] * w[3],
            w[0] * w[3] + 1,
            w[0] * (w[0] + w[1] + w[2]),
        ])

    def c(w):
        return np.array([np.prod(w), np.sum(w ** 2)])

    def j(w):
        p = np.prod(w)
        return np.array([[p / w[0], p / w[1], p / w[2], p / w[3]], 2 * w])

    return FunctionProblem(f, g, 4, c, j, 2, lb=np.ones(4), ub=np.full(4, 5.0), cl=[25.0, 40.0], cu=[np.inf, 40.0])


@pytest.mark.parametrize("backend", BACKENDS)
def test_equality_constrained_projection(backend):
    report = solve(projection_problem(), np.zeros(2), SolverOptions(backend=backend))
    assert report.status is Status.OPTIMAL
    assert report.w == pytest.approx([0.0, 1.0], abs=1e-4)
    assert report.violation <= 1e-6


@pytest.mark.parametrize("backend", BACKENDS)
def test_inequality_constrained_minimum(backend):
    p = FunctionProblem(
        objective=lambda w: w @ w,
        gradient=lambda w: 2 * w,
        n=2,
        constraints=lambda w: np.array([w[0] + w[1]]),
        jacobian=lambda w: np.array([[1.0, 1.0]]),
        m=1,
        cl=[1.0],
        cu=[np.inf],
    )
    report = solve(p, np.array([3.0, -1.0]), SolverOptions(backend=backend))
    assert report.ok
    assert report.w == pytest.approx([0.5, 0.5], abs=1e-4)
    assert report.objective == pytest.approx(0.5, abs=1e-4)


@pytest.mark.parametrize("backend", BACKENDS)
def test_active_variable_bound(backend):
    p = FunctionProblem(lambda w: (w[0] - 3) ** 2, lambda w: np.array([2 * (w[0] - 3)]), 1, ub=[2.0])
    report = solve(p, np.array([0.0]), SolverOptions(backend=backend))
    assert report.ok
    assert report.w[0] == pytest.approx(2.0, abs=1e-5)


@pytest.mark.parametrize("backend", BACKENDS)
def test_hs071(backend):
    report = solve(hs071(), np.array([1.0, 5.0, 5.0, 1.0]), SolverOptions(backend=backend, max_iter=1000))
    assert report.ok
    assert report.objective == pytest.approx(17.0140173, rel=1e-4)


def test_infeasible_problem_is_not_optimal():
    p = FunctionProblem(
        objective=lambda w: w[0] ** 2,
        gradient=lambda w: np.array([2 * w[0]]),
        n=1,
        constraints=lambda w: np.array([w[0] ** 2]),
        jacobian=lambda w: np.array([[2 * w[0]]]),
        m=1,
        cl=[-np.inf],
        cu=[-1.0],
    )
    report = solve(p, np.array([0.5]), SolverOptions(max_iter=200))
    assert report.status is not Status.OPTIMAL


def test_unknown_backend():
    with pytest.raises(InputError):
        solve(projection_problem(), np.zeros(2), SolverOptions(backend="snopt"))


def test_check_derivatives_flags_wrong_gradient():
    good = projection_problem()
    assert check_derivatives(good, np.array([0.3, -0.7])) < 1e-6
    bad = FunctionProblem(lambda w: w @ w, lambda w: w, 2)
    assert check_derivatives(bad, np.array([1.0, 2.0])) > 0.1


def test_constraint_violation_counts_bounds_and_rows():
    p = projection_problem()
    assert constraint_violation(p, np.array([0.0, 1.0])) == 0.0
    assert constraint_violation(p, np.array([1.0, 1.0])) == pytest.approx(1.0)


def test_options_replace():
    opts = SolverOptions().replace(backend="slsqp", max_iter=10)
    assert opts.backend == "slsqp"
    assert opts.max_iter == 10
    assert opts.feas_tol == SolverOptions().feas_tol


def test_nan_rejections_restart_with_every_line_search(monkeypatch):
    # two rejected trials per line search, three allowed
    monkeypatch.setattr(ipm, "MAX_NAN_REJECTIONS", 3)
    line_search = ipm.InteriorPointSolver._line_search
    evaluate = ipm.InteriorPointSolver._evaluate
    pending = [0]
    counts = []

    def rejecting_line_search(self, *args):
        pending[0] = 2
        result = line_search(self, *args)
        counts.append(self.nan_rejections)
        return result

    def rejecting_evaluate(self, x, with_jacobian=True):
        if not with_jacobian and pending[0]:
            pending[0] -= 1
            return None
        return evaluate(self, x, with_jacobian)

    monkeypatch.setattr(ipm.InteriorPointSolver, "_line_search", rejecting_line_search)
    monkeypatch.setattr(ipm.InteriorPointSolver, "_evaluate", rejecting_evaluate)
    p = FunctionProblem(lambda w: (w[0] - 3) ** 2, lambda w: np.array([2 * (w[0] - 3)]), 1, ub=[2.0])
    report = solve(p, np.array([0.0]), SolverOptions(backend="ipm"))
    assert report.status is Status.OPTIMAL
    assert report.w[0] == pytest.approx(2.0, abs=1e-5)
    assert len(counts) >= 2
    assert counts.count(2) >= 2
    assert max(counts) == 2
