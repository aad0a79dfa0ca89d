from __future__ import annotations

import time
from typing import Callable

import numpy as np
from scipy.optimize import Bounds, minimize

from tritraj.errors import InputError
from tritraj.nlp.ipm import solve_ipm
from tritraj.nlp.problem import NLPProblem, SolveReport, SolverOptions, Status, constraint_violation


def solve_slsqp(problem: NLPProblem, w0: np.ndarray, options: SolverOptions | None = None) -> SolveReport:
    """Dense SQP fallback through scipy; practical for short sequences only."""
    opts = options or SolverOptions()
    started = time.perf_counter()
    scale = problem.objective_scale
    lb, ub = problem.bounds()
    cl, cu = problem.constraint_bounds()
    eq = np.flatnonzero(cl == cu)
    lo = np.flatnonzero((cl < cu) & np.isfinite(cl))
    hi = np.flatnonzero((cl < cu) & np.isfinite(cu))

    def dense_jac(w):
        return problem.jacobian(w).toarray()

    constraints = []
    if len(eq):
        constraints.append({
            "type": "eq",
            "fun": lambda w: problem.constraints(w)[eq] - cl[eq],
            "jac": lambda w: dense_jac(w)[eq],
        })
    if len(lo):
        constraints.append({
            "type": "ineq",
            "fun": lambda w: problem.constraints(w)[lo] - cl[lo],
            "jac": lambda w: dense_jac(w)[lo],
        })
    if len(hi):
        constraints.append({
            "type": "ineq",
            "fun": lambda w: cu[hi] - problem.constraints(w)[hi],
            "jac": lambda w: -dense_jac(w)[hi],
        })

    w0 = np.clip(np.asarray(w0, dtype=float), lb, ub)
    with np.errstate(all="ignore"):
        res = minimize(
            lambda w: scale * problem.objective(w),
            w0,
            jac=lambda w: scale * problem.gradient(w),
            method="SLSQP",
            bounds=Bounds(lb, ub),
            constraints=constraints,
            options=dict(maxiter=opts.max_iter, ftol=opts.opt_tol * 1e-2, disp=False),
        )
    w = np.asarray(res.x, dtype=float)
    finite = np.all(np.isfinite(w))
    if res.success:
        status = Status.OPTIMAL
    elif not finite:
        status = Status.DIVERGED
    elif res.status == 9:
        status = Status.MAX_ITER
    else:
        status = Status.INFEASIBLE
    return SolveReport(
        status=status,
        objective=float(problem.objective(w)) if finite else float("nan"),
        w=w,
        violation=constraint_violation(problem, w) if finite else float("inf"),
        kkt=float("nan"),
        iterations=int(res.nit),
        wall_time=time.perf_counter() - started,
        multipliers=np.zeros(problem.m),
        message=str(res.message),
    )


BACKENDS: dict[str, Callable[[NLPProblem, np.ndarray, SolverOptions], SolveReport]] = {
    "ipm": solve_ipm,
    "slsqp": solve_slsqp,
}


def solve(p: NLPProblem, w0: np.ndarray, opts: SolverOptions | None = None) -> SolveReport:
    """
    Solve `p` from `w0` with the backend named in `opts`. An Optimal status is
    only reported after the constraint violation has been recomputed at the
    returned point and found within feas_tol.
    """
    opts = opts or SolverOptions()
    try:
        backend = BACKENDS[opts.backend]
    except KeyError:
        raise InputError(f"unknown solver backend {opts.backend!r}; choose one of {', '.join(BACKENDS)}") from None
    report = backend(p, np.asarray(w0, dtype=float), opts)
    if report.status is Status.OPTIMAL:
        report.violation = constraint_violation(p, report.w)
        if report.violation > opts.feas_tol:
            report.status = Status.INFEASIBLE
            report.message = f"solution violates constraints by {report.violation:.3g}"
    return report
