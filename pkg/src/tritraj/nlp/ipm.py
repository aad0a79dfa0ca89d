"""
Primal-dual interior-point method with a filter line search.

Inequality rows get slack variables, so the solver works on

    min f(w)  s.t.  c_E(w) - c_E = 0,  c_I(w) - s = 0,  xl <= (w, s) <= xu

with a log barrier on the bounds. The Lagrangian Hessian is approximated by
damped BFGS matrices, one per variable block declared by the problem, and
each Newton step solves the sparse KKT system with a small negative diagonal
on the constraint block to absorb rank-deficient Jacobians.
"""
from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import splu

from tritraj.nlp.problem import NLPProblem, SolveReport, SolverOptions, Status, constraint_violation

TAU_MIN = 0.99
KAPPA_EPS = 10.0
KAPPA_MU = 0.2
THETA_MU = 1.5
S_MAX = 100.0
GAMMA_THETA = 1e-5
GAMMA_PHI = 1e-8
GAMMA_ALPHA = 0.05
DELTA_SWITCH = 1.0
S_THETA = 1.1
S_PHI = 2.3
ETA_PHI = 1e-4
KAPPA_SIGMA = 1e10
KAPPA_SOC = 0.99
PUSH = 1e-2
MAX_NAN_REJECTIONS = 30
MAX_RESTORATION = 100


@dataclass
class _Point:
    """Cached evaluation of the barrier problem at one primal point."""

    x: np.ndarray
    f: float
    g: np.ndarray
    r: np.ndarray
    J: sparse.csr_matrix | None = None


class _Filter:
    def __init__(self):
        self.entries: list[tuple[float, float]] = []

    def rejects(self, theta: float, phi: float) -> bool:
        return any(theta >= tf and phi >= pf for tf, pf in self.entries)

    def add(self, theta: float, phi: float) -> None:
        theta_f = (1 - GAMMA_THETA) * theta
        phi_f = phi - GAMMA_PHI * theta
        self.entries = [(t, p) for t, p in self.entries if not (t >= theta_f and p >= phi_f)]
        self.entries.append((theta_f, phi_f))

    def reset(self) -> None:
        self.entries.clear()


class _BlockBFGS:
    """Damped (Powell) BFGS approximation kept per variable block."""

    def __init__(self, n: int, blocks: list[np.ndarray]):
        covered = np.zeros(n, dtype=bool)
        self.blocks = []
        for idx in blocks:
            idx = np.asarray(idx, dtype=int)
            self.blocks.append(idx)
            covered[idx] = True
        for i in np.flatnonzero(~covered):
            self.blocks.append(np.array([i]))
        self.B = [np.eye(len(idx)) for idx in self.blocks]
        self.fresh = [True] * len(self.blocks)
        rows, cols = [], []
        for idx in self.blocks:
            rr, cc = np.meshgrid(idx, idx, indexing="ij")
            rows.append(rr.ravel())
            cols.append(cc.ravel())
        self.rows = np.concatenate(rows) if rows else np.zeros(0, dtype=int)
        self.cols = np.concatenate(cols) if cols else np.zeros(0, dtype=int)
        self.n = n

    def matrix(self, size: int) -> sparse.coo_matrix:
        data = np.concatenate([B.ravel() for B in self.B]) if self.B else np.zeros(0)
        return sparse.coo_matrix((data, (self.rows, self.cols)), shape=(size, size))

    def update(self, s: np.ndarray, y: np.ndarray) -> None:
        for k, idx in enumerate(self.blocks):
            sk, yk = s[idx], y[idx]
            ss = float(sk @ sk)
            if ss <= 1e-20:
                continue
            sy = float(sk @ yk)
            if self.fresh[k] and sy > 1e-12:
                self.B[k] = (float(yk @ yk) / sy) * np.eye(len(idx))
            self.fresh[k] = False
            B = self.B[k]
            Bs = B @ sk
            sBs = float(sk @ Bs)
            if sBs <= 1e-20:
                continue
            if sy < 0.2 * sBs:
                theta = 0.8 * sBs / (sBs - sy)
                r = theta * yk + (1 - theta) * Bs
            else:
                r = yk
            sr = float(sk @ r)
            self.B[k] = B - np.outer(Bs, Bs) / sBs + np.outer(r, r) / sr


class InteriorPointSolver:
    def __init__(self, problem: NLPProblem, options: SolverOptions | None = None):
        self.p = problem
        self.opts = options or SolverOptions()
        n = problem.n
        lb, ub = problem.bounds()
        cl, cu = problem.constraint_bounds()
        cl = np.asarray(cl, dtype=float)
        cu = np.asarray(cu, dtype=float)
        self.eq = np.flatnonzero(cl == cu)
        self.ineq = np.flatnonzero((cl < cu) & (np.isfinite(cl) | np.isfinite(cu)))
        self.rows = np.concatenate([self.eq, self.ineq]).astype(int)
        self.target_eq = cl[self.eq]
        self.n = n
        self.ns = len(self.ineq)
        self.N = n + self.ns
        self.m = len(self.rows)
        self.xl = np.concatenate([np.asarray(lb, dtype=float), cl[self.ineq]])
        self.xu = np.concatenate([np.asarray(ub, dtype=float), cu[self.ineq]])
        self.has_l = np.isfinite(self.xl)
        self.has_u = np.isfinite(self.xu)
        self._xl0 = np.where(self.has_l, self.xl, 0.0)
        self._xu0 = np.where(self.has_u, self.xu, 0.0)
        self.scale = float(problem.objective_scale)
        slack = sparse.coo_matrix(
            (-np.ones(self.ns), (len(self.eq) + np.arange(self.ns), n + np.arange(self.ns))),
            shape=(self.m, self.N),
        )
        self._slack_jac = slack.tocsr()
        self.bfgs = _BlockBFGS(n, problem.blocks())
        self.iterations = 0
        self.nan_rejections = 0

    # --- evaluation -------------------------------------------------------

    def _evaluate(self, x: np.ndarray, with_jacobian: bool = True) -> _Point | None:
        w = x[: self.n]
        try:
            f = self.scale * self.p.objective(w)
            c = self.p.constraints(w) if self.p.m else np.zeros(0)
        except (FloatingPointError, OverflowError, ValueError, ZeroDivisionError):
            return None
        if not np.isfinite(f) or not np.all(np.isfinite(c)):
            return None
        r = np.concatenate([c[self.eq] - self.target_eq, c[self.ineq] - x[self.n:]])
        g = np.zeros(self.N)
        g[: self.n] = self.scale * self.p.gradient(w)
        if not np.all(np.isfinite(g)):
            return None
        J = None
        if with_jacobian:
            J = self._full_jacobian(w)
            if not np.all(np.isfinite(J.data)):
                return None
        return _Point(x, f, g, r, J)

    def _full_jacobian(self, w: np.ndarray) -> sparse.csr_matrix:
        if self.m == 0:
            return sparse.csr_matrix((0, self.N))
        Jw = self.p.jacobian(w).tocsr()[self.rows]
        Jw = sparse.hstack([Jw, sparse.csr_matrix((self.m, self.ns))], format="csr")
        return (Jw + self._slack_jac).tocsr()

    def _ensure_jacobian(self, pt: _Point) -> None:
        if pt.J is None:
            pt.J = self._full_jacobian(pt.x[: self.n])

    # --- barrier helpers ----------------------------------------------------

    def _gaps(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        gl = np.where(self.has_l, x - self._xl0, 1.0)
        gu = np.where(self.has_u, self._xu0 - x, 1.0)
        return gl, gu

    def _barrier(self, pt: _Point, mu: float) -> float:
        gl, gu = self._gaps(pt.x)
        return pt.f - mu * (np.sum(np.log(gl[self.has_l])) + np.sum(np.log(gu[self.has_u])))

    def _barrier_gradient(self, pt: _Point, mu: float) -> np.ndarray:
        gl, gu = self._gaps(pt.x)
        return pt.g - mu * np.where(self.has_l, 1.0 / gl, 0.0) + mu * np.where(self.has_u, 1.0 / gu, 0.0)

    def _push_inside(self, x: np.ndarray) -> np.ndarray:
        x = x.copy()
        width = np.where(self.has_l & self.has_u, self._xu0 - self._xl0, np.inf)
        pl = np.minimum(PUSH * np.maximum(1.0, np.abs(self._xl0)), PUSH * width)
        pu = np.minimum(PUSH * np.maximum(1.0, np.abs(self._xu0)), PUSH * width)
        x = np.where(self.has_l, np.maximum(x, self._xl0 + pl), x)
        x = np.where(self.has_u, np.minimum(x, self._xu0 - pu), x)
        both = self.has_l & self.has_u & (self._xu0 - self._xl0 <= 0)
        x[both] = self._xl0[both]
        return x

    def _max_step(self, v: np.ndarray, dv: np.ndarray, lower: np.ndarray, upper: np.ndarray,
                  has_l: np.ndarray, has_u: np.ndarray, tau: float) -> float:
        alpha = 1.0
        dec = has_l & (dv < 0)
        if np.any(dec):
            alpha = min(alpha, float(np.min(-tau * (v[dec] - lower[dec]) / dv[dec])))
        inc = has_u & (dv > 0)
        if np.any(inc):
            alpha = min(alpha, float(np.min(tau * (upper[inc] - v[inc]) / dv[inc])))
        return alpha

    # --- linear algebra -------------------------------------------------------

    def _factor(self, sigma: np.ndarray, J: sparse.csr_matrix, mu: float, hessian=None):
        H = self.bfgs.matrix(self.N) if hessian is None else hessian
        delta_c = 1e-8 * mu ** 0.25
        delta_w = 0.0
        for _ in range(8):
            W = (H + sparse.diags(sigma + delta_w)).tocsc()
            if self.m:
                K = sparse.bmat([[W, J.T], [J, -delta_c * sparse.identity(self.m)]], format="csc")
            else:
                K = W
            try:
                return splu(K)
            except RuntimeError:
                delta_w = max(1e-4, 10 * delta_w)
        return None

    def _solve(self, lu, rhs_x: np.ndarray, rhs_c: np.ndarray) -> tuple[np.ndarray, np.ndarray] | None:
        sol = lu.solve(np.concatenate([rhs_x, rhs_c]))
        if not np.all(np.isfinite(sol)):
            return None
        return sol[: self.N], sol[self.N:]

    # --- error measures -------------------------------------------------------

    def _errors(self, pt: _Point, lam, zl, zu, mu: float) -> tuple[float, float, float]:
        self._ensure_jacobian(pt)
        dual = pt.g - zl + zu
        if self.m:
            dual = dual + pt.J.T @ lam
        gl, gu = self._gaps(pt.x)
        comp = np.concatenate([(gl * zl - mu)[self.has_l], (gu * zu - mu)[self.has_u]])
        nb = int(np.sum(self.has_l) + np.sum(self.has_u))
        zsum = float(np.sum(np.abs(zl)) + np.sum(np.abs(zu)))
        s_d = max(S_MAX, (float(np.sum(np.abs(lam))) + zsum) / max(1, self.m + nb)) / S_MAX
        s_c = max(S_MAX, zsum / max(1, nb)) / S_MAX
        dual_err = float(np.max(np.abs(dual))) / s_d if dual.size else 0.0
        comp_err = float(np.max(np.abs(comp))) / s_c if comp.size else 0.0
        primal = float(np.max(np.abs(pt.r))) if pt.r.size else 0.0
        return dual_err, primal, comp_err

    # --- main loop --------------------------------------------------------------

    def solve(self, w0: np.ndarray) -> SolveReport:
        started = time.perf_counter()
        opts = self.opts
        w0 = np.asarray(w0, dtype=float)
        try:
            c0 = self.p.constraints(w0) if self.p.m else np.zeros(0)
        except (FloatingPointError, OverflowError, ValueError, ZeroDivisionError):
            c0 = np.full(self.p.m, np.nan)
        x = np.concatenate([w0, np.nan_to_num(c0[self.ineq])])
        x = self._push_inside(x)
        pt = self._evaluate(x)
        if pt is None:
            return self._report(Status.DIVERGED, None, np.zeros(self.m), started, "non-finite values at the starting point")

        lam = np.zeros(self.m)
        zl = np.where(self.has_l, 1.0, 0.0)
        zu = np.where(self.has_u, 1.0, 0.0)
        mu = opts.mu_init
        mu_floor = min(opts.feas_tol, opts.opt_tol) / 10.0
        filt = _Filter()
        theta0 = float(np.sum(np.abs(pt.r)))
        theta_max = 1e4 * max(1.0, theta0)
        theta_min = 1e-4 * max(1.0, theta0)

        while True:
            dual_err, primal, comp_err = self._errors(pt, lam, zl, zu, 0.0)
            if primal <= opts.feas_tol and dual_err <= opts.opt_tol and comp_err <= opts.opt_tol:
                return self._report(Status.OPTIMAL, pt, lam, started, "converged", max(dual_err, comp_err))
            if self.iterations >= opts.max_iter:
                return self._report(Status.MAX_ITER, pt, lam, started, "iteration limit", max(dual_err, comp_err))

            while mu > mu_floor:
                d_mu, p_mu, c_mu = self._errors(pt, lam, zl, zu, mu)
                if max(d_mu, p_mu, c_mu) > KAPPA_EPS * mu:
                    break
                mu = max(mu_floor, min(KAPPA_MU * mu, mu ** THETA_MU))
                filt.reset()
            tau = max(TAU_MIN, 1.0 - mu)

            gl, gu = self._gaps(pt.x)
            sigma = np.where(self.has_l, zl / gl, 0.0) + np.where(self.has_u, zu / gu, 0.0)
            lu = self._factor(sigma, pt.J, mu)
            if lu is None:
                return self._report(Status.DIVERGED, pt, lam, started, "KKT factorization failed")
            grad_phi = self._barrier_gradient(pt, mu)
            step = self._solve(lu, -grad_phi, -pt.r)
            if step is None:
                return self._report(Status.DIVERGED, pt, lam, started, "non-finite Newton step")
            dx, lam_plus = step
            dlam = lam_plus - lam
            dzl = np.where(self.has_l, mu / gl - zl - (zl / gl) * dx, 0.0)
            dzu = np.where(self.has_u, mu / gu - zu + (zu / gu) * dx, 0.0)

            alpha_max = self._max_step(pt.x, dx, self._xl0, self._xu0, self.has_l, self.has_u, tau)
            zeros = np.zeros(self.N)
            alpha_z = min(
                self._max_step(zl, dzl, zeros, zeros, self.has_l, np.zeros(self.N, dtype=bool), tau),
                self._max_step(zu, dzu, zeros, zeros, self.has_u, np.zeros(self.N, dtype=bool), tau),
            )

            result = self._line_search(pt, dx, lu, mu, tau, alpha_max, filt, theta_max, theta_min, grad_phi)
            if result == "diverged":
                return self._report(Status.DIVERGED, pt, lam, started, "repeated non-finite trial points")
            self.iterations += 1
            if result is None:
                filt.add(float(np.sum(np.abs(pt.r))), self._barrier(pt, mu))
                restored = self._restore(pt, mu, filt)
                if restored is None:
                    return self._report(Status.INFEASIBLE, pt, lam, started, "feasibility restoration failed")
                new_pt = restored
                gl_new, gu_new = self._gaps(new_pt.x)
                zl = np.where(self.has_l, mu / gl_new, 0.0)
                zu = np.where(self.has_u, mu / gu_new, 0.0)
                self._ensure_jacobian(new_pt)
                lam = np.zeros(self.m)
                pt = new_pt
                continue

            new_pt, alpha = result
            self._ensure_jacobian(new_pt)
            lam_new = lam + alpha * dlam
            zl = zl + alpha_z * dzl
            zu = zu + alpha_z * dzu
            gl_new, gu_new = self._gaps(new_pt.x)
            zl = np.where(self.has_l, np.clip(zl, mu / (KAPPA_SIGMA * gl_new), KAPPA_SIGMA * mu / gl_new), 0.0)
            zu = np.where(self.has_u, np.clip(zu, mu / (KAPPA_SIGMA * gu_new), KAPPA_SIGMA * mu / gu_new), 0.0)

            s = (new_pt.x - pt.x)[: self.n]
            y = new_pt.g[: self.n] - pt.g[: self.n]
            if self.m:
                y = y + (new_pt.J.T @ lam_new)[: self.n] - (pt.J.T @ lam_new)[: self.n]
            self.bfgs.update(s, y)
            lam = lam_new
            pt = new_pt

    def _line_search(self, pt, dx, lu, mu, tau, alpha_max, filt, theta_max, theta_min, grad_phi):
        self.nan_rejections = 0
        theta = float(np.sum(np.abs(pt.r)))
        phi = self._barrier(pt, mu)
        slope = float(grad_phi @ dx)
        if slope < 0:
            alpha_min = GAMMA_ALPHA * min(
                GAMMA_THETA,
                GAMMA_PHI * theta / -slope,
                DELTA_SWITCH * theta ** S_THETA / (-slope) ** S_PHI,
            )
        else:
            alpha_min = GAMMA_ALPHA * GAMMA_THETA
        alpha_min = max(alpha_min, 1e-14)
        alpha = alpha_max
        first = True
        while alpha >= alpha_min:
            trial = self._evaluate(pt.x + alpha * dx, with_jacobian=False)
            if trial is None:
                self.nan_rejections += 1
                if self.nan_rejections >= MAX_NAN_REJECTIONS:
                    return "diverged"
                alpha *= 0.5
                first = False
                continue
            verdict = self._acceptable(trial, theta, phi, slope, alpha, mu, filt, theta_max, theta_min)
            if verdict:
                return trial, alpha
            theta_t = float(np.sum(np.abs(trial.r)))
            if first and theta_t >= theta:
                soc = self._second_order(pt, trial, dx, lu, mu, tau, alpha, theta, phi, slope, filt, theta_max, theta_min, grad_phi)
                if soc is not None:
                    return soc
            first = False
            alpha *= 0.5
        return None

    def _acceptable(self, trial, theta, phi, slope, alpha, mu, filt, theta_max, theta_min) -> bool:
        theta_t = float(np.sum(np.abs(trial.r)))
        phi_t = self._barrier(trial, mu)
        if not np.isfinite(phi_t) or theta_t > theta_max or filt.rejects(theta_t, phi_t):
            return False
        switching = slope < 0 and alpha * (-slope) ** S_PHI > DELTA_SWITCH * theta ** S_THETA
        if theta <= theta_min and switching:
            return phi_t <= phi + ETA_PHI * alpha * slope
        if theta_t <= (1 - GAMMA_THETA) * theta or phi_t <= phi - GAMMA_PHI * theta:
            filt.add(theta, phi)
            return True
        return False

    def _second_order(self, pt, trial, dx, lu, mu, tau, alpha, theta, phi, slope, filt, theta_max, theta_min, grad_phi):
        c_soc = alpha * pt.r + trial.r
        theta_old = theta
        for _ in range(4):
            step = self._solve(lu, -grad_phi, -c_soc)
            if step is None:
                return None
            dx_soc = step[0]
            alpha_soc = self._max_step(pt.x, dx_soc, self._xl0, self._xu0, self.has_l, self.has_u, tau)
            cand = self._evaluate(pt.x + alpha_soc * dx_soc, with_jacobian=False)
            if cand is None:
                return None
            if self._acceptable(cand, theta, phi, slope, alpha, mu, filt, theta_max, theta_min):
                return cand, alpha_soc
            theta_soc = float(np.sum(np.abs(cand.r)))
            if theta_soc > KAPPA_SOC * theta_old:
                return None
            theta_old = theta_soc
            c_soc = alpha_soc * c_soc + cand.r
        return None

    def _restore(self, pt: _Point, mu: float, filt: _Filter) -> _Point | None:
        """
        Minimum-norm steps towards feasibility that stay inside the bounds,
        until the point is acceptable to the filter again.
        """
        theta_start = float(np.sum(np.abs(pt.r)))
        if self.m == 0:
            return None
        zeta = max(np.sqrt(mu), 1e-4)
        cur = pt
        theta = theta_start
        for _ in range(MAX_RESTORATION):
            if self.iterations >= self.opts.max_iter:
                return None
            self._ensure_jacobian(cur)
            gl, gu = self._gaps(cur.x)
            sigma = np.where(self.has_l, mu / gl ** 2, 0.0) + np.where(self.has_u, mu / gu ** 2, 0.0)
            lu = self._factor(sigma + zeta, cur.J, mu, hessian=sparse.csr_matrix((self.N, self.N)))
            if lu is None:
                return None
            grad_b = -mu * np.where(self.has_l, 1.0 / gl, 0.0) + mu * np.where(self.has_u, 1.0 / gu, 0.0)
            step = self._solve(lu, -grad_b, -cur.r)
            if step is None:
                return None
            dx = step[0]
            alpha = self._max_step(cur.x, dx, self._xl0, self._xu0, self.has_l, self.has_u, max(TAU_MIN, 1 - mu))
            accepted = None
            while alpha > 1e-10:
                cand = self._evaluate(cur.x + alpha * dx, with_jacobian=False)
                if cand is not None and float(np.sum(np.abs(cand.r))) < (1 - 1e-4 * alpha) * theta:
                    accepted = cand
                    break
                alpha *= 0.5
            self.iterations += 1
            if accepted is None:
                return None
            cur = accepted
            theta = float(np.sum(np.abs(cur.r)))
            if theta <= 0.9 * theta_start and not filt.rejects(theta, self._barrier(cur, mu)):
                return cur
            if theta <= 0.1 * self.opts.feas_tol:
                return cur
        return None

    def _report(self, status, pt, lam, started, message, kkt=float("inf")) -> SolveReport:
        if pt is None:
            w = np.full(self.n, np.nan)
            objective = float("nan")
            violation = float("inf")
        else:
            w = pt.x[: self.n].copy()
            objective = pt.f / self.scale if self.scale else pt.f
            violation = constraint_violation(self.p, w)
        multipliers = np.zeros(self.p.m)
        if self.m:
            multipliers[self.rows] = lam
        return SolveReport(
            status=status,
            objective=float(objective),
            w=w,
            violation=violation,
            kkt=float(kkt),
            iterations=self.iterations,
            wall_time=time.perf_counter() - started,
            multipliers=multipliers,
            message=message,
        )


def solve_ipm(problem: NLPProblem, w0: np.ndarray, options: SolverOptions | None = None) -> SolveReport:
    with np.errstate(all="ignore"):
        return InteriorPointSolver(problem, options).solve(w0)
