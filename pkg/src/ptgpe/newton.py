"""Damped Newton iteration with finite-difference Jacobian.

Shared by the five-dimensional stationary root search and the
six-dimensional analytic-continuation search.  The residual callable may
raise IntegrationBlowup for hopeless trial points (for example a kappa
guess whose shooting solution explodes); such trials are treated as failed
line-search steps, not fatal errors.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["IntegrationBlowup", "ConvergenceError", "NewtonResult", "damped_newton"]


class IntegrationBlowup(RuntimeError):
    """Trial point could not be evaluated (solution blew up mid-integration)."""

    def __init__(self, message, x_fail=None):
        super().__init__(message)
        self.x_fail = x_fail


class ConvergenceError(RuntimeError):
    """Root search failed; carries the last iterate for diagnostics."""

    def __init__(self, message, last_iterate=None, residual=None):
        super().__init__(message)
        self.last_iterate = last_iterate
        self.residual = residual


@dataclass(frozen=True)
class NewtonResult:
    x: np.ndarray
    residual: np.ndarray
    iterations: int
    converged: bool
    residual_norm: float
    jacobian_condition: float
    message: str = ""


def _try_eval(fun, x):
    try:
        r = np.asarray(fun(x), dtype=float)
    except IntegrationBlowup:
        return None
    if not np.all(np.isfinite(r)):
        return None
    return r


def damped_newton(fun, x0, *, tol=1e-10, max_iter=100, fd_step=1e-7,
                  max_backtracks=30, constraint=None) -> NewtonResult:
    """Solve fun(x) = 0 by Newton's method with backtracking line search.

    fun        : R^n -> R^n residual map
    tol        : convergence when max|fun| < tol
    fd_step    : component-relative forward-difference step for the Jacobian
    constraint : optional predicate x -> bool; trial points violating it are
                 rejected during the line search (used for Re(kappa) > 0)

    Returns a NewtonResult; does not raise on non-convergence (callers decide
    whether that is an error).
    """
    x = np.array(x0, dtype=float)
    n = x.size
    f = _try_eval(fun, x)
    if f is None:
        raise IntegrationBlowup("residual not evaluable at the starting point")
    fnorm = float(np.max(np.abs(f)))
    cond = np.inf
    it = 0
    stalls = 0
    message = ""
    while it < max_iter:
        if fnorm < tol:
            return NewtonResult(x, f, it, True, fnorm, cond)
        it += 1
        J = np.empty((n, n))
        singular = False
        for j in range(n):
            h = fd_step * max(abs(x[j]), 1.0)
            xp = x.copy()
            xp[j] += h
            fp = _try_eval(fun, xp)
            if fp is None:
                xp[j] = x[j] - h
                fp = _try_eval(fun, xp)
                h = -h
            if fp is None:
                return NewtonResult(x, f, it, False, fnorm, cond,
                                    "Jacobian column not evaluable")
            J[:, j] = (fp - f) / h
        step = None
        try:
            cond = float(np.linalg.cond(J))
            step = np.linalg.solve(J, -f)
        except np.linalg.LinAlgError:
            singular = True
        if singular or step is None or not np.all(np.isfinite(step)):
            step, *_ = np.linalg.lstsq(J, -f, rcond=None)
            message = "near-singular Jacobian (least-squares step)"
        lam = 1.0
        accepted = False
        fn2 = float(np.linalg.norm(f))
        for _ in range(max_backtracks):
            xt = x + lam * step
            if constraint is not None and not constraint(xt):
                lam *= 0.5
                continue
            ft = _try_eval(fun, xt)
            if ft is not None and np.linalg.norm(ft) < (1.0 - 1e-4 * lam) * fn2:
                x, f = xt, ft
                fnorm = float(np.max(np.abs(f)))
                accepted = True
                break
            lam *= 0.5
        if accepted:
            stalls = 0
        else:
            # tolerate one flat step (the landscape flattens near exceptional
            # points), then give up instead of crawling until max_iter
            stalls += 1
            if stalls >= 2:
                return NewtonResult(x, f, it, False, fnorm, cond,
                                    message or "line search stalled")
            xt = x + lam * step
            ft = _try_eval(fun, xt) if (constraint is None or constraint(xt)) else None
            if ft is not None and np.linalg.norm(ft) <= fn2:
                x, f = xt, ft
                fnorm = float(np.max(np.abs(f)))
            else:
                return NewtonResult(x, f, it, False, fnorm, cond,
                                    message or "line search stalled")
    converged = fnorm < tol
    return NewtonResult(x, f, it, converged, fnorm, cond,
                        message if converged else (message or "max iterations exceeded"))
