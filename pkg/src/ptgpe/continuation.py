"""Stationary solutions beyond the exceptional point.

The cubic term g |psi(x)|^2 is not analytic, so the real solution pair
cannot spawn a complex pair at the branch point in the usual way.  On
PT-symmetric states |psi(x)|^2 = psi(x) psi(-x), and the right-hand form
*is* analytic, so the stationary problem with nonlinearity
g psi(x) psi(-x) continues the coalescing pair into the broken regime.

The full-line problem is folded onto x >= 0 with two coupled fields

    u(x) = psi(x),   v(x) = psi(-x),
    u'' = kappa^2 u - g u^2 v,     v'' = kappa^2 v - g v^2 u,

with mirror initial data v(0) = u(0), v'(0) = -u'(0) built in exactly, a
(1 - i gamma) derivative jump on u and a (1 + i gamma) jump on v at
x = a/2.  The phase of psi(0) is no longer fixed (Im psi(0) joins the
unknowns); instead the bilinear normalization

    integral psi(x) psi(-x) dx = 2 integral_0^xmax u v dx = 1

pins both the scale and the global phase.  That makes six real unknowns
(psi(0), psi'(0), kappa) against six real residuals (Robin decay defects of
u and v at x_max and the complex bilinear norm defect).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._rk import integrate_mirror
from .model import (Branch, Eigenvalue, Grid, GridState, ModelParams,
                    PhaseConvention, make_grid, well_coefficients)
from .newton import ConvergenceError, IntegrationBlowup, damped_newton
from .stationary import (ConvergenceReport, NonlinearState, _RK_ATOL,
                         _RK_RTOL, _half_nodes)

__all__ = [
    "ContinuationUnknowns",
    "MirrorPair",
    "integrate_mirror_system",
    "continuation_residuals",
    "solve_continuation",
    "seed_across_critical",
    "continue_continuation_branch",
]


@dataclass(frozen=True)
class ContinuationUnknowns:
    """Six real degrees of freedom of the continued root search."""

    psi0: complex
    dpsi0: complex
    kappa: complex

    def to_vector(self) -> np.ndarray:
        return np.array([self.psi0.real, self.psi0.imag,
                         self.dpsi0.real, self.dpsi0.imag,
                         self.kappa.real, self.kappa.imag])

    @staticmethod
    def from_vector(v) -> "ContinuationUnknowns":
        return ContinuationUnknowns(psi0=complex(v[0], v[1]),
                                    dpsi0=complex(v[2], v[3]),
                                    kappa=complex(v[4], v[5]))


@dataclass(frozen=True)
class MirrorPair:
    """Coupled half-line fields u(x) = psi(x), v(x) = psi(-x) for x >= 0."""

    u: np.ndarray
    v: np.ndarray
    du_end: complex
    dv_end: complex
    kappa: complex
    psi0: complex
    params: ModelParams
    grid: Grid

    def assemble(self) -> np.ndarray:
        """Full-line wave function; continuous with continuous derivative."""
        psi = np.empty(self.grid.x.size, dtype=np.complex128)
        i0 = self.grid.i_zero
        psi[i0:] = self.u
        psi[: i0 + 1] = self.v[::-1]
        return psi


def _integrate(c: ContinuationUnknowns, params: ModelParams, grid: Grid) -> MirrorPair:
    w_left, w_right = well_coefficients(params.gamma)
    n_half = _half_nodes(grid)
    i_well = grid.well_indices[1] - grid.i_zero
    out_u = np.empty(n_half, dtype=np.complex128)
    out_v = np.empty(n_half, dtype=np.complex128)
    st, du_end, dv_end, xf = integrate_mirror(c.psi0, c.dpsi0, c.kappa, params.g,
                                              w_right, w_left,
                                              grid.dx, n_half, i_well,
                                              _RK_RTOL, _RK_ATOL, out_u, out_v)
    if st != 0:
        raise IntegrationBlowup(f"mirror integration failed near |x|={xf:.3f}", xf)
    return MirrorPair(u=out_u, v=out_v, du_end=du_end, dv_end=dv_end,
                      kappa=c.kappa, psi0=c.psi0, params=params, grid=grid)


def integrate_mirror_system(c: ContinuationUnknowns, params: ModelParams,
                            grid: Grid | None = None) -> MirrorPair:
    """Integrate the coupled mirror-field system for given initial data."""
    return _integrate(c, params, grid or make_grid(params))


def _residual_vector(pair: MirrorPair) -> np.ndarray:
    grid = pair.grid
    du_rob = pair.du_end + pair.kappa * pair.u[-1]
    dv_rob = pair.dv_end + pair.kappa * pair.v[-1]
    # integrand of psi(x) psi(-x) over the full line is even, hence factor 2
    bil = 2.0 * complex(np.trapezoid(pair.u * pair.v, dx=grid.dx)) - 1.0
    return np.array([du_rob.real, du_rob.imag,
                     dv_rob.real, dv_rob.imag,
                     bil.real, bil.imag])


def continuation_residuals(c: ContinuationUnknowns, params: ModelParams,
                           grid: Grid | None = None) -> np.ndarray:
    """Six real residuals: Robin decay of u and v, bilinear norm defect."""
    return _residual_vector(_integrate(c, params, grid or make_grid(params)))


def _label(kappa: complex) -> Branch | None:
    if abs(kappa.imag) < 1e-9:
        return None
    return (Branch.CONTINUATION_DECAYING if kappa.imag > 0
            else Branch.CONTINUATION_GROWING)


def solve_continuation(guess: ContinuationUnknowns, params: ModelParams,
                       grid: Grid | None = None, *, tol: float = 1e-10,
                       max_iter: int = 100, max_backtracks: int = 30) -> NonlinearState:
    """Six-dimensional damped Newton search for a continued stationary state."""
    grid = grid or make_grid(params)

    def residual(v):
        return _residual_vector(_integrate(ContinuationUnknowns.from_vector(v),
                                           params, grid))

    result = damped_newton(residual, guess.to_vector(), tol=tol,
                           max_iter=max_iter, max_backtracks=max_backtracks,
                           constraint=lambda v: v[4] > 0.0)
    if not result.converged:
        raise ConvergenceError(
            f"continuation root search failed: {result.message} "
            f"(residual {result.residual_norm:.2e})",
            last_iterate=ContinuationUnknowns.from_vector(result.x),
            residual=result.residual,
        )
    c = ContinuationUnknowns.from_vector(result.x)
    pair = _integrate(c, params, grid)
    ev = Eigenvalue(c.kappa, _label(c.kappa))
    state = GridState(psi=pair.assemble(), kappa=ev, params=params, grid=grid,
                      phase_convention=PhaseConvention.CONTINUATION_NORM)
    report = ConvergenceReport(iterations=result.iterations,
                               residual_norm=result.residual_norm,
                               jacobian_condition=result.jacobian_condition)
    return NonlinearState(state=state, unknowns=c, report=report)


def seed_across_critical(coalesced: NonlinearState, im_shift: float = 1e-3) -> ContinuationUnknowns:
    """Seed for the broken-regime pair from the almost-coalesced real state.

    The pair emerges at the exceptional point, so the real solution just
    below gamma_cr with Im(kappa) nudged by +-im_shift lands in the basin of
    one member of the conjugate pair (the sign of the nudge does not map
    one-to-one onto the sign of the converged Im(kappa); solve with both
    nudges to obtain both partners, or conjugate-mirror one solution).
    """
    u = coalesced.unknowns
    return ContinuationUnknowns(psi0=complex(u.psi0_re, 0.0),
                                dpsi0=u.dpsi0,
                                kappa=u.kappa + 1.0j * im_shift)


def continue_continuation_branch(start: NonlinearState, target: float,
                                 steps: int, *, vary: str = "gamma",
                                 keep: bool = True, tol: float = 1e-10,
                                 jump_tol: float = 0.25):
    """Parameter homotopy of a continued state (secant predictor, halving)."""
    from .stationary import BranchTrace

    if vary not in ("gamma", "g"):
        raise ValueError(f"vary must be 'gamma' or 'g', got {vary!r}")
    v0 = getattr(start.params, vary)
    span = target - v0
    states = [start]
    if span == 0 or steps < 1:
        return BranchTrace(states=states, completed=True)
    grid = start.grid
    dv_full = span / steps
    dv = dv_full
    v = v0
    current = start
    prev_vec = None
    prev_v = None
    while (span > 0 and v < target - 1e-14) or (span < 0 and v > target + 1e-14):
        dv = math.copysign(min(abs(dv), abs(target - v)), span)
        v_try = v + dv
        p = current.params.replace(**{vary: v_try})
        vec = current.unknowns.to_vector()
        if prev_vec is not None and abs(v - prev_v) > 1e-14:
            seed_vec = vec + (vec - prev_vec) * ((v_try - v) / (v - prev_v))
        else:
            seed_vec = vec
        try:
            nxt = solve_continuation(ContinuationUnknowns.from_vector(seed_vec),
                                     p, grid, tol=tol)
            if abs(nxt.kappa - current.kappa) > jump_tol:
                raise ConvergenceError(
                    f"kappa jumped {current.kappa:.4f} -> {nxt.kappa:.4f}")
        except (ConvergenceError, IntegrationBlowup) as err:
            if abs(dv) < abs(dv_full) / 1024.0:
                return BranchTrace(states=states, completed=False,
                                   message=f"step underflow at {vary}={v:.6f}: {err}")
            dv *= 0.5
            prev_vec = None
            continue
        prev_vec, prev_v = vec, v
        v = v_try
        current = nxt
        if keep or abs(v - target) < 1e-14:
            states.append(nxt)
        else:
            states[-1] = nxt
        dv = math.copysign(min(abs(dv) * 2.0, abs(dv_full)), span)
    return BranchTrace(states=states, completed=True)
