"""Nonlinear stationary states by piecewise shooting and Newton root search.

A stationary state solves

    psi'' = kappa^2 psi - g |psi|^2 psi

away from the wells, with derivative jumps psi' -> psi' - (1 + i gamma) psi
at x = -a/2 and psi' -> psi' - (1 - i gamma) psi at x = +a/2, decay at both
domain edges and unit L2 norm.  The overall phase is fixed by taking psi(0)
real, which leaves five real unknowns: Re psi(0), Re/Im psi'(0) and
Re/Im kappa.  The matching five residuals are Robin decay defects
psi' + kappa psi at +x_max and psi' - kappa psi at -x_max (exponentially
small at a genuine bound state, far better conditioned than a raw value
condition at a truncated boundary) plus the norm defect ||psi|| - 1.

Both halves of the axis are integrated in the outward coordinate s = |x|,
under which the two half-problems differ only in the complex well weight.

With a regularization width sigma the same machinery solves the stationary
problem of the *smoothed* wells (used to prepare initial states for the
spectral time propagator): the jumps are replaced by a smooth two-Gaussian
well potential in the right-hand side.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import least_squares

from ._rk import integrate_half
from .model import (Branch, Eigenvalue, Grid, GridState, ModelParams,
                    PhaseConvention, make_grid, well_coefficients)
from .newton import ConvergenceError, IntegrationBlowup, damped_newton
from .linear import LinearState

__all__ = [
    "ShootingUnknowns",
    "ShootingResiduals",
    "ConvergenceReport",
    "NonlinearState",
    "BranchTrace",
    "CriticalPoints",
    "SechFit",
    "integrate_piecewise",
    "shoot_residuals",
    "solve_stationary",
    "seed_from_linear",
    "continue_branch",
    "locate_critical_points",
    "sech_tail_fit",
    "side_densities",
    "lobe_amplitudes",
]

_RK_RTOL = 1e-13
_RK_ATOL = 1e-15
_IM_REAL_TOL = 1e-9    # |Im kappa| below this counts as a real eigenvalue


@dataclass(frozen=True)
class ShootingUnknowns:
    """Five real degrees of freedom of the stationary root search."""

    psi0_re: float
    dpsi0: complex
    kappa: complex

    def to_vector(self) -> np.ndarray:
        return np.array([self.psi0_re, self.dpsi0.real, self.dpsi0.imag,
                         self.kappa.real, self.kappa.imag])

    @staticmethod
    def from_vector(v) -> "ShootingUnknowns":
        return ShootingUnknowns(psi0_re=float(v[0]),
                                dpsi0=complex(v[1], v[2]),
                                kappa=complex(v[3], v[4]))


@dataclass(frozen=True)
class ShootingResiduals:
    """Decay defects at the edges and the norm defect."""

    decay_plus: complex
    decay_minus: complex
    norm_defect: float

    def to_vector(self) -> np.ndarray:
        return np.array([self.decay_plus.real, self.decay_plus.imag,
                         self.decay_minus.real, self.decay_minus.imag,
                         self.norm_defect])

    @property
    def max_abs(self) -> float:
        return float(np.max(np.abs(self.to_vector())))


@dataclass(frozen=True)
class ConvergenceReport:
    iterations: int
    residual_norm: float
    jacobian_condition: float


@dataclass(frozen=True)
class NonlinearState:
    """Converged stationary state with its root-search data."""

    state: GridState
    unknowns: object
    report: ConvergenceReport

    @property
    def kappa(self) -> complex:
        return self.state.kappa.kappa

    @property
    def params(self) -> ModelParams:
        return self.state.params

    @property
    def grid(self) -> Grid:
        return self.state.grid


def lobe_amplitudes(weight: complex, sigma: float):
    """Gaussian amplitudes of one regularized well lobe.

    Each delta well -w*delta(x - xw) is smoothed to -w*R(x - xw) with the
    moment-corrected kernel R = 2 G_sigma - G_{2 sigma} (unit mass, vanishing
    |x| moment).  A single Gaussian would bias eigenvalues at first order in
    sigma because the wave function kinks at the well; the corrected kernel
    pushes the bias to O(sigma^2).
    """
    g1 = 1.0 / (sigma * math.sqrt(2.0 * math.pi))
    return (-weight * 2.0 * g1, sigma, +weight * 0.5 * g1, 2.0 * sigma)


def _half_nodes(grid: Grid) -> int:
    return grid.x.size - grid.i_zero


def _extend_tail(psi_r: complex, kappa: complex, g: float, s_match: float,
                 s_tail: np.ndarray) -> np.ndarray:
    """Analytic decaying solution beyond the matching radius.

    For real kappa and g > 0 the exterior is c*sech(kappa(s - s0)) with
    |c| = kappa*sqrt(2/g) and constant phase; otherwise the nonlinearity is
    negligible out there and a pure exponential continues the field.
    """
    if g > 0 and abs(kappa.imag) < 1e-9:
        k = kappa.real
        c_mag = k * math.sqrt(2.0 / g)
        amp = abs(psi_r)
        if amp == 0.0:
            return np.zeros(s_tail.size, dtype=np.complex128)
        ratio = max(c_mag / amp, 1.0)
        s0 = s_match - math.acosh(ratio) / k
        phase = psi_r / amp
        return phase * c_mag / np.cosh(k * (s_tail - s0))
    return psi_r * np.exp(-kappa * (s_tail - s_match))


def _shoot(u: ShootingUnknowns, params: ModelParams, grid: Grid,
           sigma: float | None, i_match: int | None = None):
    """Integrate both halves; return (psi_full, residuals).

    With i_match set, the decay (Robin) conditions are imposed at the node
    x = i_match*dx instead of the domain edge and the remaining tail nodes
    are filled with the analytic decaying solution.  This keeps the
    exponential shooting amplification bounded on wide dynamics grids,
    where the Robin defect at the matching radius is already below the
    root tolerance for a genuine bound state.
    """
    w_left, w_right = well_coefficients(params.gamma)
    n_half = _half_nodes(grid)
    i_well = grid.well_indices[1] - grid.i_zero
    xw = params.a / 2.0
    reg = sigma is not None
    psi0 = complex(u.psi0_re, 0.0)
    n_int = n_half if i_match is None else i_match + 1
    if n_int <= i_well + 2:
        raise ValueError("matching radius must lie beyond the well")

    out_r = np.empty(n_int, dtype=np.complex128)
    out_l = np.empty(n_int, dtype=np.complex128)

    if reg:
        va1r, s1, va2r, s2 = lobe_amplitudes(w_right, sigma)
        va1l, _, va2l, _ = lobe_amplitudes(w_left, sigma)
    else:
        va1r = va2r = va1l = va2l = 0.0j
        s1 = s2 = 1.0

    st, dpsi_r, xf = integrate_half(psi0, u.dpsi0, u.kappa, params.g, w_right,
                                    reg, va1r, s1, va2r, s2, xw,
                                    grid.dx, n_int, i_well,
                                    _RK_RTOL, _RK_ATOL, out_r)
    if st != 0:
        raise IntegrationBlowup(f"right-half integration failed near x={xf:.3f}", xf)
    st, dpsi_l, xf = integrate_half(psi0, -u.dpsi0, u.kappa, params.g, w_left,
                                    reg, va1l, s1, va2l, s2, xw,
                                    grid.dx, n_int, i_well,
                                    _RK_RTOL, _RK_ATOL, out_l)
    if st != 0:
        raise IntegrationBlowup(f"left-half integration failed near x={-xf:.3f}", -xf)

    half_r = out_r
    half_l = out_l
    if n_int < n_half:
        s_match = (n_int - 1) * grid.dx
        s_tail = np.arange(n_int, n_half) * grid.dx
        half_r = np.concatenate([out_r, _extend_tail(out_r[-1], u.kappa,
                                                     params.g, s_match, s_tail)])
        half_l = np.concatenate([out_l, _extend_tail(out_l[-1], u.kappa,
                                                     params.g, s_match, s_tail)])

    psi = np.empty(grid.x.size, dtype=np.complex128)
    psi[grid.i_zero:] = half_r
    psi[: grid.i_zero + 1] = half_l[::-1]

    nrm = math.sqrt(float(np.trapezoid(np.abs(psi) ** 2, dx=grid.dx)))
    res = ShootingResiduals(
        decay_plus=dpsi_r + u.kappa * out_r[-1],
        decay_minus=(-dpsi_l) - u.kappa * out_l[-1],
        norm_defect=nrm - 1.0,
    )
    return psi, res


def integrate_piecewise(u: ShootingUnknowns, params: ModelParams,
                        grid: Grid | None = None,
                        sigma: float | None = None) -> GridState:
    """Shooting solution on the grid for given initial data (not converged)."""
    grid = grid or make_grid(params)
    psi, _ = _shoot(u, params, grid, sigma)
    return GridState(psi=psi, kappa=Eigenvalue(u.kappa), params=params, grid=grid)


def shoot_residuals(u: ShootingUnknowns, params: ModelParams,
                    grid: Grid | None = None,
                    sigma: float | None = None) -> ShootingResiduals:
    grid = grid or make_grid(params)
    _, res = _shoot(u, params, grid, sigma)
    return res


def _label(kappa: complex) -> Branch | None:
    if abs(kappa.imag) < _IM_REAL_TOL:
        return None  # ground/excited is decided by the caller's context
    return Branch.COMPLEX_DECAYING if kappa.imag > 0 else Branch.COMPLEX_GROWING


def _match_index(kappa: complex, params: ModelParams, grid: Grid,
                 margin: float) -> int | None:
    """Half-line node index where the decay conditions are imposed.

    None means the domain edge (classic behaviour); otherwise the node
    nearest to a/2 + margin/Re(kappa), where the Robin defect of a true
    bound state is ~e^(-3*margin), far below the root tolerance.
    """
    x_r = params.a / 2.0 + margin / max(kappa.real, 1e-6)
    n_half = _half_nodes(grid)
    i = int(math.ceil(x_r / grid.dx))
    if i >= n_half - 1:
        return None
    return max(i, grid.well_indices[1] - grid.i_zero + 3)


def solve_stationary(guess: ShootingUnknowns, params: ModelParams,
                     grid: Grid | None = None, *, sigma: float | None = None,
                     tol: float = 1e-10, max_iter: int = 100,
                     max_backtracks: int = 30, match_margin: float | None = None,
                     branch: Branch | None = None) -> NonlinearState:
    """Damped Newton iteration on the five-dimensional residual map.

    match_margin, when given, caps the shooting range at
    a/2 + match_margin/Re(kappa_guess) (with analytic tail extension); this
    is essential on wide dynamics grids where shooting all the way to the
    edge amplifies the residuals by e^(kappa*x_max) and destroys the Newton
    basin.
    """
    grid = grid or make_grid(params)
    i_match = None
    if match_margin is not None:
        i_match = _match_index(guess.kappa, params, grid, match_margin)

    def residual(v):
        u = ShootingUnknowns.from_vector(v)
        _, res = _shoot(u, params, grid, sigma, i_match)
        return res.to_vector()

    result = damped_newton(residual, guess.to_vector(), tol=tol,
                           max_iter=max_iter, max_backtracks=max_backtracks,
                           constraint=lambda v: v[3] > 0.0)
    if not result.converged:
        raise ConvergenceError(
            f"stationary root search failed: {result.message} "
            f"(residual {result.residual_norm:.2e}, cond {result.jacobian_condition:.2e})",
            last_iterate=ShootingUnknowns.from_vector(result.x),
            residual=result.residual,
        )
    u = ShootingUnknowns.from_vector(result.x)
    psi, res = _shoot(u, params, grid, sigma, i_match)
    kappa = u.kappa
    if abs(kappa.imag) < _IM_REAL_TOL:
        kappa = complex(kappa.real, kappa.imag)  # keep tiny imaginary part as is
    ev = Eigenvalue(kappa, branch if branch is not None else _label(kappa))
    state = GridState(psi=psi, kappa=ev, params=params, grid=grid,
                      phase_convention=PhaseConvention.REAL_AT_ORIGIN)
    report = ConvergenceReport(iterations=result.iterations,
                               residual_norm=res.max_abs,
                               jacobian_condition=result.jacobian_condition)
    return NonlinearState(state=state, unknowns=u, report=report)


def seed_from_linear(ls: LinearState) -> ShootingUnknowns:
    """Shooting unknowns of a closed-form linear state (exact at g = 0)."""
    psi0 = ls.psi0
    if abs(psi0.imag) > 1e-9:
        raise ValueError("linear state is not in the psi(0)-real gauge")
    return ShootingUnknowns(psi0_re=float(psi0.real), dpsi0=ls.dpsi0,
                            kappa=ls.kappa.kappa)


@dataclass(frozen=True)
class BranchTrace:
    """Result of a parameter continuation along one solution branch."""

    states: list
    completed: bool
    message: str = ""

    @property
    def final(self) -> NonlinearState:
        return self.states[-1]


def continue_branch(start: NonlinearState, target: float, steps: int, *,
                    vary: str = "gamma", tol: float = 1e-10,
                    keep: bool = True, sigma: float | None = None,
                    jump_tol: float = 0.25, max_iter: int = 100,
                    max_backtracks: int = 30) -> BranchTrace:
    """Homotopy in gamma or g, re-solving from the previous solution.

    A secant predictor extrapolates the unknowns from the last two converged
    points; the step is halved on convergence failure (or when kappa jumps
    by more than jump_tol, which signals Newton escaping to a different
    solution branch) and restored gradually after successes.  Underflow of
    the step size ends the trace early; branch termination is reported, not
    raised, because it is often physics.
    """
    if vary not in ("gamma", "g"):
        raise ValueError(f"vary must be 'gamma' or 'g', got {vary!r}")
    v0 = getattr(start.params, vary)
    span = target - v0
    states = [start]
    if span == 0 or steps < 1:
        return BranchTrace(states=states, completed=True)
    dv_full = span / steps
    dv = dv_full
    v = v0
    current = start
    prev_vec = None
    prev_v = None
    grid_cache: dict[float, Grid] = {}
    while (span > 0 and v < target - 1e-14) or (span < 0 and v > target + 1e-14):
        dv = math.copysign(min(abs(dv), abs(target - v)), span)
        v_try = v + dv
        p = current.params.replace(**{vary: v_try})
        grid = grid_cache.get(p.a)
        if grid is None:
            grid = make_grid(p)
            grid_cache[p.a] = grid
        vec = current.unknowns.to_vector()
        if prev_vec is not None and abs(v - prev_v) > 1e-14:
            seed_vec = vec + (vec - prev_vec) * ((v_try - v) / (v - prev_v))
        else:
            seed_vec = vec
        try:
            nxt = solve_stationary(ShootingUnknowns.from_vector(seed_vec), p,
                                   grid, tol=tol, sigma=sigma,
                                   max_iter=max_iter, max_backtracks=max_backtracks)
            if abs(nxt.kappa - current.kappa) > jump_tol:
                raise ConvergenceError(
                    f"kappa jumped {current.kappa:.4f} -> {nxt.kappa:.4f}")
        except (ConvergenceError, IntegrationBlowup) as err:
            if abs(dv) < abs(dv_full) / 1024.0:
                return BranchTrace(states=states, completed=False,
                                   message=f"step underflow at {vary}={v:.6f}: {err}")
            dv *= 0.5
            prev_vec = None  # predictor slope is stale after a rejection
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


@dataclass(frozen=True)
class CriticalPoints:
    gamma_bifurcation: float
    gamma_cr: float


def _hop(state: NonlinearState, gamma: float, grid: Grid,
         max_step: float = 0.004) -> NonlinearState:
    """Move a converged state to a nearby gamma in small continuation steps.

    Tuned for the critical-point probes: moderately tight tolerance and a
    fast-failing Newton so the bisection can afford probes that run into the
    branch end.
    """
    dg = gamma - state.params.gamma
    if dg == 0:
        return state
    n = max(1, int(math.ceil(abs(dg) / max_step)))
    trace = continue_branch(state, gamma, n, vary="gamma", keep=False,
                            jump_tol=0.1, tol=1e-9, max_iter=40,
                            max_backtracks=10)
    if not trace.completed:
        raise ConvergenceError(f"hop to gamma={gamma} failed: {trace.message}")
    return trace.final


def locate_critical_points(a: float, g: float, *, x_max: float = 12.0,
                           n_grid: int = 2048, tol: float = 1e-4,
                           coarse_step: float = 0.02) -> CriticalPoints:
    """Bisection for the bifurcation point and the branch (exceptional) point.

    gamma_cr is where the two distinct real solutions cease to exist;
    gamma_bifurcation is where the complex-conjugate pair is born off the
    ground branch (equal to gamma_cr in the linear case g = 0).
    """
    from .linear import (build_linear_state, excited_birth_gamma,
                         linear_gamma_critical, solve_linear_spectrum)

    if g < 0:
        raise ValueError("locate_critical_points expects g >= 0")
    params0 = ModelParams(a=a, gamma=0.0, g=0.0, x_max=x_max, n_grid=n_grid)
    grid = make_grid(params0)

    gamma_start = 0.0 if a >= 2.0 else excited_birth_gamma(a) + 0.05
    p_start = params0.replace(gamma=gamma_start)
    spectrum = solve_linear_spectrum(p_start)
    real_evs = [ev for ev in spectrum
                if ev.branch in (Branch.GROUND_REAL, Branch.EXCITED_REAL)]
    if len(real_evs) < 2:
        raise ConvergenceError(f"need two real linear roots at gamma={gamma_start}")

    pair: dict[str, NonlinearState] = {}
    for key, ev in zip(("excited", "ground"), sorted(real_evs, key=lambda e: e.kappa.real)):
        seed = seed_from_linear(build_linear_state(ev, p_start))
        st = solve_stationary(seed, p_start, grid)
        if g > 0:
            trace = continue_branch(st, g, max(8, int(g / 0.05)), vary="g", keep=False)
            if not trace.completed:
                raise ConvergenceError(f"{key} branch lost during g continuation: {trace.message}")
            st = trace.final
        pair[key] = st

    def real_pair_at(gamma: float, cache: dict):
        """Both real solutions at gamma, or None if merged/missing."""
        gs = sorted(cache)
        g_near = min(gs, key=lambda x: abs(x - gamma))
        gnd, exc = cache[g_near]
        try:
            gnd = _hop(gnd, gamma, grid)
            exc = _hop(exc, gamma, grid)
        except (ConvergenceError, IntegrationBlowup):
            return None
        if abs(gnd.kappa.imag) > 1e-8 or abs(exc.kappa.imag) > 1e-8:
            return None
        if abs(gnd.kappa - exc.kappa) < 1e-7:
            return None
        cache[gamma] = (gnd, exc)
        return gnd, exc

    cache = {gamma_start: (pair["ground"], pair["excited"])}
    lo = gamma_start
    hi = None
    gamma = gamma_start
    while gamma < 1.5:
        gamma = round(gamma + coarse_step, 12)
        if real_pair_at(gamma, cache) is None:
            hi = gamma
            break
        lo = gamma
    if hi is None:
        raise ConvergenceError("real branches never coalesce below gamma=1.5")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if real_pair_at(mid, cache) is not None:
            lo = mid
        else:
            hi = mid
    gamma_cr = 0.5 * (lo + hi)

    # complex branch: seed from the linear conjugate pair above the linear
    # branch point and walk down
    gcl = linear_gamma_critical(a)
    gamma_hi = max(gcl + 0.1, gamma_cr + 0.05)
    p_hi = params0.replace(gamma=gamma_hi)
    cplx_ev = [ev for ev in solve_linear_spectrum(p_hi) if ev.kappa.imag > 1e-6]
    if not cplx_ev:
        raise ConvergenceError(f"no linear complex root at gamma={gamma_hi}")
    seed = seed_from_linear(build_linear_state(cplx_ev[0], p_hi))
    st = solve_stationary(seed, p_hi, grid)
    if g > 0:
        trace = continue_branch(st, g, max(8, int(g / 0.05)), vary="g", keep=False)
        if not trace.completed:
            raise ConvergenceError(f"complex branch lost during g continuation: {trace.message}")
        st = trace.final

    ccache = {gamma_hi: st}

    def complex_at(gamma: float):
        gs = sorted(ccache)
        g_near = min(gs, key=lambda x: abs(x - gamma))
        try:
            cst = _hop(ccache[g_near], gamma, grid)
        except (ConvergenceError, IntegrationBlowup):
            return None
        if cst.kappa.imag <= 1e-8:
            return None
        ccache[gamma] = cst
        return cst

    hi_c = gamma_hi
    lo_c = None
    gamma = gamma_hi
    while gamma > 1e-3:
        gamma = round(gamma - coarse_step, 12)
        if complex_at(gamma) is None:
            lo_c = gamma
            break
        hi_c = gamma
    if lo_c is None:
        lo_c = 0.0
    while hi_c - lo_c > tol:
        mid = 0.5 * (lo_c + hi_c)
        if complex_at(mid) is not None:
            hi_c = mid
        else:
            lo_c = mid
    gamma_bif = 0.5 * (lo_c + hi_c)
    return CriticalPoints(gamma_bifurcation=gamma_bif, gamma_cr=gamma_cr)


@dataclass(frozen=True)
class SechFit:
    c: complex
    x0: float
    rms_residual: float


def sech_tail_fit(ns: NonlinearState, side: int = +1) -> SechFit:
    """Least-squares fit of the exterior samples to c * sech(kappa (x - x0)).

    Valid for real-kappa states: outside the wells the equation reduces to
    the free focusing nonlinear Schroedinger equation, whose decaying real
    solution family is the sech, and the probability current vanishes on the
    exterior so the tail has constant phase.  Fit quality is reported as the
    rms of the complex residual over the exterior nodes.
    """
    state = ns.state
    kappa = ns.kappa
    if abs(kappa.imag) > 1e-6:
        raise ValueError("sech tail fit applies to real-kappa states")
    k = kappa.real
    grid, p = state.grid, state.params
    if side >= 0:
        sl = slice(grid.well_indices[1], grid.x.size)
        x = grid.x[sl]
        y = state.psi[sl]
    else:
        sl = slice(0, grid.well_indices[0] + 1)
        x = -grid.x[sl][::-1]
        y = state.psi[sl][::-1]
    ya = y[0]
    if p.g > 0:
        c_mag = k * math.sqrt(2.0 / p.g)
        ratio = max(c_mag / max(abs(ya), 1e-300), 1.0)
        x0 = x[0] - math.acosh(ratio) / k
    else:
        c_mag = abs(ya) * math.cosh(k * x[0])
        x0 = 0.0
    v0 = np.array([c_mag * math.cos(np.angle(ya)), c_mag * math.sin(np.angle(ya)), x0])

    def resid(v):
        c = complex(v[0], v[1])
        model = c / np.cosh(k * (x - v[2]))
        d = y - model
        return np.concatenate([d.real, d.imag])

    sol = least_squares(resid, v0, method="lm", xtol=1e-15, ftol=1e-15)
    r = resid(sol.x)
    rms = float(np.sqrt(np.mean(r * r)))
    return SechFit(c=complex(sol.x[0], sol.x[1]), x0=float(sol.x[2]), rms_residual=rms)


def side_densities(state: GridState) -> tuple[float, float]:
    """Integrated density left (x < 0) and right (x > 0) of the origin."""
    i0 = state.grid.i_zero
    rho = np.abs(state.psi) ** 2
    left = float(np.trapezoid(rho[: i0 + 1], dx=state.grid.dx))
    right = float(np.trapezoid(rho[i0:], dx=state.grid.dx))
    return left, right
