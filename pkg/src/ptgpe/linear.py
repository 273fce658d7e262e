"""Closed-form treatment of the linear (g = 0) double delta well.

Bound states are piecewise exponentials

    psi(x) = A e^{kx}                   x < -b
           = C e^{kx} + D e^{-kx}       -b < x < b        (b = a/2)
           = B e^{-kx}                  x > b

and matching at the wells reduces to a 2x2 linear system for (C, D) whose
solvability condition is the secular equation

    (1 + gamma^2) e^{-2 k a} - (1 + gamma^2 + 4 k^2 - 4 k) = 0 .

Real roots below the critical gain/loss strength come in a ground/excited
pair that merges at an exceptional point; beyond it the roots form a
complex-conjugate pair.  At gamma = 0 the equation factorizes into
e^{-ka} = +-(2k - 1), with the + sign giving the cosh-type ground state and
the - sign the sinh-type excited state (which requires a > 2).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .model import Branch, Eigenvalue, ModelParams

__all__ = [
    "secular_residual",
    "secular_derivative",
    "solve_linear_spectrum",
    "real_roots",
    "count_real_roots",
    "linear_gamma_critical",
    "excited_birth_gamma",
    "LinearState",
    "build_linear_state",
    "RatioPoint",
    "coefficient_ratio_curve",
    "linear_superposition_density",
]

_REAL_IM_TOL = 1e-10       # |Im kappa| below this counts as a real root
_ROOT_RESID_TOL = 1e-12


def secular_residual(kappa: complex, params: ModelParams) -> complex:
    """Left-hand side of the secular equation, analytic in kappa."""
    g2 = params.gamma * params.gamma
    return (1.0 + g2) * np.exp(-2.0 * kappa * params.a) - (
        1.0 + g2 + 4.0 * kappa * kappa - 4.0 * kappa
    )


def secular_derivative(kappa: complex, params: ModelParams) -> complex:
    g2 = params.gamma * params.gamma
    return -2.0 * params.a * (1.0 + g2) * np.exp(-2.0 * kappa * params.a) - (
        8.0 * kappa - 4.0
    )


def _newton_root(kappa0: complex, params: ModelParams, tol=1e-14, itmax=60):
    z = complex(kappa0)
    for _ in range(itmax):
        f = secular_residual(z, params)
        df = secular_derivative(z, params)
        if df == 0:
            return None
        dz = f / df
        z -= dz
        if abs(dz) < tol * max(1.0, abs(z)):
            return z
    return None


def _fprime_extrema(a: float, gamma: float):
    """Zeros of d(residual)/d(kappa) on the real axis (0 to 2 extrema).

    The derivative f' is unimodal (f'' vanishes exactly once for
    a^2 (1+gamma^2) > 2), so f has at most one local minimum followed by one
    local maximum on kappa > 0.
    """
    g2 = gamma * gamma
    fp = lambda k: -2.0 * a * (1.0 + g2) * np.exp(-2.0 * k * a) + 4.0 - 8.0 * k
    arg = a * a * (1.0 + g2) / 2.0
    if arg <= 1.0:
        return []
    k_dag = np.log(arg) / (2.0 * a)  # location of max of f'
    if k_dag <= 0:
        return []
    out = []
    if fp(k_dag) > 0:
        if fp(1e-14) < 0:
            out.append(brentq(fp, 1e-14, k_dag, xtol=1e-15))
        hi = max(2.0, k_dag + 1.0)
        if fp(hi) < 0:
            out.append(brentq(fp, k_dag, hi, xtol=1e-15))
    return out


def real_roots(params: ModelParams, k_max: float = 2.0) -> list[float]:
    """All real secular roots in (0, k_max], by piecewise-monotone bracketing.

    kappa = 0 always solves the secular equation but is not a bound state
    and is excluded.
    """
    a, gamma = params.a, params.gamma
    f = lambda k: np.real(secular_residual(k, params))
    pts = [1e-12] + _fprime_extrema(a, gamma) + [max(k_max, 2.0)]
    pts = sorted(p for p in pts if p <= max(k_max, 2.0))
    roots = []
    for lo, hi in zip(pts[:-1], pts[1:]):
        if hi - lo < 1e-14:
            continue
        flo, fhi = f(lo), f(hi)
        if flo == 0.0 and lo > 1e-10:
            roots.append(lo)
        if np.sign(flo) * np.sign(fhi) < 0:
            r = brentq(f, lo, hi, xtol=1e-15, rtol=8.9e-16)
            polished = _newton_root(r, params)
            if polished is not None and abs(polished.imag) < 1e-13:
                r = polished.real
            if r > 1e-10:
                roots.append(float(r))
    return sorted(set(roots))


def count_real_roots(params: ModelParams) -> int:
    return len(real_roots(params))


def _label_roots(found: list[complex]) -> list[Eigenvalue]:
    reals = sorted([z.real for z in found if abs(z.imag) < _REAL_IM_TOL])
    cplx = [z for z in found if abs(z.imag) >= _REAL_IM_TOL]
    out = []
    if len(reals) >= 2:
        out.append(Eigenvalue(complex(reals[-1]), Branch.GROUND_REAL))
        out.append(Eigenvalue(complex(reals[0]), Branch.EXCITED_REAL))
    elif len(reals) == 1:
        out.append(Eigenvalue(complex(reals[0]), Branch.GROUND_REAL))
    for z in cplx:
        tag = Branch.COMPLEX_DECAYING if z.imag > 0 else Branch.COMPLEX_GROWING
        out.append(Eigenvalue(z, tag))
    return sorted(out, key=lambda ev: (ev.kappa.real, ev.kappa.imag))


def solve_linear_spectrum(params: ModelParams, re_max: float = 2.0,
                          im_max: float = 2.0) -> list[Eigenvalue]:
    """All bound-state roots with Re(kappa) in (0, re_max], |Im| <= im_max.

    Real roots come from exact monotone-section bracketing; complex roots
    from Newton iteration on the analytic residual started from a coarse
    rectangular seed grid.  Roots are deduplicated, conjugate-completed and
    returned sorted by Re(kappa).  The nonlinearity field of `params` is
    ignored.
    """
    found: list[complex] = [complex(r) for r in real_roots(params, re_max)]

    def register(z):
        if z is None:
            return
        if not (1e-8 < z.real <= re_max + 1e-9 and abs(z.imag) <= im_max + 1e-9):
            return
        if abs(secular_residual(z, params)) > _ROOT_RESID_TOL:
            return
        for w in found:
            if abs(z - w) < 1e-8:
                return
        found.append(z)
        # conjugate partner is a root too (real-coefficient residual)
        if abs(z.imag) >= _REAL_IM_TOL:
            zc = np.conj(z)
            if not any(abs(zc - w) < 1e-8 for w in found):
                found.append(complex(zc))

    for re0 in np.linspace(0.05, re_max, 10):
        for im0 in np.linspace(0.0, im_max, 8):
            register(_newton_root(complex(re0, im0), params))
    if not found:
        raise RuntimeError(
            f"no bound states found for a={params.a}, gamma={params.gamma}"
        )
    return _label_roots(found)


def linear_gamma_critical(a: float, tol: float = 1e-6,
                          gamma_hi: float = 2.0) -> float:
    """Exceptional point of the linear problem, located by bisection.

    Bisects on the number of real secular roots (two below, none above the
    branch point).
    """
    def n_real(gamma):
        return count_real_roots(ModelParams(a=a, gamma=gamma, g=0.0,
                                            x_max=a / 2 + 6, n_grid=256))

    lo = None
    for gamma in np.linspace(0.0, gamma_hi, 41):
        if n_real(float(gamma)) >= 2:
            lo = float(gamma)
            break
    if lo is None:
        raise RuntimeError(f"no two-real-root region found for a={a}")
    hi = None
    for gamma in np.linspace(lo, gamma_hi, 81):
        if n_real(float(gamma)) < 2:
            hi = float(gamma)
            break
    if hi is None:
        raise RuntimeError(f"roots never coalesce below gamma={gamma_hi} for a={a}")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if n_real(mid) >= 2:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def excited_birth_gamma(a: float, tol: float = 1e-4) -> float:
    """Gain/loss threshold above which the excited bound state exists (a < 2).

    For a >= 2 the excited state is present for every gamma > 0 and the
    threshold is 0.
    """
    if a >= 2.0:
        return 0.0
    def n_real(gamma):
        return count_real_roots(ModelParams(a=a, gamma=gamma, g=0.0,
                                            x_max=a / 2 + 6, n_grid=256))
    lo, hi = 0.0, None
    for gamma in np.linspace(0.0, 1.5, 61):
        if n_real(float(gamma)) >= 2:
            hi = float(gamma)
            break
        lo = float(gamma)
    if hi is None:
        raise RuntimeError(f"excited state never appears for a={a}")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if n_real(mid) >= 2:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


@dataclass(frozen=True)
class LinearState:
    """Normalized piecewise-exponential bound state of the g = 0 problem.

    Coefficients follow the ansatz in the module docstring.  The state is
    normalized to unit L2 norm (analytically) and gauged so that psi(0) is
    real and positive; if psi(0) = 0 (the antisymmetric state at gamma = 0)
    the gauge falls back to psi'(0) purely imaginary with positive
    imaginary part, which is the PT-symmetric gauge i*sinh(kx).
    """

    kappa: Eigenvalue
    A: complex
    C: complex
    D: complex
    B: complex
    params: ModelParams

    def psi(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        k = self.kappa.kappa
        b = self.params.a / 2.0
        left = self.A * np.exp(k * x)
        mid = self.C * np.exp(k * x) + self.D * np.exp(-k * x)
        right = self.B * np.exp(-k * x)
        return np.where(x < -b, left, np.where(x > b, right, mid))

    def dpsi(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        k = self.kappa.kappa
        b = self.params.a / 2.0
        left = k * self.A * np.exp(k * x)
        mid = k * (self.C * np.exp(k * x) - self.D * np.exp(-k * x))
        right = -k * self.B * np.exp(-k * x)
        return np.where(x < -b, left, np.where(x > b, right, mid))

    @property
    def psi0(self) -> complex:
        return self.C + self.D

    @property
    def dpsi0(self) -> complex:
        return self.kappa.kappa * (self.C - self.D)


def _analytic_norm2(kappa: complex, A, C, D, B, a: float) -> float:
    """L2 norm squared of the piecewise state over the whole line."""
    b = a / 2.0
    p, q = kappa.real, kappa.imag
    tails = (abs(A) ** 2 + abs(B) ** 2) * np.exp(-2.0 * p * b) / (2.0 * p)
    mid_sq = (abs(C) ** 2 + abs(D) ** 2) * np.sinh(2.0 * p * b) / p
    if abs(q) > 1e-300:
        cross = 2.0 * np.real(C * np.conj(D)) * np.sin(2.0 * q * b) / q \
            if abs(q * b) > 1e-8 else 4.0 * b * np.real(C * np.conj(D))
    else:
        cross = 4.0 * b * np.real(C * np.conj(D))
    return float(tails + mid_sq + cross)


def build_linear_state(kappa, params: ModelParams,
                       resid_tol: float = 1e-10) -> LinearState:
    """Reconstruct the normalized, phase-gauged state for a secular root."""
    ev = kappa if isinstance(kappa, Eigenvalue) else Eigenvalue(complex(kappa))
    k = ev.kappa
    resid = secular_residual(k, params)
    if abs(resid) > resid_tol:
        raise ValueError(
            f"kappa={k} is not a secular root (residual {abs(resid):.2e})"
        )
    b = params.a / 2.0
    kappa0 = 1.0 + 1.0j * params.gamma
    # null vector of the matching system; satisfies the first row exactly
    C = (kappa0 - 2.0 * k) * np.exp(k * b)
    D = -kappa0 * np.exp(-k * b)
    A = C + D * np.exp(2.0 * k * b)
    B = C * np.exp(2.0 * k * b) + D
    scale = 1.0 / np.sqrt(_analytic_norm2(k, A, C, D, B, params.a))
    A, B, C, D = A * scale, B * scale, C * scale, D * scale
    psi0 = C + D
    if abs(psi0) > 1e-12:
        phase = np.exp(-1.0j * np.angle(psi0))
    else:
        dpsi0 = k * (C - D)
        phase = np.exp(1.0j * (0.5 * np.pi - np.angle(dpsi0)))
    return LinearState(kappa=ev, A=A * phase, C=C * phase, D=D * phase,
                       B=B * phase, params=params)


@dataclass(frozen=True)
class RatioPoint:
    gamma: float
    branch: Branch
    modulus: float
    phase: float


def _ratio_dc(k: complex, a: float, gamma: float) -> complex:
    """Gauge-invariant coefficient ratio D/C of the inner region."""
    kappa0 = 1.0 + 1.0j * gamma
    return kappa0 * np.exp(-k * a) / (2.0 * k - kappa0)


def coefficient_ratio_curve(a: float, gamma_range) -> list[RatioPoint]:
    """Modulus and phase of D/C for both branches along a gamma sweep.

    Branch identity is carried by continuity: each branch's root is polished
    by Newton started from its value at the previous gamma, with
    nearest-neighbour matching, instead of re-sorting (which would swap
    labels at the branch point).
    """
    gammas = list(gamma_range)
    if any(g2 < g1 for g1, g2 in zip(gammas[:-1], gammas[1:])):
        raise ValueError("gamma_range must be ascending")
    base = ModelParams(a=a, gamma=gammas[0], g=0.0, x_max=a / 2 + 6, n_grid=256)
    spec = solve_linear_spectrum(base)
    tracked: dict[Branch, complex] = {}
    for ev in spec:
        if ev.branch in (Branch.GROUND_REAL, Branch.EXCITED_REAL):
            tracked[ev.branch] = ev.kappa
    if Branch.EXCITED_REAL not in tracked:
        raise RuntimeError(
            f"need both real branches at gamma={gammas[0]} (a={a}) to start the sweep"
        )
    out = []
    for gamma in gammas:
        p = base.replace(gamma=float(gamma))
        prev = dict(tracked)
        news = {}
        for br, k_prev in prev.items():
            z = _newton_root(k_prev, p)
            if z is None:
                raise RuntimeError(f"branch {br} lost at gamma={gamma}")
            news[br] = z
        # nearest-neighbour consistency: if both branches collapsed onto one
        # root, split them onto the conjugate pair deterministically
        if abs(news[Branch.GROUND_REAL] - news[Branch.EXCITED_REAL]) < 1e-10 \
                and abs(news[Branch.GROUND_REAL].imag) > 1e-10:
            z = news[Branch.GROUND_REAL]
            zc = complex(np.conj(z))
            news[Branch.GROUND_REAL] = z if z.imag > 0 else zc
            news[Branch.EXCITED_REAL] = zc if z.imag > 0 else z
        tracked = news
        for br in (Branch.GROUND_REAL, Branch.EXCITED_REAL):
            r = _ratio_dc(tracked[br], a, float(gamma))
            out.append(RatioPoint(gamma=float(gamma), branch=br,
                                  modulus=float(abs(r)),
                                  phase=float(np.angle(r))))
    return out


def linear_superposition_density(s1: LinearState, s2: LinearState,
                                 t: float, x) -> np.ndarray:
    """|psi1 e^{i k1^2 t} + psi2 e^{i k2^2 t}|^2 in the PT-symmetric regime.

    Valid only while both kappas are real (unbroken PT symmetry); the
    density is then periodic in t with beat frequency |k1^2 - k2^2|.
    """
    if s1.params != s2.params:
        raise ValueError("states must share model parameters")
    k1, k2 = s1.kappa.kappa, s2.kappa.kappa
    if abs(k1.imag) > 1e-9 or abs(k2.imag) > 1e-9:
        raise ValueError("superposition formula requires real eigenvalues")
    ph1 = np.exp(1.0j * k1 * k1 * t)
    ph2 = np.exp(1.0j * k2 * k2 * t)
    total = s1.psi(x) * ph1 + s2.psi(x) * ph2
    return np.abs(total) ** 2
