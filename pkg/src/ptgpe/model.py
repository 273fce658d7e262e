"""Domain types, unit conversion and grid/quadrature utilities.

The dimensionless model is a one-dimensional Schroedinger equation with two
attractive delta wells at x = +-a/2 whose strengths carry balanced imaginary
parts (gain and loss), plus a cubic nonlinearity:

    -psi'' - [(1+i*gamma) delta(x+a/2) + (1-i*gamma) delta(x-a/2)] psi
           - g |psi|^2 psi  =  -kappa^2 psi ,      Re(kappa) > 0.

Conventions fixed here and used by every solver module:

* Eigenvalues are reported as kappa; the energy is -kappa^2 and the time
  factor of a stationary state is exp(i kappa^2 t).  A mode with
  Im(kappa) > 0 therefore decays and one with Im(kappa) < 0 grows.
* The well at x = -a/2 carries coefficient (1+i*gamma), the one at
  x = +a/2 carries (1-i*gamma).  Written as a potential this means
  Im V = -gamma at the left well and +gamma at the right well, so the
  *right* well (x = +a/2) injects probability (gain) and the *left* well
  (x = -a/2) removes it (loss).  This was verified numerically by
  short-time norm flow; diagnostics use `GAIN_WELL_SIGN` as the single
  source of truth.
* Wave functions are sampled on a uniform symmetric grid that places
  x = 0, x = +-a/2 and the domain edges exactly on nodes.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "GAIN_WELL_SIGN",
    "Branch",
    "PhaseConvention",
    "ModelParams",
    "PhysicalParams",
    "DimensionlessForm",
    "Eigenvalue",
    "Grid",
    "GridState",
    "ConfigurationError",
    "GridMismatchError",
    "make_grid",
    "well_coefficients",
    "physical_to_dimensionless",
    "dimensionless_to_physical",
    "norm2",
    "overlap",
    "inner",
    "mirror",
    "pt_conjugate",
]

# Sign of the x coordinate of the well that gains probability density
# (+1 means x = +a/2).  See the module docstring for the derivation.
GAIN_WELL_SIGN = +1


class ConfigurationError(ValueError):
    """Raised for invalid model parameters or grid requests."""


class GridMismatchError(ValueError):
    """Raised when two states do not share the same grid."""


class Branch(str, enum.Enum):
    """Branch labels for eigenvalues across the whole parameter range."""

    GROUND_REAL = "GroundReal"
    EXCITED_REAL = "ExcitedReal"
    COMPLEX_DECAYING = "ComplexDecaying"
    COMPLEX_GROWING = "ComplexGrowing"
    CONTINUATION_DECAYING = "ContinuationDecaying"
    CONTINUATION_GROWING = "ContinuationGrowing"


class PhaseConvention(str, enum.Enum):
    """Global-phase gauge of a stored wave function."""

    REAL_AT_ORIGIN = "RealAtOrigin"
    CONTINUATION_NORM = "ContinuationNorm"


@dataclass(frozen=True)
class ModelParams:
    """Dimensionless configuration of the double-well model.

    a       : well separation (wells sit at x = +-a/2)
    gamma   : gain/loss strength, gamma >= 0
    g       : nonlinearity strength; g >= 0 is the attractive case treated
              throughout.  g < 0 is accepted only with allow_repulsive=True
              and is untested territory (no dn/tanh exterior branches).
    x_max   : requested half-width of the computational domain
    n_grid  : number of grid intervals (even, >= 256; a power of two keeps
              the spectral propagator fast)
    """

    a: float
    gamma: float
    g: float
    x_max: float
    n_grid: int
    allow_repulsive: bool = False

    def __post_init__(self):
        if self.a <= 0:
            raise ConfigurationError(f"well separation a must be positive, got {self.a}")
        if self.gamma < 0:
            raise ConfigurationError(f"gamma must be >= 0, got {self.gamma}")
        if self.g < 0 and not self.allow_repulsive:
            raise ConfigurationError(
                "g < 0 requires allow_repulsive=True (experimental, no exterior "
                "dn/tanh branches implemented)"
            )
        if self.x_max <= self.a / 2 + 5:
            raise ConfigurationError(
                f"x_max={self.x_max} leaves no room for tail decay; need x_max > a/2 + 5"
            )
        if self.n_grid < 256 or self.n_grid % 2:
            raise ConfigurationError(f"n_grid must be even and >= 256, got {self.n_grid}")

    def replace(self, **kw) -> "ModelParams":
        d = dict(a=self.a, gamma=self.gamma, g=self.g, x_max=self.x_max,
                 n_grid=self.n_grid, allow_repulsive=self.allow_repulsive)
        d.update(kw)
        return ModelParams(**d)


def well_coefficients(gamma: float) -> tuple[complex, complex]:
    """Complex delta-well coefficients (left well at -a/2, right at +a/2)."""
    return (1.0 + 1.0j * gamma, 1.0 - 1.0j * gamma)


@dataclass(frozen=True)
class PhysicalParams:
    """Physical double-well parameters before removing units.

    V0    : well depth amplitude (energy * length)
    Gamma : gain/loss amplitude (energy * length)
    G     : contact-interaction amplitude for a wave function normalized to
            one (atom-number factors are absorbed into G); G < 0 attractive
    m     : particle mass
    hbar  : reduced Planck constant
    """

    V0: float
    Gamma: float
    G: float
    m: float
    hbar: float

    def __post_init__(self):
        if self.V0 <= 0:
            raise ValueError(f"V0 must be positive, got {self.V0}")
        if self.m <= 0:
            raise ValueError(f"m must be positive, got {self.m}")
        if self.hbar <= 0:
            raise ValueError(f"hbar must be positive, got {self.hbar}")


@dataclass(frozen=True)
class DimensionlessForm:
    gamma: float
    g: float
    length_scale: float
    energy_scale: float


def physical_to_dimensionless(p: PhysicalParams) -> DimensionlessForm:
    """Convert physical well parameters to the dimensionless model.

    Lengths are measured in L = hbar^2 / (2 m V0) and energies in
    E0 = 2 m V0^2 / hbar^2, which normalizes the real delta strength to one.
    Substituting x = L*xt and rescaling the (unit-normalized) wave function
    by L^(-1/2) maps the physical equation onto the dimensionless one with

        gamma = Gamma / V0 ,        g = -G / (L * E0) = -G / V0 .

    The sign flip stems from the physical nonlinear term entering the
    Hamiltonian as +G|psi|^2 (attractive means G < 0), while the
    dimensionless equation is written with -g|psi|^2 and g > 0 attractive.
    """
    L = p.hbar**2 / (2.0 * p.m * p.V0)
    E0 = 2.0 * p.m * p.V0**2 / p.hbar**2
    return DimensionlessForm(
        gamma=p.Gamma / p.V0,
        g=-p.G / (L * E0),
        length_scale=L,
        energy_scale=E0,
    )


def dimensionless_to_physical(gamma: float, g: float, V0: float, m: float,
                              hbar: float) -> PhysicalParams:
    """Inverse of :func:`physical_to_dimensionless` for given (V0, m, hbar)."""
    L = hbar**2 / (2.0 * m * V0)
    E0 = 2.0 * m * V0**2 / hbar**2
    return PhysicalParams(V0=V0, Gamma=gamma * V0, G=-g * L * E0, m=m, hbar=hbar)


@dataclass(frozen=True)
class Eigenvalue:
    """Complex eigenvalue kappa with Re(kappa) > 0; the energy is -kappa^2."""

    kappa: complex
    branch: Branch | None = None

    def __post_init__(self):
        if not (self.kappa.real > 0):
            raise ValueError(f"Re(kappa) must be positive, got {self.kappa}")
        if self.branch is not None:
            k_i = self.kappa.imag
            if self.branch in (Branch.COMPLEX_DECAYING, Branch.CONTINUATION_DECAYING) and not k_i > 0:
                raise ValueError(f"decaying branch requires Im(kappa) > 0, got {self.kappa}")
            if self.branch in (Branch.COMPLEX_GROWING, Branch.CONTINUATION_GROWING) and not k_i < 0:
                raise ValueError(f"growing branch requires Im(kappa) < 0, got {self.kappa}")

    @property
    def energy(self) -> complex:
        return -self.kappa * self.kappa


@dataclass(frozen=True)
class Grid:
    """Uniform symmetric grid with wells and origin exactly on nodes.

    x has n_grid + 1 nodes running from -x_max to +x_max (both included);
    the first n_grid nodes double as the periodic grid of the spectral
    propagator (period 2*x_max).
    """

    x: np.ndarray
    dx: float
    well_indices: tuple[int, int]
    i_zero: int
    x_max: float

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        object.__setattr__(self, "x", x)
        n = x.size
        if n < 3 or not np.allclose(np.diff(x), self.dx, rtol=0, atol=1e-12 * self.dx):
            raise ConfigurationError("grid must be uniform")
        if not np.allclose(x, -x[::-1], rtol=0, atol=1e-12):
            raise ConfigurationError("grid must be symmetric about x = 0")
        il, ir = self.well_indices
        if il != n - 1 - ir or abs(x[ir] - (-x[il])) > 1e-12:
            raise ConfigurationError("well indices must be mirror images")
        if abs(x[self.i_zero]) > 1e-15:
            raise ConfigurationError("origin must be a grid node")
        x.setflags(write=False)

    @property
    def n_nodes(self) -> int:
        return self.x.size

    @property
    def half_slice(self) -> slice:
        """Nodes with x >= 0 (used by the half-line integrators)."""
        return slice(self.i_zero, self.x.size)


def make_grid(params: ModelParams) -> Grid:
    """Build the solver grid for the given parameters.

    The spacing is adjusted from the requested 2*x_max/n_grid so that
    (a/2)/dx is an integer: jump conditions and the delta regularization
    then act exactly on nodes and the trapezoidal rule keeps its full
    second order despite the derivative kinks at the wells.  x_max moves
    slightly to x_max' = (n_grid/2)*dx.
    """
    half = params.n_grid // 2
    dx_req = 2.0 * params.x_max / params.n_grid
    m = round((params.a / 2.0) / dx_req)
    if m < 4:
        raise ConfigurationError(
            f"n_grid={params.n_grid} too small to place the wells on nodes at "
            f"x_max={params.x_max} (only {m} nodes between origin and well)"
        )
    if m > half - 2:
        raise ConfigurationError("wells fall outside the domain after node alignment")
    dx = (params.a / 2.0) / m
    x = (np.arange(params.n_grid + 1) - half) * dx
    x_max = half * dx
    if x_max <= params.a / 2 + 5:
        raise ConfigurationError(
            f"adjusted domain half-width {x_max:.6g} leaves no room for tail decay"
        )
    return Grid(x=x, dx=dx, well_indices=(half - m, half + m), i_zero=half, x_max=x_max)


@dataclass(frozen=True)
class GridState:
    """Complex wave function sampled on a Grid with a fixed phase gauge."""

    psi: np.ndarray
    kappa: Eigenvalue
    params: ModelParams
    grid: Grid
    phase_convention: PhaseConvention = PhaseConvention.REAL_AT_ORIGIN

    def __post_init__(self):
        psi = np.array(self.psi, dtype=complex)
        if psi.shape != self.grid.x.shape:
            raise GridMismatchError(
                f"psi has shape {psi.shape}, grid has {self.grid.x.shape}"
            )
        psi.setflags(write=False)
        object.__setattr__(self, "psi", psi)

    @property
    def psi0(self) -> complex:
        return complex(self.psi[self.grid.i_zero])


def _require_same_grid(u: GridState, v: GridState) -> Grid:
    if u.grid.x.size != v.grid.x.size or abs(u.grid.dx - v.grid.dx) > 1e-15:
        raise GridMismatchError("states live on different grids")
    return u.grid


def norm2(state: GridState) -> float:
    """Squared L2 norm by the trapezoidal rule."""
    return float(np.trapezoid(np.abs(state.psi) ** 2, dx=state.grid.dx))


def overlap(u: GridState, v: GridState) -> complex:
    """Bilinear product integral(u * v) dx, without complex conjugation.

    This is the pairing required by the analytically continued norm
    integral(psi(x) psi(-x)) dx; for the standard inner product use
    :func:`inner`.
    """
    grid = _require_same_grid(u, v)
    return complex(np.trapezoid(u.psi * v.psi, dx=grid.dx))


def inner(u: GridState, v: GridState) -> complex:
    """Conjugating inner product integral(conj(u) * v) dx."""
    grid = _require_same_grid(u, v)
    return complex(np.trapezoid(np.conj(u.psi) * v.psi, dx=grid.dx))


def mirror(state: GridState) -> GridState:
    """Reflection x -> -x, exact on the symmetric grid."""
    return GridState(
        psi=state.psi[::-1],
        kappa=state.kappa,
        params=state.params,
        grid=state.grid,
        phase_convention=state.phase_convention,
    )


def pt_conjugate(state: GridState) -> GridState:
    """Combined parity and complex conjugation: psi(x) -> conj(psi(-x))."""
    return GridState(
        psi=np.conj(state.psi[::-1]),
        kappa=state.kappa,
        params=state.params,
        grid=state.grid,
        phase_convention=state.phase_convention,
    )
