"""Continuum data types and pointwise constitutive operations.

Everything here is pure and grid-free: the matrices of viscosity
coefficients coupling the constituents, barotropic pressure laws, and
the small algebraic operations (mixture averages, momentum exchange,
one-dimensional stress) shared by both closure variants of the
multi-velocity mixture model.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

__all__ = [
    "PSD_RTOL",
    "ConfigurationError",
    "DegenerateStateError",
    "ModelVariant",
    "ViscosityMatrices",
    "AdmissibilityReport",
    "validate_viscosity",
    "PolytropicLaw",
    "TabulatedLaw",
    "ExchangeMatrix",
    "MixtureParams",
    "average_velocity",
    "total_density",
    "concentrations",
    "momentum_exchange",
    "viscous_flux_1d",
    "dissipation_density",
    "mixture_pressure",
    "mixture_dpressure",
    "mixture_potential_density",
]

# relative slack absorbing eigenvalue roundoff in semidefiniteness checks
PSD_RTOL = 1e-10


class ConfigurationError(ValueError):
    """A structural problem in how a run or operator was set up."""


class DegenerateStateError(ValueError):
    """Raised when a mixture state has no usable total density."""


class ModelVariant(Enum):
    """Closure variant of the mixture system.

    ORIGINAL carries each constituent with its own velocity and its own
    pressure law, coupled through drag exchange.  MODIFIED convects all
    constituents with the arithmetic-average velocity, uses one pressure
    evaluated on the total density and drops the drag terms.
    """

    ORIGINAL = "original"
    MODIFIED = "modified"


def _as_square_matrix(m, name):
    a = np.array(m, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"{name} must be a square matrix, got shape {a.shape}")
    if not np.isfinite(a).all():
        raise ValueError(f"{name} contains non-finite entries")
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class ViscosityMatrices:
    """Shear (``mu``) and second (``lam``) viscosity matrices, Pa s.

    Entry ``(i, k)`` couples the stress of constituent ``i`` to the
    velocity gradient of constituent ``k``.  Two combinations are
    derived on access and never stored: ``nu = lam + 2 mu``, the total
    viscosity acting on one-dimensional velocity gradients, and
    ``h = lam + (2/3) mu``, the bulk combination whose positive
    semidefiniteness (together with positive definiteness of sym(mu))
    makes the dissipation quadratic form nonnegative.
    """

    mu: np.ndarray
    lam: np.ndarray

    def __post_init__(self):
        mu = _as_square_matrix(self.mu, "mu")
        lam = _as_square_matrix(self.lam, "lam")
        if mu.shape != lam.shape:
            raise ValueError(
                f"mu and lam must have equal shapes, got {mu.shape} and {lam.shape}"
            )
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "lam", lam)

    @property
    def n(self) -> int:
        return self.mu.shape[0]

    @property
    def nu(self) -> np.ndarray:
        """Total viscosity matrix ``lam + 2 mu``."""
        return self.lam + 2.0 * self.mu

    @property
    def h(self) -> np.ndarray:
        """Bulk combination ``lam + (2/3) mu``."""
        return self.lam + (2.0 / 3.0) * self.mu


def _sym(a):
    return 0.5 * (a + a.T)


def _relative_asymmetry(a):
    scale = np.linalg.norm(a)
    if scale == 0.0:
        return 0.0
    return float(np.linalg.norm(a - a.T) / scale)


@dataclass(frozen=True, eq=False)
class AdmissibilityReport:
    """Result of the viscosity-matrix admissibility check."""

    admissible: bool
    min_eig_sym_mu: float
    min_eig_sym_h: float
    psd_tolerance: float
    nu: np.ndarray
    mu_asymmetry: float
    lam_asymmetry: float


def validate_viscosity(visc: ViscosityMatrices) -> AdmissibilityReport:
    """Classify a viscosity-matrix pair as admissible or not.

    Admissible means the symmetric part of ``mu`` is positive definite
    and the symmetric part of ``h = lam + (2/3) mu`` is positive
    semidefinite.  Only the symmetric parts enter: the dissipation
    quadratic form cannot see the antisymmetric remainder, so
    non-symmetric matrices are accepted and their asymmetry is merely
    reported.  The semidefinite test is softened by
    ``PSD_RTOL * ||h||`` (plus a few ulps of the formation of ``h``) so
    a configuration with an exactly vanishing bulk mode still passes.
    """
    min_mu = float(np.linalg.eigvalsh(_sym(visc.mu)).min())
    h = visc.h
    min_h = float(np.linalg.eigvalsh(_sym(h)).min())
    tol = PSD_RTOL * float(np.linalg.norm(h))
    tol += 64.0 * np.finfo(float).eps * float(np.linalg.norm(visc.mu))
    admissible = (min_mu > 0.0) and (min_h >= -tol)
    return AdmissibilityReport(
        admissible=admissible,
        min_eig_sym_mu=min_mu,
        min_eig_sym_h=min_h,
        psd_tolerance=tol,
        nu=visc.nu,
        mu_asymmetry=_relative_asymmetry(visc.mu),
        lam_asymmetry=_relative_asymmetry(visc.lam),
    )


def _nonnegative_density(rho):
    rho = np.asarray(rho, dtype=float)
    if np.any(rho < 0.0):
        raise ValueError("density must be nonnegative")
    return rho


def _positive_density(rho):
    rho = np.asarray(rho, dtype=float)
    if np.any(rho <= 0.0):
        raise ValueError("density must be positive")
    return rho


@dataclass(frozen=True)
class PolytropicLaw:
    """Barotropic pressure ``p(rho) = K rho**gamma``, K > 0, gamma > 1."""

    K: float
    gamma: float

    def __post_init__(self):
        if not self.K > 0.0:
            raise ValueError("K must be positive")
        if not self.gamma > 1.0:
            raise ValueError("gamma must exceed 1")

    @property
    def above_existence_threshold(self) -> bool:
        """True when gamma > 3/2, the growth rate the barotropic
        existence theory for these mixtures requires."""
        return self.gamma > 1.5

    def pressure(self, rho):
        rho = _nonnegative_density(rho)
        return self.K * rho**self.gamma

    def dpressure(self, rho):
        rho = _nonnegative_density(rho)
        return self.K * self.gamma * rho ** (self.gamma - 1.0)

    def potential(self, rho):
        """Potential energy density P with ``rho P' - P = p``.

        The gauge drops the affine-in-rho term, leaving
        ``K rho**gamma / (gamma - 1)``; only changes of P enter energy
        budgets, so the gauge is free.
        """
        rho = _positive_density(rho)
        return self.K * rho**self.gamma / (self.gamma - 1.0)


@dataclass(frozen=True, eq=False)
class TabulatedLaw:
    """Monotone piecewise-linear ``p(rho)`` between breakpoints.

    Breakpoint densities must be strictly increasing and positive,
    pressures nondecreasing.  Outside the table the pressure is
    clamped to the end values and a warning is emitted; no power-law
    continuation is attempted (a silent extension could break
    monotonicity).
    """

    rho_table: np.ndarray
    p_table: np.ndarray

    def __post_init__(self):
        r = np.array(self.rho_table, dtype=float)
        p = np.array(self.p_table, dtype=float)
        if r.ndim != 1 or p.ndim != 1 or r.size != p.size or r.size < 2:
            raise ValueError("tables must be 1-d arrays of equal length >= 2")
        if not (np.isfinite(r).all() and np.isfinite(p).all()):
            raise ValueError("tables contain non-finite entries")
        if not r[0] > 0.0:
            raise ValueError("density breakpoints must be positive")
        if not np.all(np.diff(r) > 0.0):
            raise ValueError("density breakpoints must be strictly increasing")
        if np.any(np.diff(p) < 0.0):
            raise ValueError("pressure values must be nondecreasing")
        r.setflags(write=False)
        p.setflags(write=False)
        object.__setattr__(self, "rho_table", r)
        object.__setattr__(self, "p_table", p)
        # cumulative integral of p(s)/s**2 at the breakpoints, segment-exact
        a, b = r[:-1], r[1:]
        pa, pb = p[:-1], p[1:]
        slope = (pb - pa) / (b - a)
        seg = (pa - slope * a) * (1.0 / a - 1.0 / b) + slope * np.log(b / a)
        cum = np.concatenate([[0.0], np.cumsum(seg)])
        cum.setflags(write=False)
        object.__setattr__(self, "_cum_int", cum)

    def _warn_if_clamped(self, rho):
        if np.any(rho < self.rho_table[0]) or np.any(rho > self.rho_table[-1]):
            warnings.warn(
                "density outside tabulated range; pressure clamped to end values",
                stacklevel=3,
            )

    def pressure(self, rho):
        rho = _nonnegative_density(rho)
        self._warn_if_clamped(rho)
        return np.interp(rho, self.rho_table, self.p_table)

    def dpressure(self, rho):
        rho = _nonnegative_density(rho)
        r = self.rho_table
        slopes = np.diff(self.p_table) / np.diff(r)
        idx = np.clip(np.searchsorted(r, rho, side="right") - 1, 0, r.size - 2)
        out = slopes[idx]
        return np.where((rho < r[0]) | (rho >= r[-1]), 0.0, out)

    def potential(self, rho):
        """Potential energy density P with ``rho P' - P = p``.

        Computed from the segment-exact integral of ``p(s)/s**2``, with
        the gauge fixed so that ``P`` equals ``p`` at the first
        breakpoint (for a quadratic law this reproduces the polytropic
        gauge).  Beyond the table the clamped constant pressure is
        integrated.
        """
        rho = _positive_density(rho)
        scalar = rho.ndim == 0
        rho = np.atleast_1d(rho)
        self._warn_if_clamped(rho)
        r, p = self.rho_table, self.p_table
        slopes = np.diff(p) / np.diff(r)
        idx = np.clip(np.searchsorted(r, rho, side="right") - 1, 0, r.size - 2)
        a = r[idx]
        pa = p[idx]
        sl = slopes[idx]
        part = (pa - sl * a) * (1.0 / a - 1.0 / rho) + sl * np.log(rho / a)
        integral = self._cum_int[idx] + part
        below = rho < r[0]
        if np.any(below):
            integral = np.where(below, -p[0] * (1.0 / rho - 1.0 / r[0]), integral)
        above = rho > r[-1]
        if np.any(above):
            integral = np.where(
                above, self._cum_int[-1] + p[-1] * (1.0 / r[-1] - 1.0 / rho), integral
            )
        out = rho * (integral + p[0] / r[0])
        return float(out[0]) if scalar else out


@dataclass(frozen=True, eq=False)
class ExchangeMatrix:
    """Momentum-exchange intensities ``a[i, j] >= 0``, kg m^-3 s^-1.

    The drag on constituent i is ``sum_j a[i, j] (u_j - u_i)``.  The
    diagonal is inert (u_i - u_i = 0) and is accepted unchanged.
    """

    a: np.ndarray

    def __post_init__(self):
        a = _as_square_matrix(self.a, "exchange matrix")
        if np.any(a < 0.0):
            raise ValueError("exchange intensities must be nonnegative")
        object.__setattr__(self, "a", a)

    @property
    def n(self) -> int:
        return self.a.shape[0]

    @property
    def is_inert(self) -> bool:
        """True when every off-diagonal entry vanishes."""
        off = self.a - np.diag(np.diag(self.a))
        return not np.any(off)

    @property
    def is_symmetric(self) -> bool:
        return bool(np.array_equal(self.a, self.a.T))


@dataclass(frozen=True, eq=False)
class MixtureParams:
    """Everything fixed about a mixture: closure variant, viscosity,
    pressure law(s), optional drag exchange and body force.

    ``pressure`` is a single law for the MODIFIED variant; for the
    ORIGINAL variant it may be a single law (applied to every
    constituent) or a sequence of one law per constituent, and is
    normalised to a tuple.  ``body_force`` is ``f(x, t)`` returning one
    acceleration row per constituent, or None.
    """

    variant: ModelVariant
    visc: ViscosityMatrices
    pressure: object
    exchange: ExchangeMatrix | None = None
    body_force: object = None

    def __post_init__(self):
        n = self.visc.n
        if self.variant is ModelVariant.MODIFIED:
            if isinstance(self.pressure, (tuple, list)):
                raise ValueError("modified variant takes a single pressure law")
            if self.exchange is not None and not self.exchange.is_inert:
                raise ValueError(
                    "modified variant admits no momentum exchange; "
                    "drop the matrix or make it all-zero"
                )
        else:
            laws = self.pressure
            if not isinstance(laws, (tuple, list)):
                laws = (laws,) * n
            if len(laws) != n:
                raise ValueError(
                    f"original variant needs {n} pressure laws, got {len(laws)}"
                )
            object.__setattr__(self, "pressure", tuple(laws))
        if self.exchange is not None and self.exchange.n != n:
            raise ValueError(
                f"exchange matrix is {self.exchange.n}x{self.exchange.n}, "
                f"viscosity is {n}x{n}"
            )
        if self.body_force is not None and not callable(self.body_force):
            raise ValueError("body_force must be callable or None")

    @property
    def n_constituents(self) -> int:
        return self.visc.n


def average_velocity(u):
    """Arithmetic mean of the constituent velocities (axis 0)."""
    u = np.asarray(u, dtype=float)
    if u.shape[0] < 1:
        raise ValueError("need at least one constituent")
    return u.mean(axis=0)


def total_density(rho):
    """Sum of the constituent densities (axis 0)."""
    return np.asarray(rho, dtype=float).sum(axis=0)


def concentrations(rho):
    """Per-constituent mass fractions ``rho_i / sum_j rho_j``."""
    rho = np.asarray(rho, dtype=float)
    total = rho.sum(axis=0)
    if np.any(total <= 0.0):
        raise DegenerateStateError("total density vanishes; concentrations undefined")
    return rho / total


def momentum_exchange(u, exchange):
    """Drag force densities ``J_i = sum_j a[i, j] (u_j - u_i)``.

    Works on velocity vectors (shape (N,)) and on fields (N, ...).
    For a symmetric matrix the forces sum to zero across constituents.
    """
    a = exchange.a if isinstance(exchange, ExchangeMatrix) else np.asarray(exchange, float)
    u = np.asarray(u, dtype=float)
    row = a.sum(axis=1).reshape((-1,) + (1,) * (u.ndim - 1))
    return np.einsum("ij,j...->i...", a, u) - row * u


def viscous_flux_1d(dudx, visc: ViscosityMatrices):
    """One-dimensional stresses ``S_i = sum_k nu[i, k] dudx_k``.

    In one dimension the deformation tensor and the divergence both
    collapse to the single gradient, so the full stress law reduces to
    the total-viscosity matrix acting on the gradient vector.
    """
    return np.einsum("ik,k...->i...", visc.nu, np.asarray(dudx, dtype=float))


def dissipation_density(dudx, visc: ViscosityMatrices):
    """Quadratic form ``sum_ij nu[i, j] dudx_j dudx_i`` (W m^-3).

    Nonnegative (up to roundoff) for admissible matrices, since
    ``sym(nu) = sym(h) + (4/3) sym(mu)`` is positive definite there.
    """
    g = np.asarray(dudx, dtype=float)
    return np.einsum("i...,ik,k...->...", g, visc.nu, g)


def _pressure_laws(params: MixtureParams):
    if params.variant is ModelVariant.MODIFIED:
        return None
    return params.pressure


def mixture_pressure(params: MixtureParams, rho):
    """Per-constituent pressure rows for a density field (N, ...).

    MODIFIED evaluates the common law on the total density and
    broadcasts it; ORIGINAL evaluates each constituent's own law.
    """
    rho = np.asarray(rho, dtype=float)
    if params.variant is ModelVariant.MODIFIED:
        p = params.pressure.pressure(rho.sum(axis=0))
        return np.broadcast_to(p, rho.shape)
    laws = _pressure_laws(params)
    return np.stack([law.pressure(rho[i]) for i, law in enumerate(laws)])

def mixture_dpressure(params: MixtureParams, rho):
    """Per-constituent ``dp/drho`` rows, same layout as mixture_pressure."""
    rho = np.asarray(rho, dtype=float)
    if params.variant is ModelVariant.MODIFIED:
        dp = params.pressure.dpressure(rho.sum(axis=0))
        return np.broadcast_to(dp, rho.shape)
    laws = _pressure_laws(params)
    return np.stack([law.dpressure(rho[i]) for i, law in enumerate(laws)])


def mixture_potential_density(params: MixtureParams, rho):
    """Pointwise potential-energy density of the pressure field.

    For the MODIFIED closure every one of the N momentum equations
    carries the full gradient of the common pressure, so the potential
    balancing the pressure work in the energy budget is N times the
    single-fluid potential of the total density.  For the ORIGINAL
    closure each constituent contributes the potential of its own law.
    Zero-density cells contribute nothing (the polytropic potential
    extends continuously by zero).
    """
    rho = np.asarray(rho, dtype=float)
    if params.variant is ModelVariant.MODIFIED:
        total = rho.sum(axis=0)
        out = np.zeros_like(total)
        mask = total > 0.0
        if np.any(mask):
            out[mask] = params.n_constituents * params.pressure.potential(total[mask])
        return out
    out = np.zeros(rho.shape[1:])
    for i, law in enumerate(_pressure_laws(params)):
        mask = rho[i] > 0.0
        if np.any(mask):
            out[mask] += law.potential(rho[i][mask])
    return out
