"""Initial-condition profiles and manufactured exact solutions.

The manufactured catalog is built around traveling waves: with a
density ``rho_i = fraction_i * g(x - speed*t)`` and the common velocity
``u = speed + flux_offset / g``, the mass flux of every constituent is
``fraction_i * (speed*g + flux_offset)``, a pure function of the wave
coordinate, so every continuity equation holds identically and only
the momentum equations need a body force.  (The continuity equations
admit no source term, so any manufactured pair must satisfy them
exactly; profiles that merely prescribe independent rho and u cannot
be completed into an exact solution.)
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import Grid1D
from .model import MixtureParams, ModelVariant
from .solver import MixtureState

__all__ = [
    "PROFILE_NAMES",
    "profile_field",
    "ManufacturedCase",
    "manufactured_case",
    "manufactured_forcing",
    "manufactured_residual",
]

# name -> number of parameters
PROFILE_NAMES = {
    "uniform": 1,    # value
    "sine": 3,       # mean, amplitude, mode
    "gaussian": 4,   # mean, amplitude, center, width
}


def profile_field(name, args, grid: Grid1D):
    """Build a cell-centered field from a named profile."""
    x = grid.centers()
    if name == "uniform":
        (value,) = args
        return np.full(grid.n_cells, float(value))
    if name == "sine":
        mean, amplitude, mode = args
        return mean + amplitude * np.sin(2.0 * np.pi * mode * x / grid.length)
    if name == "gaussian":
        mean, amplitude, center, width = args
        return mean + amplitude * np.exp(-((x - center) ** 2) / (2.0 * width**2))
    raise ValueError(f"unknown profile '{name}'")


@dataclass(frozen=True)
class ManufacturedCase:
    """Traveling-wave exact solution shared by all constituents.

    g(xi) = rho0 + amplitude * sin(2 pi xi / length), xi = x - speed*t
    rho_i = fractions[i] * g
    u_i   = speed + flux_offset / g        (identical for every i)

    The common velocity makes the drag vanish and the average velocity
    coincide with each u_i, so the same fields solve both variants
    (with variant-specific forcing).
    """

    name: str
    rho0: float
    amplitude: float
    speed: float
    flux_offset: float
    fractions: tuple
    length: float = 1.0

    def __post_init__(self):
        if self.rho0 - abs(self.amplitude) <= 0.0:
            raise ValueError("wave amplitude must keep the density positive")

    @property
    def n_constituents(self) -> int:
        return len(self.fractions)

    def _g(self, x, t):
        kappa = 2.0 * np.pi / self.length
        xi = kappa * (np.asarray(x, float) - self.speed * t)
        g = self.rho0 + self.amplitude * np.sin(xi)
        gp = self.amplitude * kappa * np.cos(xi)
        gpp = -self.amplitude * kappa**2 * np.sin(xi)
        return g, gp, gpp

    def density(self, x, t):
        g, _, _ = self._g(x, t)
        return np.outer(self.fractions, g).reshape((self.n_constituents,) + g.shape)

    def velocity(self, x, t):
        g, _, _ = self._g(x, t)
        u = self.speed + self.flux_offset / g
        return np.broadcast_to(u, (self.n_constituents,) + u.shape).copy()

    def state(self, grid: Grid1D, variant: ModelVariant, t=0.0) -> MixtureState:
        x = grid.centers()
        return MixtureState(grid, self.density(x, t), self.velocity(x, t), variant, t)


def manufactured_case(name, n_constituents=1, length=1.0) -> ManufacturedCase:
    """Catalog lookup.  'uniform' is the rest solution (zero forcing);
    'traveling_wave' is a smooth right-moving wave with velocity
    variation of about 0.3."""
    fractions = tuple(
        (i + 1) / (n_constituents * (n_constituents + 1) / 2)
        for i in range(n_constituents)
    )
    if name == "uniform":
        return ManufacturedCase(name, 1.0, 0.0, 0.7, 0.0, fractions, length)
    if name == "traveling_wave":
        return ManufacturedCase(name, 1.0, 0.3, 0.7, 0.4, fractions, length)
    raise ValueError(f"unknown manufactured case '{name}'")


def manufactured_forcing(case: ManufacturedCase, params: MixtureParams):
    """Body force making the case solve the chosen variant exactly.

    From the momentum balance of constituent i (drag vanishes because
    all velocities are equal; the time derivative and convection of the
    wave collapse to ``-alpha_i * flux_offset^2 * g' / g^2``):

        f_i = [ -alpha_i c0^2 g'/g^2 + dp_i/dx - (sum_k nu[i,k]) u'' ]
              / (alpha_i g)

    Returns ``f(x, t) -> (N, len(x))`` suitable for MixtureParams.
    """
    if params.n_constituents != case.n_constituents:
        raise ValueError("constituent counts disagree")
    alphas = np.asarray(case.fractions, float)
    sigma = float(alphas.sum())
    nu_rows = params.visc.nu.sum(axis=1)
    c0 = case.flux_offset

    def forcing(x, t):
        g, gp, gpp = case._g(x, t)
        upp = c0 * (2.0 * gp**2 / g**3 - gpp / g**2)
        conv = -c0**2 * gp / g**2
        out = np.empty((case.n_constituents, g.size))
        if params.variant is ModelVariant.MODIFIED:
            dpdx = params.pressure.dpressure(sigma * g) * sigma * gp
            for i, alpha in enumerate(alphas):
                out[i] = (alpha * conv + dpdx - nu_rows[i] * upp) / (alpha * g)
        else:
            for i, alpha in enumerate(alphas):
                dpdx = params.pressure[i].dpressure(alpha * g) * alpha * gp
                out[i] = (alpha * conv + dpdx - nu_rows[i] * upp) / (alpha * g)
        return out

    return forcing


def _ddx_spectral(f, length):
    n = f.shape[-1]
    k = 2.0 * np.pi * np.fft.rfftfreq(n, d=length / n)
    return np.fft.irfft(1j * k * np.fft.rfft(f), n=n)


def manufactured_residual(case: ManufacturedCase, params: MixtureParams,
                          n=512, t=0.0):
    """Max-norm residuals of both governing equations for the case.

    Spatial derivatives are evaluated spectrally on an n-point periodic
    grid; time derivatives use the analytic wave structure.  Returns
    ``(continuity, momentum)`` residual maxima over constituents.
    """
    L = case.length
    x = (np.arange(n) + 0.5) * (L / n)
    rho = case.density(x, t)
    u = case.velocity(x, t)
    v = u.mean(axis=0)
    g, gp, _ = case._g(x, t)
    alphas = np.asarray(case.fractions, float)
    force = manufactured_forcing(case, params)(x, t)

    # d rho_i / dt = -alpha_i * speed * g'
    drho_dt = -np.outer(alphas, case.speed * gp)
    cont = drho_dt + np.stack([_ddx_spectral(rho[i] * v, L) for i in range(rho.shape[0])])

    # d (rho_i u_i) / dt = -alpha_i * speed^2 * g'  (mass flux is alpha_i (s g + c0))
    dm_dt = -np.outer(alphas, case.speed**2 * gp)
    from .model import mixture_pressure

    p = mixture_pressure(params, rho)
    mom = np.empty_like(u)
    for i in range(u.shape[0]):
        conv = _ddx_spectral(rho[i] * v * u[i], L)
        gradp = _ddx_spectral(p[i], L)
        visc = sum(
            params.visc.nu[i, k] * _ddx_spectral(_ddx_spectral(u[k], L), L)
            for k in range(u.shape[0])
        )
        mom[i] = dm_dt[i] + conv + gradp - visc - rho[i] * force[i]
    return float(np.abs(cont).max()), float(np.abs(mom).max())
