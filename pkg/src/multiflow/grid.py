"""One-dimensional cell-centered grids and difference operators.

Collocated layout: every field lives at the cell centers
``x_k = (k + 1/2) dx``.  Face-based operators pad one ghost cell per
side; the padding rule encodes the boundary condition (periodic wrap,
or reflection at no-slip walls: odd for velocities so the wall value
is zero, even for densities so the wall flux is zero).
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .model import ConfigurationError, ViscosityMatrices

__all__ = [
    "BoundaryKind",
    "Grid1D",
    "ddx_central",
    "face_velocity",
    "upwind_flux_parts",
    "upwind_flux_div",
    "face_gradient",
    "viscous_stress_divergence",
    "integrate",
]


class BoundaryKind(Enum):
    PERIODIC = "periodic"
    NOSLIP = "noslip"


@dataclass(frozen=True)
class Grid1D:
    """Uniform cell-centered grid on (0, length)."""

    length: float
    n_cells: int
    bc: BoundaryKind = BoundaryKind.PERIODIC

    def __post_init__(self):
        if isinstance(self.bc, str):
            object.__setattr__(self, "bc", BoundaryKind(self.bc))
        if not (np.isfinite(self.length) and self.length > 0.0):
            raise ConfigurationError("grid length must be positive and finite")
        if int(self.n_cells) != self.n_cells or self.n_cells < 3:
            raise ConfigurationError("need at least 3 cells")
        object.__setattr__(self, "n_cells", int(self.n_cells))

    @property
    def dx(self) -> float:
        return self.length / self.n_cells

    def centers(self) -> np.ndarray:
        return (np.arange(self.n_cells) + 0.5) * self.dx


def _pad(f, grid, reflect):
    """Add one ghost cell per side along the last axis."""
    f = np.asarray(f, dtype=float)
    if grid.bc is BoundaryKind.PERIODIC:
        return np.concatenate([f[..., -1:], f, f[..., :1]], axis=-1)
    sign = -1.0 if reflect == "odd" else 1.0
    return np.concatenate([sign * f[..., :1], f, sign * f[..., -1:]], axis=-1)


def ddx_central(f, grid, reflect="even"):
    """Second-order central derivative with bc-consistent ghost cells.

    ``reflect`` selects the no-slip closure: "odd" for quantities that
    vanish at the walls (velocities), "even" for zero-gradient ones
    (densities, pressures).  Ignored on periodic grids.
    """
    fp = _pad(f, grid, reflect)
    return (fp[..., 2:] - fp[..., :-2]) / (2.0 * grid.dx)


def face_velocity(w, grid):
    """Arithmetic face means of a cell velocity field, (..., n+1).

    With no-slip walls the odd reflection makes the two boundary faces
    exactly zero.
    """
    wp = _pad(w, grid, "odd")
    return 0.5 * (wp[..., :-1] + wp[..., 1:])


def upwind_flux_parts(q, w, grid):
    """Donor-cell mass-flux pieces at the faces.

    Returns ``(f_plus, f_minus)`` with ``f_plus = q_left * max(W, 0)``
    and ``f_minus = q_right * min(W, 0)``; the full flux is their sum.
    Splitting the flux this way lets callers transport a second
    quantity with exactly the same donor weights.
    """
    W = face_velocity(w, grid)
    qp = _pad(q, grid, "even")
    return qp[..., :-1] * np.maximum(W, 0.0), qp[..., 1:] * np.minimum(W, 0.0)


def upwind_flux_div(q, w, grid):
    """Conservative first-order upwind divergence of ``q w``.

    The cell sum times dx telescopes to the net boundary flux: zero on
    periodic grids and zero at no-slip walls where the face velocity
    vanishes.
    """
    fp, fm = upwind_flux_parts(q, w, grid)
    flux = fp + fm
    return (flux[..., 1:] - flux[..., :-1]) / grid.dx


def face_gradient(u, grid, reflect="odd"):
    """Two-point face gradients ``(u_right - u_left) / dx``, (..., n+1)."""
    up = _pad(u, grid, reflect)
    return (up[..., 1:] - up[..., :-1]) / grid.dx


def distinct_faces(g, grid):
    """Slice a face array down to one entry per distinct face.

    On periodic grids face 0 and face n coincide; on no-slip grids all
    n+1 faces are distinct.
    """
    if grid.bc is BoundaryKind.PERIODIC:
        return g[..., 1:]
    return g


def viscous_stress_divergence(visc: ViscosityMatrices, u, grid):
    """Flux-form divergence of the coupled viscous stresses.

    For velocity rows ``u`` of shape (N, n) this returns
    ``sum_k nu[i, k] * lap(u_k)`` with the discrete Laplacian built
    from face gradients (odd reflection at no-slip walls, so the wall
    value u = 0 is enforced at half a cell).  On periodic grids the
    operator is symmetric negative semidefinite whenever sym(nu) is
    positive semidefinite.
    """
    g = face_gradient(u, grid, "odd")
    S = np.einsum("ik,k...->i...", visc.nu, g)
    return (S[..., 1:] - S[..., :-1]) / grid.dx


def integrate(f, grid):
    """Midpoint rule: cell sum times dx (exact for cellwise constants)."""
    return np.asarray(f, dtype=float).sum(axis=-1) * grid.dx
