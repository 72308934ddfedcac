"""Time integration for the multi-velocity mixture systems.

The scheme is operator-split.  One accepted step

1. advances every density with conservative donor-cell upwind
   transport (variant-dependent convection velocity),
2. moves the momenta with the *same* mass fluxes, upwinding the
   transported velocity by the sign of the face flux -- this makes each
   new velocity a convex combination of old neighbours, so the
   transport substep can only lose kinetic energy,
3. applies pressure gradient and body force explicitly, and
4. finishes with a single coupled linear solve: backward-Euler viscous
   stresses plus the trapezoidal half of the drag exchange.  In a
   cell-major ordering this system is block-tridiagonal (plus wrap
   entries on periodic grids) and is solved directly.

Everything stiff and inter-constituent lives in step 4; the drag is
integrated trapezoidally so spatially uniform runs track the exchange
ODE system at second order in dt.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse as sparse
import scipy.sparse.linalg as spla

from .grid import (
    BoundaryKind,
    Grid1D,
    _pad,
    ddx_central,
    distinct_faces,
    face_gradient,
    face_velocity,
    integrate,
    upwind_flux_parts,
)
from .model import (
    MixtureParams,
    ModelVariant,
    average_velocity,
    mixture_dpressure,
    mixture_potential_density,
    mixture_pressure,
)

__all__ = [
    "SolverConfig",
    "MixtureState",
    "StepDiagnostics",
    "Trajectory",
    "SteadyResult",
    "StepRejection",
    "StepFailure",
    "DtUnderflowError",
    "convection_velocity",
    "cfl_dt",
    "resolve_density_floor",
    "continuity_step",
    "momentum_step",
    "advance",
    "measure",
    "run_unsteady",
    "run_steady",
]


class StepRejection(RuntimeError):
    """The local transport stability bound was exceeded; retry smaller."""


class StepFailure(RuntimeError):
    """A step could not be completed (bad state or failed solve)."""


class DtUnderflowError(StepFailure):
    """Repeated rejections shrank dt below any useful size."""


@dataclass(frozen=True)
class SolverConfig:
    """Knobs of the time integrator.

    ``dt_init`` is both the first step and a ceiling for the adaptive
    step, which lets tests pin the step size on states whose stability
    limit is far larger.  ``density_floor`` of None means
    1e-10 times the mean initial density, resolved at run start.
    """

    dt_init: float = 1e-3
    cfl_target: float = 0.45
    t_end: float = 1.0
    density_floor: float | None = None
    steady_tol: float = 1e-10
    max_steps: int = 100_000
    viscous_solve_tol: float = 1e-9
    snapshot_every: int = 10

    def __post_init__(self):
        if not self.dt_init > 0.0:
            raise ValueError("dt_init must be positive")
        if not 0.0 < self.cfl_target <= 0.9:
            raise ValueError("cfl_target must lie in (0, 0.9]")
        if self.t_end < 0.0:
            raise ValueError("t_end must be nonnegative")
        if self.density_floor is not None and self.density_floor < 0.0:
            raise ValueError("density_floor must be nonnegative")
        if self.max_steps < 1:
            raise ValueError("max_steps must be positive")
        if not self.viscous_solve_tol > 0.0:
            raise ValueError("viscous_solve_tol must be positive")
        if self.snapshot_every < 0:
            raise ValueError("snapshot_every must be nonnegative")


@dataclass(eq=False)
class MixtureState:
    """Cell-centered densities and velocities of every constituent."""

    grid: Grid1D
    rho: np.ndarray
    u: np.ndarray
    variant: ModelVariant
    t: float = 0.0

    def __post_init__(self):
        rho = np.array(self.rho, dtype=float)
        u = np.array(self.u, dtype=float)
        if rho.ndim == 1:
            rho = rho[None, :]
        if u.ndim == 1:
            u = u[None, :]
        if rho.shape != u.shape or rho.shape[1] != self.grid.n_cells:
            raise ValueError(
                f"field shapes {rho.shape} / {u.shape} do not match "
                f"{self.grid.n_cells} cells"
            )
        self.rho = rho
        self.u = u

    @property
    def n_constituents(self) -> int:
        return self.rho.shape[0]

    def copy(self) -> "MixtureState":
        return MixtureState(self.grid, self.rho.copy(), self.u.copy(), self.variant, self.t)


@dataclass
class StepDiagnostics:
    """Scalar health metrics recorded once per accepted step."""

    t: float
    dt: float
    masses: np.ndarray
    kinetic: float
    potential: float
    dissipation: float
    floor_events: int

    @property
    def energy(self) -> float:
        return self.kinetic + self.potential


@dataclass
class Trajectory:
    """Time series of diagnostics plus state snapshots at a cadence."""

    times: np.ndarray
    dts: np.ndarray
    masses: np.ndarray        # (steps+1, N)
    kinetic: np.ndarray
    potential: np.ndarray
    dissipation: np.ndarray
    floor_events: np.ndarray  # cumulative count
    snapshots: list

    @property
    def energy(self) -> np.ndarray:
        return self.kinetic + self.potential


@dataclass
class SteadyResult:
    """Outcome of the pseudo-time steady driver."""

    state: MixtureState
    residuals: np.ndarray
    converged: bool
    rho_div_v: np.ndarray     # per-constituent integral of rho_i * div v
    floor_events: int


def convection_velocity(state: MixtureState):
    """Transport velocity rows w_i: u_i (original) or the common
    average (modified)."""
    if state.variant is ModelVariant.ORIGINAL:
        return state.u
    v = average_velocity(state.u)
    return np.broadcast_to(v, state.u.shape)


def cfl_dt(state: MixtureState, params: MixtureParams, config: SolverConfig) -> float:
    """Largest stable step for the explicit substeps.

    Per cell and constituent the wave speed is ``|w| + c`` with the
    sound-speed proxy ``c = sqrt(max(dp/drho, 0))``; the donor-cell
    momentum transport additionally requires ``dt * 2|w| <= cfl * dx``,
    so the divisor is ``max(|w| + c, 2 |w|)``.  Returns inf for a state
    with no signal at all (the caller caps with dt_init).
    """
    w = convection_velocity(state)
    c = np.sqrt(np.maximum(mixture_dpressure(params, state.rho), 0.0))
    speed = np.maximum(np.abs(w) + c, 2.0 * np.abs(w))
    smax = float(speed.max())
    if smax == 0.0:
        return np.inf
    return config.cfl_target * state.grid.dx / smax


def resolve_density_floor(config: SolverConfig, state: MixtureState) -> float:
    if config.density_floor is not None:
        return config.density_floor
    return 1e-10 * float(np.mean(state.rho))


def _transport(state: MixtureState, dt: float, floor: float):
    """Shared donor-cell update of densities and momenta.

    Returns (rho_new, m_star, floor_events).  Raises StepRejection when
    the per-cell outflow coefficient exceeds one (the bound under which
    the update keeps densities nonnegative and new velocities convex
    combinations of old ones).
    """
    grid = state.grid
    if not (np.isfinite(state.rho).all() and np.isfinite(state.u).all()):
        raise StepFailure("state contains non-finite values")
    w = convection_velocity(state)
    lam = dt / grid.dx
    fp, fm = upwind_flux_parts(state.rho, w, grid)
    W = face_velocity(w, grid)
    outflow = lam * (np.maximum(W[..., 1:], 0.0) - np.minimum(W[..., :-1], 0.0))
    if float(outflow.max(initial=0.0)) > 1.0 + 1e-12:
        raise StepRejection("transport CFL bound exceeded")
    flux = fp + fm
    rho_new = state.rho - lam * (flux[..., 1:] - flux[..., :-1])
    events = int(np.count_nonzero(rho_new < floor))
    if events:
        rho_new = np.maximum(rho_new, floor)
    # momentum rides the same donor fluxes with upwinded velocity
    up = _pad(state.u, grid, "odd")
    mflux = up[..., :-1] * fp + up[..., 1:] * fm
    m_star = state.rho * state.u - lam * (mflux[..., 1:] - mflux[..., :-1])
    return rho_new, m_star, events


def continuity_step(state: MixtureState, params: MixtureParams, dt: float,
                    floor: float | None = None):
    """Advance the densities one step; velocities untouched.

    Returns ``(rho_new, floor_events)``.  Mass is conserved exactly up
    to roundoff (conservative fluxes, zero wall flux) except where the
    floor fires, which is why the events are counted.
    """
    if floor is None:
        floor = 1e-10 * float(np.mean(state.rho))
    rho_new, _, events = _transport(state, dt, floor)
    return rho_new, events


def _exchange_operator(params: MixtureParams):
    """Pointwise drag coupling Z with J = Z u, or None when inert."""
    ex = params.exchange
    if ex is None or ex.is_inert:
        return None
    return ex.a - np.diag(ex.a.sum(axis=1))


def _lap1d_matrix(grid: Grid1D):
    n = grid.n_cells
    main = np.full(n, -2.0)
    off = np.ones(n - 1)
    A = sparse.diags([off, main, off], [-1, 0, 1], format="lil")
    if grid.bc is BoundaryKind.PERIODIC:
        A[0, n - 1] = 1.0
        A[n - 1, 0] = 1.0
    else:
        # odd reflection: ghost = -edge value, so the wall sits at the face
        A[0, 0] = -3.0
        A[n - 1, n - 1] = -3.0
    return (A / grid.dx**2).tocsr()


_LAP_CACHE: dict = {}


def _lap1d(grid: Grid1D):
    key = (grid.length, grid.n_cells, grid.bc)
    if key not in _LAP_CACHE:
        _LAP_CACHE[key] = _lap1d_matrix(grid)
    return _LAP_CACHE[key]


def _solve_implicit(rho, rhs_m, params, grid, dt, tol, Z):
    """Solve the coupled implicit system for the new velocities.

    Cell-major unknown ordering makes the matrix
    ``diag(rho) - dt * kron(Lap, nu) - (dt/2) * kron(I, Z)``
    block-tridiagonal with N x N blocks (wrap entries when periodic).
    """
    N, n = rho.shape
    A = sparse.diags(rho.T.ravel()) - dt * sparse.kron(
        _lap1d(grid), sparse.csr_matrix(params.visc.nu)
    )
    if Z is not None:
        A = A - 0.5 * dt * sparse.kron(sparse.identity(n), sparse.csr_matrix(Z))
    A = A.tocsc()
    b = rhs_m.T.ravel()
    x = spla.spsolve(A, b)
    residual = float(np.abs(A @ x - b).max())
    scale = max(float(np.abs(b).max()), 1e-300)
    if not np.isfinite(residual) or residual > tol * scale:
        raise StepFailure(
            f"implicit viscous solve residual {residual:.3e} exceeds "
            f"{tol:.1e} * ||rhs|| = {tol * scale:.3e}"
        )
    return x.reshape(n, N).T


def momentum_step(state: MixtureState, params: MixtureParams, config: SolverConfig,
                  dt: float, floor: float | None = None):
    """Advance the velocities one step (densities are left to
    continuity_step; this routine recomputes the same transport
    internally so the momentum update shares the mass fluxes).

    Order: donor-cell momentum convection, explicit pressure gradient
    and body force (evaluated at the updated densities), explicit half
    of the drag, then the coupled implicit solve for viscosity plus the
    other drag half.  Cells within 10x of the density floor keep their
    old velocity to avoid dividing momentum by a vanishing density.
    """
    grid = state.grid
    if floor is None:
        floor = resolve_density_floor(config, state)
    rho_new, m_star, _ = _transport(state, dt, floor)

    skip = rho_new < 10.0 * floor
    safe = np.where(skip, 1.0, rho_new)
    u_star = np.where(skip, state.u, m_star / safe)

    p = mixture_pressure(params, rho_new)
    gradp = ddx_central(p, grid, reflect="even")
    rhs_m = rho_new * u_star - dt * gradp
    if params.body_force is not None:
        f = np.asarray(params.body_force(grid.centers(), state.t + 0.5 * dt), float)
        rhs_m = rhs_m + dt * rho_new * f
    Z = _exchange_operator(params)
    if Z is not None:
        rhs_m = rhs_m + 0.5 * dt * np.einsum("ij,j...->i...", Z, u_star)

    u_new = _solve_implicit(rho_new, rhs_m, params, grid, dt,
                            config.viscous_solve_tol, Z)
    return np.where(skip, state.u, u_new)


def measure(state: MixtureState, params: MixtureParams) -> StepDiagnostics:
    """Masses, kinetic and potential energy, and the instantaneous
    viscous dissipation integral of a state."""
    grid = state.grid
    masses = integrate(state.rho, grid)
    kinetic = float(integrate((state.rho * state.u**2).sum(axis=0), grid)) * 0.5
    potential = float(integrate(mixture_potential_density(params, state.rho), grid))
    g = distinct_faces(face_gradient(state.u, grid, "odd"), grid)
    dissipation = float(
        np.einsum("if,ik,kf->", g, params.visc.nu, g) * grid.dx
    )
    return StepDiagnostics(
        t=state.t,
        dt=np.nan,
        masses=np.atleast_1d(masses),
        kinetic=kinetic,
        potential=potential,
        dissipation=dissipation,
        floor_events=0,
    )


def advance(state: MixtureState, params: MixtureParams, config: SolverConfig,
            dt: float | None = None, floor: float | None = None):
    """One accepted step: continuity then momentum, with dt halved on
    transport rejection until it underflows.

    Returns ``(new_state, dt_used, StepDiagnostics)``.
    """
    if state.variant is not params.variant:
        raise ValueError("state and params disagree on the model variant")
    if floor is None:
        floor = resolve_density_floor(config, state)
    if dt is None:
        dt = min(cfl_dt(state, params, config), config.dt_init)
    dt0 = dt
    while True:
        try:
            rho_new, events = continuity_step(state, params, dt, floor)
            u_new = momentum_step(state, params, config, dt, floor)
            break
        except StepRejection:
            dt *= 0.5
            if dt < 1e-14 * dt0:
                raise DtUnderflowError(
                    f"step size collapsed below 1e-14 of {dt0:.3e}"
                ) from None
    new_state = MixtureState(state.grid, rho_new, u_new, state.variant, state.t + dt)
    diag = measure(new_state, params)
    diag.dt = dt
    diag.floor_events = events
    return new_state, dt, diag


def _trajectory_from(records, snapshots):
    times = np.array([r.t for r in records])
    return Trajectory(
        times=times,
        dts=np.array([r.dt for r in records]),
        masses=np.array([r.masses for r in records]),
        kinetic=np.array([r.kinetic for r in records]),
        potential=np.array([r.potential for r in records]),
        dissipation=np.array([r.dissipation for r in records]),
        floor_events=np.cumsum([r.floor_events for r in records]),
        snapshots=snapshots,
    )


def run_unsteady(state: MixtureState, params: MixtureParams,
                 config: SolverConfig) -> Trajectory:
    """March to ``t_end`` (or ``max_steps``), recording diagnostics at
    every accepted step and snapshots at the configured cadence."""
    state = state.copy()
    floor = resolve_density_floor(config, state)
    first = measure(state, params)
    first.dt = 0.0
    records = [first]
    snapshots = [state.copy()]
    steps = 0
    t_end = state.t + config.t_end
    while state.t < t_end - 1e-14 * max(1.0, t_end) and steps < config.max_steps:
        dt = min(cfl_dt(state, params, config), config.dt_init, t_end - state.t)
        state, dt, diag = advance(state, params, config, dt=dt, floor=floor)
        records.append(diag)
        steps += 1
        if config.snapshot_every and steps % config.snapshot_every == 0:
            snapshots.append(state.copy())
    if snapshots[-1].t != state.t:
        snapshots.append(state.copy())
    return _trajectory_from(records, snapshots)


def _steady_stabilization(state: MixtureState, params: MixtureParams,
                          dt: float, theta: float = 0.5):
    """Density correction damping odd-even pressure modes in
    pseudo-time marching.

    Conservative face flux proportional to the deviation of the face
    pressure gradient from hydrostatic balance,
    ``F = -theta dt (dp/dx|_face - rho_face f_face)``.  Near rest the
    central cell gradient in the momentum equation cannot see the
    odd-even density mode and nothing else damps it; this flux does,
    while any true steady state (face gradients balancing the force)
    remains an exact fixed point.  Wall faces carry no flux, so the
    pinned constituent masses are untouched.
    """
    grid = state.grid
    p = mixture_pressure(params, state.rho)
    dpdx = (p[..., 1:] - p[..., :-1]) / grid.dx
    balance = dpdx
    if params.body_force is not None:
        f = np.asarray(params.body_force(grid.centers(), state.t), float)
        rf = state.rho * f
        balance = dpdx - 0.5 * (rf[..., 1:] + rf[..., :-1])
    flux = -theta * dt * balance
    zeros = np.zeros(flux.shape[:-1] + (1,))
    flux = np.concatenate([zeros, flux, zeros], axis=-1)
    return -dt * (flux[..., 1:] - flux[..., :-1]) / grid.dx


def run_steady(state: MixtureState, params: MixtureParams,
               config: SolverConfig) -> SteadyResult:
    """Pseudo-time march toward a steady solution with no-slip walls.

    Constituent masses stay pinned at their initial values throughout
    because the transport is conservative with vanishing wall fluxes --
    the steady system alone does not determine them.  The residual is
    the scheme-consistent one, ``max(|drho/dt|, |d(rho u)/dt|)`` over
    all cells of the last pseudo-step; at a fixed point it coincides
    with the discrete steady-equation residual.  Also reports the
    per-constituent steady diagnostic ``integral(rho_i div v)``, which
    should vanish at convergence.
    """
    if state.grid.bc is not BoundaryKind.NOSLIP:
        raise ValueError("steady driver requires no-slip walls")
    state = state.copy()
    floor = resolve_density_floor(config, state)
    residuals = []
    converged = False
    events = 0
    for _ in range(config.max_steps):
        dt = min(cfl_dt(state, params, config), config.dt_init)
        new_state, dt, diag = advance(state, params, config, dt=dt, floor=floor)
        new_state.rho = new_state.rho + _steady_stabilization(state, params, dt)
        events += diag.floor_events
        res = max(
            float(np.abs(new_state.rho - state.rho).max()),
            float(np.abs(new_state.rho * new_state.u - state.rho * state.u).max()),
        ) / dt
        residuals.append(res)
        state = new_state
        if res < config.steady_tol:
            converged = True
            break
    div_v = ddx_central(average_velocity(state.u), state.grid, reflect="odd")
    rho_div_v = np.atleast_1d(integrate(state.rho * div_v, state.grid))
    return SteadyResult(
        state=state,
        residuals=np.array(residuals),
        converged=converged,
        rho_div_v=rho_div_v,
        floor_events=events,
    )
