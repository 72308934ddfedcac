"""Barotropic viscous compressible multi-fluids with multiple velocities.

A 1-d finite-difference solver for mixtures of N interpenetrating
compressible fluids (per-constituent or common-average convection,
coupled non-diagonal viscosity matrices, drag exchange) together with a
2-d periodic spectral laboratory that numerically verifies the
effective-viscous-flux and commutator identities underpinning the
compactness theory of such systems.
"""

from .model import (
    AdmissibilityReport,
    ConfigurationError,
    DegenerateStateError,
    ExchangeMatrix,
    MixtureParams,
    ModelVariant,
    PolytropicLaw,
    TabulatedLaw,
    ViscosityMatrices,
    average_velocity,
    concentrations,
    dissipation_density,
    mixture_potential_density,
    mixture_pressure,
    momentum_exchange,
    total_density,
    validate_viscosity,
    viscous_flux_1d,
)
from .grid import (
    BoundaryKind,
    Grid1D,
    ddx_central,
    face_gradient,
    integrate,
    upwind_flux_div,
    viscous_stress_divergence,
)
from .solver import (
    DtUnderflowError,
    MixtureState,
    SolverConfig,
    SteadyResult,
    StepFailure,
    StepRejection,
    Trajectory,
    advance,
    cfl_dt,
    continuity_step,
    convection_velocity,
    measure,
    momentum_step,
    run_steady,
    run_unsteady,
)
from .spectral import (
    EvfReport,
    OscillatorySequenceSpec,
    PeriodicField2D,
    SpectralOps,
    WeakLimitReport,
    check_selfadjoint,
    comm,
    comm_expansion_residual,
    cutoff,
    div_identity_residual,
    effective_viscous_flux,
    inv_laplacian,
    renorm_residual,
    riesz_second,
    weak_limit_experiment,
)
from .scenarios import (
    ManufacturedCase,
    manufactured_case,
    manufactured_forcing,
    manufactured_residual,
    profile_field,
)
from .config import (
    ConfigError,
    RunConfig,
    build_params,
    build_solver_config,
    build_state,
    parse_config,
    render_config,
)
from .output import read_snapshot, read_timeseries, write_snapshot, write_timeseries

__version__ = "0.1.0"
