"""rieszlab: a pseudo-spectral lab for damped barotropic Euler flow with
attractive Riesz interactions on the periodic torus, plus the diagnostic
functionals and identity audits that make its exact structure checkable.

Layers:

* :mod:`rieszlab.spectral`    -- Fourier analysis on [0, 2pi)^d: transforms,
  multipliers, fractional Laplacian powers, the mean-free inverse Laplacian,
  Sobolev norms, dealiasing, commutators.
* :mod:`rieszlab.model`       -- parameters, the primitive and symmetrized
  state representations, and the three right-hand sides.
* :mod:`rieszlab.timestep`    -- RK4 with exact-damping splitting, CFL step
  control, guards, trajectory sampling.
* :mod:`rieszlab.diagnostics` -- the momentum/energy/dissipation functionals,
  iteration constants, decay fitting, linear dispersion.
* :mod:`rieszlab.initial`     -- admissible initial data (exact neutrality).
* :mod:`rieszlab.config` / :mod:`rieszlab.scenarios` / :mod:`rieszlab.cli`
  -- TOML configuration, scenario orchestration, persistence, CLI.
"""

__version__ = "0.1.0"

from .diagnostics import (
    ConstantsReport,
    EnergyReport,
    compute_constants,
    compute_D,
    compute_E,
    compute_E_mu,
    compute_f,
    compute_L,
    compute_mc,
    compute_X_m,
    decay_fit,
    dispersion_roots,
    energy_report,
    select_mu,
)
from .errors import (
    ConfigError,
    DomainViolation,
    EmptyRange,
    InsufficientSamples,
    MeanNotZero,
    NonHermitianSymbol,
    NonpositiveDensity,
    NonpositiveValue,
    NumericalBlowup,
    ParameterError,
    PositivityViolation,
    RieszLabError,
    VacuumState,
)
from .initial import InitialConditionSpec, build_initial_state, project_neutrality
from .model import (
    FpmState,
    Params,
    PrimitiveState,
    SymState,
    rhs_fpm,
    rhs_primitive,
    rhs_sym,
    riesz_force,
    to_primitive,
    to_sym,
)
from .spectral import (
    Field,
    Grid,
    Multiplier,
    VectorField,
    apply_multiplier,
    commutator_apply,
    dealias,
    divergence,
    forward_transform,
    fractional_power,
    gradient,
    green_potential,
    inverse_transform,
    sobolev_norm,
    sobolev_norm_fractional,
)
from .timestep import (
    FpmSystem,
    PrimitiveSystem,
    StepperConfig,
    SymSystem,
    Trajectory,
    cfl_dt,
    integrate_at_times,
    run,
    step,
)

__all__ = [
    "__version__",
    # errors
    "ConfigError",
    "DomainViolation",
    "EmptyRange",
    "InsufficientSamples",
    "MeanNotZero",
    "NonHermitianSymbol",
    "NonpositiveDensity",
    "NonpositiveValue",
    "NumericalBlowup",
    "ParameterError",
    "PositivityViolation",
    "RieszLabError",
    "VacuumState",
    # spectral
    "Field",
    "Grid",
    "Multiplier",
    "VectorField",
    "apply_multiplier",
    "commutator_apply",
    "dealias",
    "divergence",
    "forward_transform",
    "fractional_power",
    "gradient",
    "green_potential",
    "inverse_transform",
    "sobolev_norm",
    "sobolev_norm_fractional",
    # model
    "FpmState",
    "Params",
    "PrimitiveState",
    "SymState",
    "rhs_fpm",
    "rhs_primitive",
    "rhs_sym",
    "riesz_force",
    "to_primitive",
    "to_sym",
    # timestep
    "FpmSystem",
    "PrimitiveSystem",
    "StepperConfig",
    "SymSystem",
    "Trajectory",
    "cfl_dt",
    "integrate_at_times",
    "run",
    "step",
    # diagnostics
    "ConstantsReport",
    "EnergyReport",
    "compute_constants",
    "compute_D",
    "compute_E",
    "compute_E_mu",
    "compute_f",
    "compute_L",
    "compute_mc",
    "compute_X_m",
    "decay_fit",
    "dispersion_roots",
    "energy_report",
    "select_mu",
    # initial data
    "InitialConditionSpec",
    "build_initial_state",
    "project_neutrality",
]
