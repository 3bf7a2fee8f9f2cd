"""Level sets of constant observable expectation values in Hamiltonian parameter space."""

from .oscillator import (
    OscillatorPoint,
    PerturbationBreakdown,
    PhysicalConstants,
    ThermalSpec,
    baseline_dipole,
    effective_frequency,
    energy_gap,
    evo_d01,
    thermal_evo,
)
from .spectral import BasisSpec, SpectralResult, build_hamiltonian_matrix, diagonalize, exact_d01, exact_thermal
from .levelset import (
    Contour,
    ParameterGrid,
    ScalarField,
    VelocityEstimate,
    advection_residual,
    mark_boundary_points,
    normal_velocity,
    refine_contour,
    sample_field,
)
from .bspline import (
    BSplineSurface,
    KnotVector,
    ParametrizationMethod,
    SurfaceData,
    averaging_knots,
    basis,
    demo_cubic_surface,
    eval_surface,
    fit_surface,
    parametrize,
    surface_slice,
)
from .inversion import (
    CorrectionSchedule,
    DriftTrajectory,
    InversionRequest,
    correction_schedule,
    invert_via_surface,
    solve_b,
    solve_epsilon,
)

__all__ = [
    "OscillatorPoint",
    "PerturbationBreakdown",
    "PhysicalConstants",
    "ThermalSpec",
    "baseline_dipole",
    "effective_frequency",
    "energy_gap",
    "evo_d01",
    "thermal_evo",
    "BasisSpec",
    "SpectralResult",
    "build_hamiltonian_matrix",
    "diagonalize",
    "exact_d01",
    "exact_thermal",
    "Contour",
    "ParameterGrid",
    "ScalarField",
    "VelocityEstimate",
    "advection_residual",
    "mark_boundary_points",
    "normal_velocity",
    "refine_contour",
    "sample_field",
    "BSplineSurface",
    "KnotVector",
    "ParametrizationMethod",
    "SurfaceData",
    "averaging_knots",
    "basis",
    "demo_cubic_surface",
    "eval_surface",
    "fit_surface",
    "parametrize",
    "surface_slice",
    "CorrectionSchedule",
    "DriftTrajectory",
    "InversionRequest",
    "correction_schedule",
    "invert_via_surface",
    "solve_b",
    "solve_epsilon",
]

__version__ = "0.1.0"
