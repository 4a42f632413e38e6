"""Measure differential equations: atomic measures, exact transport distances and the lattice scheme."""

from ._measureflow import (
    ConfigError,
    DimensionMismatch,
    Grid,
    LiftedMeasure,
    LipschitzViolation,
    MassMismatch,
    Measure,
    Pvf,
    SolverError,
    Source,
    SupportOverflow,
    Trajectory,
    ax_discretize,
    convergence_study,
    fiber_w,
    fiber_wg,
    generalized_wasserstein,
    las_step,
    preset_names,
    run_cli,
    run_semigroup,
    w1_to_uniform,
    wasserstein1,
    wasserstein1_1d,
)

__all__ = [
    "ConfigError",
    "DimensionMismatch",
    "Grid",
    "LiftedMeasure",
    "LipschitzViolation",
    "MassMismatch",
    "Measure",
    "Pvf",
    "SolverError",
    "Source",
    "SupportOverflow",
    "Trajectory",
    "ax_discretize",
    "convergence_study",
    "fiber_w",
    "fiber_wg",
    "generalized_wasserstein",
    "las_step",
    "preset_names",
    "run_cli",
    "run_semigroup",
    "w1_to_uniform",
    "wasserstein1",
    "wasserstein1_1d",
]
