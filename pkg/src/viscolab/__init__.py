"""Spectral toolkit for the incompressible Hookean elastic system with damping."""

from .linear import default_R0, eigenvalues, evolve_linear, green_entries, mode_oracle
from .littlewood_paley import BesovSpec, besov_norm, build_partition, paraproduct
from .monitor import FunctionalReport, NormSeries, assemble_report, boundedness_report
from .simulation import (
    ConstraintResiduals,
    FlowState,
    SimConfig,
    constraint_residuals,
    etd_step,
    flowmap_initial_data,
    nonlinear_rhs,
    oscillatory_velocity,
    run_simulation,
)
from .spectral import Grid, SpectralField, forward_transform, inverse_transform, leray_project

__all__ = [
    "BesovSpec",
    "ConstraintResiduals",
    "FlowState",
    "FunctionalReport",
    "Grid",
    "NormSeries",
    "SimConfig",
    "SpectralField",
    "assemble_report",
    "besov_norm",
    "boundedness_report",
    "build_partition",
    "constraint_residuals",
    "default_R0",
    "eigenvalues",
    "etd_step",
    "evolve_linear",
    "flowmap_initial_data",
    "forward_transform",
    "green_entries",
    "inverse_transform",
    "leray_project",
    "mode_oracle",
    "nonlinear_rhs",
    "oscillatory_velocity",
    "paraproduct",
    "run_simulation",
]
