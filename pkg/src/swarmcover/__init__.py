"""Particle and PDE simulation of swarm density stabilization.

Subpackages by layer: ``vectorfields`` and ``domains`` define the geometry,
``meanfield`` the kernel density estimate and reaction rates, ``sde`` the
particle simulator, ``pde`` the grid reference solvers, ``targets`` the
built-in target densities, ``diagnostics`` metrics and export, and
``scenarios``/``cli`` the declarative front end.
"""

from .diagnostics import MOTIONLESS, MOVING, RunRecord, export, l1_distance, moving_fraction
from .domains import BoxDomain, SphereDomain
from .meanfield import Kernel, KernelVariant, ReactionFunctions, kde, transition_rates
from .pde import CoefficientPair, Grid, GridField, step_linear, step_semilinear
from .sde import (
    ControlLaw,
    ControlVariant,
    DensitySource,
    SimConfig,
    SimulationError,
    SwarmState,
    run,
    stratonovich_step,
    switching_step,
)
from .targets import TargetDensity, build_target
from .vectorfields import FieldFamily, VectorField, family_by_name, lie_bracket_numeric

__version__ = "0.1.0"

__all__ = [
    "BoxDomain",
    "CoefficientPair",
    "ControlLaw",
    "ControlVariant",
    "DensitySource",
    "FieldFamily",
    "Grid",
    "GridField",
    "Kernel",
    "KernelVariant",
    "MOTIONLESS",
    "MOVING",
    "ReactionFunctions",
    "RunRecord",
    "SimConfig",
    "SimulationError",
    "SphereDomain",
    "SwarmState",
    "TargetDensity",
    "VectorField",
    "build_target",
    "export",
    "family_by_name",
    "kde",
    "l1_distance",
    "moving_fraction",
    "run",
    "step_linear",
    "step_semilinear",
    "stratonovich_step",
    "switching_step",
    "transition_rates",
]
