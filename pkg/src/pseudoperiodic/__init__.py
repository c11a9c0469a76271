"""Pseudo-periodic orbits of the paired 4-body and two-triangle 6-body problems."""
from .dynamics import (
    CartesianState,
    CollisionError,
    ConservedQuantities,
    ReducedState,
    cartesian_rhs,
    conserved,
    distances4,
    distances6,
    embed_cartesian,
    force_terms6,
    rhs4,
    rhs6,
)
from .integrator import (
    IntegrationOutcome,
    IntegratorConfig,
    Trajectory,
    conservation_drift,
    integrate,
    sample_trajectory,
)
from .shooting import ErrObjective, Residual, ReturnSpec, Unknowns, err, periodicity_check, residual
from .solver import SolverParams, SolverResult, solve

__version__ = "0.1.0"
