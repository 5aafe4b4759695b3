"""Finite-volume schemes for low-Mach flows in gravitational balance.

The package couples an explicit kinetic flux with an implicit pressure
solve so that hydrostatic rest states are preserved to round-off and
time steps stay bounded as the scaling parameter goes to zero.
"""

from .cases import (SCENARIO_NAMES, Scenario, builtin_scenario,
                    ill_prepared_state, initial_state,
                    reference_explicit_solve, steady_reference)
from .elliptic import HelmholtzSolver, SolverError
from .equilibrium import EquilibriumProfile, Potential, potential
from .imex import ImexTableau, builtin, classify, order_check
from .mesh import BoundaryCondition, ConfigError, Grid, State
from .stepper import Stepper, StepReport, TimeControl, diagnostics

__version__ = "0.1.0"

__all__ = [
    "BoundaryCondition",
    "ConfigError",
    "EquilibriumProfile",
    "Grid",
    "HelmholtzSolver",
    "ImexTableau",
    "Potential",
    "SCENARIO_NAMES",
    "Scenario",
    "SolverError",
    "State",
    "StepReport",
    "Stepper",
    "TimeControl",
    "builtin",
    "builtin_scenario",
    "classify",
    "diagnostics",
    "ill_prepared_state",
    "initial_state",
    "order_check",
    "potential",
    "reference_explicit_solve",
    "steady_reference",
    "__version__",
]
