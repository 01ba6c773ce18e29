"""Mixed finite-element port-Hamiltonian Cosserat rod dynamics.

The package discretizes a geometrically exact rod with a director
parametrization, mixed stress interpolation and an energy-momentum
consistent implicit midpoint integrator.
"""

from phrod.constitutive import RIGID, MaterialModel, MaxwellBranch
from phrod.femesh import RodMesh
from phrod.integrator import SolverSettings, StepFailure
from phrod.scenarios import Scenario, builtin, builtin_names, run_scenario

__all__ = [
    "RIGID",
    "MaterialModel",
    "MaxwellBranch",
    "RodMesh",
    "Scenario",
    "SolverSettings",
    "StepFailure",
    "builtin",
    "builtin_names",
    "run_scenario",
]

__version__ = "0.1.0"
