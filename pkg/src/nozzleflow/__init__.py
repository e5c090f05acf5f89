"""Stream-function solver for steady compressible nozzle flow with upstream entropy and Bernoulli data."""

from .critical_flux import CriticalContext, classify, find_critical
from .diagnostics import diagnose, reconstruct_flow
from .elliptic_solver import SolverConfig, StreamField, solve
from .errors import (
    ConfigError,
    ConvergenceError,
    DomainError,
    FarFieldError,
    NozzleFlowError,
    SupersonicStateError,
)
from .farfield import solve_downstream, solve_farfield, solve_upstream
from .gas_thermo import GasModel
from .geometry import TabulatedWalls, TanhWalls, truncate
from .profiles import Profiles

__all__ = [
    "ConfigError", "ConvergenceError", "CriticalContext", "DomainError", "FarFieldError",
    "GasModel", "NozzleFlowError", "Profiles", "SolverConfig", "StreamField", "SupersonicStateError",
    "TabulatedWalls", "TanhWalls", "classify", "diagnose", "find_critical", "reconstruct_flow",
    "solve", "solve_downstream", "solve_farfield", "solve_upstream", "truncate",
]
