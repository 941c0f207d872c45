"""Cold-atom cavity model: bistability, pumping-driven oscillations and quadrature noise."""
from .model import CavityState, DomainError, DriveSpec, ModelParams
from .steady import SteadyState, bistability_threshold, scan_detuning, solve_steady

__version__ = "0.1.0"

__all__ = [
    "CavityState", "DomainError", "DriveSpec", "ModelParams",
    "SteadyState", "bistability_threshold", "scan_detuning", "solve_steady",
]
