"""Relative equilibria of planar point vortices and their linear stability."""

from .dynamics import ProbeResult, Trajectory, integrate, probe_stability
from .errors import (CollisionError, ConvergenceError, DegenerateEquilibriumWarning,
                     InconsistencyError, IntegrationError, InvalidCirculationError, VortexError)
from .model import (CirculationSet, Configuration, RelativeEquilibrium, angular_impulse,
                    angular_velocity, center_of_vorticity, hamiltonian, vortex_angular_momentum)
from .solver import SolveOptions, collinear, minimize_on_sphere, multistart, refine
from .spectral import MorseData, SpectralReport, Stability, classify, morse_data, verify_identities

__version__ = "0.1.0"

__all__ = [
    "CirculationSet", "Configuration", "RelativeEquilibrium",
    "angular_impulse", "angular_velocity", "center_of_vorticity", "hamiltonian",
    "vortex_angular_momentum",
    "SolveOptions", "refine", "minimize_on_sphere", "collinear", "multistart",
    "Stability", "SpectralReport", "MorseData", "classify", "morse_data", "verify_identities",
    "Trajectory", "ProbeResult", "integrate", "probe_stability",
    "VortexError", "CollisionError", "InvalidCirculationError", "ConvergenceError",
    "InconsistencyError", "IntegrationError", "DegenerateEquilibriumWarning",
]
