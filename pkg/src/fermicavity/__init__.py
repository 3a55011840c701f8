"""Ideal Fermi gas in a chaotic cavity: thermal parameters, relaxed
correlations, lattice entanglement entropy, random partitions, kinetic
relaxation and recurrence-time bounds."""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    BoundaryProximityWarning,
    DomainError,
    FermiCavityError,
    FitError,
    InfeasibleError,
    NumericError,
    SpectralIntegrityError,
    UnsupportedError,
)
from .thermo import CavityModel, SpectrumModel, ThermalState, solve_thermal  # noqa: E402

__all__ = [
    "__version__",
    "BoundaryProximityWarning",
    "DomainError",
    "FermiCavityError",
    "FitError",
    "InfeasibleError",
    "NumericError",
    "SpectralIntegrityError",
    "UnsupportedError",
    "CavityModel",
    "SpectrumModel",
    "ThermalState",
    "solve_thermal",
]
