"""Casimir energies of sphere configurations from multi-scattering determinants."""

from .geometry import Geometry, OverlapError, SpherePlate, SphereSpec, SymmetryTag
from .energy import (
    EnergyEstimate,
    QuadratureSpec,
    casimir_energy,
    cylinder_energy_per_length,
    fermionic_energy_exact,
    neumann_l0_energy,
    sphere_plate_energy,
    sphere_plate_energy_l_cut,
)
from .spectral import NoConvergence, SingularMatrix, choose_l_max, log_det

__version__ = "0.1.0"

__all__ = [
    "Geometry",
    "OverlapError",
    "SpherePlate",
    "SphereSpec",
    "SymmetryTag",
    "EnergyEstimate",
    "QuadratureSpec",
    "casimir_energy",
    "cylinder_energy_per_length",
    "fermionic_energy_exact",
    "neumann_l0_energy",
    "sphere_plate_energy",
    "sphere_plate_energy_l_cut",
    "NoConvergence",
    "SingularMatrix",
    "choose_l_max",
    "log_det",
]
