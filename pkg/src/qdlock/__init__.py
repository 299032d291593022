"""Finite-dimensional quantum data locking: simulation, bounds and checks."""

from .qcore import (
    CapabilityError,
    DensityOperator,
    Ensemble,
    IsometricExtension,
    KrausChannel,
    Povm,
)

__all__ = [
    "CapabilityError",
    "DensityOperator",
    "Ensemble",
    "IsometricExtension",
    "KrausChannel",
    "Povm",
]
__version__ = "0.1.0"
