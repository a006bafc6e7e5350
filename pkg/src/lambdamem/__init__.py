"""Photon storage and retrieval in a free-space Lambda-type atomic ensemble.

Dimensionless Maxwell-Bloch propagation (exact solver), closed-form retrieval
kernel and efficiency bookkeeping, adiabatic and fast storage/retrieval maps,
optimal-mode eigenproblems, time-reversal-based iterative optimization, and
control-field shaping, plus a scenario-runner CLI.
"""

from . import adiabatic, cli, fast, kernels, model, optimizer, solver
from .model import (
    ControlField,
    ConvergenceError,
    DecaylessMode,
    FieldMode,
    Grid,
    GridResolutionError,
    NumericalError,
    Params,
    SpinWave,
    ValidationError,
    flip_spin_wave,
    gaussian_like_input,
    time_reverse,
)

__version__ = "0.1.0"

__all__ = [
    "adiabatic", "cli", "fast", "kernels", "model", "optimizer", "solver",
    "Params", "Grid", "SpinWave", "FieldMode", "ControlField", "DecaylessMode",
    "gaussian_like_input", "time_reverse", "flip_spin_wave",
    "ValidationError", "GridResolutionError", "ConvergenceError", "NumericalError",
    "__version__",
]
