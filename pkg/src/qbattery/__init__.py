"""Charging dynamics of an open two-qubit quantum battery with moving qubits."""

__version__ = "0.1.0"

from .core import (
    AmplitudeTrajectory,
    InitialState,
    KernelMode,
    KernelSpec,
    ParameterError,
    SolutionMode,
    SolverError,
    SystemParams,
    TimeGrid,
    kernel_from_params,
    normalize_initial,
    validate_params,
)
from .closed_form import amplitudes
from .observables import observables_from_trajectory

__all__ = [
    "AmplitudeTrajectory",
    "InitialState",
    "KernelMode",
    "KernelSpec",
    "ParameterError",
    "SolutionMode",
    "SolverError",
    "SystemParams",
    "TimeGrid",
    "amplitudes",
    "kernel_from_params",
    "normalize_initial",
    "observables_from_trajectory",
    "validate_params",
]
