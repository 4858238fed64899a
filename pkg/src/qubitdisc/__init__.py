"""Minimum-error discrimination of single-qubit states."""

from .bloch import Ensemble, PauliOperator, SignalState
from .oracle import DualSolution, minimize_dual, monte_carlo_simulate, primal_value
from .solver import (
    GammaCertificate,
    NoSolutionFound,
    PovmElement,
    SolveReport,
    Tolerances,
    solve,
    verify_external,
)

__all__ = [
    "DualSolution",
    "Ensemble",
    "GammaCertificate",
    "NoSolutionFound",
    "PauliOperator",
    "PovmElement",
    "SignalState",
    "SolveReport",
    "Tolerances",
    "minimize_dual",
    "monte_carlo_simulate",
    "primal_value",
    "solve",
    "verify_external",
]
