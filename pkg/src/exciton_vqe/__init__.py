"""Multistate contracted VQE for two-level exciton models.

A real-amplitude statevector simulator, CIS reference-state circuits, SO(4)
entanglers, the MC-VQE driver, an exact (FCI) oracle and seeded synthetic
aggregates, plus a command-line pipeline around them.
"""

from .pauli_model import (
    HARTREE_TO_EV,
    Connectivity,
    DipoleOperator,
    ExcitonHamiltonian,
    MonomerData,
    PauliTerm,
    build_dipole_operator,
    build_hamiltonian,
)
from .reference_states import CisSolution, solve_cis
from .mcvqe import McVqeConfig, SubspaceResult, TransitionSet, run_mcvqe
from .exact import FciResult, fci_solve
from .synth import SynthSpec, generate

__all__ = [
    "HARTREE_TO_EV",
    "Connectivity",
    "DipoleOperator",
    "ExcitonHamiltonian",
    "MonomerData",
    "PauliTerm",
    "build_dipole_operator",
    "build_hamiltonian",
    "CisSolution",
    "solve_cis",
    "McVqeConfig",
    "SubspaceResult",
    "TransitionSet",
    "run_mcvqe",
    "FciResult",
    "fci_solve",
    "SynthSpec",
    "generate",
]

__version__ = "0.1.0"
