"""Configuration-interaction-singles reference states and their circuits.

The CIS basis is ordered ``|0...0>, |e_0>, ..., |e_{N-1}>`` where ``|e_A>``
has only site ``A`` excited. A unit vector ``(mu, alpha, beta, ...)`` over this
basis is prepared by a pump rotation on qubit 0, a chain of controlled
reflections that writes a "thermometer" code ``1...10...0``, and a CNOT fan
that turns each thermometer word into the matching one-hot configuration.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .numerics import canonicalize_columns, eigh
from .pauli_model import ExcitonHamiltonian, PauliTerm, pauli_matrix_element
from .simulator import CFy, CNOT, Circuit, Ry, SimulationError, apply_gates

DEGENERATE_SINE = 1e-14


def cis_configurations(n_sites: int) -> list[tuple[int, ...]]:
    """Bit tuples (site 0 first) of the reference and each single excitation."""
    configs = [tuple([0] * n_sites)]
    for a in range(n_sites):
        bits = [0] * n_sites
        bits[a] = 1
        configs.append(tuple(bits))
    return configs


def cis_indices(n_sites: int) -> np.ndarray:
    """Statevector indices of the CIS configurations (site 0 is the MSB)."""
    return np.array([0] + [1 << (n_sites - 1 - a) for a in range(n_sites)], dtype=np.int64)


def cis_operator_matrix(terms: Sequence[PauliTerm], n_sites: int) -> np.ndarray:
    """Matrix of a Pauli sum over the CIS configurations."""
    configs = cis_configurations(n_sites)
    terms = [t for t in terms if t.coefficient != 0.0]
    n = len(configs)
    m = np.zeros((n, n))
    for i in range(n):
        for j in range(i, n):
            m[i, j] = pauli_matrix_element(configs[i], configs[j], terms)
            m[j, i] = m[i, j]
    return m


def cis_matrix(h: ExcitonHamiltonian) -> np.ndarray:
    return cis_operator_matrix(h.terms(drop_zeros=True), h.n_sites)


@dataclass(frozen=True)
class CisSolution:
    n_sites: int
    energies: np.ndarray
    vectors: np.ndarray

    def __post_init__(self) -> None:
        n = self.n_sites + 1
        if self.energies.shape != (n,) or self.vectors.shape != (n, n):
            raise ValueError("CIS solution shapes do not match n_sites")


def solve_cis(h: ExcitonHamiltonian) -> CisSolution:
    energies, vectors = eigh(cis_matrix(h))
    return CisSolution(h.n_sites, energies, canonicalize_columns(vectors))


# ---------------------------------------------------------------------------
# Angles
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CisAngles:
    """Pump angle ``theta_0`` (prepares ``cos(theta_0)|0> + sin(theta_0)|1>`` on
    qubit 0) and the ``N - 1`` chain angles ``theta_{k,k+1}``."""

    theta0: float
    chain: tuple[float, ...]

    @property
    def n_sites(self) -> int:
        return len(self.chain) + 1


def cis_angles(coeffs: Sequence[float], norm_tol: float = 1e-8) -> CisAngles:
    """Angles whose forward reconstruction reproduces ``coeffs``.

    Each angle is ``atan2(|remaining tail|, coefficient)``, the same value as
    ``arccos(coefficient / product of preceding sines)`` but without the
    division. The last angle keeps the sign of the final coefficient. Once the
    running sine product drops below ``DEGENERATE_SINE`` the remaining angles
    are zero.
    """
    c = np.asarray(coeffs, dtype=float)
    if c.ndim != 1 or c.size < 2:
        raise ValueError("need at least two coefficients")
    if abs(np.linalg.norm(c) - 1.0) > norm_tol:
        raise ValueError(f"coefficients must have unit norm, got {np.linalg.norm(c)}")
    n = c.size - 1
    # tails[k] = |c[k:]|
    tails = np.sqrt(np.cumsum((c**2)[::-1])[::-1])
    angles = []
    for k in range(n):  # angle k decides coefficient k against the tail after it
        if tails[k] < DEGENERATE_SINE:
            angles.append(0.0)
            continue
        if k == n - 1:
            angles.append(math.atan2(c[k + 1], c[k]))
        else:
            angles.append(math.atan2(tails[k + 1], c[k]))
    return CisAngles(angles[0], tuple(angles[1:]))


def forward_coefficients(angles: CisAngles) -> np.ndarray:
    """CIS coefficients produced by a set of angles."""
    all_angles = (angles.theta0,) + tuple(angles.chain)
    out = np.empty(len(all_angles) + 1)
    running = 1.0
    for k, t in enumerate(all_angles):
        out[k] = running * math.cos(t)
        running *= math.sin(t)
    out[-1] = running
    return out


def cis_prep_circuit(angles: CisAngles) -> Circuit:
    n = angles.n_sites
    # Ry(2 theta_0) puts cos(theta_0) on |0>: the rotation gate is half-angle
    circ = Circuit(n, [Ry(0, 2.0 * angles.theta0)])
    for k, t in enumerate(angles.chain):
        circ.append(CFy(k, k + 1, t))
    for i in range(n - 2, -1, -1):
        for j in range(n - 1, i, -1):
            circ.append(CNOT(j, i))
    return circ


def prepare_cis_states(coeff_columns: np.ndarray, n_sites: int) -> np.ndarray:
    """Run the preparation circuit for every column; returns ``(k, 2**N)``."""
    cols = np.asarray(coeff_columns, dtype=float)
    if cols.ndim == 1:
        cols = cols[:, None]
    if cols.shape[0] != n_sites + 1:
        raise SimulationError("coefficient length must be n_sites + 1")
    out = np.zeros((cols.shape[1], 1 << n_sites))
    for k in range(cols.shape[1]):
        circ = cis_prep_circuit(cis_angles(cols[:, k]))
        row = out[k : k + 1]
        row[0, 0] = 1.0
        apply_gates(row, circ.gates, n_sites)
    return out


def interference_coeffs(v_a: Sequence[float], v_b: Sequence[float], sign: int, tol: float = 1e-8) -> np.ndarray:
    """``(v_a + sign * v_b) / sqrt(2)`` for orthonormal ``v_a`` and ``v_b``."""
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    a = np.asarray(v_a, dtype=float)
    b = np.asarray(v_b, dtype=float)
    if abs(a @ a - 1) > tol or abs(b @ b - 1) > tol or abs(a @ b) > tol:
        raise ValueError("interference inputs must be orthonormal")
    return (a + sign * b) / math.sqrt(2.0)
