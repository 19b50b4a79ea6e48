"""Shared helpers: random models and oracles built independently of the
package kernels (plain Kronecker products and tensor contractions)."""

from __future__ import annotations

import math
from functools import reduce

import numpy as np
import pytest

from exciton_vqe.numerics import expm_antisym4
from exciton_vqe.pauli_model import ExcitonHamiltonian
from exciton_vqe.simulator import Circuit, Gate, SO4Block

PAULI = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]]),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}

_ACCEPTANCE: list[str] = []


def ring_pairs(n: int) -> list[tuple[int, int]]:
    return sorted({(max(i, (i + 1) % n), min(i, (i + 1) % n)) for i in range(n)})


def chain_pairs(n: int) -> list[tuple[int, int]]:
    return [(i + 1, i) for i in range(n - 1)]


def all_pairs(n: int) -> list[tuple[int, int]]:
    return [(a, b) for a in range(n) for b in range(a)]


def random_hamiltonian(rng: np.random.Generator, n: int, topology: str = "all", scale: float = 0.05) -> ExcitonHamiltonian:
    """Random exciton Hamiltonian with gaps near 1 and couplings of ``scale``."""
    pairs = {"all": all_pairs, "cyclic": ring_pairs, "linear": chain_pairs}[topology](n) if n > 1 else []
    m = len(pairs)
    return ExcitonHamiltonian(
        n,
        float(rng.normal()),
        -0.5 + 0.1 * rng.normal(size=n),
        scale * rng.normal(size=n),
        tuple(pairs),
        *(scale * rng.normal(size=m) for _ in range(4)),
    )


def kron_operator(terms, n: int) -> np.ndarray:
    """Dense matrix of a Pauli sum from Kronecker products (site 0 leftmost)."""
    out = np.zeros((1 << n, 1 << n), dtype=complex)
    for t in terms:
        labels = ["I"] * n
        for site, axis in t.factors:
            labels[site] = axis
        out += t.coefficient * reduce(np.kron, [PAULI[c] for c in labels])
    assert np.allclose(out.imag, 0)
    return out.real


def embed_gate(matrix: np.ndarray, qubits: tuple[int, ...], n: int) -> np.ndarray:
    """Full 2^n matrix of a gate via ``kron(gate, I)`` and an axis permutation."""
    k = len(qubits)
    rest = [q for q in range(n) if q not in qubits]
    full = np.kron(matrix, np.eye(1 << (n - k)))
    order = list(qubits) + rest  # tensor axis i of ``full`` is qubit order[i]
    t = full.reshape((2,) * (2 * n))
    inv = [order.index(q) for q in range(n)]
    t = t.transpose(inv + [n + i for i in inv])
    return t.reshape(1 << n, 1 << n)


def statevector_oracle(gates, n: int) -> np.ndarray:
    psi = np.zeros(1 << n)
    psi[0] = 1.0
    for g in gates:
        psi = embed_gate(g.matrix(), g.qubits, n) @ psi
    return psi


def random_so4(rng):
    a = rng.normal(size=(4, 4))
    return expm_antisym4(a - a.T)


def random_gate(rng, n):
    kind = rng.choice(["Ry", "H", "X", "Z", "CNOT", "CZ", "CFy", "SO4"])
    if kind in ("Ry", "H", "X", "Z"):
        return Gate(str(kind), (int(rng.integers(n)),), float(rng.uniform(-math.pi, math.pi)))
    q = rng.choice(n, size=2, replace=False)
    if kind == "SO4":
        return SO4Block(int(q[0]), int(q[1]), random_so4(rng))
    return Gate(str(kind), (int(q[0]), int(q[1])), float(rng.uniform(-math.pi, math.pi)))


def random_circuit(rng, n, n_gates):
    return Circuit(n, [random_gate(rng, n) for _ in range(n_gates)])


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240607)


@pytest.fixture
def acceptance():
    """``acceptance(label, passed, detail)`` records a criterion outcome."""

    def record(label: str, passed: bool, detail: str) -> None:
        line = f"[{'PASS' if passed else 'FAIL'}] {label}: {detail}"
        _ACCEPTANCE.append(line)
        print(line)

    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE:
            terminalreporter.write_line(line)
