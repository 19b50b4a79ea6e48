"""Two-body SO(4) entanglers and the layered entangler circuit.

Inside a 4x4 block the first qubit of the pair is the more significant
index. Three parametrizations are provided:

``antisym``
    exponential of the antisymmetric matrix with ``A..F`` above the diagonal
    in row-major order;
``pauli``
    exponential of ``sum theta_P (-i P)`` over the six real two-qubit Pauli
    generators ``IY, YI, XY, YX, ZY, YZ``;
``gate_native``
    ``Ry(t1) x Ry(t2)``, CNOT, ``Ry(t3) x Ry(t4)``, CNOT, ``Ry(t5) x Ry(t6)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .numerics import expm_antisym4
from .simulator import CNOT, Circuit, Gate, Ry, SimulationError, SO4Block, circuit_matrix

PARAMETRIZATIONS = ("pauli", "antisym", "gate_native")
PAULI_LABELS = ("IY", "YI", "XY", "YX", "ZY", "YZ")

# -i P for the six generators, with P = first (x) second
_PAULI = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]]),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}
GENERATORS = {
    lab: np.real(-1j * np.kron(_PAULI[lab[0]], _PAULI[lab[1]])) for lab in PAULI_LABELS
}

_UPPER = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]  # A..F


def antisym_matrix(a, b, c, d, e, f) -> np.ndarray:
    m = np.zeros((4, 4))
    for (i, j), v in zip(_UPPER, (a, b, c, d, e, f)):
        m[i, j] = v
        m[j, i] = -v
    return m


def so4_from_antisym(a, b, c, d, e, f) -> np.ndarray:
    return expm_antisym4(antisym_matrix(a, b, c, d, e, f))


def pauli_generator(theta: Sequence[float]) -> np.ndarray:
    """``sum theta_P (-i P)`` for angles ordered as ``PAULI_LABELS``."""
    if len(theta) != 6:
        raise ValueError("six Pauli angles are required")
    return sum(t * GENERATORS[lab] for t, lab in zip(theta, PAULI_LABELS))


def so4_from_pauli_angles(theta_iy, theta_yi, theta_xy, theta_yx, theta_zy, theta_yz) -> np.ndarray:
    return expm_antisym4(pauli_generator((theta_iy, theta_yi, theta_xy, theta_yx, theta_zy, theta_yz)))


def map_pauli_to_antisym(theta: Sequence[float]) -> tuple[float, ...]:
    """Antisymmetric-generator parameters ``(A..F)`` equal to the Pauli angles."""
    iy, yi, xy, yx, zy, yz = (float(t) for t in theta)
    a = -(iy + zy)
    f = -(iy - zy)
    c = -(yx + xy)
    d = -(yx - xy)
    b = -(yi + yz)
    e = -(yi - yz)
    return (a, b, c, d, e, f)


def map_antisym_to_pauli(params: Sequence[float]) -> tuple[float, ...]:
    """Inverse of :func:`map_pauli_to_antisym`."""
    a, b, c, d, e, f = (float(p) for p in params)
    iy = -(a + f) / 2
    zy = -(a - f) / 2
    yx = -(c + d) / 2
    xy = -(c - d) / 2
    yi = -(b + e) / 2
    yz = -(b - e) / 2
    return (iy, yi, xy, yx, zy, yz)


def gate_native_circuit(theta: Sequence[float], pair: tuple[int, int], n_qubits: int | None = None) -> Circuit:
    if len(theta) != 6:
        raise ValueError("six gate angles are required")
    q0, q1 = pair
    n = n_qubits if n_qubits is not None else max(q0, q1) + 1
    t = [float(x) for x in theta]
    return Circuit(n, [
        Ry(q0, t[0]), Ry(q1, t[1]),
        CNOT(q0, q1),
        Ry(q0, t[2]), Ry(q1, t[3]),
        CNOT(q0, q1),
        Ry(q0, t[4]), Ry(q1, t[5]),
    ])


def gate_native_matrix(theta: Sequence[float]) -> np.ndarray:
    return circuit_matrix(gate_native_circuit(theta, (0, 1), 2))


def so4_block(theta: Sequence[float], parametrization: str = "pauli") -> np.ndarray:
    """4x4 SO(4) matrix for one pair's six parameters."""
    if parametrization == "pauli":
        return so4_from_pauli_angles(*theta)
    if parametrization == "antisym":
        return so4_from_antisym(*theta)
    if parametrization == "gate_native":
        return gate_native_matrix(theta)
    raise ValueError(f"unknown parametrization {parametrization!r}")


# ---------------------------------------------------------------------------
# Layout and circuit
# ---------------------------------------------------------------------------


def brick_layout(n_qubits: int, topology: str = "cyclic") -> list[list[tuple[int, int]]]:
    """Nearest-neighbour pairs split into two non-overlapping sublayers.

    Sublayer one holds (0,1), (2,3), ...; sublayer two holds (1,2), (3,4), ...
    and, for cyclic topologies with more than two sites, the closing pair
    (N-1, 0) last. On odd rings qubit N-1 is already busy in sublayer two, so
    the closing pair gets a sublayer of its own; application order is the same.
    """
    if topology not in ("linear", "cyclic"):
        raise ValueError(f"unknown topology {topology!r}")
    if n_qubits < 2:
        return []
    first = [(i, i + 1) for i in range(0, n_qubits - 1, 2)]
    second = [(i, i + 1) for i in range(1, n_qubits - 1, 2)]
    layers = [first, second]
    if topology == "cyclic" and n_qubits > 2:
        if n_qubits % 2 == 0:
            second.append((n_qubits - 1, 0))
        else:
            layers.append([(n_qubits - 1, 0)])
    return [s for s in layers if s]


def layout_from_pairs(pairs: Sequence[tuple[int, int]]) -> list[list[tuple[int, int]]]:
    """Greedy split of an explicit pair list into non-overlapping sublayers."""
    sublayers: list[list[tuple[int, int]]] = []
    for p in pairs:
        for sl in sublayers:
            if all(set(p).isdisjoint(q) for q in sl):
                sl.append(tuple(p))
                break
        else:
            sublayers.append([tuple(p)])
    return sublayers


@dataclass
class EntanglerParams:
    """Six angles per pair per layer, flattened layer-major then pair-major."""

    n_qubits: int
    sublayers: list[list[tuple[int, int]]]
    n_layers: int = 1
    parametrization: str = "pauli"
    values: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self) -> None:
        if self.n_layers < 1:
            raise ValueError("n_layers must be at least 1")
        if self.parametrization not in PARAMETRIZATIONS:
            raise ValueError(f"unknown parametrization {self.parametrization!r}")
        self.sublayers = [[(int(a), int(b)) for a, b in sl] for sl in self.sublayers]
        for sl in self.sublayers:
            used: set[int] = set()
            for a, b in sl:
                if a == b or not (0 <= a < self.n_qubits and 0 <= b < self.n_qubits):
                    raise SimulationError(f"invalid pair ({a}, {b})")
                if a in used or b in used:
                    raise SimulationError(f"overlapping pairs within a sublayer: {sl}")
                used.update((a, b))
        if self.values is None:
            self.values = np.zeros(self.n_params)
        self.values = np.asarray(self.values, dtype=float).copy()
        if self.values.shape != (self.n_params,):
            raise ValueError(f"expected {self.n_params} parameters, got {self.values.shape}")

    @classmethod
    def zeros(cls, n_qubits: int, topology: str = "cyclic", n_layers: int = 1,
              parametrization: str = "pauli") -> "EntanglerParams":
        return cls(n_qubits, brick_layout(n_qubits, topology), n_layers, parametrization)

    @property
    def layout(self) -> list[tuple[int, int]]:
        """Pairs of one layer in application order."""
        return [p for sl in self.sublayers for p in sl]

    @property
    def n_pairs(self) -> int:
        return len(self.layout)

    @property
    def n_params(self) -> int:
        return 6 * self.n_pairs * self.n_layers

    def with_values(self, values: np.ndarray) -> "EntanglerParams":
        return EntanglerParams(self.n_qubits, self.sublayers, self.n_layers, self.parametrization, values)

    def blocks(self) -> list[tuple[tuple[int, int], slice]]:
        """``(pair, parameter slice)`` for every block in application order."""
        out = []
        k = 0
        for _ in range(self.n_layers):
            for p in self.layout:
                out.append((p, slice(6 * k, 6 * k + 6)))
                k += 1
        return out

    def block_sublayer_index(self) -> list[int]:
        """Global sublayer number of each block (blocks in one sublayer commute)."""
        out = []
        for layer in range(self.n_layers):
            for s, sl in enumerate(self.sublayers):
                out.extend([layer * len(self.sublayers) + s] * len(sl))
        return out


def block_gate(pair: tuple[int, int], theta: np.ndarray, parametrization: str) -> Gate:
    return SO4Block(pair[0], pair[1], so4_block(theta, parametrization))


def build_entangler_circuit(params: EntanglerParams) -> Circuit:
    """One SO(4) block per pair per layer, in layout order."""
    circ = Circuit(params.n_qubits)
    for pair, sl in params.blocks():
        circ.append(block_gate(pair, params.values[sl], params.parametrization))
    return circ
