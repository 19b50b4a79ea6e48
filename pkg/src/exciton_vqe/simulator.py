"""Real-amplitude statevector simulation.

Every gate in scope is a real orthogonal matrix, so states are stored as
``float64`` arrays of length ``2**N`` (site 0 is the most significant bit).
Kernels accept a leading batch axis so that many states can be pushed through
the same circuit in one call.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numba
import numpy as np

from .pauli_model import ExcitonHamiltonian, ModelError, PauliTerm

MAX_QUBITS = 24

if "NUMBA_THREADING_LAYER" not in os.environ:
    # the portable layer; parallel loops here only split independent states
    numba.config.THREADING_LAYER = "workqueue"


def set_threads(n: int) -> int:
    """Use ``n`` worker threads for batched kernels (capped at the CPU count)."""
    if n < 1:
        raise ValueError("thread count must be at least 1")
    n = min(n, numba.config.NUMBA_NUM_THREADS)
    numba.set_num_threads(n)
    return n


class SimulationError(ValueError):
    """Dimension mismatch or malformed circuit."""


# ---------------------------------------------------------------------------
# Gate matrices
# ---------------------------------------------------------------------------


def ry_matrix(theta: float) -> np.ndarray:
    c, s = math.cos(theta / 2), math.sin(theta / 2)
    return np.array([[c, -s], [s, c]])


H_MATRIX = np.array([[1.0, 1.0], [1.0, -1.0]]) / math.sqrt(2.0)
X_MATRIX = np.array([[0.0, 1.0], [1.0, 0.0]])
Z_MATRIX = np.array([[1.0, 0.0], [0.0, -1.0]])
CNOT_MATRIX = np.array([[1.0, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]])
CZ_MATRIX = np.diag([1.0, 1.0, 1.0, -1.0])


def cfy_matrix(theta: float) -> np.ndarray:
    """Controlled-F_y: identity when the control is 0, a reflection otherwise."""
    c, s = math.cos(theta), math.sin(theta)
    m = np.eye(4)
    m[2:, 2:] = [[c, s], [s, -c]]
    return m


ONE_QUBIT = ("Ry", "H", "X", "Z")
TWO_QUBIT = ("CNOT", "CZ", "CFy", "SO4")


@dataclass(frozen=True)
class Gate:
    """One gate. Two-qubit matrices use (first qubit, second qubit) ordering,
    the first listed qubit being the more significant index; for controlled
    gates the first qubit is the control."""

    kind: str
    qubits: tuple[int, ...]
    angle: float = 0.0
    block: np.ndarray | None = field(default=None, compare=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "qubits", tuple(int(q) for q in self.qubits))
        if self.kind in ONE_QUBIT:
            if len(self.qubits) != 1:
                raise SimulationError(f"{self.kind} acts on one qubit")
        elif self.kind in TWO_QUBIT:
            if len(self.qubits) != 2 or self.qubits[0] == self.qubits[1]:
                raise SimulationError(f"{self.kind} needs two distinct qubits")
        else:
            raise SimulationError(f"unknown gate kind {self.kind!r}")
        if self.kind == "SO4":
            m = np.asarray(self.block, dtype=float)
            if m.shape != (4, 4):
                raise SimulationError("SO4 block must be 4x4")
            if np.max(np.abs(m.T @ m - np.eye(4))) > 1e-12 or abs(np.linalg.det(m) - 1.0) > 1e-12:
                raise SimulationError("SO4 block is not special orthogonal")
            object.__setattr__(self, "block", m)

    def matrix(self) -> np.ndarray:
        k = self.kind
        if k == "Ry":
            return ry_matrix(self.angle)
        if k == "H":
            return H_MATRIX
        if k == "X":
            return X_MATRIX
        if k == "Z":
            return Z_MATRIX
        if k == "CNOT":
            return CNOT_MATRIX
        if k == "CZ":
            return CZ_MATRIX
        if k == "CFy":
            return cfy_matrix(self.angle)
        return self.block


def Ry(q: int, theta: float) -> Gate:
    return Gate("Ry", (q,), theta)


def CNOT(control: int, target: int) -> Gate:
    return Gate("CNOT", (control, target))


def CFy(control: int, target: int, theta: float) -> Gate:
    return Gate("CFy", (control, target), theta)


def SO4Block(q0: int, q1: int, matrix: np.ndarray) -> Gate:
    return Gate("SO4", (q0, q1), block=matrix)


@dataclass
class Circuit:
    n_qubits: int
    gates: list[Gate] = field(default_factory=list)

    def __post_init__(self) -> None:
        if not 1 <= self.n_qubits <= MAX_QUBITS:
            raise SimulationError(f"n_qubits must be in 1..{MAX_QUBITS}")
        self.gates = list(self.gates)
        for g in self.gates:
            self._check(g)

    def _check(self, g: Gate) -> None:
        if any(q < 0 or q >= self.n_qubits for q in g.qubits):
            raise SimulationError(f"gate {g.kind}{g.qubits} outside {self.n_qubits} qubits")

    def append(self, gate: Gate) -> "Circuit":
        self._check(gate)
        self.gates.append(gate)
        return self

    def extend(self, gates: Iterable[Gate]) -> "Circuit":
        for g in gates:
            self.append(g)
        return self

    def __len__(self) -> int:
        return len(self.gates)

    def counts(self) -> dict[str, int]:
        out: dict[str, int] = {}
        for g in self.gates:
            out[g.kind] = out.get(g.kind, 0) + 1
        return out


@dataclass
class StateVector:
    n_qubits: int
    amplitudes: np.ndarray

    def __post_init__(self) -> None:
        self.amplitudes = np.ascontiguousarray(self.amplitudes, dtype=float)
        if self.amplitudes.shape != (1 << self.n_qubits,):
            raise SimulationError(
                f"expected {1 << self.n_qubits} amplitudes, got shape {self.amplitudes.shape}"
            )

    @classmethod
    def zero(cls, n_qubits: int) -> "StateVector":
        amps = np.zeros(1 << n_qubits)
        amps[0] = 1.0
        return cls(n_qubits, amps)

    @classmethod
    def basis(cls, bits: Sequence[int] | str) -> "StateVector":
        bits = [int(b) for b in bits]
        n = len(bits)
        idx = 0
        for b in bits:
            idx = (idx << 1) | b
        amps = np.zeros(1 << n)
        amps[idx] = 1.0
        return cls(n, amps)

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def copy(self) -> "StateVector":
        return StateVector(self.n_qubits, self.amplitudes.copy())


# ---------------------------------------------------------------------------
# Kernels (batched over the leading axis). States are distributed over
# threads, but every state is processed by one thread in a fixed order, so
# results do not depend on the thread count.
# ---------------------------------------------------------------------------


@numba.njit(cache=True, boundscheck=False, parallel=True)
def _apply_1q(psi, m, bit):
    nb, dim = psi.shape
    m00, m01, m10, m11 = m[0, 0], m[0, 1], m[1, 0], m[1, 1]
    for b in numba.prange(nb):
        row = psi[b]
        for base in range(0, dim, 2 * bit):
            for i0 in range(base, base + bit):
                i1 = i0 | bit
                a0 = row[i0]
                a1 = row[i1]
                row[i0] = m00 * a0 + m01 * a1
                row[i1] = m10 * a0 + m11 * a1


@numba.njit(cache=True, boundscheck=False, parallel=True)
def _apply_2q(psi, m, bit_hi, bit_lo):
    # bit_hi addresses the first (more significant in the 4x4) qubit of the pair
    nb, dim = psi.shape
    small = min(bit_hi, bit_lo)
    big = max(bit_hi, bit_lo)
    m00, m01, m02, m03 = m[0, 0], m[0, 1], m[0, 2], m[0, 3]
    m10, m11, m12, m13 = m[1, 0], m[1, 1], m[1, 2], m[1, 3]
    m20, m21, m22, m23 = m[2, 0], m[2, 1], m[2, 2], m[2, 3]
    m30, m31, m32, m33 = m[3, 0], m[3, 1], m[3, 2], m[3, 3]
    for b in numba.prange(nb):
        row = psi[b]
        for outer in range(0, dim, 2 * big):
            for mid in range(outer, outer + big, 2 * small):
                for i00 in range(mid, mid + small):
                    i01 = i00 | bit_lo
                    i10 = i00 | bit_hi
                    i11 = i10 | bit_lo
                    a0 = row[i00]
                    a1 = row[i01]
                    a2 = row[i10]
                    a3 = row[i11]
                    row[i00] = m00 * a0 + m01 * a1 + m02 * a2 + m03 * a3
                    row[i01] = m10 * a0 + m11 * a1 + m12 * a2 + m13 * a3
                    row[i10] = m20 * a0 + m21 * a1 + m22 * a2 + m23 * a3
                    row[i11] = m30 * a0 + m31 * a1 + m32 * a2 + m33 * a3


@numba.njit(cache=True)
def _top_bit(m):
    while m & (m - 1):
        m &= m - 1
    return m


@numba.njit(cache=True, boundscheck=False, parallel=True)
def _expect(psi, diag, has_diag, masks, wptr, weights, const):
    nb, dim = psi.shape
    out = np.zeros(nb)
    for b in numba.prange(nb):
        row = psi[b]
        acc = 0.0
        if has_diag:
            for i in range(dim):
                acc += diag[i] * row[i] * row[i]
        for g in range(masks.shape[0]):
            m = masks[g]
            top = _top_bit(m)
            sub = 0.0
            if wptr[g] < 0:
                for base in range(0, dim, 2 * top):
                    for i in range(base, base + top):
                        sub += row[i] * row[i ^ m]
                sub *= const[g]
            else:
                w = weights[wptr[g]]
                j = 0
                for base in range(0, dim, 2 * top):
                    for i in range(base, base + top):
                        sub += w[j] * row[i] * row[i ^ m]
                        j += 1
            acc += 2.0 * sub
        out[b] = acc
    return out


@numba.njit(cache=True, boundscheck=False, parallel=True)
def _matvec(psi, out, diag, has_diag, masks, wptr, weights, const):
    nb, dim = psi.shape
    for b in numba.prange(nb):
        row = psi[b]
        res = out[b]
        if has_diag:
            for i in range(dim):
                res[i] = diag[i] * row[i]
        else:
            for i in range(dim):
                res[i] = 0.0
        for g in range(masks.shape[0]):
            m = masks[g]
            top = _top_bit(m)
            if wptr[g] < 0:
                c = const[g]
                for base in range(0, dim, 2 * top):
                    for i in range(base, base + top):
                        k = i ^ m
                        res[i] += c * row[k]
                        res[k] += c * row[i]
            else:
                w = weights[wptr[g]]
                j = 0
                for base in range(0, dim, 2 * top):
                    for i in range(base, base + top):
                        k = i ^ m
                        res[i] += w[j] * row[k]
                        res[k] += w[j] * row[i]
                        j += 1


def _parity_vec(idx: np.ndarray, zmask: int) -> np.ndarray:
    x = idx & zmask
    par = np.zeros_like(x)
    while np.any(x):
        par ^= x & 1
        x = x >> 1
    return par


# ---------------------------------------------------------------------------
# Compiled observables
# ---------------------------------------------------------------------------


class CompiledOperator:
    """A real Pauli sum grouped by bit-flip mask for fast expectation values.

    Terms with an X/Y on the same set of sites share a flip mask ``m``. Their
    Z factors sit on other sites, so the group acts as
    ``(O psi)[i ^ m] += w(i) psi[i]`` with a weight that is symmetric under
    ``i -> i ^ m``; weights are tabulated on the half of the index space whose
    highest flipped bit is clear. Groups without Z factors keep a scalar
    weight. Purely diagonal terms are folded into one dense vector.
    """

    def __init__(self, terms: Sequence[PauliTerm], n_qubits: int):
        if not 1 <= n_qubits <= MAX_QUBITS:
            raise SimulationError(f"n_qubits must be in 1..{MAX_QUBITS}")
        self.n_qubits = n_qubits
        dim = 1 << n_qubits
        groups: dict[int, list[tuple[float, int]]] = {}
        identity = 0.0
        diag_terms: list[tuple[float, int]] = []
        self.support: set[int] = set()
        for t in terms:
            if t.max_site >= n_qubits:
                raise SimulationError(f"term {t} acts beyond {n_qubits} qubits")
            if t.coefficient == 0.0:
                continue
            self.support.update(s for s, _ in t.factors)
            flip = 0
            zmask = 0
            ny = 0
            for s, a in t.factors:
                bit = 1 << (n_qubits - 1 - s)
                if a == "X":
                    flip |= bit
                elif a == "Z":
                    zmask |= bit
                else:
                    flip |= bit
                    zmask |= bit
                    ny += 1
            if ny % 2:
                raise ModelError(f"term {t} has imaginary matrix elements")
            coef = t.coefficient * (-1.0) ** (ny // 2)
            if flip == 0:
                if zmask == 0:
                    identity += coef
                else:
                    diag_terms.append((coef, zmask))
            else:
                groups.setdefault(flip, []).append((coef, zmask))
        self.identity = identity
        idx = np.arange(dim, dtype=np.int64)
        self.has_diag = bool(diag_terms) or identity != 0.0
        if self.has_diag:
            diag = np.full(dim, identity)
            for coef, zmask in diag_terms:
                diag += np.where(_parity_vec(idx, zmask) == 1, -coef, coef)
        else:
            diag = np.zeros(1)
        self.diag = diag

        keys = sorted(groups)
        self.masks = np.array(keys, dtype=np.int64)
        wptr = []
        const = []
        tables = []
        for m in keys:
            members = groups[m]
            if all(zm == 0 for _, zm in members):
                wptr.append(-1)
                const.append(sum(c for c, _ in members))
                continue
            top = 1 << (int(m).bit_length() - 1)
            half = idx[(idx & top) == 0]
            w = np.zeros(half.size)
            for c, zm in members:
                w += np.where(_parity_vec(half, zm) == 1, -c, c)
            wptr.append(len(tables))
            const.append(0.0)
            tables.append(w)
        self.wptr = np.array(wptr, dtype=np.int64)
        self.const = np.array(const, dtype=float)
        self.weights = np.array(tables) if tables else np.zeros((0, max(1, dim // 2)))

    def _prep(self, psi: np.ndarray) -> tuple[np.ndarray, bool]:
        arr = np.ascontiguousarray(psi, dtype=float)
        single = arr.ndim == 1
        arr2 = arr.reshape(1, -1) if single else arr
        if arr2.ndim != 2 or arr2.shape[1] != (1 << self.n_qubits):
            raise SimulationError("state dimension does not match operator")
        return arr2, single

    def expectation(self, psi: np.ndarray) -> np.ndarray | float:
        """Expectation values for a ``(dim,)`` or ``(batch, dim)`` array."""
        arr, single = self._prep(psi)
        vals = _expect(arr, self.diag, self.has_diag, self.masks, self.wptr, self.weights, self.const)
        return float(vals[0]) if single else vals

    def apply(self, psi: np.ndarray) -> np.ndarray:
        """``O @ psi`` for a ``(dim,)`` or ``(batch, dim)`` array."""
        arr, single = self._prep(psi)
        out = np.empty_like(arr)
        _matvec(arr, out, self.diag, self.has_diag, self.masks, self.wptr, self.weights, self.const)
        return out[0] if single else out


_COMPILED_CACHE: dict[tuple[int, int], tuple[object, CompiledOperator]] = {}


def compile_operator(terms, n_qubits: int | None = None) -> CompiledOperator:
    """Compile a term list or :class:`ExcitonHamiltonian` (memoized per object)."""
    if isinstance(terms, CompiledOperator):
        return terms
    if isinstance(terms, ExcitonHamiltonian):
        key = (id(terms), terms.n_sites)
        hit = _COMPILED_CACHE.get(key)
        if hit is not None and hit[0] is terms:
            return hit[1]
        op = CompiledOperator(terms.terms(drop_zeros=True), terms.n_sites)
        if len(_COMPILED_CACHE) > 32:
            _COMPILED_CACHE.clear()
        _COMPILED_CACHE[key] = (terms, op)
        return op
    terms = list(terms)
    if n_qubits is None:
        n_qubits = max((t.max_site for t in terms), default=0) + 1
    return CompiledOperator(terms, n_qubits)


# ---------------------------------------------------------------------------
# Public operations
# ---------------------------------------------------------------------------


def apply_gates(psi: np.ndarray, gates: Iterable[Gate], n_qubits: int) -> np.ndarray:
    """Apply gates in place to a ``(batch, 2**n)`` C-contiguous array."""
    for g in gates:
        m = np.ascontiguousarray(g.matrix(), dtype=float)
        if len(g.qubits) == 1:
            _apply_1q(psi, m, 1 << (n_qubits - 1 - g.qubits[0]))
        else:
            q0, q1 = g.qubits
            _apply_2q(psi, m, 1 << (n_qubits - 1 - q0), 1 << (n_qubits - 1 - q1))
    return psi


def apply_circuit(state: StateVector, circuit: Circuit) -> StateVector:
    """New state after applying the circuit's gates in list order."""
    if state.n_qubits != circuit.n_qubits:
        raise SimulationError(
            f"state has {state.n_qubits} qubits, circuit has {circuit.n_qubits}"
        )
    psi = state.amplitudes.reshape(1, -1).copy()
    apply_gates(psi, circuit.gates, circuit.n_qubits)
    return StateVector(state.n_qubits, psi[0])


def expectation(state: StateVector, terms) -> float:
    """``<psi| sum(terms) |psi>`` for a term list, Hamiltonian or compiled operator."""
    op = compile_operator(terms, state.n_qubits)
    if op.n_qubits != state.n_qubits:
        raise SimulationError("operator and state sizes differ")
    return float(op.expectation(state.amplitudes))


def inner_product(a: StateVector, b: StateVector) -> float:
    if a.n_qubits != b.n_qubits:
        raise SimulationError("states have different sizes")
    return float(a.amplitudes @ b.amplitudes)


def circuit_matrix(circuit: Circuit) -> np.ndarray:
    """Dense matrix of a circuit, obtained by simulating every basis state."""
    dim = 1 << circuit.n_qubits
    psi = np.eye(dim)
    apply_gates(psi, circuit.gates, circuit.n_qubits)
    return psi.T.copy()
