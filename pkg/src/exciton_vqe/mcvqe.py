"""Multistate contracted VQE.

The workflow has four stages:

1. solve CIS classically and prepare its lowest ``N_theta`` eigenvectors as
   reference states (:mod:`exciton_vqe.reference_states`);
2. optimize one shared SO(4) entangler to minimize the average energy of the
   entangled reference states;
3. fill the contracted Hamiltonian: diagonal elements are plain expectation
   values, and off-diagonal ones come from the interference states
   ``(|Phi_a> +- |Phi_b>)/sqrt(2)`` as ``[E(+) - E(-)] / 2``;
4. diagonalize that small matrix and rotate any other observable (the
   transition dipole, site populations) into its eigenbasis.

:class:`McVqeEngine` holds the prepared reference states and compiled
operators so that repeated objective and gradient evaluations reuse them.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .entangler import (
    PARAMETRIZATIONS,
    EntanglerParams,
    brick_layout,
    build_entangler_circuit,
    so4_block,
)
from .numerics import (
    OptimizeResult,
    OptimizerOptions,
    TraceEntry,
    canonicalize_columns,
    eigh,
    lbfgs,
    powell,
)
from .pauli_model import HARTREE_TO_EV, DipoleOperator, ExcitonHamiltonian, PauliTerm
from .reference_states import CisSolution, interference_coeffs, prepare_cis_states
from .simulator import (
    CompiledOperator,
    SimulationError,
    StateVector,
    _apply_2q,
    apply_gates,
    compile_operator,
    inner_product,
)

DEGENERATE_GAP = 1e-8
INTERFERENCE_CHUNK = 32


class McVqeError(ValueError):
    """Invalid MC-VQE configuration or inputs."""


@dataclass
class McVqeConfig:
    """Settings for one MC-VQE run.

    ``n_states=None`` means all ``N + 1`` CIS states. ``topology=None`` picks
    a cyclic entangler when the Hamiltonian couples the first and last sites
    (``N > 2``) and a linear one otherwise.
    """

    n_states: int | None = None
    fd_step: float = 0.01
    gtol: float = 1e-7
    max_iter: int = 200
    optimizer: str = "lbfgs"
    n_layers: int = 1
    parametrization: str = "pauli"
    topology: str | None = None
    ftol: float = 1e-12

    def __post_init__(self) -> None:
        if self.fd_step <= 0:
            raise McVqeError("fd_step must be positive")
        if self.gtol <= 0:
            raise McVqeError("gtol must be positive")
        if self.max_iter < 0:
            raise McVqeError("max_iter must be non-negative")
        if self.optimizer not in ("lbfgs", "powell"):
            raise McVqeError(f"unknown optimizer {self.optimizer!r}")
        if self.n_layers < 1:
            raise McVqeError("n_layers must be at least 1")
        if self.parametrization not in PARAMETRIZATIONS:
            raise McVqeError(f"unknown parametrization {self.parametrization!r}")
        if self.topology not in (None, "linear", "cyclic"):
            raise McVqeError(f"unknown topology {self.topology!r}")

    def resolve_states(self, n_sites: int) -> int:
        k = n_sites + 1 if self.n_states is None else self.n_states
        if not 1 <= k <= n_sites + 1:
            raise McVqeError(f"n_states must be in 1..{n_sites + 1}, got {k}")
        return k

    def options(self) -> OptimizerOptions:
        return OptimizerOptions(max_iter=self.max_iter, gtol=self.gtol, ftol=self.ftol, fd_step=self.fd_step)


def default_topology(h: ExcitonHamiltonian) -> str:
    n = h.n_sites
    if n > 2 and (n - 1, 0) in set(map(tuple, h.pairs)):
        return "cyclic"
    return "linear"


def initial_params(h: ExcitonHamiltonian, config: McVqeConfig) -> EntanglerParams:
    topology = config.topology or default_topology(h)
    return EntanglerParams(h.n_sites, brick_layout(h.n_sites, topology), config.n_layers, config.parametrization)


# ---------------------------------------------------------------------------
# Engine
# ---------------------------------------------------------------------------


class McVqeEngine:
    """Reusable evaluation context for one Hamiltonian, CIS solution and layout.

    Parameters
    ----------
    h : ExcitonHamiltonian
    cis : CisSolution
    n_states : int
        Number of CIS reference states averaged in the objective.
    template : EntanglerParams
        Supplies the layout, layer count and parametrization; its values are
        ignored.
    """

    def __init__(
        self, h: ExcitonHamiltonian | None, cis: CisSolution, n_states: int, template: EntanglerParams
    ):
        n = cis.n_sites
        if template.n_qubits != n or (h is not None and h.n_sites != n):
            raise McVqeError("Hamiltonian, CIS solution and entangler sizes differ")
        if not 1 <= n_states <= n + 1:
            raise McVqeError(f"n_states must be in 1..{n + 1}")
        self.h = h
        self.cis = cis
        self.n_states = n_states
        self.template = template
        self.n = n
        self.op = compile_operator(h) if h is not None else None
        self.refs = prepare_cis_states(cis.vectors[:, :n_states], self.n)
        self._blocks = template.blocks()
        self._sublayer = template.block_sublayer_index()
        self._cone_cache: list[tuple[CompiledOperator | None, list[int]]] | None = None
        self.n_objective = 0
        self.n_gradient = 0

    # -- circuits -----------------------------------------------------------

    def params(self, values: np.ndarray) -> EntanglerParams:
        return self.template.with_values(values)

    def _block_matrices(self, values: np.ndarray) -> list[np.ndarray]:
        par = self.template.parametrization
        return [np.ascontiguousarray(so4_block(values[sl], par)) for _, sl in self._blocks]

    def _apply_block(self, psi: np.ndarray, k: int, m: np.ndarray) -> None:
        q0, q1 = self._blocks[k][0]
        _apply_2q(psi, m, 1 << (self.n - 1 - q0), 1 << (self.n - 1 - q1))

    def entangle(self, psi: np.ndarray, values: np.ndarray) -> np.ndarray:
        """Apply the entangler in place to a ``(batch, 2**N)`` array."""
        for k, m in enumerate(self._block_matrices(np.asarray(values, dtype=float))):
            self._apply_block(psi, k, m)
        return psi

    def entangled_references(self, values: np.ndarray) -> np.ndarray:
        return self.entangle(self.refs.copy(), values)

    # -- objective ----------------------------------------------------------

    def diagonal_elements(self, values: np.ndarray) -> np.ndarray:
        if self.op is None:
            raise McVqeError("engine was built without a Hamiltonian")
        self.n_objective += 1
        return np.asarray(self.op.expectation(self.entangled_references(values)))

    def objective(self, values: np.ndarray) -> float:
        return float(np.mean(self.diagonal_elements(values)))

    # -- gradient -----------------------------------------------------------

    def _cones(self) -> list[tuple[CompiledOperator | None, list[int]]]:
        """Per block: the Hamiltonian terms that can see it and the later blocks
        those terms can see. Everything else cancels in a difference of two
        objective values that differ only in that block."""
        if self._cone_cache is not None:
            return self._cone_cache
        if self.h is None:
            raise McVqeError("engine was built without a Hamiltonian")
        terms = self.h.terms(drop_zeros=True)
        pairs = [set(p) for p, _ in self._blocks]
        out = []
        for k in range(len(pairs)):
            reach = set(pairs[k])
            for j in range(k + 1, len(pairs)):
                if pairs[j] & reach:
                    reach |= pairs[j]
            seen = [t for t in terms if any(s in reach for s, _ in t.factors)]
            if not seen:
                out.append((None, []))
                continue
            support = set()
            for t in seen:
                support.update(s for s, _ in t.factors)
            later = []
            for j in range(len(pairs) - 1, k, -1):
                # blocks sharing k's sublayer are already in the cached state
                if self._sublayer[j] == self._sublayer[k]:
                    continue
                if pairs[j] & support:
                    later.append(j)
                    support |= pairs[j]
            out.append((CompiledOperator(seen, self.n), sorted(later)))
        self._cone_cache = out
        return out

    def gradient(self, values: np.ndarray, step: float = 0.01) -> np.ndarray:
        """Central finite-difference gradient of :meth:`objective`.

        Algebraically identical to perturbing each angle and re-running the
        whole circuit, but reuses the state after each sublayer and evaluates
        only the light cone of the perturbed block.
        """
        if step <= 0:
            raise McVqeError("fd_step must be positive")
        values = np.asarray(values, dtype=float)
        self.n_gradient += 1
        mats = self._block_matrices(values)
        cones = self._cones()
        # state after every complete sublayer
        n_sub = max(self._sublayer) + 1 if self._sublayer else 0
        after = []
        psi = self.refs.copy()
        k = 0
        for s in range(n_sub):
            while k < len(self._blocks) and self._sublayer[k] == s:
                self._apply_block(psi, k, mats[k])
                k += 1
            after.append(psi.copy())
        par = self.template.parametrization
        grad = np.zeros_like(values)
        for k, (pair, sl) in enumerate(self._blocks):
            op, later = cones[k]
            if op is None:
                continue
            # blocks of one sublayer act on disjoint qubits, so undoing block k
            # from the sublayer output leaves it as if applied last
            base = after[self._sublayer[k]].copy()
            self._apply_block(base, k, np.ascontiguousarray(mats[k].T))
            for i in range(sl.start, sl.stop):
                vals = []
                for sign in (1.0, -1.0):
                    theta = values[sl].copy()
                    theta[i - sl.start] += sign * step
                    psi = base.copy()
                    self._apply_block(psi, k, np.ascontiguousarray(so4_block(theta, par)))
                    for j in later:
                        self._apply_block(psi, j, mats[j])
                    vals.append(float(np.mean(op.expectation(psi))))
                grad[i] = (vals[0] - vals[1]) / (2.0 * step)
        return grad

    # -- subspace -----------------------------------------------------------

    def contracted_matrices(
        self, values: np.ndarray, operators: Sequence[CompiledOperator]
    ) -> list[np.ndarray]:
        """Reference-basis matrices of several operators from one set of
        preparations: diagonals from the references, off-diagonals from the
        ``+`` and ``-`` interference states."""
        k = self.n_states
        vecs = self.cis.vectors[:, :k]
        mats = [np.zeros((k, k)) for _ in operators]
        psi = self.entangled_references(values)
        for m, op in zip(mats, operators):
            np.fill_diagonal(m, op.expectation(psi))
        jobs = [(a, b, sgn) for a in range(k) for b in range(a + 1, k) for sgn in (1, -1)]
        results: dict[tuple[int, int, int], list[float]] = {}
        for start in range(0, len(jobs), INTERFERENCE_CHUNK):
            chunk = jobs[start : start + INTERFERENCE_CHUNK]
            coeffs = np.column_stack([interference_coeffs(vecs[:, a], vecs[:, b], s) for a, b, s in chunk])
            psi = self.entangle(prepare_cis_states(coeffs, self.n), values)
            vals = [np.atleast_1d(op.expectation(psi)) for op in operators]
            for idx, job in enumerate(chunk):
                results[job] = [float(v[idx]) for v in vals]
        for a in range(k):
            for b in range(a + 1, k):
                plus, minus = results[(a, b, 1)], results[(a, b, -1)]
                for m, ep, em in zip(mats, plus, minus):
                    m[a, b] = m[b, a] = (ep - em) / 2.0
        return mats


# ---------------------------------------------------------------------------
# Results
# ---------------------------------------------------------------------------


@dataclass
class SubspaceResult:
    h_sub: np.ndarray
    energies: np.ndarray
    v: np.ndarray
    params: EntanglerParams
    trace: list[TraceEntry] = field(default_factory=list)
    converged: bool = True
    message: str = ""

    @property
    def n_states(self) -> int:
        return self.energies.size

    def degenerate_pairs(self, gap: float = DEGENERATE_GAP) -> list[tuple[int, int]]:
        e = self.energies
        return [(i, j) for i in range(e.size) for j in range(i + 1, e.size) if abs(e[j] - e[i]) < gap]


@dataclass
class TransitionSet:
    """Excitation energies, transition dipoles and populations of one run.

    ``dipoles[t]`` and ``strengths[t]`` refer to the transition from state 0
    to state ``t + 1``; ``populations[s, A]`` is the excited-state probability
    of site ``A`` in state ``s``.
    """

    energies: np.ndarray
    dipoles: np.ndarray
    strengths: np.ndarray
    populations: np.ndarray
    degenerate: list[tuple[int, int]] = field(default_factory=list)

    @property
    def excitation_energies_ev(self) -> np.ndarray:
        return (self.energies[1:] - self.energies[0]) * HARTREE_TO_EV


# ---------------------------------------------------------------------------
# Public operations
# ---------------------------------------------------------------------------


def _engine(h, cis, params: EntanglerParams, n_states: int) -> McVqeEngine:
    return McVqeEngine(h, cis, n_states, params)


def diagonal_element(theta: int, params: EntanglerParams, h: ExcitonHamiltonian, cis: CisSolution) -> float:
    if not 0 <= theta < h.n_sites + 1:
        raise McVqeError(f"state index {theta} out of range")
    psi = prepare_cis_states(cis.vectors[:, theta], h.n_sites)
    psi = apply_gates(psi, build_entangler_circuit(params).gates, h.n_sites)
    return float(compile_operator(h).expectation(psi[0]))


def state_averaged_energy(params: EntanglerParams, h: ExcitonHamiltonian, cis: CisSolution, n_states: int) -> float:
    return _engine(h, cis, params, n_states).objective(params.values)


def optimize_entangler(
    h: ExcitonHamiltonian,
    cis: CisSolution,
    config: McVqeConfig | None = None,
    callback: Callable[[TraceEntry], None] | None = None,
    engine: McVqeEngine | None = None,
) -> tuple[EntanglerParams, OptimizeResult]:
    """Minimize the state-averaged energy from all-zero entangler angles."""
    config = config or McVqeConfig()
    if engine is None:
        engine = McVqeEngine(h, cis, config.resolve_states(h.n_sites), initial_params(h, config))
    x0 = np.zeros(engine.template.n_params)
    opts = config.options()
    if config.optimizer == "lbfgs":
        res = lbfgs(engine.objective, lambda x: engine.gradient(x, config.fd_step), x0, opts, callback)
    else:
        res = powell(engine.objective, x0, opts, callback)
    return engine.params(res.x), res


def assemble_subspace(
    params: EntanglerParams,
    h: ExcitonHamiltonian,
    cis: CisSolution,
    n_states: int,
    engine: McVqeEngine | None = None,
) -> SubspaceResult:
    engine = engine or _engine(h, cis, params, n_states)
    (h_sub,) = engine.contracted_matrices(params.values, [engine.op])
    energies, v = eigh(h_sub)
    return SubspaceResult(h_sub, energies, canonicalize_columns(v), params)


def contracted_operator(
    params: EntanglerParams,
    terms: Sequence[PauliTerm],
    cis: CisSolution,
    v: np.ndarray,
) -> np.ndarray:
    """Matrix of an observable between the MC-VQE eigenstates, ``V^T M V``."""
    op = compile_operator(list(terms), params.n_qubits)
    engine = McVqeEngine(None, cis, v.shape[0], params)
    (m,) = engine.contracted_matrices(params.values, [op])
    return v.T @ m @ v


def dipole_matrices(
    params: EntanglerParams, dipole: DipoleOperator, cis: CisSolution, v: np.ndarray, engine: McVqeEngine
) -> np.ndarray:
    """``(3, k, k)`` transition-dipole matrices in the MC-VQE eigenbasis."""
    n = params.n_qubits
    ops = [compile_operator(dipole.terms(axis), n) for axis in range(3)]
    mats = engine.contracted_matrices(params.values, ops)
    return np.array([v.T @ m @ v for m in mats])


def oscillator_strengths(energies: np.ndarray, dipoles: np.ndarray) -> np.ndarray:
    """``(2/3) (E_t - E_0) |<0|mu|t>|^2`` for ``t = 1 .. k-1`` (atomic units).

    ``dipoles`` is either the ``(3, k, k)`` matrix stack or a ``(k - 1, 3)``
    array of ground-to-excited transition dipoles.
    """
    e = np.asarray(energies, dtype=float)
    d = np.asarray(dipoles, dtype=float)
    if d.ndim == 3:
        d = d[:, 0, 1:].T
    d = d.reshape(-1, 3)
    de = e[1 : 1 + d.shape[0]] - e[0]
    return (2.0 / 3.0) * de * np.sum(d**2, axis=1)


def prepare_eigenstate(theta: int, params: EntanglerParams, cis: CisSolution, v: np.ndarray) -> StateVector:
    """Entangled state ``U |Gamma_theta>`` with ``Gamma = C V[:, theta]``."""
    k = v.shape[0]
    gamma = cis.vectors[:, :k] @ v[:, theta]
    gamma = gamma / np.linalg.norm(gamma)
    n = params.n_qubits
    psi = apply_gates(prepare_cis_states(gamma, n), build_entangler_circuit(params).gates, n)
    return StateVector(n, psi[0])


def populations(state: StateVector | np.ndarray) -> np.ndarray:
    """Excited-state probability ``(1 - <Z_A>) / 2`` of every site."""
    amps = state.amplitudes if isinstance(state, StateVector) else np.asarray(state, dtype=float)
    n = int(round(math.log2(amps.size)))
    if 1 << n != amps.size:
        raise SimulationError("state length is not a power of two")
    prob = (amps**2).reshape((2,) * n)
    return np.array([prob.sum(axis=tuple(b for b in range(n) if b != a))[1] for a in range(n)])


def fidelity(a: StateVector, b: StateVector) -> float:
    return abs(inner_product(a, b))


# ---------------------------------------------------------------------------
# Driver
# ---------------------------------------------------------------------------


@dataclass
class McVqeRun:
    subspace: SubspaceResult
    transitions: TransitionSet
    optimize: OptimizeResult
    timings: dict[str, float]


def transitions_from_subspace(
    sub: SubspaceResult, cis: CisSolution, dipole: DipoleOperator | None, engine: McVqeEngine
) -> TransitionSet:
    k = sub.n_states
    if dipole is not None and k > 1:
        mats = dipole_matrices(sub.params, dipole, cis, sub.v, engine)
        dip = mats[:, 0, 1:].T.copy()
    else:
        dip = np.zeros((max(k - 1, 0), 3))
    strengths = oscillator_strengths(sub.energies, dip) if k > 1 else np.zeros(0)
    pops = np.array([populations(prepare_eigenstate(t, sub.params, cis, sub.v)) for t in range(k)])
    return TransitionSet(sub.energies.copy(), dip, strengths, pops, sub.degenerate_pairs())


def run_mcvqe(
    h: ExcitonHamiltonian,
    cis: CisSolution,
    dipole: DipoleOperator | None = None,
    config: McVqeConfig | None = None,
    callback: Callable[[TraceEntry], None] | None = None,
) -> McVqeRun:
    """Optimize, assemble, diagonalize and extract transition properties."""
    config = config or McVqeConfig()
    k = config.resolve_states(h.n_sites)
    engine = McVqeEngine(h, cis, k, initial_params(h, config))
    t0 = time.perf_counter()
    params, res = optimize_entangler(h, cis, config, callback, engine)
    t1 = time.perf_counter()
    sub = assemble_subspace(params, h, cis, k, engine)
    sub.trace = res.trace
    sub.converged = res.converged
    sub.message = res.message
    t2 = time.perf_counter()
    trans = transitions_from_subspace(sub, cis, dipole, engine)
    t3 = time.perf_counter()
    return McVqeRun(sub, trans, res, {"optimize": t1 - t0, "subspace": t2 - t1, "properties": t3 - t2})
