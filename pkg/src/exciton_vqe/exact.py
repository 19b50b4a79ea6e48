"""Exact lowest eigenpairs of the exciton Hamiltonian in the full 2^N space.

Small systems are diagonalized densely. Larger ones use a thick-restart
Lanczos iteration (full reorthogonalization, symmetric Krylov-Schur restart)
on the matrix-free Pauli-sum kernel. Converged pairs are deflated and a
second run from a fresh random start checks that nothing below the wanted
window was missed, which also recovers partners of exactly degenerate levels
that a single Krylov sequence cannot see.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .numerics import NumericsError, canonicalize_columns, eigh
from .pauli_model import ExcitonHamiltonian, ModelError, to_dense
from .simulator import StateVector, compile_operator

DENSE_THRESHOLD = 10
DENSE_MAX = 12
ITERATIVE_MAX = 20


class FciConvergenceError(NumericsError):
    """Lanczos did not converge; carries the best residual norms reached."""

    def __init__(self, message: str, residuals: np.ndarray):
        super().__init__(message)
        self.residuals = residuals


@dataclass
class FciResult:
    energies: np.ndarray
    vectors: np.ndarray  # (k, 2**N), one eigenvector per row
    residuals: np.ndarray
    method: str
    n_matvec: int = 0

    @property
    def n_sites(self) -> int:
        return int(self.vectors.shape[1]).bit_length() - 1

    def state(self, index: int) -> StateVector:
        return StateVector(self.n_sites, self.vectors[index])


# ---------------------------------------------------------------------------
# Lanczos
# ---------------------------------------------------------------------------


def _orthogonalize(w: np.ndarray, basis: np.ndarray) -> np.ndarray:
    """Coefficients of two classical Gram-Schmidt passes; ``w`` is updated."""
    if basis.shape[0] == 0:
        return np.zeros(0)
    c = basis @ w
    w -= c @ basis
    c2 = basis @ w
    w -= c2 @ basis
    return c + c2


def _random_start(dim: int, locked: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    for _ in range(10):
        v = rng.standard_normal(dim)
        _orthogonalize(v, locked)
        nrm = np.linalg.norm(v)
        if nrm > 1e-8:
            return v / nrm
    raise NumericsError("could not draw a start vector outside the deflated space")


def _krylov_schur(
    matvec: Callable[[np.ndarray], np.ndarray],
    dim: int,
    nev: int,
    locked: np.ndarray,
    rng: np.random.Generator,
    tol: float,
    m: int,
    max_restarts: int,
) -> tuple[np.ndarray, np.ndarray, np.ndarray, int]:
    """Lowest ``nev`` eigenpairs in the complement of ``locked`` (rows)."""
    V = np.empty((m + 1, dim))
    H = np.zeros((m + 1, m))
    V[0] = _random_start(dim, locked, rng)
    p = 0
    n_mv = 0
    res = np.full(nev, np.inf)
    for _ in range(max_restarts):
        for j in range(p, m):
            w = matvec(V[j])
            n_mv += 1
            _orthogonalize(w, locked)
            H[: j + 1, j] = _orthogonalize(w, V[: j + 1])
            _orthogonalize(w, locked)
            beta = float(np.linalg.norm(w))
            if beta < 1e-12:
                # invariant subspace: continue the basis with a fresh direction
                H[j + 1, j] = 0.0
                w = _random_start(dim, np.vstack([locked, V[: j + 1]]), rng)
                V[j + 1] = w
            else:
                H[j + 1, j] = beta
                V[j + 1] = w / beta
        S = H[:m, :m]
        theta, Y = eigh(0.5 * (S + S.T), sym_tol=1e-6)
        res = np.abs(H[m, :m] @ Y)
        if np.all(res[:nev] < tol):
            return theta[:nev], Y[:, :nev].T @ V[:m], res[:nev], n_mv
        keep = min(m - 1, nev + (m - nev) // 2)
        V[:keep] = Y[:, :keep].T @ V[:m]
        V[keep] = V[m]
        coupling = H[m, :m] @ Y[:, :keep]
        H[:] = 0.0
        H[:keep, :keep] = np.diag(theta[:keep])
        H[keep, :keep] = coupling
        p = keep
    raise FciConvergenceError(f"Lanczos did not converge after {max_restarts} restarts", res[:nev])


def lanczos_lowest(
    matvec: Callable[[np.ndarray], np.ndarray],
    dim: int,
    k: int,
    tol: float = 1e-10,
    seed: int = 0,
    krylov_dim: int | None = None,
    max_restarts: int = 500,
    max_verify: int = 10,
) -> tuple[np.ndarray, np.ndarray, int]:
    """Lowest ``k`` eigenpairs of a symmetric operator given as a matvec.

    Returns ``(energies, vectors (k, dim), n_matvec)``.
    """
    if not 1 <= k <= dim:
        raise NumericsError(f"k must be in 1..{dim}")
    m = krylov_dim or max(2 * k + 20, 40)
    rng = np.random.default_rng(seed)
    vals = np.zeros(0)
    vecs = np.zeros((0, dim))
    n_mv = 0
    want = k
    for _ in range(max_verify + 1):
        room = dim - vecs.shape[0]
        mm = min(m, room - 1)
        nev = min(want, room)
        if nev <= 0:
            break
        if mm < nev + 1:
            raise NumericsError("Krylov space too small for the requested pairs; use the dense path")
        th, V, _, used = _krylov_schur(matvec, dim, nev, vecs, rng, tol, mm, max_restarts)
        n_mv += used
        if vecs.shape[0] == 0:
            vals, vecs = th, V
            want = k  # verification pass: same window in the deflated space
            continue
        new = th < vals.max() - tol
        if not np.any(new):
            break
        vals = np.concatenate([vals, th[new]])
        vecs = np.vstack([vecs, V[new]])
        order = np.argsort(vals, kind="stable")[:k]
        vals, vecs = vals[order], vecs[order]
    else:
        raise FciConvergenceError("verification passes kept finding lower eigenvalues", np.full(k, np.nan))
    order = np.argsort(vals, kind="stable")
    return vals[order], vecs[order], n_mv


# ---------------------------------------------------------------------------
# Public entry point
# ---------------------------------------------------------------------------


def fci_solve(
    h: ExcitonHamiltonian,
    k: int,
    method: str = "auto",
    dense_threshold: int = DENSE_THRESHOLD,
    tol: float = 1e-10,
    seed: int = 0,
) -> FciResult:
    """Lowest ``k`` eigenpairs of ``h`` in the full configuration space.

    Parameters
    ----------
    method : {"auto", "dense", "lanczos"}
        ``auto`` is dense for ``N <= dense_threshold`` and Lanczos above.
    seed : int
        Seed of the Lanczos start vectors.
    """
    n = h.n_sites
    dim = 1 << n
    if not 1 <= k <= dim:
        raise ModelError(f"k must be in 1..{dim}")
    if method == "auto":
        method = "dense" if n <= dense_threshold else "lanczos"
    op = compile_operator(h)
    if method == "dense":
        if n > DENSE_MAX:
            raise ModelError(f"dense FCI is capped at {DENSE_MAX} sites")
        energies, vectors = eigh(to_dense(h.terms(), n, cap=DENSE_MAX))
        energies = energies[:k]
        vecs = canonicalize_columns(vectors[:, :k]).T.copy()
        n_mv = 0
    elif method == "lanczos":
        if n > ITERATIVE_MAX:
            raise ModelError(f"iterative FCI is capped at {ITERATIVE_MAX} sites")
        energies, vecs, n_mv = lanczos_lowest(op.apply, dim, k, tol=tol, seed=seed)
        vecs = canonicalize_columns(vecs.T).T.copy()
    else:
        raise ValueError(f"unknown FCI method {method!r}")
    residuals = np.array([np.linalg.norm(op.apply(v) - e * v) for e, v in zip(energies, vecs)])
    if np.any(residuals > 1e-9):
        raise FciConvergenceError("FCI residuals above 1e-9", residuals)
    return FciResult(np.asarray(energies), vecs, residuals, method, n_mv)


def cluster_fidelities(
    states: np.ndarray, reference: np.ndarray, energies: np.ndarray, gap: float = 1e-8
) -> np.ndarray:
    """Overlap of each state with the reference eigenspace it belongs to.

    ``states[i]`` is compared with ``reference[i]``; when reference level
    ``i`` has neighbours within ``gap``, the norm of the projection onto the
    whole degenerate cluster is used instead of a single overlap.
    """
    states = np.atleast_2d(states)
    out = np.empty(states.shape[0])
    for i in range(states.shape[0]):
        cluster = np.flatnonzero(np.abs(energies - energies[i]) < gap)
        out[i] = float(np.linalg.norm(reference[cluster] @ states[i]))
    return out
