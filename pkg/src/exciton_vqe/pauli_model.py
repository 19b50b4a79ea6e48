"""Pauli-operator form of the two-state ab initio exciton model.

Conventions used everywhere in the package:

* ``|0_A>`` is the ground state of monomer ``A`` and ``|1_A>`` its excited
  state, so ``Z_A`` is ``+1`` on the ground state.
* Site 0 is the most significant bit of a configuration index: for ``N``
  sites, site ``A`` lives in bit ``N - 1 - A``.
* Energies are hartree, distances bohr, dipoles atomic units.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

HARTREE_TO_EV = 27.211386245988
DENSE_CAP = 12


class ModelError(ValueError):
    """Invalid monomer data, connectivity or operator input."""


class DegenerateGeometryError(ModelError):
    """Two monomers share a center of mass."""


# ---------------------------------------------------------------------------
# Data types
# ---------------------------------------------------------------------------


def _vec3(value, name: str) -> np.ndarray:
    arr = np.asarray(value, dtype=float)
    if arr.shape != (3,):
        raise ModelError(f"{name} must be a 3-vector, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ModelError(f"{name} has non-finite entries")
    return arr


@dataclass(frozen=True)
class MonomerData:
    """Electronic-structure data for one two-level chromophore."""

    index: int
    e_s0: float
    e_s1: float
    com: np.ndarray
    mu_00: np.ndarray
    mu_11: np.ndarray
    mu_01: np.ndarray
    x_intra: float = 0.0

    def __post_init__(self) -> None:
        for name in ("com", "mu_00", "mu_11", "mu_01"):
            object.__setattr__(self, name, _vec3(getattr(self, name), name))
        for name in ("e_s0", "e_s1", "x_intra"):
            val = float(getattr(self, name))
            if not math.isfinite(val):
                raise ModelError(f"monomer {self.index}: {name} is not finite")
            object.__setattr__(self, name, val)
        if self.e_s1 < self.e_s0:
            raise ModelError(f"monomer {self.index}: e_s1 < e_s0")

    @classmethod
    def from_dict(cls, d: dict) -> "MonomerData":
        try:
            return cls(
                index=int(d["index"]),
                e_s0=d["e_s0"],
                e_s1=d["e_s1"],
                com=d["com"],
                mu_00=d["mu_00"],
                mu_11=d["mu_11"],
                mu_01=d["mu_01"],
                x_intra=d.get("x_intra", 0.0),
            )
        except KeyError as exc:
            raise ModelError(f"monomer record missing key {exc}") from None

    def to_dict(self) -> dict:
        return {
            "index": self.index,
            "e_s0": self.e_s0,
            "e_s1": self.e_s1,
            "com": self.com.tolist(),
            "mu_00": self.mu_00.tolist(),
            "mu_11": self.mu_11.tolist(),
            "mu_01": self.mu_01.tolist(),
            "x_intra": self.x_intra,
        }


@dataclass(frozen=True)
class Connectivity:
    """Which monomer pairs carry two-body terms.

    ``topology`` is ``"linear"``, ``"cyclic"`` or ``"pairs"``. For the first
    two, pairs up to ``neighbor_order`` apart along the chain/ring are kept;
    ``cutoff`` (bohr) optionally drops pairs whose centers are farther apart,
    which requires monomer positions at :meth:`resolve` time.
    """

    n_sites: int
    topology: str = "cyclic"
    neighbor_order: int = 1
    pairs: tuple[tuple[int, int], ...] = ()
    cutoff: float | None = None

    def __post_init__(self) -> None:
        if self.n_sites < 1:
            raise ModelError("connectivity needs at least one site")
        if self.topology not in ("linear", "cyclic", "pairs"):
            raise ModelError(f"unknown topology {self.topology!r}")
        if self.neighbor_order < 0:
            raise ModelError("neighbor_order must be non-negative")
        norm = []
        for p in self.pairs:
            a, b = int(p[0]), int(p[1])
            a, b = max(a, b), min(a, b)
            if a == b or b < 0 or a >= self.n_sites:
                raise ModelError(f"invalid pair {tuple(p)} for {self.n_sites} sites")
            norm.append((a, b))
        if len(set(norm)) != len(norm):
            raise ModelError("duplicate pairs in connectivity")
        object.__setattr__(self, "pairs", tuple(norm))

    def resolve(self, coms: Sequence[np.ndarray] | None = None) -> list[tuple[int, int]]:
        """Retained pairs ``(A, B)`` with ``A > B``, sorted."""
        n = self.n_sites
        if self.topology == "pairs":
            pairs = set(self.pairs)
        else:
            pairs = set()
            for b in range(n):
                for k in range(1, self.neighbor_order + 1):
                    a = b + k
                    if a < n:
                        pairs.add((a, b))
                    elif self.topology == "cyclic":
                        a %= n
                        if a != b:
                            pairs.add((max(a, b), min(a, b)))
        if self.cutoff is not None:
            if coms is None:
                raise ModelError("distance cutoff needs monomer positions")
            pairs = {p for p in pairs if np.linalg.norm(coms[p[0]] - coms[p[1]]) <= self.cutoff}
        return sorted(pairs)

    @classmethod
    def from_dict(cls, d: dict, n_sites: int) -> "Connectivity":
        topo = d.get("topology", "cyclic")
        return cls(
            n_sites=n_sites,
            topology=topo,
            neighbor_order=int(d.get("neighbor_order", 1)),
            pairs=tuple(tuple(p) for p in d.get("pairs", [])),
            cutoff=d.get("cutoff"),
        )

    def to_dict(self) -> dict:
        out = {"topology": self.topology, "neighbor_order": self.neighbor_order}
        if self.topology == "pairs":
            out["pairs"] = [list(p) for p in self.pairs]
        if self.cutoff is not None:
            out["cutoff"] = self.cutoff
        return out


@dataclass(frozen=True)
class PauliTerm:
    """``coefficient * prod(sigma_axis(site))`` with strictly increasing sites."""

    coefficient: float
    factors: tuple[tuple[int, str], ...] = ()

    def __post_init__(self) -> None:
        facs = tuple((int(s), str(a).upper()) for s, a in self.factors)
        sites = [s for s, _ in facs]
        if any(b <= a for a, b in zip(sites, sites[1:])):
            raise ModelError(f"term sites must be strictly increasing: {sites}")
        if any(s < 0 for s in sites):
            raise ModelError("negative site index")
        if any(a not in ("X", "Y", "Z") for _, a in facs):
            raise ModelError(f"unknown Pauli axis in {facs}")
        object.__setattr__(self, "factors", facs)
        object.__setattr__(self, "coefficient", float(self.coefficient))

    @property
    def max_site(self) -> int:
        return max((s for s, _ in self.factors), default=-1)

    def __str__(self) -> str:
        body = " ".join(f"{a}{s}" for s, a in self.factors) or "I"
        return f"{self.coefficient:+.6e} {body}"


def term(coefficient: float, *factors: tuple[int, str]) -> PauliTerm:
    """Build a term from unordered ``(site, axis)`` pairs."""
    return PauliTerm(coefficient, tuple(sorted(factors)))


@dataclass(frozen=True)
class ExcitonHamiltonian:
    """Coefficients of the Pauli-form exciton Hamiltonian.

    ``H = e_scalar + sum_A z[A] Z_A + x[A] X_A
    + sum_(A>B) xx X_A X_B + xz X_A Z_B + zx Z_A X_B + zz Z_A Z_B``
    with the pair arrays aligned to ``pairs``.
    """

    n_sites: int
    e_scalar: float
    z: np.ndarray
    x: np.ndarray
    pairs: tuple[tuple[int, int], ...] = ()
    xx: np.ndarray = field(default_factory=lambda: np.zeros(0))
    xz: np.ndarray = field(default_factory=lambda: np.zeros(0))
    zx: np.ndarray = field(default_factory=lambda: np.zeros(0))
    zz: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __post_init__(self) -> None:
        n = self.n_sites
        for name in ("z", "x"):
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.shape != (n,):
                raise ModelError(f"{name} must have length {n}")
            object.__setattr__(self, name, arr)
        pairs = tuple((int(a), int(b)) for a, b in self.pairs)
        for a, b in pairs:
            if not (0 <= b < a < n):
                raise ModelError(f"pair ({a}, {b}) must satisfy 0 <= B < A < {n}")
        if len(set(pairs)) != len(pairs):
            raise ModelError("duplicate pair keys")
        object.__setattr__(self, "pairs", pairs)
        for name in ("xx", "xz", "zx", "zz"):
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.size == 0 and not pairs:
                arr = np.zeros(0)
            if arr.shape != (len(pairs),):
                raise ModelError(f"{name} must align with {len(pairs)} pairs")
            object.__setattr__(self, name, arr)
        coeffs = np.concatenate([[self.e_scalar], self.z, self.x, self.xx, self.xz, self.zx, self.zz])
        if not np.all(np.isfinite(coeffs)):
            raise ModelError("non-finite Hamiltonian coefficient")
        object.__setattr__(self, "e_scalar", float(self.e_scalar))

    def terms(self, drop_zeros: bool = False) -> list[PauliTerm]:
        out = [PauliTerm(self.e_scalar)]
        for a in range(self.n_sites):
            out.append(PauliTerm(self.z[a], ((a, "Z"),)))
            out.append(PauliTerm(self.x[a], ((a, "X"),)))
        for k, (a, b) in enumerate(self.pairs):
            # A > B, so B is the lower site index and comes first
            out.append(PauliTerm(self.xx[k], ((b, "X"), (a, "X"))))
            out.append(PauliTerm(self.xz[k], ((b, "Z"), (a, "X"))))
            out.append(PauliTerm(self.zx[k], ((b, "X"), (a, "Z"))))
            out.append(PauliTerm(self.zz[k], ((b, "Z"), (a, "Z"))))
        if drop_zeros:
            out = [t for t in out if t.coefficient != 0.0]
        return out

    def shifted(self, constant: float) -> "ExcitonHamiltonian":
        """Same operator plus ``constant`` times the identity."""
        return ExcitonHamiltonian(
            self.n_sites, self.e_scalar + constant, self.z, self.x, self.pairs,
            self.xx, self.xz, self.zx, self.zz,
        )

    def summary(self) -> dict:
        groups = {"z": self.z, "x": self.x, "xx": self.xx, "xz": self.xz, "zx": self.zx, "zz": self.zz}
        ranges = {}
        for k, v in groups.items():
            ranges[k] = [float(v.min()), float(v.max())] if v.size else None
        return {
            "n_sites": self.n_sites,
            "n_pairs": len(self.pairs),
            "n_terms": len(self.terms(drop_zeros=True)),
            "e_scalar": self.e_scalar,
            "ranges": ranges,
        }


@dataclass(frozen=True)
class DipoleOperator:
    """Per-site pieces of the dipole operator, shape ``(N, 3)`` each.

    ``mu_i = (mu_11 + mu_00) / 2`` multiplies the identity and
    ``mu_x = mu_01`` multiplies ``X``. ``mu_z = (mu_11 - mu_00) / 2`` is the
    excited-minus-ground half difference; because ``Z`` is ``+1`` on the
    ground state, its Pauli coefficient is ``-mu_z`` (see :meth:`terms`).
    """

    mu_i: np.ndarray
    mu_z: np.ndarray
    mu_x: np.ndarray

    @property
    def n_sites(self) -> int:
        return self.mu_i.shape[0]

    def terms(self, axis: int) -> list[PauliTerm]:
        """Pauli terms of the Cartesian component ``axis`` (0, 1, 2)."""
        out = [PauliTerm(float(np.sum(self.mu_i[:, axis])))]
        for a in range(self.n_sites):
            out.append(PauliTerm(-self.mu_z[a, axis], ((a, "Z"),)))
            out.append(PauliTerm(self.mu_x[a, axis], ((a, "X"),)))
        return out

    def site_matrix(self, site: int, axis: int) -> np.ndarray:
        """2x2 one-site matrix ``[[mu_00, mu_01], [mu_01, mu_11]]`` for a component."""
        i, z, x = self.mu_i[site, axis], self.mu_z[site, axis], self.mu_x[site, axis]
        return np.array([[i - z, x], [x, i + z]])


# ---------------------------------------------------------------------------
# Builders
# ---------------------------------------------------------------------------


def dipole_coupling(mu_a, mu_b, com_a, com_b) -> float:
    """Point dipole-dipole interaction energy in hartree (atomic units)."""
    mu_a = np.asarray(mu_a, dtype=float)
    mu_b = np.asarray(mu_b, dtype=float)
    disp = np.asarray(com_a, dtype=float) - np.asarray(com_b, dtype=float)
    r = float(np.linalg.norm(disp))
    if r == 0.0:
        raise DegenerateGeometryError("monomer centers coincide")
    n = disp / r
    return float((mu_a @ mu_b - 3.0 * (mu_a @ n) * (mu_b @ n)) / r**3)


def _check_monomers(monomers: Sequence[MonomerData]) -> None:
    if not monomers:
        raise ModelError("at least one monomer is required")
    idx = [m.index for m in monomers]
    if idx != list(range(len(monomers))):
        raise ModelError(f"monomer indices must be 0..N-1 in order, got {idx}")


def build_hamiltonian(monomers: Sequence[MonomerData], conn: Connectivity) -> ExcitonHamiltonian:
    """Exciton Hamiltonian from monomer energies and dipoles.

    Two-body matrix elements use the dipole approximation. With
    ``s = (mu_00 + mu_11)/2``, ``d = (mu_00 - mu_11)/2`` and ``t = mu_01``
    per monomer, the pair primitives are ``(T|T) = V(t_A, t_B)``,
    ``(T|S) = V(t_A, s_B)``, ``(T|D) = V(t_A, d_B)``, ``(D|S) = V(d_A, s_B)``,
    ``(S|S) = V(s_A, s_B)`` and ``(D|D) = V(d_A, d_B)``. Environment
    dressings of the one-body terms run over retained pairs only.
    """
    _check_monomers(monomers)
    n = len(monomers)
    if conn.n_sites != n:
        raise ModelError(f"connectivity has {conn.n_sites} sites but {n} monomers were given")
    coms = [m.com for m in monomers]
    pairs = conn.resolve(coms)

    s_vec = [(m.mu_00 + m.mu_11) / 2 for m in monomers]
    d_vec = [(m.mu_00 - m.mu_11) / 2 for m in monomers]
    t_vec = [m.mu_01 for m in monomers]

    S = np.array([(m.e_s0 + m.e_s1) / 2 for m in monomers])
    D = np.array([(m.e_s0 - m.e_s1) / 2 for m in monomers])
    X = np.array([m.x_intra for m in monomers])

    e_scalar = float(np.sum(S))
    z = D.copy()
    x = X.copy()
    xx, xz, zx, zz = [], [], [], []
    for a, b in pairs:
        ca, cb = coms[a], coms[b]

        def v(u, w):
            return dipole_coupling(u, w, ca, cb)

        e_scalar += v(s_vec[a], s_vec[b])
        z[a] += v(d_vec[a], s_vec[b])
        z[b] += v(s_vec[a], d_vec[b])
        x[a] += v(t_vec[a], s_vec[b])
        x[b] += v(s_vec[a], t_vec[b])
        xx.append(v(t_vec[a], t_vec[b]))
        xz.append(v(t_vec[a], d_vec[b]))
        zx.append(v(d_vec[a], t_vec[b]))
        zz.append(v(d_vec[a], d_vec[b]))
    return ExcitonHamiltonian(n, e_scalar, z, x, tuple(pairs), np.array(xx), np.array(xz), np.array(zx), np.array(zz))


def build_dipole_operator(monomers: Sequence[MonomerData]) -> DipoleOperator:
    _check_monomers(monomers)
    mu00 = np.array([m.mu_00 for m in monomers])
    mu11 = np.array([m.mu_11 for m in monomers])
    mu01 = np.array([m.mu_01 for m in monomers])
    return DipoleOperator(mu_i=(mu11 + mu00) / 2, mu_z=(mu11 - mu00) / 2, mu_x=mu01.copy())


# ---------------------------------------------------------------------------
# Matrix elements and dense oracle
# ---------------------------------------------------------------------------


def _bits(config, n_sites: int | None = None) -> tuple[int, ...]:
    if isinstance(config, str):
        bits = tuple(int(c) for c in config)
    else:
        bits = tuple(int(c) for c in config)
    if any(b not in (0, 1) for b in bits):
        raise ModelError(f"configuration must be bits, got {config!r}")
    if n_sites is not None and len(bits) != n_sites:
        raise ModelError(f"configuration has {len(bits)} bits, expected {n_sites}")
    return bits


def pauli_matrix_element(bra, ket, terms: Iterable[PauliTerm]) -> float:
    """``<bra| sum(terms) |ket>`` for bit-string configurations (site 0 first)."""
    b = _bits(bra)
    k = _bits(ket)
    if len(b) != len(k):
        raise ModelError("bra and ket have different lengths")
    flips = {i for i in range(len(b)) if b[i] != k[i]}
    total = 0.0
    for t in terms:
        if t.max_site >= len(b):
            raise ModelError(f"term {t} acts beyond {len(b)} sites")
        xsup = {s for s, a in t.factors if a in ("X", "Y")}
        if xsup != flips:
            continue
        phase = 1.0 + 0.0j
        for s, a in t.factors:
            if a == "Z":
                phase *= -1.0 if k[s] else 1.0
            elif a == "Y":
                # Y|0> = i|1>, Y|1> = -i|0>
                phase *= -1j if k[s] else 1j
        if abs(phase.imag) > 0:
            raise ModelError(f"term {t} has imaginary matrix elements")
        total += t.coefficient * phase.real
    return total


def _index_to_bits(index: int, n: int) -> tuple[int, ...]:
    return tuple((index >> (n - 1 - s)) & 1 for s in range(n))


def to_dense(terms: Sequence[PauliTerm], n_sites: int, cap: int = DENSE_CAP) -> np.ndarray:
    """Dense ``2^N x 2^N`` matrix of a real Pauli-term sum.

    Built column-by-column from the computational-basis action of each term;
    entry ``(i, j)`` equals :func:`pauli_matrix_element` of the corresponding
    configurations.
    """
    if n_sites > cap:
        raise ModelError(f"{n_sites} sites exceeds the dense cap of {cap}")
    dim = 1 << n_sites
    idx = np.arange(dim)
    out = np.zeros((dim, dim))
    for t in terms:
        if t.max_site >= n_sites:
            raise ModelError(f"term {t} acts beyond {n_sites} sites")
        flip = 0
        sign = np.ones(dim)
        ny = 0
        for s, a in t.factors:
            bit = 1 << (n_sites - 1 - s)
            occupied = (idx & bit) != 0
            if a in ("X", "Y"):
                flip |= bit
            if a == "Z":
                sign = np.where(occupied, -sign, sign)
            if a == "Y":
                ny += 1
                # Y = i X Z acting on the ket bit: i * (+1 for 0, -1 for 1)
                sign = np.where(occupied, -sign, sign)
        if ny % 2:
            raise ModelError(f"term {t} has imaginary matrix elements")
        phase = (-1.0) ** (ny // 2)
        out[idx ^ flip, idx] += t.coefficient * phase * sign
    return out
