"""Result records for CIS, MC-VQE and FCI runs and the comparison report.

Every method produces the same JSON-ready record: absolute energies in
hartree (and eV), excitation energies relative to state 0 in eV, ground-to-
excited transition dipoles, oscillator strengths and site populations. Each
record also carries what is needed to rebuild its states (CIS vectors, the
entangler parameters, or a ``.npy`` file of FCI vectors) so that
:func:`compare_results` can report fidelities.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .dataio import REPORT_FORMAT, RESULTS_FORMAT, SchemaError
from .entangler import EntanglerParams
from .exact import FciResult, cluster_fidelities
from .mcvqe import McVqeRun, oscillator_strengths, populations, prepare_eigenstate
from .pauli_model import HARTREE_TO_EV, DipoleOperator
from .reference_states import CisSolution, cis_indices, cis_operator_matrix
from .simulator import compile_operator

DARK_STRENGTH = 1e-12


def _base_record(method: str, n_sites: int, energies: np.ndarray, dipoles: np.ndarray, pops: np.ndarray) -> dict:
    e = np.asarray(energies, dtype=float)
    exc = (e[1:] - e[0]) * HARTREE_TO_EV
    return {
        "format": RESULTS_FORMAT,
        "method": method,
        "n_sites": int(n_sites),
        "n_states": int(e.size),
        "energies_hartree": e.tolist(),
        "energies_ev": (e * HARTREE_TO_EV).tolist(),
        "excitation_energies_ev": exc.tolist(),
        "transition_dipoles": np.asarray(dipoles, dtype=float).reshape(-1, 3).tolist(),
        "oscillator_strengths": oscillator_strengths(e, dipoles).tolist() if e.size > 1 else [],
        "populations": np.asarray(pops, dtype=float).tolist(),
    }


def cis_record(cis: CisSolution, dipole: DipoleOperator, n_states: int | None = None) -> dict:
    k = cis.n_sites + 1 if n_states is None else n_states
    vecs = cis.vectors[:, :k]
    mats = [vecs.T @ cis_operator_matrix(dipole.terms(a), cis.n_sites) @ vecs for a in range(3)]
    dip = np.array([[m[0, t] for m in mats] for t in range(1, k)]).reshape(-1, 3)
    pops = (vecs[1:, :] ** 2).T
    rec = _base_record("cis", cis.n_sites, cis.energies[:k], dip, pops)
    rec["cis_vectors"] = cis.vectors.tolist()
    return rec


def fci_record(fci: FciResult, dipole: DipoleOperator, vectors_file: str | None = None) -> dict:
    n = fci.n_sites
    ops = [compile_operator(dipole.terms(a), n) for a in range(3)]
    v0 = fci.vectors[0]
    dip = np.array([[float(v0 @ op.apply(fci.vectors[t])) for op in ops] for t in range(1, fci.vectors.shape[0])])
    pops = np.array([populations(v) for v in fci.vectors])
    rec = _base_record("fci", n, fci.energies, dip.reshape(-1, 3), pops)
    rec["residuals"] = fci.residuals.tolist()
    rec["solver"] = fci.method
    if vectors_file is not None:
        rec["vectors_file"] = vectors_file
    return rec


def mcvqe_record(run: McVqeRun, cis: CisSolution) -> dict:
    sub, tr = run.subspace, run.transitions
    rec = _base_record("mcvqe", cis.n_sites, tr.energies, tr.dipoles, tr.populations)
    p = sub.params
    rec.update(
        {
            "parameters": {
                "n_qubits": p.n_qubits,
                "sublayers": [[list(pair) for pair in sl] for sl in p.sublayers],
                "n_layers": p.n_layers,
                "parametrization": p.parametrization,
                "n_params": p.n_params,
                "values": p.values.tolist(),
            },
            "subspace_hamiltonian": sub.h_sub.tolist(),
            "subspace_vectors": sub.v.tolist(),
            "cis_vectors": cis.vectors.tolist(),
            "degenerate_pairs": [list(x) for x in tr.degenerate],
            "converged": bool(sub.converged),
            "message": sub.message,
            "trace": [asdict(t) for t in sub.trace],
            "timings": dict(run.timings),
        }
    )
    return rec


# ---------------------------------------------------------------------------
# State reconstruction
# ---------------------------------------------------------------------------


def record_states(rec: dict, base_dir: str | Path = ".") -> np.ndarray | None:
    """Statevectors ``(k, 2**N)`` described by a record, if recoverable."""
    n = rec["n_sites"]
    k = rec["n_states"]
    method = rec["method"]
    if method == "cis" and "cis_vectors" in rec:
        vecs = np.asarray(rec["cis_vectors"], dtype=float)[:, :k]
        out = np.zeros((k, 1 << n))
        out[:, cis_indices(n)] = vecs.T
        return out
    if method == "mcvqe" and "parameters" in rec:
        p = rec["parameters"]
        params = EntanglerParams(
            p["n_qubits"], [[tuple(pair) for pair in sl] for sl in p["sublayers"]],
            p["n_layers"], p["parametrization"], np.asarray(p["values"], dtype=float),
        )
        vecs = np.asarray(rec["cis_vectors"], dtype=float)
        cis = CisSolution(n, np.zeros(n + 1), vecs)
        v = np.asarray(rec["subspace_vectors"], dtype=float)
        return np.array([prepare_eigenstate(t, params, cis, v).amplitudes for t in range(k)])
    if method == "fci" and "vectors_file" in rec:
        path = Path(base_dir) / rec["vectors_file"]
        if not path.exists():
            return None
        arr = np.load(path)
        if arr.shape != (k, 1 << n):
            raise SchemaError(f"{path}: expected shape {(k, 1 << n)}, got {arr.shape}")
        return arr
    return None


# ---------------------------------------------------------------------------
# Comparison
# ---------------------------------------------------------------------------


def relative_errors(values: np.ndarray, reference: np.ndarray, dark: float = DARK_STRENGTH) -> list[float | None]:
    """``|value - ref| / ref``; ``None`` where the reference line is dark."""
    out: list[float | None] = []
    for v, r in zip(values, reference):
        out.append(None if abs(r) < dark else abs(v - r) / abs(r))
    return out


@dataclass
class RunReport:
    """Per-method results and their deviations from a reference method."""

    methods: dict[str, dict]
    reference: str | None
    errors: dict[str, dict] = field(default_factory=dict)
    fidelities: dict[str, list[float]] = field(default_factory=dict)
    traces: dict[str, list[dict]] = field(default_factory=dict)
    timings: dict[str, dict] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"format": REPORT_FORMAT, **asdict(self)}


def _pair_errors(rec: dict, ref: dict) -> dict:
    k = min(len(rec["excitation_energies_ev"]), len(ref["excitation_energies_ev"]))
    e = np.asarray(rec["excitation_energies_ev"][:k])
    e_ref = np.asarray(ref["excitation_energies_ev"][:k])
    o = np.asarray(rec["oscillator_strengths"][:k])
    o_ref = np.asarray(ref["oscillator_strengths"][:k])
    de = np.abs(e - e_ref)
    do = np.abs(o - o_ref)
    rel = relative_errors(o, o_ref)
    rel_known = [r for r in rel if r is not None]
    return {
        "excitation_energy_ev": de.tolist(),
        "oscillator_strength_abs": do.tolist(),
        "oscillator_strength_rel": rel,
        "max_excitation_energy_ev": float(de.max()) if k else 0.0,
        "max_oscillator_strength_abs": float(do.max()) if k else 0.0,
        "max_oscillator_strength_rel": float(max(rel_known)) if rel_known else None,
    }


def compare_results(records: Sequence[dict], base_dirs: Sequence[str | Path] | None = None) -> RunReport:
    """Errors of every record against the FCI one (or the first record)."""
    if len(records) < 2:
        raise SchemaError("compare needs at least two result files")
    base_dirs = list(base_dirs) if base_dirs is not None else ["."] * len(records)
    names: dict[str, dict] = {}
    dirs: dict[str, str | Path] = {}
    for rec, d in zip(records, base_dirs):
        name = rec["method"]
        i = 2
        while name in names:
            name = f"{rec['method']}_{i}"
            i += 1
        names[name] = rec
        dirs[name] = d
    ns = {rec["n_sites"] for rec in records}
    if len(ns) != 1:
        raise SchemaError("result files describe systems of different size")
    ref_name = next((n for n, r in names.items() if r["method"] == "fci"), next(iter(names)))
    ref = names[ref_name]
    report = RunReport(
        methods={
            n: {
                "energies_hartree": r["energies_hartree"],
                "excitation_energies_ev": r["excitation_energies_ev"],
                "oscillator_strengths": r["oscillator_strengths"],
            }
            for n, r in names.items()
        },
        reference=ref_name,
    )
    ref_states = record_states(ref, dirs[ref_name])
    for n, r in names.items():
        if "trace" in r:
            report.traces[n] = r["trace"]
        if "timings" in r:
            report.timings[n] = r["timings"]
        if n == ref_name:
            continue
        report.errors[n] = _pair_errors(r, ref)
        if ref_states is not None:
            states = record_states(r, dirs[n])
            if states is not None:
                k = min(states.shape[0], ref_states.shape[0])
                fids = cluster_fidelities(states[:k], ref_states, np.asarray(ref["energies_hartree"]))
                report.fidelities[n] = [float(min(1.0, f)) for f in fids]
    return report


def format_report(report: RunReport) -> str:
    lines = [f"reference: {report.reference}"]
    for name, err in report.errors.items():
        rel = err["max_oscillator_strength_rel"]
        rel_txt = "n/a" if rel is None else f"{rel:.3e}"
        lines.append(
            f"{name:>8}: max |dE| = {err['max_excitation_energy_ev']:.3e} eV, "
            f"max |dO| = {err['max_oscillator_strength_abs']:.3e}, max rel dO = {rel_txt}"
        )
        if name in report.fidelities:
            lines.append(f"{'':>8}  min fidelity = {min(report.fidelities[name]):.6f}")
    return "\n".join(lines)
