"""Command-line front end: ``exciton-vqe <command> ...``.

Commands
--------
synth     write a seeded synthetic ring or stack as a system JSON file
build     validate a system file and print a summary of its Hamiltonian
cis       CIS energies and transition properties
mcvqe     optimize the entangler and report MC-VQE energies and properties
fci       exact lowest states (dense or Lanczos)
spectrum  Lorentzian-broadened spectrum CSV from a results file
compare   errors and fidelities of several results files against FCI

Exit codes: 0 success, 2 bad usage, 3 missing input file, 4 malformed input,
5 system too large for the requested method, 6 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from pathlib import Path
from typing import Sequence

import numpy as np

from . import dataio, exact, pipeline, spectrum
from .mcvqe import McVqeConfig, McVqeError, run_mcvqe
from .numerics import NumericsError
from .pauli_model import ModelError, build_dipole_operator, build_hamiltonian
from .reference_states import solve_cis
from .simulator import SimulationError, set_threads
from .synth import SynthError, SynthSpec, generate

log = logging.getLogger("exciton_vqe")

THREADS_ENV = "EXCITON_VQE_THREADS"
MCVQE_MAX_SITES = 20

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_MISSING = 3
EXIT_SCHEMA = 4
EXIT_CAP = 5
EXIT_NUMERICAL = 6


class CliError(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


def _require_file(path: str) -> Path:
    p = Path(path)
    if not p.is_file():
        raise CliError(EXIT_MISSING, f"input file not found: {path}")
    return p


def _load_system(path: str):
    monomers, conn = dataio.load_system(_require_file(path))
    h = build_hamiltonian(monomers, conn)
    return monomers, conn, h, build_dipole_operator(monomers)


def _resolve_states(requested: int | None, n_sites: int) -> int:
    k = n_sites + 1 if requested is None else requested
    if not 1 <= k <= n_sites + 1:
        raise CliError(EXIT_USAGE, f"--states must be in 1..{n_sites + 1}")
    return k


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def cmd_synth(args: argparse.Namespace) -> None:
    spec = SynthSpec(
        kind=args.kind,
        n_sites=args.n,
        seed=args.seed,
        gap=args.gap,
        sigma=args.sigma,
        distance=args.distance,
        transition_dipole=args.transition_dipole,
        difference_dipole=args.difference_dipole,
    )
    monomers, conn = generate(spec)
    dataio.save_system(args.out, monomers, conn, {"synth": spec.resolved().to_dict()})
    log.info("wrote %d-site %s to %s", spec.n_sites, spec.kind, args.out)


def cmd_build(args: argparse.Namespace) -> None:
    _, conn, h, _ = _load_system(args.input)
    summary = h.summary()
    summary["connectivity"] = conn.to_dict()
    print(json.dumps(dataio.to_plain(summary), indent=1))


def cmd_cis(args: argparse.Namespace) -> None:
    _, _, h, dip = _load_system(args.input)
    k = _resolve_states(args.states, h.n_sites)
    t0 = time.perf_counter()
    cis = solve_cis(h)
    rec = pipeline.cis_record(cis, dip, k)
    rec["timings"] = {"total": time.perf_counter() - t0}
    dataio.write_json(args.out, rec)


def cmd_mcvqe(args: argparse.Namespace) -> None:
    _, _, h, dip = _load_system(args.input)
    if h.n_sites > MCVQE_MAX_SITES:
        raise CliError(EXIT_CAP, f"MC-VQE simulation is capped at {MCVQE_MAX_SITES} sites, got {h.n_sites}")
    k = _resolve_states(args.states, h.n_sites)
    config = McVqeConfig(
        n_states=k,
        fd_step=args.fd_step,
        gtol=args.gtol,
        max_iter=args.max_iter,
        optimizer=args.optimizer,
        n_layers=args.layers,
        parametrization=args.parametrization,
        topology=args.topology,
    )
    cis = solve_cis(h)

    def report(entry) -> None:
        log.info("iter %4d  Ebar = %.12f  max|g| = %.3e", entry.iteration, entry.fun, entry.grad_norm)

    run = run_mcvqe(h, cis, dip, config, report)
    rec = pipeline.mcvqe_record(run, cis)
    dataio.write_json(args.out, rec)
    log.info("%s after %d iterations; %d parameters", run.optimize.message, run.optimize.n_iter, run.subspace.params.n_params)


def cmd_fci(args: argparse.Namespace) -> None:
    _, _, h, dip = _load_system(args.input)
    n = h.n_sites
    k = _resolve_states(args.states, n)
    method = args.method
    if method == "auto":
        method = "dense" if n <= args.dense_threshold else "lanczos"
    cap = exact.DENSE_MAX if method == "dense" else exact.ITERATIVE_MAX
    if n > cap:
        raise CliError(EXIT_CAP, f"{method} FCI is capped at {cap} sites, got {n}")
    t0 = time.perf_counter()
    res = exact.fci_solve(h, k, method=method, seed=args.seed)
    elapsed = time.perf_counter() - t0
    vectors_file = None
    if args.vectors:
        np.save(args.vectors, res.vectors)
        out_dir = Path(args.out).resolve().parent
        vectors_file = os.path.relpath(Path(args.vectors).resolve(), out_dir)
    rec = pipeline.fci_record(res, dip, vectors_file)
    rec["timings"] = {"total": elapsed}
    dataio.write_json(args.out, rec)


def cmd_spectrum(args: argparse.Namespace) -> None:
    rec = dataio.load_results(_require_file(args.input))
    if args.delta <= 0:
        raise CliError(EXIT_USAGE, "--delta must be positive")
    try:
        grid = spectrum.energy_grid(args.emin, args.emax, args.points)
    except ValueError as exc:
        raise CliError(EXIT_USAGE, str(exc)) from None
    curve = spectrum.broaden(rec["excitation_energies_ev"], rec["oscillator_strengths"], args.delta, grid)
    dataio.write_spectrum_csv(args.out, grid, curve)


def cmd_compare(args: argparse.Namespace) -> None:
    paths = [_require_file(p) for p in args.input]
    records = [dataio.load_results(p) for p in paths]
    report = pipeline.compare_results(records, [p.resolve().parent for p in paths])
    if args.out:
        dataio.write_json(args.out, report.to_dict())
    print(pipeline.format_report(report))


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def _default_threads() -> int:
    raw = os.environ.get(THREADS_ENV, "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="exciton-vqe", description="MC-VQE for exciton models.")
    parser.add_argument("--threads", type=int, default=_default_threads(),
                        help=f"worker threads for batched kernels (default ${THREADS_ENV} or 1)")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="write a synthetic system")
    p.add_argument("--kind", choices=["ring", "stack"], required=True)
    p.add_argument("--n", type=int, required=True, help="number of monomers")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--gap", type=float, help="mean excitation gap (hartree)")
    p.add_argument("--sigma", type=float, help="gap disorder (hartree)")
    p.add_argument("--distance", type=float, help="ring radius or stacking distance (bohr)")
    p.add_argument("--transition-dipole", type=float, help="transition dipole magnitude (a.u.)")
    p.add_argument("--difference-dipole", type=float, help="excited-minus-ground dipole magnitude (a.u.)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("build", help="validate a system and summarize its Hamiltonian")
    p.add_argument("--in", dest="input", required=True)
    p.set_defaults(func=cmd_build)

    p = sub.add_parser("cis", help="classical CIS")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--states", type=int)
    p.set_defaults(func=cmd_cis)

    p = sub.add_parser("mcvqe", help="multistate contracted VQE")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--states", type=int, help="number of reference states (default N+1)")
    p.add_argument("--layers", type=int, default=1)
    p.add_argument("--fd-step", type=float, default=0.01)
    p.add_argument("--gtol", type=float, default=1e-7)
    p.add_argument("--max-iter", type=int, default=200)
    p.add_argument("--optimizer", choices=["lbfgs", "powell"], default="lbfgs")
    p.add_argument("--parametrization", choices=["pauli", "antisym", "gate_native"], default="pauli")
    p.add_argument("--topology", choices=["linear", "cyclic"], help="entangler layout (default from the couplings)")
    p.set_defaults(func=cmd_mcvqe)

    p = sub.add_parser("fci", help="exact lowest states")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--states", type=int)
    p.add_argument("--method", choices=["auto", "dense", "lanczos"], default="auto")
    p.add_argument("--dense-threshold", type=int, default=exact.DENSE_THRESHOLD)
    p.add_argument("--seed", type=int, default=0, help="Lanczos start-vector seed")
    p.add_argument("--vectors", help="also save eigenvectors to this .npy file")
    p.set_defaults(func=cmd_fci)

    p = sub.add_parser("spectrum", help="broadened spectrum CSV")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--delta", type=float, default=0.05, help="Lorentzian half-width (eV)")
    p.add_argument("--emin", type=float, required=True)
    p.add_argument("--emax", type=float, required=True)
    p.add_argument("--points", type=int, default=2000)
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("compare", help="compare results files")
    p.add_argument("--in", dest="input", nargs="+", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_compare)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s", stream=sys.stderr)
    try:
        set_threads(args.threads)
        args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except FileNotFoundError as exc:
        print(f"error: file not found: {exc.filename}", file=sys.stderr)
        return EXIT_MISSING
    except NumericsError as exc:
        print(f"error: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ModelError, SynthError, McVqeError, SimulationError) as exc:
        print(f"error: invalid input: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
