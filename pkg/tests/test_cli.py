import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from exciton_vqe import cli, dataio, pipeline
from exciton_vqe.exact import FciConvergenceError
from exciton_vqe.pauli_model import Connectivity


@pytest.fixture
def ring4(tmp_path):
    path = tmp_path / "ring4.json"
    assert cli.main(["synth", "--kind", "ring", "--n", "4", "--seed", "1", "--out", str(path)]) == 0
    return path


@pytest.fixture
def results(tmp_path, ring4):
    out = {}
    for name, extra in [("cis", []), ("mcvqe", ["--max-iter", "50"]), ("fci", ["--vectors", str(tmp_path / "fci_vecs.npy")])]:
        path = tmp_path / f"{name}.json"
        assert cli.main([name, "--in", str(ring4), "--out", str(path), *extra]) == 0
        out[name] = path
    return out


# -- synth / build ----------------------------------------------------------------


def test_synth_writes_system_with_metadata(ring4):
    data = json.loads(ring4.read_text())
    assert len(data["monomers"]) == 4
    assert data["connectivity"]["topology"] == "cyclic"
    assert data["meta"]["synth"]["kind"] == "ring"
    assert data["meta"]["synth"]["gap"] is not None


def test_synth_overrides(tmp_path):
    path = tmp_path / "s.json"
    assert cli.main(["synth", "--kind", "stack", "--n", "3", "--distance", "9.5", "--sigma", "0", "--out", str(path)]) == 0
    ms, conn = dataio.load_system(path)
    assert ms[2].com[2] == pytest.approx(19.0)
    assert conn.topology == "linear"


def test_build_prints_summary(ring4, capsys):
    assert cli.main(["build", "--in", str(ring4)]) == 0
    summary = json.loads(capsys.readouterr().out)
    assert summary["n_sites"] == 4 and summary["n_pairs"] == 4
    assert summary["connectivity"]["topology"] == "cyclic"
    assert set(summary["ranges"]) == {"z", "x", "xx", "xz", "zx", "zz"}


def test_bare_monomer_array_defaults_to_cyclic(tmp_path, ring4, capsys):
    data = json.loads(ring4.read_text())
    bare = tmp_path / "bare.json"
    bare.write_text(json.dumps(data["monomers"]))
    ms, conn = dataio.load_system(bare)
    assert conn == Connectivity(4, "cyclic", 1)
    assert cli.main(["build", "--in", str(bare)]) == 0


# -- method runs --------------------------------------------------------------------


def test_results_files_share_a_schema(results):
    for name, path in results.items():
        rec = dataio.load_results(path)
        assert rec["method"] == name
        assert rec["n_states"] == 5
        assert len(rec["excitation_energies_ev"]) == 4
        assert len(rec["oscillator_strengths"]) == 4
        assert np.asarray(rec["transition_dipoles"]).shape == (4, 3)
        assert np.asarray(rec["populations"]).shape == (5, 4)
        e = np.asarray(rec["energies_hartree"])
        assert np.allclose(rec["energies_ev"], e * 27.211386245988)
        assert np.all(np.asarray(rec["oscillator_strengths"]) >= 0)


def test_mcvqe_record_contents(results):
    rec = dataio.load_results(results["mcvqe"])
    p = rec["parameters"]
    assert p["n_params"] == 24 == len(p["values"])
    assert p["parametrization"] == "pauli"
    f = [t["fun"] for t in rec["trace"]]
    assert all(b <= a for a, b in zip(f, f[1:]))
    assert set(rec["timings"]) == {"optimize", "subspace", "properties"}


def test_mcvqe_flags(tmp_path, ring4):
    out = tmp_path / "m.json"
    argv = ["mcvqe", "--in", str(ring4), "--out", str(out), "--states", "3", "--layers", "2",
            "--fd-step", "0.005", "--gtol", "1e-6", "--topology", "linear", "--parametrization", "antisym"]
    assert cli.main(argv) == 0
    rec = dataio.load_results(out)
    assert rec["n_states"] == 3
    assert rec["parameters"]["n_params"] == 6 * 3 * 2
    assert rec["parameters"]["parametrization"] == "antisym"


def test_fci_lanczos_flag_agrees_with_dense(tmp_path, ring4, results):
    out = tmp_path / "lan.json"
    assert cli.main(["fci", "--in", str(ring4), "--out", str(out), "--method", "lanczos", "--states", "5"]) == 0
    lan = dataio.load_results(out)
    dense = dataio.load_results(results["fci"])
    assert lan["solver"] == "lanczos"
    assert np.allclose(lan["energies_hartree"], dense["energies_hartree"], atol=1e-10)


def test_results_round_trip_bit_exact(results, tmp_path):
    rec = dataio.load_results(results["mcvqe"])
    again = tmp_path / "again.json"
    dataio.write_json(again, rec)
    assert dataio.load_results(again) == rec
    assert again.read_text() == results["mcvqe"].read_text()


def test_nan_is_written_as_null(tmp_path):
    path = tmp_path / "x.json"
    dataio.write_json(path, {"a": float("nan"), "b": np.float64(1.5), "c": np.arange(2)})
    assert json.loads(path.read_text()) == {"a": None, "b": 1.5, "c": [0, 1]}


# -- spectrum -------------------------------------------------------------------------


def test_spectrum_csv(results, tmp_path):
    out = tmp_path / "spec.csv"
    argv = ["spectrum", "--in", str(results["fci"]), "--delta", "0.05", "--emin", "1.0", "--emax", "3.0",
            "--points", "2000", "--out", str(out)]
    assert cli.main(argv) == 0
    with open(out, newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["energy_ev", "intensity"]
    assert len(rows) == 2001
    grid, inten = dataio.read_spectrum_csv(out)
    # full precision: the written grid is exactly the linspace grid
    assert np.array_equal(grid, np.linspace(1.0, 3.0, 2000))
    assert np.all(inten >= 0)


@pytest.mark.parametrize("extra", [["--delta", "0"], ["--emin", "3", "--emax", "1"], ["--points", "1"]])
def test_spectrum_bad_flags(results, tmp_path, extra):
    base = {"--delta": "0.05", "--emin": "1.0", "--emax": "3.0", "--points": "50"}
    for k, v in zip(extra[::2], extra[1::2]):
        base[k] = v
    argv = ["spectrum", "--in", str(results["cis"]), "--out", str(tmp_path / "s.csv")]
    for k, v in base.items():
        argv += [k, v]
    assert cli.main(argv) == cli.EXIT_USAGE


# -- compare --------------------------------------------------------------------------


def test_compare_against_fci(results, tmp_path, capsys):
    out = tmp_path / "report.json"
    assert cli.main(["compare", "--in", str(results["cis"]), str(results["mcvqe"]), str(results["fci"]), "--out", str(out)]) == 0
    text = capsys.readouterr().out
    assert "reference: fci" in text and "min fidelity" in text
    rep = json.loads(out.read_text())
    assert rep["format"] == dataio.REPORT_FORMAT
    assert rep["reference"] == "fci"
    assert set(rep["errors"]) == {"cis", "mcvqe"}
    assert rep["errors"]["mcvqe"]["max_excitation_energy_ev"] < rep["errors"]["cis"]["max_excitation_energy_ev"]
    for name in ("cis", "mcvqe"):
        assert len(rep["fidelities"][name]) == 5
        assert all(0 <= f <= 1 for f in rep["fidelities"][name])
    assert "mcvqe" in rep["traces"]
    # arithmetic check of the reported errors
    fci = dataio.load_results(results["fci"])
    cis = dataio.load_results(results["cis"])
    de = np.abs(np.subtract(cis["excitation_energies_ev"], fci["excitation_energies_ev"]))
    assert rep["errors"]["cis"]["excitation_energy_ev"] == de.tolist()


def test_compare_abs_errors_are_symmetric(results):
    a = dataio.load_results(results["cis"])
    b = dataio.load_results(results["mcvqe"])
    ab = pipeline.compare_results([a, b]).errors["mcvqe"]
    ba = pipeline.compare_results([b, a]).errors["cis"]
    assert ab["excitation_energy_ev"] == ba["excitation_energy_ev"]
    assert ab["oscillator_strength_abs"] == ba["oscillator_strength_abs"]


def test_compare_fidelities_without_fci_vectors(results):
    fci = dataio.load_results(results["fci"])
    fci.pop("vectors_file")
    rep = pipeline.compare_results([dataio.load_results(results["mcvqe"]), fci])
    assert rep.fidelities == {}
    assert "mcvqe" in rep.errors


def test_compare_rejects_mismatched_systems(results, tmp_path):
    rec = dataio.load_results(results["cis"])
    other = dict(rec, n_sites=5)
    with pytest.raises(dataio.SchemaError):
        pipeline.compare_results([rec, other])
    with pytest.raises(dataio.SchemaError):
        pipeline.compare_results([rec])


def test_relative_errors_skip_dark_lines():
    assert pipeline.relative_errors([0.1, 0.2], [0.0, 0.1]) == [None, pytest.approx(1.0)]


def test_record_states_rebuild_eigenstates(results, tmp_path):
    fci = dataio.load_results(results["fci"])
    mc = dataio.load_results(results["mcvqe"])
    ref = pipeline.record_states(fci, tmp_path)
    states = pipeline.record_states(mc, tmp_path)
    assert ref.shape == states.shape == (5, 16)
    assert np.abs(states @ states.T - np.eye(5)).max() < 1e-10


# -- error handling --------------------------------------------------------------------


def test_missing_input_file(tmp_path, capsys):
    assert cli.main(["cis", "--in", str(tmp_path / "nope.json"), "--out", str(tmp_path / "o.json")]) == cli.EXIT_MISSING
    err = capsys.readouterr().err.strip()
    assert err.startswith("error:") and "\n" not in err


@pytest.mark.parametrize(
    "content",
    ["{not json", '{"monomers": []}', '[{"index": 0}]', '{"foo": 1}', '[1, 2]',
     '{"monomers": [{"index": 0, "e_s0": 0, "e_s1": 1, "com": [0,0,0], "mu_00": [0,0,0], "mu_11": [0,0,0], "mu_01": [0,0]}]}',
     '{"monomers": [{"index": 0, "e_s0": 0, "e_s1": 1, "com": [0,0,0], "mu_00": [0,0,0], "mu_11": [0,0,0], "mu_01": [0,0,0]}], "connectivity": {"topology": "mesh"}}'],
)
def test_malformed_system_files(tmp_path, content):
    path = tmp_path / "bad.json"
    path.write_text(content)
    assert cli.main(["build", "--in", str(path)]) == cli.EXIT_SCHEMA


def test_results_schema_is_checked(tmp_path, ring4):
    argv = ["spectrum", "--in", str(ring4), "--out", str(tmp_path / "s.csv"), "--emin", "1", "--emax", "2"]
    assert cli.main(argv) == cli.EXIT_SCHEMA


def test_size_caps(tmp_path):
    big = tmp_path / "big.json"
    assert cli.main(["synth", "--kind", "stack", "--n", "13", "--out", str(big)]) == 0
    assert cli.main(["fci", "--in", str(big), "--out", str(tmp_path / "f.json"), "--method", "dense"]) == cli.EXIT_CAP
    huge = tmp_path / "huge.json"
    assert cli.main(["synth", "--kind", "ring", "--n", "21", "--out", str(huge)]) == 0
    assert cli.main(["mcvqe", "--in", str(huge), "--out", str(tmp_path / "m.json")]) == cli.EXIT_CAP
    assert cli.main(["fci", "--in", str(huge), "--out", str(tmp_path / "f.json")]) == cli.EXIT_CAP


def test_usage_errors(tmp_path, ring4):
    assert cli.main(["cis", "--in", str(ring4), "--out", str(tmp_path / "c.json"), "--states", "0"]) == cli.EXIT_USAGE
    with pytest.raises(SystemExit) as info:
        cli.main(["mcvqe", "--optimizer", "adam"])
    assert info.value.code == cli.EXIT_USAGE
    with pytest.raises(SystemExit) as info:
        cli.main([])
    assert info.value.code == cli.EXIT_USAGE


def test_numerical_failure_exit_code(tmp_path, ring4, monkeypatch):
    def boom(*args, **kwargs):
        raise FciConvergenceError("did not converge", np.ones(1))

    monkeypatch.setattr(cli.exact, "fci_solve", boom)
    assert cli.main(["fci", "--in", str(ring4), "--out", str(tmp_path / "f.json")]) == cli.EXIT_NUMERICAL
    assert not (tmp_path / "f.json").exists()


def test_invalid_synth_spec_exit_code(tmp_path):
    assert cli.main(["synth", "--kind", "ring", "--n", "1", "--out", str(tmp_path / "x.json")]) == cli.EXIT_SCHEMA


def test_thread_default_from_environment(monkeypatch):
    monkeypatch.setenv(cli.THREADS_ENV, "3")
    assert cli.build_parser().parse_args(["build", "--in", "x"]).threads == 3
    monkeypatch.setenv(cli.THREADS_ENV, "junk")
    assert cli.build_parser().parse_args(["build", "--in", "x"]).threads == 1


def test_module_entry_point(ring4):
    proc = subprocess.run([sys.executable, "-m", "exciton_vqe", "build", "--in", str(ring4)], capture_output=True, text=True)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["n_sites"] == 4
