import math

import numpy as np
import pytest

from conftest import kron_operator, random_hamiltonian, statevector_oracle
from exciton_vqe.entangler import EntanglerParams, build_entangler_circuit
from exciton_vqe.mcvqe import (
    McVqeConfig,
    McVqeEngine,
    McVqeError,
    assemble_subspace,
    contracted_operator,
    default_topology,
    diagonal_element,
    dipole_matrices,
    fidelity,
    initial_params,
    optimize_entangler,
    oscillator_strengths,
    populations,
    prepare_eigenstate,
    run_mcvqe,
    state_averaged_energy,
    transitions_from_subspace,
)
from exciton_vqe.numerics import fd_gradient
from exciton_vqe.pauli_model import (
    Connectivity,
    DipoleOperator,
    MonomerData,
    PauliTerm,
    build_dipole_operator,
    build_hamiltonian,
    term,
    to_dense,
)
from exciton_vqe.reference_states import CisSolution, cis_angles, cis_prep_circuit, solve_cis
from exciton_vqe.simulator import StateVector


def random_params(rng, n, topology="cyclic", layers=1, scale=0.3):
    p = EntanglerParams.zeros(n, topology, layers)
    return p.with_values(scale * rng.normal(size=p.n_params))


def oracle_state(coeffs, params):
    """Reference preparation and entangler applied with dense Kronecker matrices."""
    n = params.n_qubits
    gates = cis_prep_circuit(cis_angles(coeffs)).gates + build_entangler_circuit(params).gates
    return statevector_oracle(gates, n)


def random_dipole(rng, n):
    return DipoleOperator(rng.normal(size=(n, 3)), rng.normal(size=(n, 3)), rng.normal(size=(n, 3)))


def uncoupled_model(gaps, mu01):
    ms = [MonomerData(i, 0.0, g, (10.0 * i, 0, 0), (0, 0, 0), (0, 0, 0), m) for i, (g, m) in enumerate(zip(gaps, mu01))]
    conn = Connectivity(len(gaps), "pairs")
    return build_hamiltonian(ms, conn), build_dipole_operator(ms)


# -- configuration ----------------------------------------------------------------


@pytest.mark.parametrize(
    "kwargs",
    [{"fd_step": 0.0}, {"gtol": -1.0}, {"optimizer": "adam"}, {"n_layers": 0},
     {"parametrization": "euler"}, {"topology": "star"}, {"max_iter": -1}],
)
def test_config_validation(kwargs):
    with pytest.raises(McVqeError):
        McVqeConfig(**kwargs)


def test_config_state_count():
    assert McVqeConfig().resolve_states(4) == 5
    assert McVqeConfig(n_states=2).resolve_states(4) == 2
    with pytest.raises(McVqeError):
        McVqeConfig(n_states=6).resolve_states(4)


def test_default_topology(rng):
    assert default_topology(random_hamiltonian(rng, 5, "cyclic")) == "cyclic"
    assert default_topology(random_hamiltonian(rng, 5, "linear")) == "linear"
    assert default_topology(random_hamiltonian(rng, 2, "cyclic")) == "linear"
    p = initial_params(random_hamiltonian(rng, 6, "cyclic"), McVqeConfig(n_layers=2))
    assert p.n_params == 72 and not p.values.any()


def test_engine_size_checks(rng):
    h = random_hamiltonian(rng, 4)
    cis = solve_cis(h)
    with pytest.raises(McVqeError):
        McVqeEngine(h, cis, 6, EntanglerParams.zeros(4))
    with pytest.raises(McVqeError):
        McVqeEngine(h, cis, 3, EntanglerParams.zeros(5))
    with pytest.raises(McVqeError):
        McVqeEngine(None, cis, 3, EntanglerParams.zeros(4)).objective(np.zeros(24))


# -- diagonal elements and objective --------------------------------------------------


def test_zero_parameters_reproduce_cis_energies(rng):
    h = random_hamiltonian(rng, 5, "cyclic")
    cis = solve_cis(h)
    p = EntanglerParams.zeros(5)
    for t in range(6):
        assert diagonal_element(t, p, h, cis) == pytest.approx(cis.energies[t], abs=1e-12)


def test_zero_coupling_diagonal_is_exact():
    h, _ = uncoupled_model([0.3, 0.5, 0.4], np.zeros((3, 3)))
    cis = solve_cis(h)
    fci = np.sort(np.linalg.eigvalsh(to_dense(h.terms(), 3)))[:4]
    p = EntanglerParams.zeros(3, "linear")
    assert [diagonal_element(t, p, h, cis) for t in range(4)] == pytest.approx(fci, abs=1e-14)


def test_diagonal_element_matches_dense_oracle(rng):
    h = random_hamiltonian(rng, 5, "cyclic")
    cis = solve_cis(h)
    p = random_params(rng, 5)
    d = kron_operator(h.terms(), 5)
    for t in range(6):
        v = oracle_state(cis.vectors[:, t], p)
        assert diagonal_element(t, p, h, cis) == pytest.approx(v @ d @ v, abs=1e-12)


def test_state_average_of_uncoupled_pair():
    h, _ = uncoupled_model([1.0, 1.0], np.zeros((2, 3)))
    assert state_averaged_energy(EntanglerParams.zeros(2, "linear"), h, solve_cis(h), 3) == pytest.approx(2 / 3, abs=1e-15)


def test_state_average_shifts_with_identity(rng):
    h = random_hamiltonian(rng, 4)
    cis = solve_cis(h)
    p = random_params(rng, 4)
    e0 = state_averaged_energy(p, h, cis, 5)
    e1 = state_averaged_energy(p, h.shifted(0.75), cis, 5)
    assert e1 - e0 == pytest.approx(0.75, abs=1e-13)


def test_state_average_is_mean_of_diagonals(rng):
    h = random_hamiltonian(rng, 6, "cyclic")
    cis = solve_cis(h)
    p = random_params(rng, 6)
    diag = [diagonal_element(t, p, h, cis) for t in range(3)]
    assert state_averaged_energy(p, h, cis, 3) == pytest.approx(np.mean(diag), abs=1e-13)


# -- gradient -----------------------------------------------------------------------


@pytest.mark.parametrize("n,topology,layers", [(4, "linear", 1), (5, "cyclic", 2), (6, "cyclic", 1), (3, "cyclic", 2)])
def test_fast_gradient_matches_generic_central_differences(rng, n, topology, layers):
    h = random_hamiltonian(rng, n, topology)
    cis = solve_cis(h)
    p = random_params(rng, n, topology, layers)
    eng = McVqeEngine(h, cis, n + 1, p)
    fast = eng.gradient(p.values, 0.01)
    slow = fd_gradient(eng.objective, p.values, 0.01)
    assert np.abs(fast - slow).max() < 1e-11


def test_gradient_with_all_to_all_couplings(rng):
    # couplings beyond the entangler layout enlarge every cone
    h = random_hamiltonian(rng, 5, "all")
    cis = solve_cis(h)
    p = random_params(rng, 5, "linear")
    eng = McVqeEngine(h, cis, 4, p)
    assert np.abs(eng.gradient(p.values, 0.02) - fd_gradient(eng.objective, p.values, 0.02)).max() < 1e-11


def test_gradient_error_is_second_order(rng):
    h = random_hamiltonian(rng, 5, "cyclic", scale=0.1)
    cis = solve_cis(h)
    p = random_params(rng, 5, scale=0.5)
    eng = McVqeEngine(h, cis, 6, p)
    ref = eng.gradient(p.values, 1e-4)
    e2 = np.abs(eng.gradient(p.values, 1e-2) - ref).max()
    e3 = np.abs(eng.gradient(p.values, 1e-3) - ref).max()
    assert 70 < e2 / e3 < 130


def test_zero_gradient_at_zero_entangler_without_coupling():
    h, _ = uncoupled_model([0.3, 0.5, 0.4, 0.45], np.zeros((4, 3)))
    cis = solve_cis(h)
    params, res = optimize_entangler(h, cis, McVqeConfig(topology="cyclic"))
    assert res.converged and res.n_iter == 0
    assert not params.values.any()


# -- subspace ---------------------------------------------------------------------


def test_zero_parameter_subspace_is_cis(rng):
    h = random_hamiltonian(rng, 5, "cyclic")
    cis = solve_cis(h)
    sub = assemble_subspace(EntanglerParams.zeros(5), h, cis, 6)
    assert np.abs(sub.h_sub - np.diag(cis.energies)).max() < 1e-12
    assert np.abs(sub.energies - cis.energies).max() < 1e-12
    assert np.abs(np.abs(sub.v) - np.eye(6)).max() < 1e-10


@pytest.mark.parametrize("n", [3, 4, 6])
def test_interference_elements_match_cross_expectation(rng, n):
    h = random_hamiltonian(rng, n, "cyclic")
    cis = solve_cis(h)
    p = random_params(rng, n, layers=2)
    sub = assemble_subspace(p, h, cis, n + 1)
    d = kron_operator(h.terms(), n)
    states = np.array([oracle_state(cis.vectors[:, t], p) for t in range(n + 1)])
    direct = states @ d @ states.T
    assert np.abs(sub.h_sub - direct).max() < 1e-10
    assert np.array_equal(sub.h_sub, sub.h_sub.T)
    assert np.abs(sub.v.T @ sub.h_sub @ sub.v - np.diag(sub.energies)).max() < 1e-10
    assert np.abs(sub.v.T @ sub.v - np.eye(n + 1)).max() < 1e-12


def test_two_state_subspace_closed_form(rng):
    h = random_hamiltonian(rng, 3)
    cis = solve_cis(h)
    sub = assemble_subspace(random_params(rng, 3, "linear"), h, cis, 2)
    (a, c), (_, b) = sub.h_sub
    rad = math.hypot((a - b) / 2, c)
    assert sub.energies == pytest.approx([(a + b) / 2 - rad, (a + b) / 2 + rad], abs=1e-14)


def test_ritz_values_bound_exact_energies(rng):
    for n in (3, 5, 7):
        h = random_hamiltonian(rng, n, "cyclic", scale=0.1)
        cis = solve_cis(h)
        exact = np.linalg.eigvalsh(to_dense(h.terms(), n))
        sub = assemble_subspace(random_params(rng, n, scale=1.0), h, cis, n + 1)
        assert np.all(sub.energies >= exact[: n + 1] - 1e-9)


def test_subspace_is_invariant_under_cis_sign_flips(rng):
    h = random_hamiltonian(rng, 4, "cyclic")
    cis = solve_cis(h)
    p = random_params(rng, 4)
    dip = random_dipole(rng, 4)
    flipped = CisSolution(4, cis.energies, cis.vectors * np.array([1, -1, 1, -1, -1]))
    out = []
    for c in (cis, flipped):
        eng = McVqeEngine(h, c, 5, p)
        sub = assemble_subspace(p, h, c, 5, eng)
        out.append(transitions_from_subspace(sub, c, dip, eng))
    assert np.abs(out[0].energies - out[1].energies).max() < 1e-9
    assert np.abs(out[0].strengths - out[1].strengths).max() < 1e-9
    assert np.abs(out[0].populations - out[1].populations).max() < 1e-9


# -- observables --------------------------------------------------------------------


def test_identity_operator_contracts_to_identity(rng):
    h = random_hamiltonian(rng, 4)
    cis = solve_cis(h)
    p = random_params(rng, 4)
    sub = assemble_subspace(p, h, cis, 5)
    m = contracted_operator(p, [PauliTerm(1.0)], cis, sub.v)
    assert np.abs(m - np.eye(5)).max() < 1e-12


def test_hamiltonian_contracts_to_eigenvalues(rng):
    h = random_hamiltonian(rng, 4)
    cis = solve_cis(h)
    p = random_params(rng, 4)
    sub = assemble_subspace(p, h, cis, 5)
    m = contracted_operator(p, h.terms(), cis, sub.v)
    assert np.abs(m - np.diag(sub.energies)).max() < 1e-10


def test_dipole_matrix_matches_eigenstate_oracle(rng):
    n = 5
    h = random_hamiltonian(rng, n, "cyclic")
    cis = solve_cis(h)
    p = random_params(rng, n)
    dip = random_dipole(rng, n)
    eng = McVqeEngine(h, cis, n + 1, p)
    sub = assemble_subspace(p, h, cis, n + 1, eng)
    mats = dipole_matrices(p, dip, cis, sub.v, eng)
    refs = np.array([oracle_state(cis.vectors[:, t], p) for t in range(n + 1)])
    eig = sub.v.T @ refs
    for axis in range(3):
        d = kron_operator(dip.terms(axis), n)
        assert np.abs(mats[axis] - eig @ d @ eig.T).max() < 1e-10


def test_oscillator_strength_formula():
    assert oscillator_strengths([0.0, 0.1], np.array([[1.0, 0.0, 0.0]])) == pytest.approx([0.1 * 2 / 3])
    assert oscillator_strengths([0.2, 0.2], np.array([[3.0, 1.0, 0.0]])) == pytest.approx([0.0])
    stack = np.zeros((3, 2, 2))
    stack[1, 0, 1] = stack[1, 1, 0] = 2.0
    assert oscillator_strengths([0.0, 0.3], stack) == pytest.approx([(2 / 3) * 0.3 * 4])


def test_uncoupled_strengths_follow_site_properties():
    gaps = [0.30, 0.34, 0.38]
    mu = np.array([[1.0, 0.0, 0.0], [0.0, 0.5, 0.0], [0.2, 0.2, 0.2]])
    h, dip = uncoupled_model(gaps, mu)
    run = run_mcvqe(h, solve_cis(h), dip, McVqeConfig(topology="linear"))
    expect = [(2 / 3) * g * float(m @ m) for g, m in zip(gaps, mu)]
    assert run.transitions.strengths == pytest.approx(expect, abs=1e-12)
    assert np.abs(run.transitions.populations[1:] - np.eye(3)).max() < 1e-12


# -- eigenstates and populations ---------------------------------------------------


def test_zero_parameter_eigenstate_is_cis_state(rng):
    h = random_hamiltonian(rng, 4)
    cis = solve_cis(h)
    p = EntanglerParams.zeros(4)
    for t in range(5):
        psi = prepare_eigenstate(t, p, cis, np.eye(5))
        assert np.abs(psi.amplitudes - oracle_state(cis.vectors[:, t], p)).max() < 1e-14


def test_eigenstates_are_orthonormal_and_consistent(rng):
    n = 5
    h = random_hamiltonian(rng, n, "cyclic")
    cis = solve_cis(h)
    p = random_params(rng, n)
    sub = assemble_subspace(p, h, cis, n + 1)
    states = np.array([prepare_eigenstate(t, p, cis, sub.v).amplitudes for t in range(n + 1)])
    assert np.abs(states @ states.T - np.eye(n + 1)).max() < 1e-10
    d = to_dense(h.terms(), n)
    assert np.abs(np.einsum("ki,ij,kj->k", states, d, states) - sub.energies).max() < 1e-10


def test_population_examples(rng):
    assert populations(StateVector.zero(3)).tolist() == [0.0, 0.0, 0.0]
    assert populations(StateVector.basis("100")).tolist() == [1.0, 0.0, 0.0]
    c = rng.normal(size=5)
    c[0] = 0.0
    c /= np.linalg.norm(c)
    psi = StateVector(4, oracle_state(c, EntanglerParams.zeros(4)))
    pops = populations(psi)
    assert pops.sum() == pytest.approx(1.0, abs=1e-14)
    assert pops == pytest.approx(c[1:] ** 2, abs=1e-14)


def test_populations_match_z_expectation(rng):
    v = rng.normal(size=32)
    v /= np.linalg.norm(v)
    for a in range(5):
        z = v @ to_dense([term(1.0, (a, "Z"))], 5) @ v
        assert populations(v)[a] == pytest.approx((1 - z) / 2, abs=1e-14)


def test_fidelity_cases():
    a = StateVector.basis("01")
    assert fidelity(a, a) == 1.0
    assert fidelity(a, StateVector.basis("10")) == 0.0
    assert fidelity(a, StateVector(2, -a.amplitudes)) == 1.0


# -- optimization -----------------------------------------------------------------


def test_optimization_lowers_state_average_monotonically(rng):
    h = random_hamiltonian(rng, 5, "cyclic", scale=0.08)
    cis = solve_cis(h)
    seen = []
    run = run_mcvqe(h, cis, random_dipole(rng, 5), McVqeConfig(), seen.append)
    trace = [t.fun for t in run.subspace.trace]
    assert trace[0] == pytest.approx(np.mean(cis.energies), abs=1e-12)
    assert all(b <= a for a, b in zip(trace, trace[1:]))
    assert trace[-1] < trace[0]
    assert len(seen) == len(trace)
    # a central-difference gradient at step 0.01 is only consistent with the
    # objective to O(step^2), so the line search may stop just short of gtol
    assert run.subspace.trace[-1].grad_norm < 1e-5
    exact = np.linalg.eigvalsh(to_dense(h.terms(), 5))[:6]
    assert np.abs(run.transitions.energies - exact).max() < np.abs(cis.energies - exact).max()
    assert set(run.timings) == {"optimize", "subspace", "properties"}


def test_powell_optimizer_runs(rng):
    h = random_hamiltonian(rng, 3, "cyclic", scale=0.08)
    cis = solve_cis(h)
    params, res = optimize_entangler(h, cis, McVqeConfig(optimizer="powell", max_iter=3))
    f = [t.fun for t in res.trace]
    assert all(b <= a for a, b in zip(f, f[1:]))
    assert res.fun <= np.mean(cis.energies)
    assert params.n_params == 18


@pytest.mark.parametrize("param", ["antisym", "gate_native"])
def test_other_parametrizations_optimize(rng, param):
    h = random_hamiltonian(rng, 4, "linear", scale=0.08)
    cis = solve_cis(h)
    _, res = optimize_entangler(h, cis, McVqeConfig(parametrization=param, max_iter=30))
    assert res.fun < np.mean(cis.energies)
