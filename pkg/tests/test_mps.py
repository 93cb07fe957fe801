import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import I2, X, Z, entanglement_entropy, kron_all, site_op
from tnq import mps as M
from tnq.errors import ContractViolation, ImpossibleProjectionError, NotRepresentableError
from tnq.mps import Mps, make_named_state, random_mps
from tnq.pauli import PauliString
from tnq.tensor import TruncationPolicy

H = np.array([[1, 1], [1, -1]]) / np.sqrt(2)
CNOT = np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex)
SWAP = np.array([[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], dtype=complex)


def vec(s):
    return s.to_dense().reshape(-1)


def basis(n, idx):
    v = np.zeros(2**n, dtype=complex)
    v[idx] = 1
    return v


# ---------------------------------------------------------------- construction


def test_ghz_dense():
    assert np.allclose(vec(make_named_state("ghz", 3)), (basis(3, 0) + basis(3, 7)) / np.sqrt(2))


def test_w_dense():
    ref = (basis(3, 1) + basis(3, 2) + basis(3, 4)) / np.sqrt(3)
    assert np.allclose(vec(make_named_state("w", 3)), ref)


def test_plus_all():
    assert np.allclose(vec(make_named_state("plus_all", 2)), 0.5)


def test_product_from_bits():
    s = make_named_state("product", 4, "0101")
    assert np.allclose(vec(s), basis(4, 0b0101))
    assert s.bond_dims == [1, 1, 1]


def test_mps_validation():
    with pytest.raises(ContractViolation):
        Mps((np.ones((2, 2, 1)),))
    with pytest.raises(ContractViolation):
        Mps((np.ones((1, 2, 2)), np.ones((3, 2, 1))))
    with pytest.raises(ContractViolation):
        make_named_state("ghz", 1)


def test_from_dense_ghz_bonds():
    psi = (basis(4, 0) + basis(4, 15)) / np.sqrt(2)
    s = M.from_dense(psi, phys_dims=(2,) * 4)
    assert s.bond_dims == [2, 2, 2]
    assert np.allclose(vec(s), psi)


def test_from_dense_chi_one_keeps_largest_schmidt_weight():
    g = np.random.default_rng(3)
    psi = g.normal(size=8) + 1j * g.normal(size=8)
    psi /= np.linalg.norm(psi)
    s = M.from_dense(psi, TruncationPolicy(max_bond=1), phys_dims=(2, 2, 2))
    approx = vec(s) / np.linalg.norm(vec(s))
    # sequential scheme: the first cut keeps the top Schmidt vector, the next
    # cut is taken on that projected remainder
    u, sv, vh = np.linalg.svd(psi.reshape(2, 4))
    rest = vh[0].reshape(2, 2)
    _, s2, _ = np.linalg.svd(rest)
    expected = sv[0] ** 2 * s2[0] ** 2
    assert np.isclose(abs(np.vdot(approx, psi)) ** 2, expected)


def test_json_roundtrip():
    s = random_mps(4, 3, 1)
    back = Mps.from_json(json.loads(json.dumps(s.to_json())))
    assert np.allclose(vec(back), vec(s))
    obj = s.to_json()
    obj["n"] = 5
    with pytest.raises(ContractViolation):
        Mps.from_json(obj)


# ---------------------------------------------------------------- canonical forms


def test_canonical_forms():
    s = random_mps(6, 4, 2, normalize=False)
    left = M.canonicalize(s, "left")
    assert left.form == "left" and M.check_canonical(left)
    assert all(M.is_left_normalized(a) for a in left.sites[:-1])
    assert np.allclose(vec(left), vec(s))
    mixed = M.canonicalize(s, "mixed", 3)
    assert mixed.form == "mixed" and M.check_canonical(mixed)
    assert all(M.is_left_normalized(a) for a in mixed.sites[:3])
    assert all(M.is_right_normalized(a) for a in mixed.sites[4:])
    again = M.canonicalize(left, "left")
    assert np.allclose(vec(again), vec(left))


def test_ghz_right_canonical_norm():
    s = M.canonicalize(make_named_state("ghz", 5), "right")
    assert np.isclose(s.norm(), 1.0)


def test_gauge_invariance_of_observables():
    g = np.random.default_rng(5)
    s = random_mps(5, 3, 4)
    sites = list(s.sites)
    for k, chi in enumerate(s.bond_dims):
        x = g.normal(size=(chi, chi)) + 1j * g.normal(size=(chi, chi)) + 3 * np.eye(chi)
        sites[k] = np.tensordot(sites[k], x, axes=([2], [0]))
        sites[k + 1] = np.tensordot(np.linalg.inv(x), sites[k + 1], axes=([1], [0]))
    t = Mps(tuple(sites))
    assert abs(M.overlap(t, s) - 1) < 1e-9
    p = PauliString.from_text("XZIYZ")
    assert abs(M.expect_pauli_string(t, p) - M.expect_pauli_string(s, p)) < 1e-9
    assert np.allclose(M.all_bond_entropies(t), M.all_bond_entropies(s), atol=1e-9)


# ---------------------------------------------------------------- overlaps and expectations


def test_overlaps():
    s = random_mps(4, 2, 0)
    assert np.isclose(M.overlap(s, s), 1)
    assert abs(M.overlap(make_named_state("ghz", 3), make_named_state("w", 3))) < 1e-14
    assert np.isclose(M.overlap(make_named_state("product", 3), make_named_state("ghz", 3)), 1 / np.sqrt(2))


def test_pauli_expectations():
    assert np.isclose(M.expect_pauli_string(make_named_state("product", 3), "ZII"), 1)
    bell = M.apply_gate(M.apply_gate(make_named_state("product", 2), H, 0), CNOT, (0, 1))
    assert np.isclose(M.expect_pauli_string(bell, "XX"), 1)
    ghz = make_named_state("ghz", 5)
    assert np.isclose(M.expect_pauli_string(ghz, "ZZIII"), 1)
    assert abs(M.expect_pauli_string(ghz, "ZIIII")) < 1e-14
    assert np.isclose(M.expect_pauli_string(ghz, "-XXXXX"), -1)


def test_expect_operator_string_matches_dense():
    s = random_mps(4, 3, 7)
    psi = vec(s)
    ops = [X, None, Z, X]
    dense = kron_all([o if o is not None else I2 for o in ops])
    assert np.isclose(M.expect_operator_string(s, ops), np.vdot(psi, dense @ psi))
    assert np.isclose(M.expect_local(s, Z, 2), np.vdot(psi, site_op(Z, 2, 4) @ psi))


# ---------------------------------------------------------------- entanglement


def test_entropies():
    assert M.entropy_at_bond(make_named_state("product", 4), 2)[1] == 0.0
    assert np.allclose(M.all_bond_entropies(make_named_state("ghz", 6)), np.log(2))
    spec, ent = M.entropy_at_bond(make_named_state("w", 3), 1)
    assert np.isclose(ent, -(1 / 3) * np.log(1 / 3) - (2 / 3) * np.log(2 / 3))
    assert np.isclose(np.sum(spec.values**2), 1)
    with pytest.raises(ContractViolation):
        M.schmidt_values(make_named_state("w", 3), 3)


@settings(max_examples=20, deadline=None)
@given(st.integers(2, 6), st.integers(1, 4), st.integers(0, 10**6))
def test_entropy_bounded_by_bond(n, chi, seed):
    s = random_mps(n, chi, seed)
    psi = vec(s)
    for cut, ent in enumerate(M.all_bond_entropies(s), start=1):
        assert ent <= np.log(s.bond_dims[cut - 1]) + 1e-10
        assert np.isclose(ent, entanglement_entropy(psi, n, cut), atol=1e-9)


# ---------------------------------------------------------------- compression


def test_svd_compress_exact_when_chi_large():
    s = random_mps(6, 4, 1)
    c = M.svd_compress(s, TruncationPolicy(max_bond=8))
    assert abs(abs(M.overlap(c, s)) - 1) < 1e-10


def test_ghz_to_product_fidelity_half():
    c = M.svd_compress(make_named_state("ghz", 4), TruncationPolicy(max_bond=1))
    c = c.normalized()
    assert np.isclose(abs(M.overlap(c, make_named_state("ghz", 4))) ** 2, 0.5)
    v = M.variational_compress(make_named_state("ghz", 4), 1, sweeps=3)
    assert np.isclose(abs(M.overlap(v.normalized(), make_named_state("ghz", 4))) ** 2, 0.5)


def test_variational_not_worse_than_svd():
    s = random_mps(8, 8, 9)
    svd = M.svd_compress(s, TruncationPolicy(max_bond=4)).normalized()
    var, hist = M.variational_compress(s, 4, sweeps=4, return_history=True)
    f_svd = abs(M.overlap(svd, s))
    f_var = abs(M.overlap(var.normalized(), s))
    assert f_var >= f_svd - 1e-12
    assert all(b <= a + 1e-12 for a, b in zip(hist, hist[1:]))


# ---------------------------------------------------------------- sampling and measurement


def test_sampling_product_is_deterministic():
    bits, prob = M.sample_bitstrings(make_named_state("product", 4, "0101"), 50, 0)
    assert (bits == [0, 1, 0, 1]).all() and np.allclose(prob, 1)


def test_sampling_ghz_only_two_outcomes():
    bits, prob = M.sample_bitstrings(make_named_state("ghz", 6), 400, 1)
    rows = {tuple(b) for b in bits}
    assert rows <= {(0,) * 6, (1,) * 6} and len(rows) == 2
    assert np.allclose(prob, 0.5)


def test_sampling_probabilities_sum_to_one():
    s = random_mps(3, 2, 4)
    probs = np.abs(vec(s)) ** 2
    assert np.isclose(probs.sum(), 1)
    bits, prob = M.sample_bitstrings(s, 200, 2)
    idx = bits @ np.array([4, 2, 1])
    assert np.allclose(prob, probs[idx])


def test_sampling_frequencies_within_four_sigma():
    s = random_mps(3, 2, 8)
    probs = np.abs(vec(s)) ** 2
    count = 50_000
    bits, _ = M.sample_bitstrings(s, count, 123)
    freq = np.bincount(bits @ np.array([4, 2, 1]), minlength=8) / count
    sigma = np.sqrt(probs * (1 - probs) / count)
    assert np.all(np.abs(freq - probs) <= 4 * sigma + 1e-12)


def test_measure_plus_state():
    outs = set()
    for seed in range(20):
        k, post = M.project_and_measure(make_named_state("plus_all", 1), 0, "Z", seed)
        outs.add(k)
        assert np.allclose(np.abs(vec(post)), basis(1, k))
    assert outs == {0, 1}
    assert np.allclose(M.outcome_probabilities(make_named_state("product", 1), 0, "X"), 0.5)


def test_measure_ghz_collapses_rest():
    for outcome in (0, 1):
        _, post = M.project_and_measure(make_named_state("ghz", 4), 0, "Z", outcome=outcome)
        assert np.isclose(abs(vec(post)[0 if outcome == 0 else 15]), 1)
    with pytest.raises(ImpossibleProjectionError):
        M.project_and_measure(make_named_state("product", 2), 0, "Z", outcome=1)


# ---------------------------------------------------------------- gates and circuits


def test_bell_preparation():
    s = M.apply_gate(make_named_state("product", 2), H, 0)
    assert np.allclose(vec(s)[[0, 2]], 1 / np.sqrt(2))
    bell = M.apply_gate(s, CNOT, (0, 1))
    assert np.allclose(vec(bell), (basis(2, 0) + basis(2, 3)) / np.sqrt(2))


def test_swap_chain_moves_site():
    s = random_mps(4, 2, 10)
    moved = s
    for i in range(3):
        moved = M.apply_gate(moved, SWAP, (i, i + 1))
    ref = vec(s).reshape(2, 2, 2, 2).transpose(1, 2, 3, 0).reshape(-1)
    assert np.allclose(vec(moved), ref)


def test_reversed_pair_swaps_roles():
    s = make_named_state("product", 2, "01")
    out = M.apply_gate(s, CNOT, (1, 0))  # control on site 1
    assert np.allclose(vec(out), basis(2, 0b11))
    with pytest.raises(ContractViolation):
        M.apply_gate(make_named_state("product", 3), CNOT, (0, 2))


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10**6))
def test_apply_gate_matches_dense(seed):
    from scipy.stats import unitary_group

    g = np.random.default_rng(seed)
    s = random_mps(5, 2, seed)
    u = unitary_group.rvs(4, random_state=g)
    i = int(g.integers(0, 4))
    out = M.apply_gate(s, u, (i, i + 1))
    full = kron_all([np.eye(2**i), u, np.eye(2 ** (3 - i))])
    assert np.linalg.norm(vec(out) - full @ vec(s)) <= 1e-9


@pytest.mark.parametrize("name,n", [("product", 3), ("ghz", 4), ("w", 3), ("w", 5)])
def test_staircase_circuit_reproduces_state(name, n):
    s = make_named_state(name, n)
    gates = M.to_staircase_circuit(s)
    for gte in gates:
        u = gte["matrix"]
        assert np.allclose(u.conj().T @ u, np.eye(u.shape[0]), atol=1e-12)
    gates = M.circuit_from_json(json.loads(json.dumps(M.circuit_to_json(gates))))
    out = M.apply_circuit(make_named_state("product", n), gates)
    assert np.isclose(abs(M.overlap(out, s)), 1, atol=1e-12)


def test_staircase_product_is_local():
    gates = M.to_staircase_circuit(make_named_state("product", 3, "011"))
    for gte in gates[:-1]:
        u = gte["matrix"].reshape(2, 2, 2, 2)
        # the input of the right qubit is |0⟩ and stays separable
        out = u[:, :, :, 0].reshape(4, 2)
        assert np.linalg.matrix_rank(out[:, 0].reshape(2, 2), tol=1e-10) == 1


def test_staircase_refuses_big_bonds():
    with pytest.raises(NotRepresentableError):
        M.to_staircase_circuit(random_mps(6, 4, 0))


# ---------------------------------------------------------------- transfer matrix


def test_transfer_left_canonical_site():
    s = M.canonicalize(random_mps(5, 3, 1), "left")
    eta, lfix, _ = M.transfer_matrix_leading(s, 2)
    assert np.isclose(eta, 1)
    assert np.allclose(lfix, np.eye(lfix.shape[0]), atol=1e-9)


def test_transfer_bond_one():
    eta, _, _ = M.transfer_matrix_leading(make_named_state("plus_all", 3), 1)
    assert np.isclose(eta, 1)


def test_transfer_random_site_matches_dense():
    g = np.random.default_rng(2)
    a = g.normal(size=(3, 2, 3)) + 1j * g.normal(size=(3, 2, 3))
    s = Mps((np.ones((1, 2, 3)), a, np.ones((3, 2, 1))))
    eta, _, _ = M.transfer_matrix_leading(s, 1)
    e = np.einsum("asb,csd->acbd", a, a.conj()).reshape(9, 9)
    assert np.isclose(eta, np.max(np.abs(np.linalg.eigvals(e))))
