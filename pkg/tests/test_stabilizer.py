import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import entanglement_entropy, evolve_dense, pauli_dense
from tnq.errors import ContractViolation, ResourceGuardError, ShapeMismatchError
from tnq.mpo import OperatorSpec
from tnq.mps import expect_pauli_string, from_dense, make_named_state, product_state, random_mps
from tnq.pauli import PauliString, symplectic_commutes
from tnq.stabilizer import (Cmps, StabilizerMpo, Tableau, apply_dressed, auxiliary_spin_operator,
                            build_stabilizer_mpo, candidate_cliffords, cmps_expect, disentangle,
                            dress_unitary, dressed_tdvp_evolve, enumerate_pauli_probabilities,
                            enumerate_stabilizer_states, find_stabilizer_group, gf2_rank,
                            pauli_probability, random_clifford_gates, sample_pauli_strings, sre_exact,
                            sre_replica2, sre_sample, stabilizer_entropy, stabilizer_state_count,
                            state_from_tableau)
from tnq.stabilizer.cmps import dense_circuit_unitary
from tnq.stabilizer.dressed import conjugate_terms
from tnq.tensor import TruncationPolicy

LOG43 = np.log(4 / 3)
T_KET = np.array([1, np.exp(1j * np.pi / 4)]) / np.sqrt(2)


def clifford_state(n, seed, depth=40):
    t = Tableau.from_gates(n, random_clifford_gates(n, depth, seed))
    psi = t.dense_unitary()[:, 0]
    return t, psi


# ---------------------------------------------------------------- Pauli strings


def test_symplectic_examples():
    assert not symplectic_commutes(PauliString.from_text("X"), PauliString.from_text("Z"))
    assert symplectic_commutes(PauliString.from_text("XI"), PauliString.from_text("IZ"))
    with pytest.raises(ShapeMismatchError):
        symplectic_commutes(PauliString.from_text("X"), PauliString.from_text("XX"))


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 4).flatmap(lambda n: st.tuples(st.text(alphabet="IXYZ", min_size=n, max_size=n),
                                                     st.text(alphabet="IXYZ", min_size=n, max_size=n))))
def test_symplectic_matches_dense_commutator(pair):
    a, b = (PauliString.from_text(t) for t in pair)
    da, db = a.to_dense(), b.to_dense()
    assert symplectic_commutes(a, b) == np.allclose(da @ db, db @ da)
    assert np.allclose((a * b).to_dense(), da @ db)


def test_pauli_text_roundtrip():
    for text in ("+XYIZ", "-ZZ", "+iXY", "-iYYI"):
        p = PauliString.from_text(text)
        assert PauliString.from_text(p.to_text()) == p
    p = PauliString.from_text("-XZ")
    assert p.is_hermitian and p.sign == -1 and p.weight() == 2
    assert np.allclose(p.to_dense(), -pauli_dense("XZ"))
    assert not PauliString.from_text("iX").is_hermitian


# ---------------------------------------------------------------- tableau


def test_bell_worked_example():
    t = Tableau.identity(2).apply("H", 0).apply("CNOT", 0, 1)
    assert {p.to_text() for p in t.stabilizers()} == {"+XX", "+ZZ"}
    assert t.to_text().splitlines() == ["11 | 00 | 0", "00 | 11 | 0"]


def test_s_twice_is_z():
    assert Tableau.from_gates(1, [("S", 0), ("S", 0)]) == Tableau.from_gates(1, [("Z", 0)])
    assert Tableau.from_gates(2, [("H", 1), ("CNOT", 0, 1), ("H", 1)]) == Tableau.from_gates(2, [("CZ", 0, 1)])


def test_sign_rules():
    t = Tableau.from_gates(1, [("H", 0)])
    assert t.conjugate("Y").to_text() == "-Y"
    t = Tableau.from_gates(1, [("S", 0)])
    assert t.conjugate("Y").to_text() == "-X"
    c = Tableau.from_gates(2, [("CNOT", 0, 1)])
    assert c.conjugate("XZ").to_text() == "-YY"
    assert c.conjugate("YY").to_text() == "-XZ"


def test_validity_after_many_gates():
    n = 16
    t = Tableau.identity(n)
    t.gates = None  # skip the dense log
    gates = random_clifford_gates(n, 10_000, 3)
    for k in range(0, len(gates), 2500):
        t.apply_gates(gates[k:k + 2500])
        assert t.is_valid()


def test_gate_validation():
    with pytest.raises(ContractViolation):
        Tableau.identity(2).apply("T", 0)
    with pytest.raises(ContractViolation):
        Tableau.identity(2).apply("H", 2)
    with pytest.raises(ContractViolation):
        Tableau.identity(2).apply("CNOT", 0)


def test_conjugation_examples():
    assert Tableau.identity(3).conjugate("XYZ").to_text() == "+XYZ"
    assert Tableau.from_gates(1, [("H", 0)]).conjugate("X").to_text() == "+Z"


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10**6), st.text(alphabet="IXYZ", min_size=4, max_size=4), st.sampled_from(["+", "-"]))
def test_conjugation_matches_dense(seed, letters, sign):
    t = Tableau.from_gates(4, random_clifford_gates(4, 30, seed))
    u = t.dense_unitary()
    p = PauliString.from_text(sign + letters)
    assert np.abs(t.conjugate(p, "forward").to_dense() - u @ p.to_dense() @ u.conj().T).max() <= 1e-10
    assert np.abs(t.conjugate(p, "backward").to_dense() - u.conj().T @ p.to_dense() @ u).max() <= 1e-10


def test_compose_and_inverse():
    a = Tableau.from_gates(3, random_clifford_gates(3, 20, 1))
    b = Tableau.from_gates(3, random_clifford_gates(3, 20, 2))
    ab = a.compose_right(b)
    assert np.allclose(ab.dense_unitary(), a.dense_unitary() @ b.dense_unitary())
    assert a.compose_right(a.inverse()) == Tableau.identity(3)


@settings(max_examples=20, deadline=None)
@given(st.integers(1, 5), st.integers(0, 10**6))
def test_gottesman_knill_consistency(n, seed):
    t, psi = clifford_state(n, seed)
    assert t.is_valid()
    assert abs(np.vdot(state_from_tableau(t), psi)) ** 2 >= 1 - 1e-10
    for p in t.stabilizers():
        assert np.allclose(p.to_dense() @ psi, psi)


def test_measurement():
    t = Tableau.identity(2)
    assert t.measure(0) == (0, False)
    t = Tableau.from_gates(2, [("H", 0), ("CNOT", 0, 1)])
    bit, random = t.measure(0, rng=4)
    assert random
    assert t.measure(1) == (bit, False)
    with pytest.raises(ContractViolation):
        t.measure(1, outcome=1 - bit)


# ---------------------------------------------------------------- stabilizer entropy


def test_stabilizer_entropy_examples():
    assert stabilizer_entropy(Tableau.identity(4), [0, 1]) == 0
    bell = Tableau.from_gates(2, [("H", 0), ("CNOT", 0, 1)])
    assert np.isclose(stabilizer_entropy(bell, [0]), np.log(2))
    ghz = Tableau.from_gates(6, [("H", 0)] + [("CNOT", k, k + 1) for k in range(5)])
    for a in range(6):
        for b in range(a + 1, 7):
            if b - a < 6:
                assert np.isclose(stabilizer_entropy(ghz, range(a, b)), np.log(2))


@settings(max_examples=25, deadline=None)
@given(st.integers(2, 5), st.integers(0, 10**6), st.data())
def test_stabilizer_entropy_matches_dense(n, seed, data):
    t, psi = clifford_state(n, seed)
    cut = data.draw(st.integers(1, n - 1))
    assert np.isclose(stabilizer_entropy(t, range(cut)), entanglement_entropy(psi, n, cut), atol=1e-9)


def test_gf2_rank():
    assert gf2_rank(np.array([[1, 1, 0], [0, 1, 1], [1, 0, 1]])) == 2
    assert gf2_rank(np.eye(4, dtype=int)) == 4


def test_stabilizer_state_counts():
    assert len(enumerate_stabilizer_states(1)) == 6 == stabilizer_state_count(1)
    assert len(enumerate_stabilizer_states(2)) == 60 == stabilizer_state_count(2)
    assert stabilizer_state_count(3) == 1080


# ---------------------------------------------------------------- SRE


@pytest.mark.parametrize("index", [1, 2, 3])
def test_sre_zero_on_stabilizer_states(index):
    for seed in range(5):
        _, psi = clifford_state(4, seed)
        assert abs(sre_exact(psi, index)) <= 1e-10
    assert abs(sre_exact(make_named_state("ghz", 5), index)) <= 1e-10


def test_sre_single_t_state():
    s = product_state([T_KET])
    vals = [expect_pauli_string(s, p) for p in "IXYZ"]
    assert np.allclose(vals, [1, 1 / np.sqrt(2), 1 / np.sqrt(2), 0])
    assert np.isclose(sre_exact(s, 2), LOG43, atol=1e-12)


@pytest.mark.parametrize("m", [1, 2, 3, 4])
def test_sre_additive(m):
    s = product_state([T_KET] * m)
    assert np.isclose(sre_exact(s, 2), m * LOG43, atol=1e-10)
    assert np.isclose(sre_exact(s, 3), m * sre_exact(product_state([T_KET]), 3), atol=1e-10)


def test_sre_clifford_invariance_via_cmps():
    core = random_mps(4, 3, 9)
    base = sre_exact(core, 2)
    for seed in range(5):
        c = Cmps(Tableau.from_gates(4, random_clifford_gates(4, 30, seed)), core)
        assert abs(sre_exact(c.to_dense(), 2) - base) <= 1e-9


def test_exact_sre_guard():
    with pytest.raises(ResourceGuardError):
        sre_exact(np.ones(2**13))


def test_sampling_on_stabilizer_state():
    alphas, probs = sample_pauli_strings(make_named_state("ghz", 4), 300, 1)
    assert np.allclose(probs, 2.0**-4)
    est, err = sre_sample(make_named_state("ghz", 4), 2, 300, 1)
    assert abs(est) <= 1e-12 and err <= 1e-12


def test_enumerated_probabilities():
    s = random_mps(3, 2, 4)
    probs = enumerate_pauli_probabilities(s)
    assert len(probs) == 64
    assert abs(sum(probs.values()) - 1) <= 1e-10
    letters = "IXYZ"
    for key, pr in probs.items():
        assert np.isclose(pr, pauli_probability(s, "".join(letters[a] for a in key)))


def test_sample_frequencies_match_enumeration():
    s = random_mps(3, 2, 6)
    probs = enumerate_pauli_probabilities(s)
    draws = 50_000
    alphas, _ = sample_pauli_strings(s, draws, 8)
    keys, counts = np.unique(alphas, axis=0, return_counts=True)
    freq = {tuple(int(a) for a in k): c for k, c in zip(keys, counts)}
    for key, pr in probs.items():
        sigma = np.sqrt(draws * pr * (1 - pr))
        assert abs(freq.get(key, 0) - draws * pr) <= 4 * sigma + 1e-9


def test_sample_estimator_close_to_exact():
    s = random_mps(5, 3, 2)
    est, err = sre_sample(s, 2, 5000, 3)
    assert abs(est - sre_exact(s, 2)) <= 4 * err
    est1, err1 = sre_sample(s, 1, 5000, 3)
    assert abs(est1 - sre_exact(s, 1)) <= 4 * err1


@pytest.mark.parametrize("method", ["state-replica", "pauli-mps"])
def test_replica_paths(method):
    assert np.isclose(sre_replica2(product_state([T_KET] * 3), method), 3 * LOG43, atol=1e-9)
    assert abs(sre_replica2(make_named_state("ghz", 4), method)) <= 1e-9
    s = random_mps(5, 4, 1)
    assert abs(sre_replica2(s, method) - sre_exact(s, 2)) <= 1e-8
    with pytest.raises(ResourceGuardError):
        sre_replica2(s, method, max_cost=10.0)


def test_replica_compression_reports_truncation():
    s = random_mps(6, 4, 2)
    exact = sre_exact(s, 2)
    val, info = sre_replica2(s, "pauli-mps", TruncationPolicy(), return_details=True)
    assert abs(val - exact) <= 1e-8
    _, info = sre_replica2(s, "pauli-mps", TruncationPolicy(max_bond=4), return_details=True)
    assert info["discarded"] > 0 and info["max_bond"] <= 4
    with pytest.raises(ContractViolation):
        sre_replica2(s, "bogus")


# ---------------------------------------------------------------- stabilizer group search


def test_find_group_ghz():
    ghz = make_named_state("ghz", 4)
    res = find_stabilizer_group(ghz)
    assert len(res.generators) == 4 and res.nullity == 0 and res.complete
    for p in res.generators:
        assert np.isclose(expect_pauli_string(ghz, p), 1)
    assert gf2_rank(np.array([np.concatenate([p.x, p.z]) for p in res.generators])) == 4


def test_find_group_t_state():
    s = product_state([T_KET, [1, 0]])
    res = find_stabilizer_group(s)
    assert [p.to_text() for p in res.generators] == ["+IZ"]
    assert res.nullity == 1


def test_find_group_random_state():
    res = find_stabilizer_group(random_mps(3, 2, 0))
    assert res.generators == [] and res.nullity == 3


def test_find_group_budget():
    res = find_stabilizer_group(make_named_state("ghz", 6), budget=2)
    assert not res.complete


# ---------------------------------------------------------------- CMPS


def test_cmps_identity_and_bell():
    core = random_mps(4, 2, 3)
    c = Cmps.from_mps(core)
    assert np.isclose(cmps_expect(c, "XZIY"), expect_pauli_string(core, "XZIY"))
    bell = Cmps(Tableau.from_gates(2, [("H", 0), ("CNOT", 0, 1)]), make_named_state("product", 2))
    assert np.isclose(bell.expect("XX"), 1)
    assert np.isclose(bell.expect("ZZ"), 1)
    assert np.isclose(bell.expect("YY"), -1)


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10**6), st.text(alphabet="IXYZ", min_size=5, max_size=5))
def test_cmps_matches_dense(seed, letters):
    c = Cmps(Tableau.from_gates(5, random_clifford_gates(5, 40, seed)), random_mps(5, 4, seed))
    phi = c.to_dense()
    p = PauliString.from_text(letters)
    assert abs(cmps_expect(c, p) - np.vdot(phi, p.to_dense() @ phi)) <= 1e-10


def test_cmps_register_check():
    with pytest.raises(ShapeMismatchError):
        Cmps(Tableau.identity(3), random_mps(4, 2, 0))


# ---------------------------------------------------------------- stabilizer MPOs and dressing


def test_stabilizer_mpo_examples():
    assert np.allclose(build_stabilizer_mpo(0.0, "XYZ").to_dense(), np.eye(8))
    assert np.allclose(build_stabilizer_mpo(np.pi, "X").to_dense(), -1j * pauli_dense("X"))
    assert np.allclose(build_stabilizer_mpo(np.pi, "X", -1).to_dense(), 1j * pauli_dense("X"))
    o = build_stabilizer_mpo(np.pi / 4, "ZZ")
    assert o.bond_dims == [2]
    ref = np.cos(np.pi / 8) * np.eye(4) - 1j * np.sin(np.pi / 8) * pauli_dense("ZZ")
    assert np.allclose(o.to_dense(), ref)


@settings(max_examples=20, deadline=None)
@given(st.floats(-np.pi, np.pi), st.text(alphabet="IXYZ", min_size=2, max_size=5), st.sampled_from([1, -1]))
def test_stabilizer_mpo_dense(theta, letters, sign):
    sm = StabilizerMpo(theta, PauliString.from_text(letters), sign)
    assert np.allclose(sm.to_mpo().to_dense(), sm.to_dense())
    assert np.allclose(auxiliary_spin_operator(theta, letters, sign), sm.to_dense())
    # a negative string flips the branch
    flipped = StabilizerMpo(theta, PauliString.from_text("-" + letters), sign)
    assert np.allclose(flipped.to_dense(), StabilizerMpo(theta, PauliString.from_text(letters), -sign).to_dense())


def test_dress_pure_clifford():
    acc, mpos = dress_unitary([([("H", 0), ("CNOT", 0, 1)], None)], 2)
    assert mpos == []
    assert acc == Tableau.from_gates(2, [("H", 0), ("CNOT", 0, 1)])


def _check_dressing(layers, n, seed):
    acc, mpos = dress_unitary(layers, n)
    s = random_mps(n, 2, seed)
    c = apply_dressed(s, acc, mpos)
    ref = dense_circuit_unitary(layers, n) @ s.to_dense().reshape(-1)
    assert np.allclose(c.to_dense(), ref, atol=1e-10)


def test_dress_h_layer_and_rotation():
    _check_dressing([([("H", 0), ("H", 1)], (0, "Z", 0.3))], 2, 0)


def test_dress_two_layers():
    layers = [([("H", 0), ("CNOT", 0, 1)], (1, "Z", 0.7)),
              ([("S", 1), ("CNOT", 1, 2), ("H", 2)], (2, "X", -0.4))]
    _check_dressing(layers, 3, 1)


@settings(max_examples=15, deadline=None)
@given(st.integers(2, 5), st.integers(0, 10**6))
def test_dress_random_circuits(n, seed):
    g = np.random.default_rng(seed)
    layers = [(random_clifford_gates(n, 6, int(g.integers(1 << 30))),
               (int(g.integers(n)), str(g.choice(["X", "Y", "Z"])), float(g.normal())))
              for _ in range(3)]
    _check_dressing(layers, n, seed)


def test_dress_rejects_bad_axis():
    with pytest.raises(ContractViolation):
        dress_unitary([([], (0, "W", 0.1))], 2)


# ---------------------------------------------------------------- disentangling


def test_candidate_set():
    cands = candidate_cliffords()
    assert len(cands) == 180
    assert cands[0].is_identity
    for c in cands[:20]:
        assert np.allclose(c.matrix.conj().T @ c.matrix, np.eye(4))


def test_conjugate_terms_rotates_hamiltonian():
    terms = OperatorSpec.tfi(3, 1.0, 0.7).pauli_terms()
    g = Tableau.from_gates(3, [("CNOT", 0, 1), ("H", 2)])
    u = g.dense_unitary()
    h = sum(c * p.to_dense() for c, p in terms)
    out = conjugate_terms(terms, g)
    assert np.allclose(sum(c * p.to_dense() for c, p in out), u @ h @ u.conj().T)
    assert len(out) == len(terms)


def test_disentangle_bell_core():
    core = from_dense(np.array([1, 0, 0, 1]) / np.sqrt(2), TruncationPolicy(), phys_dims=(2, 2))
    state = Cmps.from_mps(core)
    before = state.to_dense()
    out, terms, chosen = disentangle(state, [(1.0, PauliString.from_text("XX"))])
    assert chosen
    assert out.core.max_bond == 1
    assert abs(np.vdot(before, out.to_dense())) ** 2 >= 1 - 1e-12
    # the dressed Hamiltonian evaluated on the core equals the physical one
    c, p = terms[0]
    assert np.isclose(c * expect_pauli_string(out.core, p), 1)


def test_identity_candidates_give_plain_tdvp():
    h = OperatorSpec.tfi(4, 1.0, 1.0)
    s = make_named_state("product", 4)
    a, _, rows_a = dressed_tdvp_evolve(s, h.pauli_terms(), 0.05, 10, disentangle_every=0, observables=["ZIII"])
    b, _, rows_b = dressed_tdvp_evolve(s, h.pauli_terms(), 0.05, 10, candidates=candidate_cliffords()[:1],
                                       observables=["ZIII"])
    assert np.allclose([r["observables"] for r in rows_a], [r["observables"] for r in rows_b])
    assert all(r["clifford_gates"] == 0 for r in rows_b)
    from oracles import tfi_dense, z_profile

    psi = evolve_dense(tfi_dense(4, 1.0, 1.0), s.to_dense().reshape(-1), 0.5)
    assert abs(rows_a[-1]["observables"][0] - z_profile(psi, 4)[0]) <= 1e-4


def test_zz_only_keeps_product_core():
    terms = [(1.0, PauliString.from_text(t)) for t in ("ZZII", "IZZI", "IIZZ")]
    state, _, rows = dressed_tdvp_evolve(make_named_state("product", 4), terms, 0.1, 5)
    assert all(max(r["entropies"]) <= 1e-12 for r in rows)
    assert state.core.max_bond == 1


def test_dressed_rejects_non_pauli_sum():
    with pytest.raises(ContractViolation):
        dressed_tdvp_evolve(make_named_state("product", 3), OperatorSpec.xxz(3, 1.0), 0.1, 1)
