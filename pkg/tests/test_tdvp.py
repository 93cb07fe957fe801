import numpy as np
import pytest
from scipy.linalg import expm

from oracles import evolve_dense, xxz_dense, z_profile
from tnq import tdvp as D
from tnq import tebd as T
from tnq.errors import ContractViolation
from tnq.mpo import OperatorSpec, build_mpo, expectation, identity_mpo, product_mpo
from tnq.mps import canonicalize, make_named_state, overlap, random_mps
from tnq.tensor import TruncationPolicy


def vec(s):
    return s.to_dense().reshape(-1)


def neel(n):
    return make_named_state("product", n, "01" * (n // 2))


# ---------------------------------------------------------------- Lanczos


def test_lanczos_zero_operator():
    v = np.arange(5) + 1j
    assert np.allclose(D.lanczos_expm_apply(np.zeros((5, 5)), v, -1j), v)


def test_lanczos_random_hermitian():
    g = np.random.default_rng(0)
    a = g.normal(size=(64, 64)) + 1j * g.normal(size=(64, 64))
    h = (a + a.conj().T) / 2
    v = g.normal(size=64) + 1j * g.normal(size=64)
    out = D.lanczos_expm_apply(h, v, -0.1j, D.LanczosParams(krylov_dim=30))
    assert np.linalg.norm(out - expm(-0.1j * h) @ v) <= 1e-8


def test_lanczos_error_shrinks_with_k():
    g = np.random.default_rng(1)
    a = g.normal(size=(64, 64))
    h = (a + a.T) / 2
    v = g.normal(size=64)
    ref = expm(-0.5j * h) @ v
    errs = [np.linalg.norm(D.lanczos_expm_apply(h, v, -0.5j, D.LanczosParams(krylov_dim=k)) - ref)
            for k in (4, 8, 16)]
    assert errs[0] > errs[1] > errs[2]


def test_lanczos_exact_on_few_eigenvalues():
    diag = np.array([1.0, 1.0, -2.0, 3.0, 3.0, 3.0])
    v = np.ones(6, dtype=complex)
    out = D.lanczos_expm_apply(np.diag(diag), v, -0.7j, D.LanczosParams(krylov_dim=3))
    assert np.allclose(out, np.exp(-0.7j * diag) * v, atol=1e-12)


def test_lanczos_callable_and_errors():
    h = np.diag([1.0, 2.0, 3.0])
    v = np.ones((3, 1), dtype=complex)
    out = D.lanczos_expm_apply(lambda x: h @ x, v, -1.0)
    assert out.shape == (3, 1)
    assert np.allclose(out[:, 0], np.exp(-np.array([1.0, 2.0, 3.0])))
    with pytest.raises(ContractViolation):
        D.lanczos_expm_apply(h, np.zeros(3), -1j)
    with pytest.raises(ContractViolation):
        D.LanczosParams(krylov_dim=1)


# ---------------------------------------------------------------- environments


def test_two_site_effective_hamiltonian_is_dense_h():
    h = build_mpo(OperatorSpec.xxz(2, 0.6))
    s = random_mps(2, 2, 0)
    env = D.build_env(s, h)
    fn = lambda t: D.apply_eff_two(env.left[0], h.sites[0], h.sites[1], env.right[2], t)  # noqa: E731
    m = D.effective_matrix(fn, (1, 2, 2, 1))
    assert np.allclose(m, xxz_dense(2, 0.6))


def test_identity_mpo_effective_map():
    s = canonicalize(random_mps(5, 3, 1), "mixed", 2)
    o = identity_mpo(5)
    env = D.build_env(s, o)
    shape = s.sites[2].shape
    m = D.effective_matrix(lambda a: D.apply_eff_one(env.left[2], o.sites[2], env.right[3], a), shape)
    assert np.allclose(m, np.eye(m.shape[0]))


def test_energy_from_env_matches_expectation():
    s = random_mps(6, 3, 2)
    h = build_mpo(OperatorSpec.xxz(6, 0.3))
    assert np.isclose(D.energy_from_env(D.build_env(s, h)), expectation(s, h))


def test_build_env_register_mismatch():
    with pytest.raises(ContractViolation):
        D.build_env(random_mps(4, 2, 0), identity_mpo(5))


# ---------------------------------------------------------------- sweeps


@pytest.mark.parametrize("variant", ["one_site", "two_site"])
def test_zero_step(variant):
    s = random_mps(5, 3, 3)
    out, _ = D.tdvp_sweep(s, build_mpo(OperatorSpec.xxz(5, 1.0)), 0.0, variant)
    assert np.isclose(abs(overlap(out, s)), 1)


def test_two_site_matches_dense():
    n = 6
    s = neel(n)
    out, rows = D.tdvp_evolve(s, build_mpo(OperatorSpec.xxz(n, 1.0)), 0.02, 25, "two_site")
    ref = evolve_dense(xxz_dense(n, 1.0), vec(s), 0.5)
    assert abs(np.vdot(ref, vec(out))) ** 2 >= 1 - 1e-6
    assert all(abs(r["norm"] - 1) <= 1e-9 for r in rows)
    assert rows[-1]["time"] == pytest.approx(0.5)


def test_third_order_local_error():
    n = 6
    s = neel(n)
    h = build_mpo(OperatorSpec.xxz(n, 1.0))
    ref = evolve_dense(xxz_dense(n, 1.0), vec(s), 1.0)
    errs = []
    for dt in (0.1, 0.05):
        out, _ = D.tdvp_evolve(s, h, dt, int(round(1 / dt)), "two_site")
        errs.append(np.linalg.norm(vec(out) - ref))
    assert 6.0 < errs[0] / errs[1] < 10.0


def test_one_site_keeps_bonds_and_energy():
    n = 6
    s = random_mps(n, 4, 5)
    h = build_mpo(OperatorSpec.xxz(n, 0.8))
    bonds = s.bond_dims
    out, rows = D.tdvp_evolve(s, h, 0.05, 40, "one_site")
    assert out.bond_dims == bonds
    e = [r["energy"] for r in rows]
    assert max(e) - min(e) <= 1e-8


def test_effective_maps_hermitian():
    s = random_mps(5, 3, 6)
    h = build_mpo(OperatorSpec.xxz(5, 0.5))
    for variant in ("one_site", "two_site"):
        _, diag = D.tdvp_sweep(s, h, 0.05, variant, check_effective=True)
        assert diag["effective_defect"] <= 1e-10


def test_two_site_agrees_with_tebd():
    n = 6
    spec = OperatorSpec.xxz(n, 0.5)
    s = neel(n)
    # the gap is dominated by the Trotter error, so dt is kept small
    a, _ = D.tdvp_evolve(s, build_mpo(spec), 0.002, 100, "two_site")
    b, _, _ = T.evolve(s, T.trotterize(spec, 0.002, 2), 100)
    assert np.abs(z_profile(vec(a), n) - z_profile(vec(b), n)).max() <= 1e-5


def test_truncated_two_site_reports_discarded():
    s = neel(8)
    _, rows = D.tdvp_evolve(s, build_mpo(OperatorSpec.xxz(8, 1.0)), 0.1, 10, "two_site",
                            TruncationPolicy(max_bond=2))
    assert rows[-1]["max_bond"] <= 2
    assert sum(r["discarded"] for r in rows) > 0


def test_non_hermitian_mpo_rejected():
    lower = np.array([[0, 0], [1, 0]], dtype=complex)
    o = product_mpo([lower, lower, lower])
    with pytest.raises(ContractViolation):
        D.tdvp_sweep(random_mps(3, 2, 0), o, 0.1)
    with pytest.raises(ContractViolation):
        D.tdvp_sweep(random_mps(3, 2, 0), build_mpo(OperatorSpec.xxz(3, 1.0)), 0.1, "three_site")


def test_diagnostics_csv(tmp_path):
    _, rows = D.tdvp_evolve(neel(4), build_mpo(OperatorSpec.xxz(4, 1.0)), 0.1, 3)
    path = tmp_path / "trace.csv"
    D.write_diagnostics_csv(rows, path)
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "time,energy,norm,max_bond,discarded"
    assert len(lines) == 4
