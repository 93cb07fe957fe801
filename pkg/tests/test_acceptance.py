"""End-to-end acceptance checks.

Each test records one PASS/FAIL line through the ``acceptance`` fixture; the
lines are printed in a summary section at the end of the pytest run.
"""

import json
import time
from pathlib import Path

import numpy as np
import scipy.linalg

from oracles import evolve_dense, site_op, tfi_dense, thermal_average, xxz_dense, z_profile, Z
from tnq import anneal as A
from tnq import cli
from tnq import tdvp as D
from tnq import tebd as T
from tnq.mpo import OperatorSpec, build_mpo, mpo_trace
from tnq.mps import all_bond_entropies, make_named_state, product_state, random_mps
from tnq.open_systems import (LindbladSpec, MettsConfig, classical_ising_thermal_mpo, collapse,
                              density_observable, hardcore_boson_spec, lindblad_evolve, metts_estimate,
                              metts_run, metts_state, product_density, superket_to_dense)
from tnq.pauli import PauliString
from tnq.stabilizer import (Cmps, Tableau, dressed_tdvp_evolve, find_stabilizer_group,
                            random_clifford_gates, sre_exact, sre_replica2, sre_sample)
from tnq.tensor import TruncationPolicy

LOG43 = np.log(4 / 3)
T_KET = np.array([1, np.exp(1j * np.pi / 4)]) / np.sqrt(2)
CONFIGS = sorted((Path(__file__).resolve().parent.parent / "demos" / "configs").glob("*.json"))


def vec(s):
    return s.to_dense().reshape(-1)


def neel(n):
    return make_named_state("product", n, "01" * (n // 2))


def z_text(n, j):
    return "I" * j + "Z" + "I" * (n - j - 1)


def test_ac1_ghz_and_w(acceptance):
    t0 = time.perf_counter()
    n = 8
    ghz = make_named_state("ghz", n)
    bonds_ok = list(ghz.bond_dims) == [2] * (n - 1)
    ent_err = max(abs(e - np.log(2)) for e in all_bond_entropies(ghz))
    w = vec(make_named_state("w", n))
    ref = np.zeros(2**n)
    ref[[1 << k for k in range(n)]] = 1 / np.sqrt(n)
    amp_err = np.abs(w - ref).max()
    elapsed = time.perf_counter() - t0
    ok = bonds_ok and ent_err <= 1e-10 and amp_err <= 1e-12 and elapsed < 1.0
    acceptance.record("AC1", "GHZ/W construction", ok,
                      f"bonds {ghz.bond_dims}, entropy err {ent_err:.1e}, W amp err {amp_err:.1e}, {elapsed:.2f}s")
    assert ok


def test_ac2_classical_ising_partition(acceptance):
    t0 = time.perf_counter()
    n, beta, J = 10, 0.7, 1.0
    z = mpo_trace(classical_ising_thermal_mpo(n, J, 0.0, beta)).real
    ref = 2**n * np.cosh(beta * J) ** (n - 1)
    rel = abs(z / ref - 1)
    elapsed = time.perf_counter() - t0
    ok = rel <= 1e-8 and elapsed < 1.0
    acceptance.record("AC2", "classical Ising Z", ok, f"Z={z:.10g}, rel err {rel:.1e}, {elapsed:.2f}s")
    assert ok


def _tebd_err(n, dt, t):
    steps = int(round(t / dt))
    out, _, _ = T.evolve(neel(n), T.trotterize(OperatorSpec.xxz(n, 1.0), dt, 2), steps)
    ref = evolve_dense(xxz_dense(n, 1.0), vec(neel(n)), t)
    return np.abs(z_profile(vec(out), n) - z_profile(ref, n)).max()


def test_ac3_tebd_vs_dense(acceptance):
    t0 = time.perf_counter()
    e1 = _tebd_err(8, 0.01, 1.0)
    e2 = _tebd_err(8, 0.005, 1.0)
    elapsed = time.perf_counter() - t0
    ok = e1 <= 1e-4 and e1 / e2 >= 3.5 and elapsed < 60
    acceptance.record("AC3", "TEBD vs dense", ok,
                      f"max |dZ| {e1:.2e} (dt 0.01), ratio {e1 / e2:.2f} on halving dt, {elapsed:.1f}s")
    assert ok


def test_ac4_tdvp(acceptance):
    t0 = time.perf_counter()
    n = 8
    h = build_mpo(OperatorSpec.xxz(n, 1.0))
    out, _ = D.tdvp_evolve(neel(n), h, 0.01, 100, "two_site")
    ref = evolve_dense(xxz_dense(n, 1.0), vec(neel(n)), 1.0)
    fid = abs(np.vdot(ref, vec(out))) ** 2
    _, rows = D.tdvp_evolve(random_mps(n, 4, 3), h, 0.01, 100, "one_site")
    e = [r["energy"] for r in rows]
    drift = max(e) - min(e)
    g = np.random.default_rng(0)
    a = g.normal(size=(64, 64)) + 1j * g.normal(size=(64, 64))
    hm = (a + a.conj().T) / 2
    v = g.normal(size=64) + 1j * g.normal(size=64)
    lz = np.linalg.norm(D.lanczos_expm_apply(hm, v, -0.1j, D.LanczosParams(krylov_dim=30))
                        - scipy.linalg.expm(-0.1j * hm) @ v)
    elapsed = time.perf_counter() - t0
    ok = fid >= 1 - 1e-6 and drift <= 1e-8 and lz <= 1e-8 and elapsed < 60
    acceptance.record("AC4", "TDVP", ok,
                      f"1-F {1 - fid:.1e}, one-site drift {drift:.1e}, Lanczos err {lz:.1e}, {elapsed:.1f}s")
    assert ok


def test_ac5_dqa(acceptance):
    t0 = time.perf_counter()
    details, ok = [], True
    graphs = (("5-vertex example", A.example_graph()), ("3-regular n=10", A.GraphSpec.random_regular(3, 10, 7)))
    for name, g in graphs:
        p = A.encode_maxcut(g)
        _, opt = A.brute_force_minimize(p)
        # fixed layer step: tau = 0.5 P
        res = {P: A.run_dqa(p, A.DqaSchedule(P, 0.5 * P), chi=16) for P in (8, 32, 128)}
        r = [res[P].residual_energy for P in (8, 32, 128)]
        hits = sum(np.isclose(A.best_of_samples(p, res[128].state, 1024, seed)[1], opt) for seed in range(10))
        ok &= hits >= 9 and r[0] > r[1] > r[2]
        details.append(f"{name}: {hits}/10 seeds, residual {r[0]:.3g} > {r[1]:.3g} > {r[2]:.3g}")
    elapsed = time.perf_counter() - t0
    ok &= elapsed < 120
    acceptance.record("AC5", "dQA Max-Cut", ok, "; ".join(details) + f", {elapsed:.1f}s")
    assert ok


def test_ac6_metts(acceptance):
    t0 = time.perf_counter()
    n, beta = 6, 1.0
    spec = OperatorSpec.tfi(n, 1.0, 1.0, 0.2)
    hd = tfi_dense(n, 1.0, 1.0, 0.2)
    rec = metts_run(spec, MettsConfig(beta, 0.05, 2000, 20), [z_text(n, j) for j in range(n)], 11)
    zs = []
    for j in range(n):
        m, se = metts_estimate(rec, "observables", j)
        zs.append(abs(m - thermal_average(hd, site_op(Z, j, n), beta)) / se)
    chain_ok = max(zs) <= 3

    # fixed point: start from the exact classical distribution, take one step
    n3, dbeta = 3, 0.01
    spec3 = OperatorSpec.tfi(n3, 1.0, 1.0, 0.2)
    rho = scipy.linalg.expm(-beta * tfi_dense(n3, 1.0, 1.0, 0.2))
    p = np.real(np.diag(rho)) / np.trace(rho).real
    draws = 20_000
    rng = np.random.default_rng(5)
    starts = rng.choice(8, size=draws, p=p)
    counts = np.zeros(8)
    for s0 in range(8):
        bits = tuple(int(b) for b in np.binary_repr(s0, n3))
        m = metts_state(spec3, bits, "Z", beta, dbeta)
        for _ in range(int((starts == s0).sum())):
            out = collapse(m, "Z", rng)
            counts[int("".join(map(str, out)), 2)] += 1
    sig = np.sqrt(draws * p * (1 - p))
    dev = np.max(np.abs(counts - draws * p) / sig)
    stationary_ok = dev <= 4
    elapsed = time.perf_counter() - t0
    ok = chain_ok and stationary_ok and elapsed < 120
    acceptance.record("AC6", "METTS", ok,
                      f"max |dZ|/sigma {max(zs):.2f} (n=6, 2000 samples), fixed-point max dev "
                      f"{dev:.2f} sigma (n=3), {elapsed:.1f}s")
    assert ok


def test_ac7_lindblad(acceptance):
    t0 = time.perf_counter()
    n = 6
    spec = hardcore_boson_spec(n, 1.0, 0.5)
    rho0 = product_density([np.diag([0, 1.0])] * n)
    rho = lindblad_evolve(rho0, spec, 0.05, 400, TruncationPolicy(max_bond=32))
    dens = [(1 - density_observable(rho, z_text(n, j))) / 2 for j in range(n)]
    dens_err = max(abs(d - 1 / 3) for d in dens)

    h4 = OperatorSpec.xxz(4, 0.7)
    hd = xxz_dense(4, 0.7)
    r0 = product_density([np.diag([1.0, 0]), np.diag([0, 1.0]), np.full((2, 2), 0.5), np.diag([1.0, 0])])
    dt, steps = 0.001, 500
    r = lindblad_evolve(r0, LindbladSpec(h4, ()), dt, steps)
    u = scipy.linalg.expm(-1j * hd * dt * steps)
    ref = u @ superket_to_dense(r0) @ u.conj().T
    vn_err = np.abs(superket_to_dense(r) - ref).max()
    elapsed = time.perf_counter() - t0
    ok = dens_err <= 1e-3 and vn_err <= 1e-6 and elapsed < 120
    acceptance.record("AC7", "Lindblad", ok,
                      f"steady <n_j> max err {dens_err:.1e}, von Neumann err {vn_err:.1e}, {elapsed:.1f}s")
    assert ok


def test_ac8_stabilizer_and_magic(acceptance):
    t0 = time.perf_counter()
    bell = Tableau.identity(2).apply("H", 0).apply("CNOT", 0, 1)
    tableau_ok = {p.to_text() for p in bell.stabilizers()} == {"+XX", "+ZZ"}

    n = 8
    worst_clifford = 0.0
    for seed in range(100):
        c = Cmps(Tableau.from_gates(n, random_clifford_gates(n, 60, seed)), make_named_state("product", n))
        worst_clifford = max(worst_clifford, abs(sre_exact(c.to_dense(), 2)))

    worst_t = 0.0
    for m in range(1, 7):
        s = product_state([T_KET] * m)
        for val in (sre_exact(s, 2), sre_replica2(s, "state-replica"), sre_replica2(s, "pauli-mps")):
            worst_t = max(worst_t, abs(val - m * LOG43))

    r = random_mps(6, 4, 21)
    est, err = sre_sample(r, 2, 20_000, 4)
    z_sample = abs(est - sre_exact(r, 2)) / err

    ghz = find_stabilizer_group(make_named_state("ghz", 4))
    tz = find_stabilizer_group(product_state([T_KET, [1, 0]]))
    group_ok = len(ghz.generators) == 4 and ghz.nullity == 0 and tz.nullity == 1
    elapsed = time.perf_counter() - t0
    ok = (tableau_ok and worst_clifford <= 1e-10 and worst_t <= 1e-9 and z_sample <= 3 and group_ok
          and elapsed < 180)
    acceptance.record("AC8", "stabilizer/magic", ok,
                      f"tableau {'ok' if tableau_ok else 'wrong'}, Clifford M2 max {worst_clifford:.1e}, "
                      f"T^m max err {worst_t:.1e}, sampling {z_sample:.2f} sigma, "
                      f"GHZ gens {len(ghz.generators)} / T nullity {tz.nullity}, {elapsed:.1f}s")
    assert ok


def test_ac9_dressed_tdvp(acceptance):
    t0 = time.perf_counter()
    n, dt, steps = 8, 0.05, 40
    spec = OperatorSpec.tfi(n, 1.0, 1.0, 0.0)
    obs = [PauliString.single(n, i, "Z") for i in range(n)]
    s0 = make_named_state("product", n)
    policy = TruncationPolicy(max_bond=16)
    _, _, dressed = dressed_tdvp_evolve(s0, spec, dt, steps, 1, 1, policy, observables=obs)
    _, _, plain = dressed_tdvp_evolve(s0, spec, dt, steps, 0, 0, policy, observables=obs)
    hd = tfi_dense(n, 1.0, 1.0, 0.0)
    psi = vec(s0)
    worst, entropy_ok = 0.0, True
    for k, (a, b) in enumerate(zip(dressed, plain), start=1):
        ref = z_profile(evolve_dense(hd, psi, k * dt), n)
        worst = max(worst, np.abs(np.array(a["observables"]) - ref).max())
        entropy_ok &= max(a["entropies"]) <= max(b["entropies"]) + 1e-9
    elapsed = time.perf_counter() - t0
    ok = entropy_ok and worst <= 1e-2 and elapsed < 120
    acceptance.record("AC9", "Clifford-dressed TDVP", ok,
                      f"entropy dressed <= plain at all {steps} times: {entropy_ok}, "
                      f"final S {max(dressed[-1]['entropies']):.3f} vs {max(plain[-1]['entropies']):.3f}, "
                      f"max |dZ| {worst:.1e}, {elapsed:.1f}s")
    assert ok


def test_ac10_cli_determinism(acceptance, tmp_path):
    same = []
    for cfg in CONFIGS:
        outs = []
        for tag in "ab":
            out = tmp_path / f"{cfg.stem}_{tag}"
            assert cli.main(["run", str(cfg), "--out", str(out)]) == cli.EXIT_OK
            outs.append((out / "results.json").read_bytes())
        same.append(outs[0] == outs[1] and json.loads(outs[0]))
    ok = all(same) and len(CONFIGS) > 0
    acceptance.record("AC10", "CLI determinism", ok,
                      f"{sum(map(bool, same))}/{len(CONFIGS)} bundled configs byte-identical")
    assert ok
