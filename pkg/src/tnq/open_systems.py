"""Mixed states as MPS: superkets, thermal states, METTS, Lindblad stepping, quantum jumps.

Two encodings of an operator ρ on n qubits are supported, both stored as an
MPS with physical dimension 4 per site:

* ``pair``: the superket Σ ρ_{ij} |i>|j>, system and ancilla fused per site
  as ``2*i + j``.  ⟨⟨φ|ρ⟩⟩ = Tr φ†ρ.
* ``pauli``: coefficients ρ_μ = Tr(ς^μ ρ) in the normalized Pauli basis
  ς^μ = σ^μ/√2 with μ ∈ (I, X, Y, Z).  Hermitian ρ gives real coefficients.

In both encodings the site tensors are kept at unit superket norm
(⟨⟨ρ|ρ⟩⟩ = 1) and the removed scale is accumulated in ``Mps.log_norm``.
"""

from __future__ import annotations

import functools
import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.linalg

from . import tensor as tc
from .errors import ContractViolation, NumericError
from .mpo import Mpo, OperatorSpec, bond_terms, build_mpo, expectation
from .mps import (HADAMARD, Mps, all_bond_entropies, apply_single, canonicalize, expect_pauli_string,
                  product_state, project_and_measure, sample_bitstrings)
from .pauli import PAULIS, PauliString, as_pauli
from .rng import as_generator
from .tebd import BrickworkCircuit, TrotterPlan, apply_gate_sequence, run_circuit, step_schedule, trotterize
from .tensor import TruncationPolicy

BASES = ("pair", "pauli")
SIGMA = np.array(PAULIS) / np.sqrt(2)  # normalized Pauli tensor ς[μ, i, j]
SIGMA_PLUS = np.array([[0, 1], [0, 0]], dtype=complex)
SIGMA_MINUS = SIGMA_PLUS.T.copy()

# pair vector (index 2i+j) <-> Pauli coefficients
_TO_PAULI = np.stack([s.T.ravel() for s in SIGMA])  # c = A v
_FROM_PAULI = np.stack([s.ravel() for s in SIGMA]).T  # v = B c


@dataclass(frozen=True)
class SuperketMps:
    mps: Mps
    basis: str = "pair"

    def __post_init__(self):
        if self.basis not in BASES:
            raise ContractViolation(f"basis must be one of {BASES}")
        if any(d != 4 for d in self.mps.phys_dims):
            raise ContractViolation("superket sites must have dimension 4")

    @property
    def n(self) -> int:
        return self.mps.n

    def with_mps(self, m: Mps) -> "SuperketMps":
        return SuperketMps(m, self.basis)

    def to_json(self) -> dict:
        return {"basis": self.basis, "log_norm": self.mps.log_norm, "mps": self.mps.to_json()}


# ----------------------------------------------------------------------------- conversions


def _site_map(m: np.ndarray, a: np.ndarray) -> np.ndarray:
    return np.einsum("st,atb->asb", m, a)


def to_basis(r: SuperketMps, basis: str) -> SuperketMps:
    if basis == r.basis:
        return r
    m = _TO_PAULI if basis == "pauli" else _FROM_PAULI
    sites = [_site_map(m, a) for a in r.mps.sites]
    # both maps are unitary, so the gauge survives
    return SuperketMps(r.mps.with_sites(sites, r.mps.center, log_norm=r.mps.log_norm,
                                        discarded_weight=r.mps.discarded_weight), basis)


def vectorize(o: Mpo, basis: str = "pair") -> SuperketMps:
    """Operator MPO -> superket with unit norm; the scale goes to ``log_norm``."""
    sites = [w.reshape(w.shape[0], 4, w.shape[3]) for w in o.sites]
    m = Mps(tuple(sites))
    m = canonicalize(m, "right")
    m = m.normalized()
    return to_basis(SuperketMps(m, "pair"), basis)


def devectorize(r: SuperketMps) -> Mpo:
    """Inverse of :func:`vectorize`; the stored scale is folded back in."""
    p = to_basis(r, "pair").mps
    sites = [a.reshape(a.shape[0], 2, 2, a.shape[2]).copy() for a in p.sites]
    sites[0] = sites[0] * np.exp(p.log_norm)
    return Mpo(tuple(sites))


def superket_from_dense(rho: np.ndarray, basis: str = "pair", policy: TruncationPolicy | None = None) -> SuperketMps:
    from .mps import from_dense

    rho = np.asarray(rho, dtype=complex)
    n = int(round(math.log2(rho.shape[0])))
    t = rho.reshape([2] * (2 * n))
    order = [k for j in range(n) for k in (j, n + j)]
    v = t.transpose(order).reshape([4] * n)
    nrm = np.linalg.norm(v)
    m = from_dense(v / nrm, policy or TruncationPolicy())
    m = m.with_sites(m.sites, m.center, log_norm=float(np.log(nrm)), discarded_weight=m.discarded_weight)
    return to_basis(SuperketMps(m, "pair"), basis)


def superket_to_dense(r: SuperketMps) -> np.ndarray:
    """Dense ρ including the stored scale."""
    p = to_basis(r, "pair").mps
    n = p.n
    v = p.to_dense().reshape([2] * (2 * n)) * np.exp(p.log_norm)
    order = [2 * j for j in range(n)] + [2 * j + 1 for j in range(n)]
    return v.transpose(order).reshape(2**n, 2**n)


def superket_from_mps(s: Mps, basis: str = "pair") -> SuperketMps:
    """|ψ><ψ| for a pure state; bond dimension squares."""
    sites = []
    for a in s.sites:
        t = np.einsum("asb,ctd->acstbd", a, a.conj())
        l, l2, d, d2, r, r2 = t.shape
        sites.append(t.reshape(l * l2, d * d2, r * r2))
    m = canonicalize(Mps(tuple(sites)), "right").normalized()
    m = m.with_sites(m.sites, m.center, log_norm=2 * s.log_norm + m.log_norm)
    return to_basis(SuperketMps(m, "pair"), basis)


def identity_superket(n: int, basis: str = "pair") -> SuperketMps:
    """The identity operator (infinite-temperature state times 2^n)."""
    v = np.array([1, 0, 0, 1], dtype=complex) / np.sqrt(2)
    m = product_state([v] * n)
    m = m.with_sites(m.sites, m.center, log_norm=0.5 * n * np.log(2))
    return to_basis(SuperketMps(m, "pair"), basis)


def product_density(rhos: Sequence[np.ndarray], basis: str = "pauli") -> SuperketMps:
    """Product of one-site density matrices (each normalized to trace 1)."""
    vecs, log_norm = [], 0.0
    for rho in rhos:
        v = np.asarray(rho, dtype=complex).ravel()
        nv = np.linalg.norm(v)
        vecs.append(v / nv)
        log_norm += np.log(nv)
    m = product_state(vecs)
    m = m.with_sites(m.sites, m.center, log_norm=log_norm)
    return to_basis(SuperketMps(m, "pair"), basis)


# ----------------------------------------------------------------------------- traces and observables


def _covector(op: np.ndarray, basis: str) -> np.ndarray:
    """Vector w with w·v = Tr(op ρ) for the one-site encoding v of ρ."""
    op = np.asarray(op, dtype=complex)
    if basis == "pair":
        return op.T.ravel()
    return np.array([np.trace(op @ s) for s in SIGMA])


def _contract_covectors(m: Mps, vecs) -> complex:
    env = np.ones(1, dtype=complex)
    for a, v in zip(m.sites, vecs):
        env = env @ np.einsum("s,asb->ab", v, a)
    return complex(env[0])


def trace_functional(r: SuperketMps) -> float:
    """Tr of the unit-norm representative.  Purity is this value to the power −2."""
    t = _contract_covectors(r.mps, [_covector(np.eye(2), r.basis)] * r.n)
    return float(t.real)


def physical_trace(r: SuperketMps) -> float:
    return float(np.exp(r.mps.log_norm) * trace_functional(r))


def density_observable(r: SuperketMps, p) -> float | complex:
    """Tr[Σρ]/Tr[ρ] for a Pauli string Σ (real for Hermitian strings)."""
    p = as_pauli(p)
    if p.n != r.n:
        raise ContractViolation("Pauli string length differs from site count")
    z = _contract_covectors(r.mps, [_covector(np.eye(2), r.basis)] * r.n)
    if abs(z) < 1e-300:
        raise NumericError("density operator has zero trace", {"trace": abs(z)})
    num = p.coefficient() * _contract_covectors(r.mps, [_covector(o, r.basis) for o in p.site_ops()])
    val = num / z
    return float(val.real) if p.is_hermitian else complex(val)


def local_observable(r: SuperketMps, op: np.ndarray, site: int) -> complex:
    eye = _covector(np.eye(2), r.basis)
    vecs = [eye] * r.n
    z = _contract_covectors(r.mps, vecs)
    vecs = list(vecs)
    vecs[site] = _covector(op, r.basis)
    return _contract_covectors(r.mps, vecs) / z


def purity(r: SuperketMps) -> float:
    nrm2 = r.mps.norm() ** 2
    return float(nrm2 / trace_functional(r) ** 2)


# ----------------------------------------------------------------------------- thermal states


def classical_ising_thermal_mpo(n: int, J: float, h: float, beta: float) -> Mpo:
    """Exact bond-2 MPO of exp(−βH) for H = −J Σ Z Z − h Σ Z."""
    I, Z = PAULIS[0], PAULIS[3]
    right_vec = [np.cosh(beta * J) * I, np.sinh(beta * J) * Z]  # closes bond j−1
    left_vec = [I, Z]  # opens bond j
    field_op = scipy.linalg.expm(beta * h * Z)
    sites = []
    for j in range(n):
        rows = right_vec if j > 0 else [I]
        cols = left_vec if j < n - 1 else [I]
        w = np.zeros((len(rows), 2, 2, len(cols)), dtype=complex)
        for a, ra in enumerate(rows):
            for b, cb in enumerate(cols):
                w[a, :, :, b] = ra @ cb @ field_op
        sites.append(w)
    return Mpo(tuple(sites))


def _superop_gate(h2: np.ndarray, tau: float) -> np.ndarray:
    """exp(−τ(h⊗1 + 1⊗hᵀ)/2) on two fused (system, ancilla) sites."""
    a = tc.expm_hermitian(h2, -tau / 2).reshape(2, 2, 2, 2)  # (s1 s2, t1 t2)
    b = tc.expm_hermitian(h2.T, -tau / 2).reshape(2, 2, 2, 2)  # (a1 a2, b1 b2)
    g = np.einsum("xyuv,pqrs->xpyqurvs", a, b)
    return g.reshape(16, 16)


def thermal_superket_evolve(h: OperatorSpec, beta: float, dbeta: float = 0.05,
                            policy: TruncationPolicy | None = None, callback=None):
    """|e^{−βH}⟩⟩ by imaginary-time evolution from the identity.

    Returns the unit-norm superket (scale in ``log_norm``) and Z = Tr e^{−βH}.
    ``callback(beta_k, superket)`` streams intermediate temperatures.
    """
    if beta < 0 or dbeta <= 0:
        raise ContractViolation("need beta >= 0 and dbeta > 0")
    policy = policy or TruncationPolicy()
    r = identity_superket(h.n, "pair")
    m = canonicalize(r.mps, "right")
    steps = int(math.ceil(beta / dbeta - 1e-12))
    if steps:
        tau = beta / steps
        terms = bond_terms(h)
        gates = [(b, _superop_gate(terms[b], tau * frac)) for b, frac in step_schedule(len(terms))]
        for k in range(steps):
            m, _ = apply_gate_sequence(m, gates, policy)
            m = m.normalized()
            if callback is not None:
                callback((k + 1) * tau, SuperketMps(m, "pair"))
    out = SuperketMps(m, "pair")
    return out, physical_trace(out)


def thermal_log_partition(r: SuperketMps) -> float:
    return float(r.mps.log_norm + np.log(trace_functional(r)))


# ----------------------------------------------------------------------------- METTS


@dataclass(frozen=True)
class MettsConfig:
    beta: float
    dbeta: float = 0.05
    samples: int = 100
    burn_in: int = 10
    basis: str = "alternating"
    max_bond: int | None = None

    def __post_init__(self):
        if self.beta < 0 or self.dbeta <= 0:
            raise ContractViolation("need beta >= 0 and dbeta > 0")
        if self.basis not in ("Z", "X", "alternating"):
            raise ContractViolation("basis must be Z, X or alternating")

    def basis_at(self, k: int) -> str:
        if self.basis == "alternating":
            return "Z" if k % 2 == 0 else "X"
        return self.basis


_KETS = {
    "Z": (np.array([1, 0], dtype=complex), np.array([0, 1], dtype=complex)),
    "X": (np.array([1, 1], dtype=complex) / np.sqrt(2), np.array([1, -1], dtype=complex) / np.sqrt(2)),
}


def cps_state(bits, basis: str = "Z") -> Mps:
    """Classical product state; in basis X bit 0 is |+> and bit 1 is |->."""
    return product_state([_KETS[basis][int(b)] for b in bits])


def _half_beta_plan(h: OperatorSpec, beta: float, dbeta: float):
    steps = int(math.ceil(beta / 2 / dbeta - 1e-12))
    return (trotterize(h, beta / 2 / steps, order=2, mode="imaginary") if steps else None), steps


def metts_state(h: OperatorSpec, bits, basis: str, beta: float, dbeta: float,
                policy: TruncationPolicy | None = None, _plan=None) -> Mps:
    """Normalized e^{−βH/2}|x> for the classical product state x."""
    s = cps_state(bits, basis)
    plan, steps = _plan or _half_beta_plan(h, beta, dbeta)
    if steps == 0:
        return s
    m = canonicalize(s, "right")
    for _ in range(steps):
        m, _ = apply_gate_sequence(m, plan.gates, policy or TruncationPolicy())
        m = m.normalized()
    return m


def collapse(s: Mps, basis: str, rng) -> tuple:
    """Born-rule sample of a classical product state in the given basis."""
    if basis == "X":
        for j in range(s.n):
            s = apply_single(s, HADAMARD, j)
    bits, _ = sample_bitstrings(s, 1, rng)
    return tuple(int(b) for b in bits[0])


def metts_run(h: OperatorSpec, cfg: MettsConfig, observables=(), rng=0, initial=None) -> list[dict]:
    """Run one METTS chain; returns one record per kept sample.

    Each record holds the classical product state the METTS was grown from,
    the METTS energy and the requested Pauli-string expectation values.
    """
    gen = as_generator(rng)
    policy = TruncationPolicy(max_bond=cfg.max_bond)
    obs = [as_pauli(o) for o in observables]
    hmpo = build_mpo(h)
    plan = _half_beta_plan(h, cfg.beta, cfg.dbeta)
    bits = tuple(int(b) for b in (initial if initial is not None else gen.integers(0, 2, h.n)))
    records = []
    for k in range(cfg.burn_in + cfg.samples):
        basis = cfg.basis_at(k)
        m = metts_state(h, bits, basis, cfg.beta, cfg.dbeta, policy, plan)
        if k >= cfg.burn_in:
            records.append({
                "step": k - cfg.burn_in,
                "basis": basis,
                "cps": list(bits),
                "energy": float(expectation(m, hmpo).real),
                "observables": [float(expect_pauli_string(m, o)) for o in obs],
                "max_bond": m.max_bond,
            })
        bits = collapse(m, cfg.basis_at(k + 1), gen)
    return records


def metts_estimate(records: list[dict], key="energy", index: int | None = None, blocks: int = 20):
    """Sample mean and batch-means standard error of a recorded quantity."""
    vals = np.array([r[key] if index is None else r[key][index] for r in records], dtype=float)
    mean = float(vals.mean())
    nb = min(blocks, len(vals))
    if nb < 2:
        return mean, float("nan")
    usable = len(vals) - len(vals) % nb
    means = vals[:usable].reshape(nb, -1).mean(axis=1)
    return mean, float(means.std(ddof=1) / np.sqrt(nb))


# ----------------------------------------------------------------------------- Lindblad


@dataclass(frozen=True, eq=False)
class LindbladSpec:
    """Nearest-neighbour Hamiltonian plus one-site jumps.

    ``jumps`` entries are ``(L, rate)`` (applied on every site) or
    ``(L, rate, site)``.
    """

    hamiltonian: OperatorSpec
    jumps: tuple = ()

    def __post_init__(self):
        clean = []
        for j in self.jumps:
            op = np.asarray(j[0], dtype=complex)
            rate = float(j[1])
            site = None if len(j) < 3 or j[2] is None else int(j[2])
            if op.shape != (2, 2):
                raise ContractViolation("jump operators must be 2x2")
            if rate < 0:
                raise ContractViolation("jump rates must be non-negative")
            clean.append((op, rate, site))
        object.__setattr__(self, "jumps", tuple(clean))

    @property
    def n(self) -> int:
        return self.hamiltonian.n

    def site_jumps(self, site: int):
        return [(op, rate) for op, rate, s in self.jumps if s is None or s == site]


def hardcore_boson_spec(n: int, gamma_loss: float, gamma_gain: float, hopping: float = 1.0) -> LindbladSpec:
    """Hopping −t Σ(σ+σ− + h.c.) with one-body loss (σ+) and gain (σ−); density n = (1 − Z)/2."""
    h = OperatorSpec.xxz(n, delta=0.0, J=-hopping / 2)
    return LindbladSpec(h, ((SIGMA_PLUS, gamma_loss), (SIGMA_MINUS, gamma_gain)))


def dissipator_generator(jumps) -> np.ndarray:
    """𝔻 = Σ γ[L⊗L* − ½(L†L⊗1 + 1⊗LᵀL*)] on the pair vector."""
    eye = np.eye(2)
    d = np.zeros((4, 4), dtype=complex)
    for op, rate in jumps:
        ldl = op.conj().T @ op
        d += rate * (np.kron(op, op.conj()) - 0.5 * (np.kron(ldl, eye) + np.kron(eye, ldl.T)))
    return d


@functools.lru_cache(maxsize=256)
def _pauli_dissipator_cached(key: bytes, dt: float) -> np.ndarray:
    gen = np.frombuffer(key, dtype=complex).reshape(4, 4)
    m = _TO_PAULI @ scipy.linalg.expm(gen * dt) @ _FROM_PAULI
    return m.real.copy() if np.abs(m.imag).max() < 1e-12 else m


def pauli_dissipator_map(jumps, dt: float) -> np.ndarray:
    """exp(𝔻 dt) as a 4×4 map on Pauli coefficients (cached per jump set and dt)."""
    return _pauli_dissipator_cached(dissipator_generator(jumps).tobytes(), float(dt))


_SIGMA2 = np.einsum("aij,bkl->abikjl", SIGMA, SIGMA).reshape(16, 4, 4)


def pauli_unitary_tensor(u: np.ndarray) -> np.ndarray:
    """R[(ν ν'), (μ μ')] = Tr[ς^ν⊗ς^ν' u ς^μ⊗ς^μ' u†] as a 16×16 map."""
    u = np.asarray(u, dtype=complex).reshape(4, 4)
    conj = np.einsum("ij,mjk,lk->mil", u, _SIGMA2, u.conj())
    r = np.einsum("nji,mij->nm", _SIGMA2, conj)
    return r.real.copy() if np.abs(r.imag).max() < 1e-12 else r


def lindblad_step(rho: SuperketMps, spec: LindbladSpec, dt: float, policy: TruncationPolicy | None = None,
                  plan: TrotterPlan | None = None) -> SuperketMps:
    """One symmetric step: dissipators dt/2, unitary gates for dt, dissipators dt/2.

    The unitary part uses the second-order brickwork Trotter gates of the
    Hamiltonian unless ``plan`` supplies its own real-time gates.
    """
    if rho.basis != "pauli":
        raise ContractViolation("lindblad_step needs a pauli-basis superket")
    if rho.n != spec.n:
        raise ContractViolation("state and model registers differ")
    policy = policy or TruncationPolicy()
    if plan is None:
        plan = trotterize(spec.hamiltonian, dt, order=2, mode="real")
    elif plan.mode != "real" or abs(plan.dt - dt) > 1e-15:
        raise ContractViolation("plan must be real-time with the same dt")
    half = [pauli_dissipator_map(spec.site_jumps(j), dt / 2) for j in range(rho.n)]
    gates = [(b, pauli_unitary_tensor(g)) for b, g in plan.gates]
    m = rho.mps
    m = _apply_site_maps(m, half)
    m = canonicalize(m, "right") if m.center is None else m
    m, _ = apply_gate_sequence(m, gates, policy)
    m = _apply_site_maps(m, half)
    m = canonicalize(m, "right").normalized()
    return SuperketMps(m, "pauli")


def _apply_site_maps(m: Mps, maps) -> Mps:
    sites = [np.einsum("nm,amb->anb", op, a) for op, a in zip(maps, m.sites)]
    return m.with_sites(sites, None, log_norm=m.log_norm, discarded_weight=m.discarded_weight)


def lindblad_evolve(rho: SuperketMps, spec: LindbladSpec, dt: float, steps: int,
                    policy: TruncationPolicy | None = None, plan: TrotterPlan | None = None, callback=None):
    for k in range(steps):
        rho = lindblad_step(rho, spec, dt, policy, plan)
        if callback is not None:
            callback(k + 1, rho)
    return rho


# ----------------------------------------------------------------------------- quantum jumps


def monitored_trajectory(s: Mps, circuit, rate: float, steps: int, rng, dt: float | None = None,
                         policy: TruncationPolicy | None = None) -> dict:
    """Unitary layers interleaved with random projective Z measurements.

    After each application of ``circuit`` (a BrickworkCircuit or a TrotterPlan),
    every site is measured independently with probability ``rate * dt``.
    ``dt`` defaults to the plan's time step, or 1 for circuits.
    """
    gen = as_generator(rng)
    policy = policy or TruncationPolicy()
    if dt is None:
        dt = circuit.dt if isinstance(circuit, TrotterPlan) else 1.0
    p = rate * dt
    if not 0 <= p <= 1:
        raise ContractViolation("rate * dt must lie in [0, 1]")
    zop = PAULIS[3]
    record = {"rate": rate, "dt": dt, "entropies": [], "z": [], "measurements": []}
    for _ in range(steps):
        if isinstance(circuit, TrotterPlan):
            s = canonicalize(s, "right") if s.center is None else s
            s, _ = apply_gate_sequence(s, circuit.gates, policy)
        else:
            s = run_circuit(s, circuit, policy)
        clicks = []
        for j in range(s.n):
            if gen.random() < p:
                outcome, s = project_and_measure(s, j, "Z", gen)
                clicks.append((j, outcome))
        record["measurements"].append(clicks)
        record["entropies"].append(all_bond_entropies(s))
        record["z"].append([float(v) for v in _z_profile(s, zop)])
    record["state"] = s
    return record


def _z_profile(s: Mps, zop) -> list[float]:
    from .mps import expect_local

    return [expect_local(s, zop, j).real for j in range(s.n)]


def write_jsonl(records, path) -> None:
    """One JSON object per line; non-serializable entries (states) are skipped."""
    with open(path, "w") as fh:
        for r in records:
            fh.write(json.dumps({k: v for k, v in r.items() if k != "state"}, sort_keys=True) + "\n")
