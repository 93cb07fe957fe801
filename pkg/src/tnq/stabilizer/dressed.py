"""TDVP on the core of a Clifford-enhanced MPS with greedy two-qubit Clifford disentangling."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from itertools import product

import numpy as np

from ..errors import ContractViolation
from ..mpo import OperatorSpec, build_pauli_sum
from ..mps import Mps, apply_two_site, move_center
from ..pauli import PauliString
from ..tdvp import LanczosParams, tdvp_sweep
from ..tensor import TruncationPolicy
from .cmps import Cmps
from .tableau import _INVERSE, GATE_MATRICES, Tableau, embed_gate

_LOCAL = {"I": [], "H": ["H"], "S": ["S"]}
_CORES = {
    "I": [],
    "CNOT": [("CNOT", (0, 1))],
    "CNOT_R": [("CNOT", (1, 0))],
    "CZ": [("CZ", (0, 1))],
}


@dataclass(frozen=True)
class Candidate:
    gates: tuple  # (name, qubits) on local qubits 0, 1 in application order
    matrix: np.ndarray = field(repr=False)

    @property
    def is_identity(self) -> bool:
        return not self.gates


def _matrix(gates) -> np.ndarray:
    u = np.eye(4, dtype=complex)
    for name, qs in gates:
        u = embed_gate(GATE_MATRICES[name], qs, 2) @ u
    return u


def _phase_key(u: np.ndarray) -> bytes:
    k = np.flatnonzero(np.abs(u.reshape(-1)) > 1e-9)[0]
    v = u.reshape(-1) * (abs(u.reshape(-1)[k]) / u.reshape(-1)[k])
    return (np.round(v, 8) + 0.0).tobytes()


@lru_cache(maxsize=None)
def candidate_cliffords() -> tuple[Candidate, ...]:
    """Distinct (up to phase) gates L₂·core·L₁ with L ∈ {I,H,S}⊗{I,H,S}.

    Sorted by gate count, so the identity comes first.
    """
    seen = {}
    for l1a, l1b, core, l2a, l2b in product(_LOCAL, _LOCAL, _CORES, _LOCAL, _LOCAL):
        gates = ([(g, (0,)) for g in _LOCAL[l1a]] + [(g, (1,)) for g in _LOCAL[l1b]]
                 + _CORES[core]
                 + [(g, (0,)) for g in _LOCAL[l2a]] + [(g, (1,)) for g in _LOCAL[l2b]])
        u = _matrix(gates)
        key = _phase_key(u)
        if key not in seen or len(gates) < len(seen[key][0]):
            seen[key] = (tuple(gates), u)
    ordered = sorted(seen.values(), key=lambda e: (len(e[0]), str(e[0])))
    return tuple(Candidate(g, u) for g, u in ordered)


def _inverse_gates(gates, offset: int):
    return [(_INVERSE.get(name, name), tuple(q + offset for q in qs)) for name, qs in reversed(gates)]


def _shifted(gates, offset: int):
    return [(name, tuple(q + offset for q in qs)) for name, qs in gates]


def bond_entropies_for(theta: np.ndarray, mats: np.ndarray) -> np.ndarray:
    """Central-bond von Neumann entropy of g·θ for each 4×4 ``g`` in ``mats``."""
    l, _, _, r = theta.shape
    t = theta.reshape(l, 4, r)
    out = np.einsum("kpq,aqb->kapb", mats, t).reshape(len(mats), l, 2, 2, r)
    m = out.reshape(len(mats), l * 2, 2 * r)
    sv = np.linalg.svd(m, compute_uv=False)
    p = sv**2
    p = p / p.sum(axis=1, keepdims=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        ent = -np.sum(np.where(p > 1e-300, p * np.log(p), 0.0), axis=1)
    return ent


def _pick(entropies: np.ndarray, candidates, tol: float = 1e-12) -> int:
    best = float(entropies.min())
    if entropies[0] <= best + tol and candidates[0].is_identity:
        return 0
    return int(np.flatnonzero(entropies <= best + tol)[0])


def conjugate_terms(terms, clifford: Tableau):
    """g H g† for a list of (coefficient, string); signs move into the coefficients."""
    out = []
    for c, p in terms:
        q = clifford.conjugate(p, "forward")
        out.append((c * q.sign, q.with_phase(0)))
    return out


def disentangle(state: Cmps, terms, depth: int = 1, policy: TruncationPolicy | None = None,
                candidates=None):
    """``depth`` checkerboard sweeps of greedy two-qubit Clifford disentangling.

    Each chosen gate g is applied to the core, the Clifford becomes U_C·g†
    and the Hamiltonian terms are conjugated g H g†.  Returns
    (new state, new terms, list of (bond, gates) chosen).
    """
    cands = candidates if candidates is not None else candidate_cliffords()
    mats = np.stack([c.matrix for c in cands])
    core, cliff, terms = state.core, state.clifford, list(terms)
    n = core.n
    chosen = []
    policy = policy or TruncationPolicy()
    for _ in range(depth):
        for bond in list(range(0, n - 1, 2)) + list(range(1, n - 1, 2)):
            core = move_center(core, bond)
            theta = np.einsum("asb,btc->astc", core.sites[bond], core.sites[bond + 1])
            k = _pick(bond_entropies_for(theta, mats), cands)
            if cands[k].is_identity:
                continue
            cand = cands[k]
            core = apply_two_site(core, cand.matrix, bond, policy)
            g = Tableau.from_gates(n, _shifted(cand.gates, bond))
            cliff = cliff.compose_right(Tableau.from_gates(n, _inverse_gates(cand.gates, bond)))
            terms = conjugate_terms(terms, g)
            chosen.append((bond, cand.gates))
    return Cmps(cliff, core), terms, chosen


def _terms_of(h) -> list:
    if isinstance(h, OperatorSpec):
        if h.variant != "pauli_sum":
            raise ContractViolation("dressed evolution needs the Hamiltonian as a Pauli sum")
        return h.pauli_terms()
    out = []
    for c, p in h:
        if not isinstance(p, PauliString):
            raise ContractViolation("terms must be (coefficient, PauliString) pairs")
        out.append((float(np.real(c * p.coefficient())), p.with_phase(0)))
    return out


def _saturated(core: Mps, chi: int) -> bool:
    n = core.n
    for b, d in enumerate(core.bond_dims):
        cap = min(2 ** (b + 1), 2 ** (n - b - 1), chi)
        if d < cap:
            return False
    return True


def clifford_dressed_tdvp_step(state: Cmps, h, dt: float, step: int = 1, disentangle_every: int = 1,
                               depth: int = 1, policy: TruncationPolicy | None = None,
                               lanczos: LanczosParams | None = None, candidates=None,
                               variant: str = "auto"):
    """One TDVP step of the core against the dressed Hamiltonian, then optional disentangling.

    ``variant="auto"`` uses two-site TDVP until every bond reaches its cap
    (a product state cannot grow bonds under one-site TDVP), then one-site.
    Returns (state, dressed terms, info dict).
    """
    policy = policy or TruncationPolicy(max_bond=16)
    terms = _terms_of(h)
    if variant == "auto":
        chi = policy.max_bond or 2 ** (state.n // 2)
        variant = "one_site" if _saturated(state.core, chi) else "two_site"
    mpo = build_pauli_sum(terms, TruncationPolicy())
    core, diag = tdvp_sweep(state.core, mpo, dt, variant, policy, lanczos, hermitian_checked=True)
    state = Cmps(state.clifford, core)
    chosen = []
    if disentangle_every and step % disentangle_every == 0 and depth > 0:
        state, terms, chosen = disentangle(state, terms, depth, policy, candidates)
    return state, terms, {"variant": variant, "gates": chosen, **diag}


def dressed_tdvp_evolve(state, h, dt: float, steps: int, disentangle_every: int = 1, depth: int = 1,
                        policy: TruncationPolicy | None = None, candidates=None, observables=(),
                        lanczos: LanczosParams | None = None):
    """Run dressed TDVP; with ``disentangle_every=0`` this is plain TDVP on the core.

    Records per step: time, core bond entropies, expectation of each
    observable (Pauli strings in the physical frame) and the number of
    Clifford gates accumulated.
    """
    from ..mps import all_bond_entropies

    if isinstance(state, Mps):
        state = Cmps.from_mps(state)
    terms = _terms_of(h)
    obs = [PauliString.from_text(o) if isinstance(o, str) else o for o in observables]
    rows = []
    n_gates = 0
    for k in range(1, steps + 1):
        state, terms, info = clifford_dressed_tdvp_step(
            state, terms, dt, k, disentangle_every, depth, policy, lanczos, candidates)
        n_gates += len(info["gates"])
        rows.append({
            "time": k * dt,
            "entropies": all_bond_entropies(state.core),
            "observables": [float(state.expect(o)) for o in obs],
            "max_bond": state.core.max_bond,
            "clifford_gates": n_gates,
            "variant": info["variant"],
        })
    return state, terms, rows


__all__ = ["Candidate", "candidate_cliffords", "disentangle", "conjugate_terms",
           "clifford_dressed_tdvp_step", "dressed_tdvp_evolve", "bond_entropies_for"]
