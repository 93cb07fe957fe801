"""Stabilizer Rényi entropies of MPS: exact enumeration, Pauli sampling, replica contractions.

Notation: Π(σ) = ⟨ψ|σ|ψ⟩² / 2^N is a probability distribution over the 4^N
Pauli strings, and M_n = (1 − n)^{-1} log Σ_σ Π(σ)^n − N log 2.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ContractViolation, ResourceGuardError
from ..mps import Mps, canonicalize, expect_pauli_string, svd_compress
from ..pauli import PAULIS, PauliString
from ..rng import as_generator
from ..tensor import TruncationPolicy
from .tableau import gf2_rank

EXACT_MAX_N = 12
REPLICA_MAX_COST = 1e10  # roughly a few seconds of einsum work
_STACK = np.array(PAULIS)  # (4, 2, 2) in order I, X, Y, Z
_ALPHA_BITS = ((0, 0), (1, 0), (1, 1), (0, 1))


def _state_vector(state) -> np.ndarray:
    if isinstance(state, Mps):
        v = state.to_dense().reshape(-1)
    else:
        v = np.asarray(state, dtype=complex).reshape(-1)
    return v / np.linalg.norm(v)


def _pauli_moment_sums(psi: np.ndarray, powers, chunk: int = 256):
    """Σ_{x,z} |⟨ψ|X^x Z^z|ψ⟩|^(2k) for each k in ``powers`` plus the Shannon sum.

    Uses one Walsh–Hadamard transform per x block.
    """
    dim = psi.size
    n = int(round(np.log2(dim)))
    idx = np.arange(dim)
    sums = {k: 0.0 for k in powers}
    shannon = 0.0
    for start in range(0, dim, chunk):
        xs = np.arange(start, min(start + chunk, dim))
        v = psi.conj()[idx[None, :] ^ xs[:, None]] * psi[None, :]
        t = v.reshape([xs.size] + [2] * n)
        for ax in range(1, n + 1):
            a = np.take(t, 0, axis=ax)
            b = np.take(t, 1, axis=ax)
            t = np.stack([a + b, a - b], axis=ax)
        e2 = np.abs(t.reshape(xs.size, dim)) ** 2
        for k in powers:
            sums[k] += float(np.sum(e2**k))
        pi = e2 / dim
        nz = pi[pi > 0]
        shannon -= float(np.sum(nz * np.log(nz)))
    return sums, shannon


def pauli_spectrum(state) -> np.ndarray:
    """All 4^N values ⟨X^x Z^z⟩² / 2^N as a (2^N, 2^N) array indexed by (x, z)."""
    psi = _state_vector(state)
    dim = psi.size
    n = int(round(np.log2(dim)))
    if n > EXACT_MAX_N:
        raise ResourceGuardError(f"enumeration limited to N <= {EXACT_MAX_N}", estimate=4**n)
    idx = np.arange(dim)
    v = psi.conj()[idx[None, :] ^ idx[:, None]] * psi[None, :]
    t = v.reshape([dim] + [2] * n)
    for ax in range(1, n + 1):
        a = np.take(t, 0, axis=ax)
        b = np.take(t, 1, axis=ax)
        t = np.stack([a + b, a - b], axis=ax)
    return np.abs(t.reshape(dim, dim)) ** 2 / dim


def sre_exact(state, index: float = 2) -> float:
    """M_n by enumerating all 4^N Pauli strings (N ≤ 12); index 1 is the Shannon limit."""
    psi = _state_vector(state)
    n = int(round(np.log2(psi.size)))
    if n > EXACT_MAX_N:
        raise ResourceGuardError(f"exact SRE limited to N <= {EXACT_MAX_N}", estimate=4**n)
    if index < 1:
        raise ContractViolation("index must be >= 1")
    if index == 1:
        _, shannon = _pauli_moment_sums(psi, [])
        return shannon - n * np.log(2)
    k = int(index)
    if k != index:
        raise ContractViolation("non-integer index > 1 is not supported")
    sums, _ = _pauli_moment_sums(psi, [k])
    # Σ Π^k = Σ |E|^{2k} / 2^{Nk}
    log_sum = np.log(sums[k]) - k * n * np.log(2)
    return float(log_sum / (1 - k) - n * np.log(2))


def pauli_probability(s: Mps, p) -> float:
    """Π(σ) = ⟨σ⟩² / 2^N."""
    v = expect_pauli_string(s, p)
    return float(abs(v) ** 2 / 2**s.n)


# ----------------------------------------------------------------------------- Pauli sampling


def _prepare(s: Mps) -> Mps:
    return canonicalize(s, "right").normalized()


def _branch(t: np.ndarray, a: np.ndarray) -> np.ndarray:
    """T_α = Σ A^{s'*} σ^α_{s's} T A^s for a batch of environments T (k, χ, χ)."""
    m = np.einsum("kab,bsd->kasd", t, a)
    m = np.einsum("uts,kasd->kuatd", _STACK, m)
    return np.einsum("atc,kuatd->kucd", a.conj(), m)


def _string_from_alphas(alphas) -> PauliString:
    bits = [_ALPHA_BITS[int(a)] for a in alphas]
    x, z = zip(*bits)
    return PauliString(np.array(x), np.array(z))


def sample_pauli_strings(s: Mps, count: int, rng):
    """Perfect sampling of Pauli strings from Π; returns (alphas (count, N), Π values).

    ``alphas`` uses 0, 1, 2, 3 for I, X, Y, Z.
    """
    gen = as_generator(rng)
    c = _prepare(s)
    t = np.ones((count, 1, 1), dtype=complex)
    alphas = np.zeros((count, c.n), dtype=np.int8)
    probs = np.ones(count)
    for i, a in enumerate(c.sites):
        branches = _branch(t, a)
        w = np.sum(np.abs(branches) ** 2, axis=(2, 3))  # ‖T_α‖², sums to 2 for normalized T
        p = w / np.sum(w, axis=1, keepdims=True)
        u = gen.random(count)
        choice = np.minimum((u[:, None] > np.cumsum(p, axis=1)).sum(axis=1), 3)
        alphas[:, i] = choice
        pc = p[np.arange(count), choice]
        probs *= pc
        t = branches[np.arange(count), choice] / np.sqrt(w[np.arange(count), choice])[:, None, None]
    return alphas, probs


def sre_sample(s: Mps, index: float = 2, samples: int = 1000, rng=0):
    """Monte Carlo M_n from perfectly sampled Pauli strings; returns (estimate, standard error)."""
    if samples < 2:
        raise ContractViolation("need at least two samples")
    _, probs = sample_pauli_strings(s, samples, rng)
    n = s.n
    if index == 1:
        vals = -np.log(probs)
        return float(vals.mean() - n * np.log(2)), float(vals.std(ddof=1) / np.sqrt(samples))
    k = index
    vals = probs ** (k - 1)
    mean = vals.mean()
    se_mean = vals.std(ddof=1) / np.sqrt(samples)
    est = np.log(mean) / (1 - k) - n * np.log(2)
    return float(est), float(se_mean / (abs(1 - k) * mean))


def enumerate_pauli_probabilities(s: Mps) -> dict:
    """Π for every string via the conditional chain (small N only)."""
    if s.n > 8:
        raise ResourceGuardError("enumeration limited to N <= 8", estimate=4**s.n)
    c = _prepare(s)
    layer = [((), np.ones((1, 1), dtype=complex), 1.0)]
    for a in c.sites:
        nxt = []
        for prefix, t, pr in layer:
            br = _branch(t[None], a)[0]
            w = np.sum(np.abs(br) ** 2, axis=(1, 2))
            tot = w.sum()
            for al in range(4):
                if w[al] > 0:
                    nxt.append((prefix + (al,), br[al] / np.sqrt(w[al]), pr * w[al] / tot))
                else:
                    nxt.append((prefix + (al,), br[al], 0.0))
        layer = nxt
    return {prefix: pr for prefix, _, pr in layer}


# ----------------------------------------------------------------------------- stabilizer group search


@dataclass
class StabilizerSearch:
    generators: list
    nullity: int
    complete: bool
    strings: list = field(default_factory=list)


def find_stabilizer_group(s: Mps, budget: int = 4096, tol: float = 1e-9) -> StabilizerSearch:
    """Stabilizer group of an MPS by a biased sweep over Pauli prefixes.

    Prefixes with 2^i χ_i π < 1 cannot extend to a stabilizer and are
    dropped; if more than ``budget`` remain, only the most probable are
    kept and the result is flagged incomplete.
    """
    c = _prepare(s)
    n = c.n
    prefixes = [((), np.ones((1, 1), dtype=complex), 1.0)]
    complete = True
    for i, a in enumerate(c.sites):
        chi = a.shape[2]
        if not prefixes:
            break
        ts = np.stack([t for _, t, _ in prefixes])
        br = _branch(ts, a)
        w = np.sum(np.abs(br) ** 2, axis=(2, 3))
        nxt = []
        for k, (prefix, _, pr) in enumerate(prefixes):
            tot = w[k].sum()
            for al in range(4):
                p_new = pr * w[k, al] / tot
                if 2 ** (i + 1) * chi * p_new < 1 - tol:
                    continue
                nxt.append((prefix + (al,), br[k, al] / np.sqrt(w[k, al]), p_new))
        if len(nxt) > budget:
            nxt.sort(key=lambda e: -e[2])
            nxt = nxt[:budget]
            complete = False
        prefixes = nxt
    found = []
    for prefix, _, pr in prefixes:
        if abs(pr * 2**n - 1) <= 1e-6 and any(prefix):
            p = _string_from_alphas(prefix)
            sign = expect_pauli_string(c, p)
            found.append(p if sign > 0 else p.with_phase(2))
    gens, rows = [], []
    for p in found:
        trial = rows + [np.concatenate([p.x, p.z])]
        if gf2_rank(np.array(trial)) == len(trial):
            rows = trial
            gens.append(p)
    return StabilizerSearch(gens, n - len(gens), complete, found)


# ----------------------------------------------------------------------------- replica paths


def _replica_factor() -> np.ndarray:
    """Γ with Γ†Γ = ½ Σ_μ (σ^μ ⊗ σ^μ*)^{⊗2}; shape (4, 16)."""
    lam = sum(np.kron(np.kron(p, p.conj()), np.kron(p, p.conj())) for p in PAULIS) / 2
    w, v = np.linalg.eigh(lam)
    keep = w > 1e-10
    return (np.sqrt(w[keep])[:, None] * v[:, keep].conj().T)


_GAMMA = _replica_factor()


def replica_cost(s: Mps) -> float:
    """Scalar multiplications for either replica path, about N·χ⁹·d⁴."""
    return float(sum(a.shape[0] ** 8 * a.shape[2] * 16 for a in s.sites))


def _guard(c: Mps, max_cost: float):
    cost = replica_cost(c)
    if cost > max_cost:
        raise ResourceGuardError(
            f"replica contraction needs ~{cost:.3g} multiplications (limit {max_cost:.3g})",
            estimate=cost,
        )


def _replica_norm(c: Mps) -> float:
    """⟨Φ|Φ⟩ with Φ = ⊗Γ |ψ, ψ*, ψ, ψ*⟩, contracted site by site."""
    gamma = _GAMMA.reshape(-1, 2, 2, 2, 2)
    env = np.ones((1,) * 8, dtype=complex)
    for a in c.sites:
        ac = a.conj()
        # k[a1 a2 a3 a4, g, b1 b2 b3 b4]
        k =np.einsum("gpqrs,apb,cqd,ert,fsu->acefgbdtu", gamma, a, ac, a, ac, optimize=True)
        t = np.einsum("acefABCD,acefgbdtu->ABCDgbdtu", env, k, optimize=True)
        env = np.einsum("ABCDgbdtu,ABCDgVWXY->bdtuVWXY", t, k.conj(), optimize=True)
    return float(env.reshape(-1)[0].real)


def _pauli_mps(c: Mps) -> Mps:
    """Coefficients c(σ) = Tr(ς^σ ρ) of ρ = |ψ><ψ| with ς = σ/√2, bond χ²."""
    sig = _STACK / np.sqrt(2)
    sites = []
    for a in c.sites:
        # Tr(ς ρ) = Σ ς_{ts} ρ_{st} = Σ A_s conj(A_t) ς_{ts}
        t = np.einsum("uts,asb,ctd->acubd", sig, a, a.conj())
        l1, l2, d, r1, r2 = t.shape
        sites.append(t.reshape(l1 * l2, d, r1 * r2).real if np.abs(t.imag).max() < 1e-13
                     else t.reshape(l1 * l2, d, r1 * r2))
    return Mps(tuple(sites))


def _hadamard_square(p: Mps) -> Mps:
    """Elementwise square over the physical index: Q(σ) = c(σ)²."""
    sites = []
    for a in p.sites:
        t = np.einsum("asb,csd->acsbd", a, a)
        l1, l2, d, r1, r2 = t.shape
        sites.append(t.reshape(l1 * l2, d, r1 * r2))
    return Mps(tuple(sites))


def _pauli_mps_norm(p: Mps) -> float:
    """⟨Q|Q⟩ = Σ_σ c(σ)^4 without forming Q."""
    env = np.ones((1, 1, 1, 1), dtype=complex)
    for a in p.sites:
        t = np.einsum("wxyz,wsa->xyzsa", env, a)
        t = np.einsum("xyzsa,xsb->yzsab", t, a)
        t = np.einsum("yzsab,ysc->zsabc", t, a.conj())
        env = np.einsum("zsabc,zsd->abcd", t, a.conj())
    return float(env.reshape(-1)[0].real)


def sre_replica2(s: Mps, method: str = "pauli-mps", policy: TruncationPolicy | None = None,
                 return_details: bool = False, max_cost: float = REPLICA_MAX_COST):
    """M_2 through replicated contractions.

    ``state-replica`` contracts Γ-projected copies |ψ, ψ*, ψ, ψ*⟩;
    ``pauli-mps`` squares the Pauli-basis coefficients elementwise.  With a
    ``policy`` the pauli-mps intermediate is compressed and the discarded
    weight is reported in the details.
    """
    c = _prepare(s)
    n = c.n
    details = {"method": method, "discarded": 0.0}
    if method == "state-replica":
        _guard(c, max_cost)
        val = _replica_norm(c)
        m2 = -np.log(val)
    elif method == "pauli-mps":
        _guard(c, max_cost)
        p = _pauli_mps(c)
        if policy is None:
            val = _pauli_mps_norm(p)
        else:
            q = svd_compress(_hadamard_square(p), policy)
            details["discarded"] = q.discarded_weight
            details["max_bond"] = q.max_bond
            val = q.norm() ** 2
        m2 = -np.log(val) - n * np.log(2)
    else:
        raise ContractViolation("method must be 'state-replica' or 'pauli-mps'")
    return (float(m2), details) if return_details else float(m2)


__all__ = [
    "sre_exact", "sre_sample", "sre_replica2", "sample_pauli_strings", "pauli_probability",
    "pauli_spectrum", "replica_cost", "enumerate_pauli_probabilities", "find_stabilizer_group", "StabilizerSearch",
]
