"""Matrix product states.

Site tensors have legs ``(left bond, physical, right bond)``.  Canonical
form is tracked through ``center``: sites left of the center are
left-normalized and sites right of it right-normalized.  ``form`` is
``"left"`` when the center sits on the last site, ``"right"`` when it sits on
the first site, ``"mixed"`` otherwise and ``"none"`` when unknown.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from . import tensor as tc
from .errors import (
    ContractViolation,
    ImpossibleProjectionError,
    NotRepresentableError,
    NumericError,
    ShapeMismatchError,
)
from .pauli import PauliString, as_pauli
from .rng import as_generator
from .tensor import TruncationPolicy

log = logging.getLogger(__name__)

HADAMARD = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)


@dataclass(frozen=True, eq=False)
class Mps:
    sites: tuple
    center: int | None = None
    log_norm: float = 0.0
    discarded_weight: float = 0.0

    def __post_init__(self):
        sites = tuple(tc.as_tensor(a) for a in self.sites)
        if not sites:
            raise ContractViolation("an MPS needs at least one site")
        for a in sites:
            if a.ndim != 3:
                raise ContractViolation("site tensors must be order 3")
        if sites[0].shape[0] != 1 or sites[-1].shape[2] != 1:
            raise ContractViolation("boundary bonds must have dimension 1")
        for a, b in zip(sites[:-1], sites[1:]):
            if a.shape[2] != b.shape[0]:
                raise ContractViolation("adjacent bond dimensions do not match")
        object.__setattr__(self, "sites", sites)

    @property
    def n(self) -> int:
        return len(self.sites)

    @property
    def phys_dims(self) -> list[int]:
        return [a.shape[1] for a in self.sites]

    @property
    def bond_dims(self) -> list[int]:
        """Internal bond dimensions, length n-1."""
        return [a.shape[2] for a in self.sites[:-1]]

    @property
    def max_bond(self) -> int:
        return max(self.bond_dims, default=1)

    @property
    def form(self) -> str:
        if self.center is None:
            return "none"
        if self.center == self.n - 1:
            return "left"
        if self.center == 0:
            return "right"
        return "mixed"

    def with_sites(self, sites, center=None, **kw) -> "Mps":
        return replace(self, sites=tuple(sites), center=center, **kw)

    def to_dense(self) -> np.ndarray:
        """State vector with legs ``(d_1, ..., d_n)``; excludes ``log_norm``."""
        psi = self.sites[0].reshape(self.sites[0].shape[1:])
        for a in self.sites[1:]:
            psi = np.tensordot(psi, a, axes=([-1], [0]))
        return psi.reshape(self.phys_dims)

    def norm(self) -> float:
        if self.center is not None:
            return float(np.linalg.norm(self.sites[self.center]))
        return float(np.sqrt(abs(overlap(self, self))))

    def normalized(self) -> "Mps":
        nrm = self.norm()
        if nrm == 0:
            raise NumericError("cannot normalize a zero-norm state")
        k = self.center if self.center is not None else 0
        sites = list(self.sites)
        sites[k] = sites[k] / nrm
        return self.with_sites(sites, self.center, log_norm=self.log_norm + float(np.log(nrm)),
                               discarded_weight=self.discarded_weight)

    def copy(self) -> "Mps":
        return self.with_sites([a.copy() for a in self.sites], self.center,
                               log_norm=self.log_norm, discarded_weight=self.discarded_weight)

    # JSON: {"n", "phys", "form", "sites"}
    def to_json(self) -> dict:
        form = self.form if self.form != "mixed" else f"mixed({self.center})"
        return {
            "n": self.n,
            "phys": self.phys_dims,
            "form": form,
            "sites": [tc.tensor_to_json(a) for a in self.sites],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "Mps":
        sites = [tc.tensor_from_json(t) for t in obj["sites"]]
        if len(sites) != int(obj["n"]):
            raise ContractViolation("site count does not match n")
        if [a.shape[1] for a in sites] != [int(d) for d in obj["phys"]]:
            raise ContractViolation("physical dimensions do not match phys")
        s = cls(tuple(sites))
        # Form flags are re-derived rather than trusted.
        return s


@dataclass(frozen=True)
class SchmidtSpectrum:
    cut: int
    values: np.ndarray = field(repr=False)


# ----------------------------------------------------------------------------- construction


def product_state(kets: Sequence) -> Mps:
    sites = []
    for k in kets:
        v = tc.as_tensor(k).reshape(-1)
        sites.append(v.reshape(1, -1, 1))
    return _gauge_product(Mps(tuple(sites)))


def _bits_to_kets(bits, d=2):
    kets = []
    for b in bits:
        v = np.zeros(d, dtype=complex)
        v[int(b)] = 1.0
        kets.append(v)
    return kets


def make_named_state(name: str, n: int, local_kets=None) -> Mps:
    """Named states: ``product`` (|0...0> or given kets/bits), ``ghz``, ``w``, ``plus_all``."""
    if n < 1:
        raise ContractViolation("n must be >= 1")
    if name == "product":
        if local_kets is None:
            local_kets = [0] * n
        if isinstance(local_kets, str):
            local_kets = [int(c) for c in local_kets]
        kets = [(_bits_to_kets([k])[0] if np.isscalar(k) else k) for k in local_kets]
        if len(kets) != n:
            raise ContractViolation("need one local ket per site")
        return product_state(kets)
    if name == "plus_all":
        return product_state([np.array([1, 1]) / np.sqrt(2)] * n)
    if name == "ghz":
        if n < 2:
            raise ContractViolation("ghz needs n >= 2")
        bulk = np.zeros((2, 2, 2), dtype=complex)
        bulk[0, 0, 0] = bulk[1, 1, 1] = 1.0
        first = np.einsum("a,asb->sb", np.array([1, 1]) / np.sqrt(2), bulk)[None]
        last = np.einsum("asb,b->as", bulk, np.array([1, 1]))[:, :, None]
        sites = [first] + [bulk.copy() for _ in range(n - 2)] + [last]
        return Mps(tuple(sites))
    if name == "w":
        if n < 2:
            raise ContractViolation("w needs n >= 2")
        bulk = np.zeros((2, 2, 2), dtype=complex)
        bulk[:, 0, :] = np.eye(2)
        bulk[:, 1, :] = np.array([[0, 0], [1, 0]])
        left = np.array([0, 1]) / np.sqrt(n)
        right = np.array([1, 0])
        first = np.einsum("a,asb->sb", left, bulk)[None]
        last = np.einsum("asb,b->as", bulk, right)[:, :, None]
        sites = [first] + [bulk.copy() for _ in range(n - 2)] + [last]
        return Mps(tuple(sites))
    raise ContractViolation(f"unknown state name {name!r}")


def random_mps(n: int, chi: int, rng, d: int = 2, normalize: bool = True) -> Mps:
    gen = as_generator(rng)
    dims = [1] + [min(chi, d ** min(i, n - i)) for i in range(1, n)] + [1]
    sites = []
    for i in range(n):
        shape = (dims[i], d, dims[i + 1])
        sites.append(gen.normal(size=shape) + 1j * gen.normal(size=shape))
    s = Mps(tuple(sites))
    return canonicalize(s, "right").normalized() if normalize else s


def from_dense(v, policy: TruncationPolicy | None = None, phys_dims=None) -> Mps:
    """Left-canonical MPS by a left-to-right sweep of truncated SVDs."""
    v = tc.as_tensor(v)
    if phys_dims is not None:
        v = v.reshape(tuple(phys_dims))
    if v.ndim == 0 or v.size == 0:
        raise ContractViolation("from_dense needs a non-empty shape")
    dims = v.shape
    policy = policy or TruncationPolicy()
    sites = []
    rest = v.reshape(1, -1)
    discarded = 0.0
    for d in dims[:-1]:
        chi = rest.shape[0]
        m = rest.reshape(chi * d, -1)
        res = tc.svd_truncated(m, policy)
        discarded += res.discarded_weight
        sites.append(res.left.reshape(chi, d, -1))
        rest = res.singulars[:, None] * res.right
    sites.append(rest.reshape(rest.shape[0], dims[-1], 1))
    return Mps(tuple(sites), center=len(dims) - 1, discarded_weight=discarded)


# ----------------------------------------------------------------------------- gauge


def _left_orthonormalize(a: np.ndarray, nxt: np.ndarray):
    chi_l, d, chi_r = a.shape
    q, r = tc.qr(a.reshape(chi_l * d, chi_r), "left")
    return q.reshape(chi_l, d, -1), np.tensordot(r, nxt, axes=([1], [0]))


def _right_orthonormalize(a: np.ndarray, prev: np.ndarray):
    chi_l, d, chi_r = a.shape
    lmat, q = tc.qr(a.reshape(chi_l, d * chi_r), "right")
    return q.reshape(-1, d, chi_r), np.tensordot(prev, lmat, axes=([2], [0]))


def move_center(s: Mps, target: int) -> Mps:
    if not 0 <= target < s.n:
        raise ContractViolation(f"center {target} out of range")
    sites = list(s.sites)
    if s.center is None:
        for i in range(s.n - 1):
            sites[i], sites[i + 1] = _left_orthonormalize(sites[i], sites[i + 1])
        cur = s.n - 1
    else:
        cur = s.center
    while cur < target:
        sites[cur], sites[cur + 1] = _left_orthonormalize(sites[cur], sites[cur + 1])
        cur += 1
    while cur > target:
        sites[cur], sites[cur - 1] = _right_orthonormalize(sites[cur], sites[cur - 1])
        cur -= 1
    return s.with_sites(sites, target, log_norm=s.log_norm, discarded_weight=s.discarded_weight)


def canonicalize(s: Mps, target: str = "left", center: int | None = None) -> Mps:
    """Bring ``s`` to ``left``, ``right`` or ``mixed`` (with ``center``) form."""
    if target == "left":
        c = s.n - 1
    elif target == "right":
        c = 0
    elif target == "mixed":
        if center is None:
            raise ContractViolation("mixed form needs a center")
        c = int(center)
    else:
        raise ContractViolation(f"unknown canonical form {target!r}")
    if s.center == c:
        return s
    if s.center is None:
        log.debug("canonicalizing an MPS of %d sites from unknown form", s.n)
    return move_center(s, c)


def _gauge_product(s: Mps) -> Mps:
    """Bond-1 states are canonical once every site but the first is normalized."""
    if any(dim != 1 for dim in s.bond_dims):
        return s
    sites = list(s.sites)
    total = 1.0
    for i in range(1, s.n):
        nrm = np.linalg.norm(sites[i])
        if nrm == 0:
            return s
        sites[i] = sites[i] / nrm
        total *= nrm
    sites[0] = sites[0] * total
    return s.with_sites(sites, 0, log_norm=s.log_norm, discarded_weight=s.discarded_weight)


def is_left_normalized(a: np.ndarray, tol=1e-10) -> bool:
    m = np.einsum("asb,asc->bc", a.conj(), a)
    return np.allclose(m, np.eye(m.shape[0]), atol=tol)


def is_right_normalized(a: np.ndarray, tol=1e-10) -> bool:
    m = np.einsum("asb,csb->ac", a, a.conj())
    return np.allclose(m, np.eye(m.shape[0]), atol=tol)


def check_canonical(s: Mps, tol=1e-10) -> bool:
    if s.center is None:
        return False
    return all(is_left_normalized(s.sites[i], tol) for i in range(s.center)) and all(
        is_right_normalized(s.sites[i], tol) for i in range(s.center + 1, s.n)
    )


# ----------------------------------------------------------------------------- contractions


def _check_register(a: Mps, b: Mps):
    if a.n != b.n or a.phys_dims != b.phys_dims:
        raise ShapeMismatchError("MPS registers differ")


def overlap(a: Mps, b: Mps) -> complex:
    """<a|b> by a left-boundary sweep (``log_norm`` factors excluded)."""
    _check_register(a, b)
    env = np.ones((1, 1), dtype=complex)
    for x, y in zip(a.sites, b.sites):
        env = np.tensordot(env, y, axes=([1], [0]))
        env = np.tensordot(x.conj(), env, axes=([0, 1], [0, 1]))
    return complex(env[0, 0])


def expect_operator_string(s: Mps, ops: Sequence[np.ndarray | None]) -> complex:
    """<ψ|O_1 ⊗ ... ⊗ O_n|ψ>/<ψ|ψ> for site operators (``None`` = identity)."""
    if len(ops) != s.n:
        raise ShapeMismatchError("operator string length differs from site count")
    env = np.ones((1, 1), dtype=complex)
    nenv = np.ones((1, 1), dtype=complex)
    for a, op in zip(s.sites, ops):
        b = a if op is None else np.einsum("st,atb->asb", op, a)
        env = np.tensordot(env, b, axes=([1], [0]))
        env = np.tensordot(a.conj(), env, axes=([0, 1], [0, 1]))
        nenv = np.tensordot(nenv, a, axes=([1], [0]))
        nenv = np.tensordot(a.conj(), nenv, axes=([0, 1], [0, 1]))
    norm2 = nenv[0, 0].real
    if norm2 <= 0:
        raise NumericError("zero-norm state")
    return complex(env[0, 0] / norm2)


def expect_pauli_string(s: Mps, p) -> float | complex:
    p = as_pauli(p)
    if p.n != s.n:
        raise ShapeMismatchError("Pauli string length differs from site count")
    ops = [None if (x == 0 and z == 0) else m for x, z, m in zip(p.x, p.z, p.site_ops())]
    val = p.coefficient() * expect_operator_string(s, ops)
    return float(val.real) if p.is_hermitian else val


def expect_local(s: Mps, op: np.ndarray, site: int) -> complex:
    ops = [None] * s.n
    ops[site] = op
    return expect_operator_string(s, ops)


def schmidt_values(s: Mps, cut: int) -> np.ndarray:
    if not 1 <= cut <= s.n - 1:
        raise ContractViolation(f"cut {cut} outside [1, {s.n - 1}]")
    c = canonicalize(s, "mixed", cut - 1)
    a = c.sites[cut - 1]
    sv = np.linalg.svd(a.reshape(-1, a.shape[2]), compute_uv=False)
    nrm = np.linalg.norm(sv)
    if nrm == 0:
        raise NumericError("zero-norm state")
    return sv / nrm


def _entropy(values: np.ndarray) -> float:
    p = values**2
    p = p[p > 1e-300]
    return float(-np.sum(p * np.log(p)))


def entropy_at_bond(s: Mps, cut: int):
    """Schmidt spectrum and von Neumann entropy (nats) across bond ``cut``."""
    vals = schmidt_values(s, cut)
    return SchmidtSpectrum(cut, vals), _entropy(vals)


def all_bond_entropies(s: Mps) -> list[float]:
    """Entropies at every cut with a single sweep."""
    if s.n == 1:
        return []
    c = canonicalize(s, "right")
    sites = list(c.sites)
    out = []
    for i in range(s.n - 1):
        a = sites[i]
        chi_l, d, chi_r = a.shape
        u, sv, vh = np.linalg.svd(a.reshape(chi_l * d, chi_r), full_matrices=False)
        nrm = np.linalg.norm(sv)
        out.append(_entropy(sv / nrm))
        sites[i] = u.reshape(chi_l, d, -1)
        sites[i + 1] = np.tensordot(sv[:, None] * vh, sites[i + 1], axes=([1], [0]))
    return out


# ----------------------------------------------------------------------------- compression


def svd_compress(s: Mps, policy: TruncationPolicy) -> Mps:
    """Truncate every bond: right-canonicalize, then a truncating left-to-right sweep."""
    c = canonicalize(s, "right")
    sites = list(c.sites)
    discarded = c.discarded_weight
    for i in range(s.n - 1):
        a = sites[i]
        chi_l, d, chi_r = a.shape
        res = tc.svd_truncated(a.reshape(chi_l * d, chi_r), policy)
        discarded += res.discarded_weight
        sites[i] = res.left.reshape(chi_l, d, -1)
        sites[i + 1] = np.tensordot(res.singulars[:, None] * res.right, sites[i + 1], axes=([1], [0]))
    return c.with_sites(sites, s.n - 1, log_norm=c.log_norm, discarded_weight=discarded)


def _overlap_envs_right(phi_sites, psi_sites):
    """R[i] = contraction of sites > i of conj(phi) with psi, shape (chi_phi, chi_psi)."""
    n = len(psi_sites)
    right = [None] * (n + 1)
    right[n] = np.ones((1, 1), dtype=complex)
    for i in range(n - 1, -1, -1):
        t = np.tensordot(psi_sites[i], right[i + 1], axes=([2], [1]))  # (a, s, b')
        right[i] = np.tensordot(phi_sites[i].conj(), t, axes=([1, 2], [1, 2]))
    return right


def variational_compress(s: Mps, chi: int, sweeps: int = 2, initial: Mps | None = None,
                         return_history: bool = False):
    """Best bond-``chi`` approximation by single-site fitting sweeps.

    The initial guess is the SVD-truncated state unless ``initial`` is given.
    With ``return_history`` the squared distance after each half-sweep is
    returned as well; it never increases.
    """
    if chi < 1 or sweeps < 1:
        raise ContractViolation("chi and sweeps must be >= 1")
    psi = s
    phi = initial if initial is not None else svd_compress(s, TruncationPolicy(max_bond=chi))
    phi = canonicalize(phi, "right")
    psi_norm2 = overlap(psi, psi).real
    n = s.n
    ps = list(psi.sites)
    fs = list(phi.sites)
    right = _overlap_envs_right(fs, ps)
    left = [None] * (n + 1)
    left[0] = np.ones((1, 1), dtype=complex)
    history = []

    def local_opt(i):
        t = np.tensordot(left[i], ps[i], axes=([1], [0]))  # (a_phi, s, b_psi)
        return np.tensordot(t, right[i + 1], axes=([2], [1]))  # (a_phi, s, b_phi)

    for _ in range(sweeps):
        for i in range(n):
            m = local_opt(i)
            if i < n - 1:
                q, r = tc.qr(m.reshape(-1, m.shape[2]), "left")
                fs[i] = q.reshape(m.shape[0], m.shape[1], -1)
                fs[i + 1] = np.tensordot(r, fs[i + 1], axes=([1], [0]))
                t = np.tensordot(left[i], ps[i], axes=([1], [0]))
                left[i + 1] = np.tensordot(fs[i].conj(), t, axes=([0, 1], [0, 1]))
            else:
                fs[i] = m
        history.append(max(psi_norm2 - np.linalg.norm(fs[n - 1]) ** 2, 0.0))
        for i in range(n - 1, -1, -1):
            m = local_opt(i)
            if i > 0:
                lmat, q = tc.qr(m.reshape(m.shape[0], -1), "right")
                fs[i] = q.reshape(-1, m.shape[1], m.shape[2])
                fs[i - 1] = np.tensordot(fs[i - 1], lmat, axes=([2], [0]))
                t = np.tensordot(ps[i], right[i + 1], axes=([2], [1]))
                right[i] = np.tensordot(fs[i].conj(), t, axes=([1, 2], [1, 2]))
            else:
                fs[i] = m
        history.append(max(psi_norm2 - np.linalg.norm(fs[0]) ** 2, 0.0))
    out = phi.with_sites(fs, 0, log_norm=s.log_norm, discarded_weight=s.discarded_weight + history[-1])
    return (out, history) if return_history else out


# ----------------------------------------------------------------------------- sampling & measurement


def sample_bitstrings(s: Mps, count: int, rng):
    """Draw ``count`` computational-basis samples.

    Returns an integer array of shape (count, n) and the probability of each
    sample, computed as the product of the conditional probabilities.
    """
    gen = as_generator(rng)
    c = canonicalize(s, "right")
    nrm2 = np.linalg.norm(c.sites[0]) ** 2
    if nrm2 == 0:
        raise NumericError("cannot sample a zero-norm state")
    env = np.ones((count, 1), dtype=complex) / np.sqrt(nrm2)
    bits = np.zeros((count, s.n), dtype=np.int64)
    prob = np.ones(count)
    for i, b in enumerate(c.sites):
        cand = np.einsum("ka,asb->ksb", env, b)
        p = np.sum(np.abs(cand) ** 2, axis=2)
        p = p / np.sum(p, axis=1, keepdims=True)
        u = gen.random(count)
        choice = np.minimum((u[:, None] > np.cumsum(p, axis=1)).sum(axis=1), p.shape[1] - 1)
        bits[:, i] = choice
        pc = p[np.arange(count), choice]
        prob *= pc
        env = cand[np.arange(count), choice] / np.sqrt(pc)[:, None]
    return bits, prob


def sample_bitstring(s: Mps, rng):
    bits, prob = sample_bitstrings(s, 1, rng)
    return tuple(int(b) for b in bits[0]), float(prob[0])


def apply_single(s: Mps, op: np.ndarray, site: int) -> Mps:
    """Apply a one-site operator; keeps the gauge if ``op`` is unitary."""
    sites = list(s.sites)
    sites[site] = np.einsum("st,atb->asb", op, sites[site])
    unitary = np.allclose(op.conj().T @ op, np.eye(op.shape[0]), atol=1e-12)
    center = s.center if (unitary or s.center == site) else None
    return s.with_sites(sites, center, log_norm=s.log_norm, discarded_weight=s.discarded_weight)


def outcome_probabilities(s: Mps, site: int, basis: str = "Z") -> np.ndarray:
    c = canonicalize(s, "mixed", site)
    a = c.sites[site]
    if basis == "X":
        a = np.einsum("st,atb->asb", HADAMARD, a)
    elif basis != "Z":
        raise ContractViolation(f"unknown basis {basis!r}")
    p = np.sum(np.abs(a) ** 2, axis=(0, 2))
    return p / np.sum(p)


def project_and_measure(s: Mps, site: int, basis: str = "Z", rng=None, outcome: int | None = None):
    """Born-rule measurement of one site; returns (outcome, collapsed state).

    Basis ``X`` reports 0 for |+> and 1 for |->.  The collapsed state is
    normalized with its orthogonality center on ``site + 1`` (or ``site`` for
    the last site).
    """
    if not 0 <= site < s.n:
        raise ContractViolation(f"site {site} out of range")
    c = canonicalize(s, "mixed", site)
    a = c.sites[site]
    if basis == "X":
        a = np.einsum("st,atb->asb", HADAMARD, a)
    elif basis != "Z":
        raise ContractViolation(f"unknown basis {basis!r}")
    p = np.sum(np.abs(a) ** 2, axis=(0, 2))
    p = p / np.sum(p)
    if outcome is None:
        gen = as_generator(rng)
        outcome = int(min(np.searchsorted(np.cumsum(p), gen.random(), side="right"), len(p) - 1))
    elif p[outcome] < 1e-14:
        raise ImpossibleProjectionError(f"outcome {outcome} has probability {p[outcome]:.3e}")
    proj = np.zeros_like(a)
    proj[:, outcome, :] = a[:, outcome, :] / np.sqrt(p[outcome])
    if basis == "X":
        proj = np.einsum("st,atb->asb", HADAMARD.conj().T, proj)
    sites = list(c.sites)
    sites[site] = proj
    out = c.with_sites(sites, site, log_norm=c.log_norm, discarded_weight=c.discarded_weight)
    if site < s.n - 1:
        out = move_center(out, site + 1)
    return outcome, out


# ----------------------------------------------------------------------------- gates


def _as_gate(gate, k):
    g = tc.as_tensor(gate)
    d = int(round(g.size ** (1 / (2 * k))))
    return g.reshape(d**k, d**k)


def apply_gate(s: Mps, gate, sites, policy: TruncationPolicy | None = None) -> Mps:
    """Apply a one-site gate or a two-site gate on adjacent sites.

    Two-site gates use row index ``(s_i, s_{i+1})``.  Passing the pair in
    descending order applies the gate with its qubit roles swapped.  The
    orthogonality center ends on the left site of the pair.
    """
    if np.isscalar(sites):
        sites = [int(sites)]
    sites = [int(x) for x in sites]
    if len(sites) == 1:
        return apply_single(s, _as_gate(gate, 1), sites[0])
    if len(sites) != 2:
        raise ContractViolation("gates act on one or two sites")
    i, j = sites
    g = _as_gate(gate, 2)
    if j == i - 1:
        d = int(round(np.sqrt(g.shape[0])))
        g = g.reshape(d, d, d, d).transpose(1, 0, 3, 2).reshape(d * d, d * d)
        i, j = j, i
    if j != i + 1:
        raise ContractViolation("two-site gates need adjacent sites; insert SWAP gates first")
    if not 0 <= i < s.n - 1:
        raise ContractViolation("sites out of range")
    return apply_two_site(s, g, i, policy or TruncationPolicy())


def apply_two_site(s: Mps, g: np.ndarray, i: int, policy: TruncationPolicy, center_right=False) -> Mps:
    """Contract, apply a (d²×d²) operator, split with truncation."""
    c = canonicalize(s, "mixed", i) if s.center not in (i, i + 1) else s
    if c.center == i + 1:
        c = move_center(c, i)
    a, b = c.sites[i], c.sites[i + 1]
    chi_l, d1, _ = a.shape
    _, d2, chi_r = b.shape
    theta = np.tensordot(a, b, axes=([2], [0]))  # (l, s1, s2, r)
    theta = np.einsum("xy,lyr->lxr", g, theta.reshape(chi_l, d1 * d2, chi_r))
    m = theta.reshape(chi_l, d1, d2, chi_r).reshape(chi_l * d1, d2 * chi_r)
    res = tc.svd_truncated(m, policy)
    sites = list(c.sites)
    if center_right:
        sites[i] = res.left.reshape(chi_l, d1, -1)
        sites[i + 1] = (res.singulars[:, None] * res.right).reshape(-1, d2, chi_r)
        center = i + 1
    else:
        sites[i] = (res.left * res.singulars[None, :]).reshape(chi_l, d1, -1)
        sites[i + 1] = res.right.reshape(-1, d2, chi_r)
        center = i
    return c.with_sites(sites, center, log_norm=c.log_norm,
                        discarded_weight=c.discarded_weight + res.discarded_weight)


# ----------------------------------------------------------------------------- circuits


def _complete_unitary(cols: dict[int, np.ndarray], dim: int, flip) -> np.ndarray:
    """Fill missing columns of a unitary.

    ``cols`` maps column index to a prescribed (orthonormal) column.  Missing
    columns first try ``flip`` applied to a sibling column, then fall back to
    Gram–Schmidt against the standard basis.
    """
    u = np.zeros((dim, dim), dtype=complex)
    basis = []
    for k, v in cols.items():
        u[:, k] = v
        basis.append(v)

    def orth(v):
        for _ in range(2):
            for b in basis:
                v = v - b * np.vdot(b, v)
        return v

    missing = [k for k in range(dim) if k not in cols]
    for k in missing:
        cand = flip(u, k)
        placed = False
        if cand is not None:
            w = orth(cand)
            if np.linalg.norm(w) > 1e-8:
                placed = True
        if not placed:
            for e in np.eye(dim, dtype=complex):
                w = orth(e)
                if np.linalg.norm(w) > 1e-8:
                    break
        w = w / np.linalg.norm(w)
        u[:, k] = w
        basis.append(w)
    return u


def to_staircase_circuit(s: Mps) -> list[dict]:
    """Sequential circuit preparing ``s`` from |0...0>.

    Returns gates ``{"sites": [...], "matrix": ndarray}`` in application
    order: a two-qubit gate on (0,1), then (1,2), ..., and a final one-qubit
    gate on the last site.  Requires qubits and internal bonds ≤ 2.
    """
    if any(d != 2 for d in s.phys_dims):
        raise NotRepresentableError("staircase circuits need qubit sites")
    if any(b > 2 for b in s.bond_dims):
        raise NotRepresentableError("staircase circuits need every bond <= 2")
    c = canonicalize(s, "right").normalized()
    n = s.n
    if n == 1:
        v = c.sites[0].reshape(2)
        u = _complete_unitary({0: v}, 2, lambda u, k: None)
        return [{"sites": [0], "matrix": u}]

    def flip_pair(u, k):
        # column (a_in, 1) := (I ⊗ X) column (a_in, 0); column (1, 0) has no sibling
        a_in, low = divmod(k, 2)
        if low == 1:
            return u[:, 2 * a_in].reshape(2, 2)[:, ::-1].reshape(4).copy()
        return None

    gates = []
    for j in range(n - 1):
        b = c.sites[j]
        chi_l, _, chi_r = b.shape
        padded = np.zeros((chi_l, 2, 2), dtype=complex)
        padded[:, :, :chi_r] = b
        cols = {2 * a_in: padded[a_in].reshape(4) for a_in in range(chi_l)}
        gates.append({"sites": [j, j + 1], "matrix": _complete_unitary(cols, 4, flip_pair)})
    b = c.sites[n - 1]
    cols = {a_in: b[a_in, :, 0] for a_in in range(b.shape[0])}
    gates.append({"sites": [n - 1], "matrix": _complete_unitary(cols, 2, lambda u, k: None)})
    return gates


def circuit_to_json(gates) -> list[dict]:
    return [{"sites": list(g["sites"]), "matrix": tc.tensor_to_json(g["matrix"])} for g in gates]


def circuit_from_json(obj) -> list[dict]:
    return [{"sites": [int(x) for x in g["sites"]], "matrix": tc.tensor_from_json(g["matrix"])} for g in obj]


def apply_circuit(s: Mps, gates, policy: TruncationPolicy | None = None) -> Mps:
    for g in gates:
        s = apply_gate(s, g["matrix"], g["sites"], policy)
    return s


# ----------------------------------------------------------------------------- transfer matrix


def transfer_matrix_leading(s: Mps, site: int):
    """Leading eigenvalue and fixed points of the site transfer map.

    Non-square tensors are zero-padded to square.  The left fixed point is
    scaled to trace χ (so a left-normalized site gives the identity) and the
    right one so that Tr(l r) = 1.
    """
    a = s.sites[site]
    chi = max(a.shape[0], a.shape[2])
    pad = np.zeros((chi, a.shape[1], chi), dtype=complex)
    pad[: a.shape[0], :, : a.shape[2]] = a
    # left map: l -> Σ_s A^s† l A^s, as a matrix on vec(l)
    e_left = np.einsum("asb,csd->bdac", pad.conj(), pad).reshape(chi * chi, chi * chi)
    e_right = np.einsum("asb,csd->acbd", pad, pad.conj()).reshape(chi * chi, chi * chi)

    def leading(mat):
        w, v = np.linalg.eig(mat)
        k = int(np.argmax(np.abs(w)))
        x = v[:, k].reshape(chi, chi)
        tr = np.trace(x)
        if abs(tr) > 1e-14:
            x = x * (abs(tr) / tr)
        else:
            ph = x.reshape(-1)[np.argmax(np.abs(x))]
            x = x * abs(ph) / ph
        return w[k], (x + x.conj().T) / 2

    eta_l, lfix = leading(e_left)
    _, rfix = leading(e_right)
    lfix = lfix * chi / np.trace(lfix).real
    rfix = rfix / np.trace(lfix @ rfix).real
    return float(eta_l.real), lfix, rfix
