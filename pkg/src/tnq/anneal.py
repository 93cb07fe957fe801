"""QUBO encodings, Ising mapping and digitized quantum annealing on MPS.

Conventions
-----------
* Binary variables ``x`` are the measured bits ``b``; spins are
  ``σ = 2b − 1`` (so ``σ = −Z`` as an operator).
* A QUBO is ``f(x) = Σ_ij q_ij x_i x_j + Σ_i c_i x_i + offset`` with
  symmetric ``q`` and the double sum over all ordered pairs.
* An Ising model is ``H(σ) = −Σ_{i<j} J_ij σ_i σ_j − Σ_i h_i σ_i + C``.
* The annealing cost is written as a sum of pattern terms
  ``kernel_μ[x_μ(σ)]`` where ``x_μ`` is the Hamming distance between ``σ``
  and pattern ``ξ^μ`` on the pattern's support.  Each pattern becomes a
  diagonal MPO through the discrete Fourier transform over ``x``.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from . import tensor as tc
from .errors import ContractViolation, ResourceGuardError
from .mpo import Mpo, expectation
from .mps import Mps, apply_single, canonicalize, make_named_state, sample_bitstrings, svd_compress, \
    variational_compress
from .rng import as_generator
from .tensor import TruncationPolicy

BRUTE_FORCE_MAX_N = 24


# ----------------------------------------------------------------------------- problems


@dataclass(frozen=True, eq=False)
class QuboProblem:
    q: np.ndarray
    c: np.ndarray
    offset: float = 0.0

    def __post_init__(self):
        q = np.asarray(self.q, dtype=float)
        if q.ndim != 2 or q.shape[0] != q.shape[1]:
            raise ContractViolation("q must be square")
        c = np.zeros(q.shape[0]) if self.c is None else np.asarray(self.c, dtype=float)
        if c.shape != (q.shape[0],):
            raise ContractViolation("c length must match q")
        object.__setattr__(self, "q", (q + q.T) / 2)
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "offset", float(self.offset))

    @property
    def n(self) -> int:
        return self.q.shape[0]

    def value(self, x) -> float:
        x = np.asarray(x, dtype=float)
        return float(x @ self.q @ x + self.c @ x + self.offset)

    def values(self, xs: np.ndarray) -> np.ndarray:
        xs = np.asarray(xs, dtype=float)
        return np.einsum("ki,ij,kj->k", xs, self.q, xs) + xs @ self.c + self.offset

    def to_json(self) -> dict:
        return {"q": self.q.tolist(), "c": self.c.tolist(), "offset": self.offset}

    @classmethod
    def from_json(cls, obj: dict) -> "QuboProblem":
        q = np.asarray(obj["q"], dtype=float)
        return cls(q, obj.get("c", np.zeros(q.shape[0])), obj.get("offset", 0.0))


@dataclass(frozen=True, eq=False)
class IsingModel:
    J: np.ndarray
    h: np.ndarray
    C: float = 0.0

    def __post_init__(self):
        J = np.asarray(self.J, dtype=float)
        if J.ndim != 2 or J.shape[0] != J.shape[1]:
            raise ContractViolation("J must be square")
        J = (J + J.T) / 2
        np.fill_diagonal(J, 0.0)
        h = np.zeros(J.shape[0]) if self.h is None else np.asarray(self.h, dtype=float)
        object.__setattr__(self, "J", J)
        object.__setattr__(self, "h", h)
        object.__setattr__(self, "C", float(self.C))

    @property
    def n(self) -> int:
        return self.J.shape[0]

    def energy(self, sigma) -> float:
        s = np.asarray(sigma, dtype=float)
        return float(-0.5 * s @ self.J @ s - self.h @ s + self.C)

    def energies(self, sigmas: np.ndarray) -> np.ndarray:
        s = np.asarray(sigmas, dtype=float)
        return -0.5 * np.einsum("ki,ij,kj->k", s, self.J, s) - s @ self.h + self.C

    def values(self, bits: np.ndarray) -> np.ndarray:
        return self.energies(2 * np.asarray(bits) - 1)


@dataclass(frozen=True)
class GraphSpec:
    n: int
    edges: tuple  # (i, j, w) with i != j

    def __post_init__(self):
        clean = []
        for e in self.edges:
            i, j = int(e[0]), int(e[1])
            w = float(e[2]) if len(e) > 2 else 1.0
            if i == j:
                raise ContractViolation("self-loops are not allowed")
            if not (0 <= i < self.n and 0 <= j < self.n):
                raise ContractViolation(f"edge ({i}, {j}) out of range")
            clean.append((min(i, j), max(i, j), w))
        object.__setattr__(self, "edges", tuple(clean))

    def adjacency(self) -> np.ndarray:
        a = np.zeros((self.n, self.n))
        for i, j, w in self.edges:
            a[i, j] += w
            a[j, i] += w
        return a

    def cut_value(self, bits) -> float:
        return float(sum(w for i, j, w in self.edges if bits[i] != bits[j]))

    @classmethod
    def from_adjacency(cls, a) -> "GraphSpec":
        a = np.asarray(a, dtype=float)
        n = a.shape[0]
        edges = [(i, j, a[i, j]) for i in range(n) for j in range(i + 1, n) if a[i, j] != 0]
        return cls(n, tuple(edges))

    @classmethod
    def random_regular(cls, degree: int, n: int, rng) -> "GraphSpec":
        """Random simple ``degree``-regular graph by the pairing model with rejection."""
        gen = as_generator(rng)
        if (degree * n) % 2 or degree >= n:
            raise ContractViolation("no simple regular graph with these parameters")
        for _ in range(10000):
            stubs = np.repeat(np.arange(n), degree)
            gen.shuffle(stubs)
            pairs = stubs.reshape(-1, 2)
            if np.any(pairs[:, 0] == pairs[:, 1]):
                continue
            keys = {(min(a, b), max(a, b)) for a, b in pairs}
            if len(keys) == len(pairs):
                return cls(n, tuple((a, b, 1.0) for a, b in sorted(keys)))
        raise ContractViolation("failed to sample a regular graph")


def parse_edge_list(text: str, n: int | None = None) -> GraphSpec:
    """Edge list lines ``i j [w]``; ``#`` starts a comment."""
    edges = []
    for line in text.splitlines():
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) not in (2, 3):
            raise ContractViolation(f"bad edge line {line!r}")
        edges.append((int(parts[0]), int(parts[1]), float(parts[2]) if len(parts) == 3 else 1.0))
    size = n if n is not None else 1 + max(max(i, j) for i, j, _ in edges)
    return GraphSpec(size, tuple(edges))


# The 5-vertex example graph used throughout the annealing demos.
EXAMPLE_GRAPH_ADJACENCY = np.array(
    [
        [0, 1, 1, 0, 0],
        [1, 0, 1, 1, 0],
        [1, 1, 0, 1, 1],
        [0, 1, 1, 0, 1],
        [0, 0, 1, 1, 0],
    ],
    dtype=float,
)


def example_graph() -> GraphSpec:
    return GraphSpec.from_adjacency(EXAMPLE_GRAPH_ADJACENCY)


# ----------------------------------------------------------------------------- encoders


class _QuboBuilder:
    def __init__(self, n):
        self.q = np.zeros((n, n))
        self.c = np.zeros(n)
        self.offset = 0.0

    def add_product(self, u, v, w):
        if u == v:
            self.c[u] += w
        else:
            self.q[u, v] += w / 2
            self.q[v, u] += w / 2

    def add_one_minus_sum_squared(self, idx):
        # (1 − Σ x)² = 1 − Σ x + Σ_{a≠b} x_a x_b   (x² = x)
        self.offset += 1.0
        for a in idx:
            self.c[a] -= 1.0
        for a in idx:
            for b in idx:
                if a != b:
                    self.q[a, b] += 1.0

    def build(self) -> QuboProblem:
        return QuboProblem(self.q, self.c, self.offset)


def encode_maxcut(g: GraphSpec) -> QuboProblem:
    """f(x) = Σ_{i,j} A_ij (2 x_i x_j − x_i − x_j); equals −2·cut(x)."""
    if g.n < 2:
        raise ContractViolation("Max-Cut needs at least two vertices")
    a = g.adjacency()
    return QuboProblem(2 * a, -2 * a.sum(axis=1), 0.0)


def maxcut_from_value(value: float) -> float:
    return -value / 2


def encode_tsp(distances, adjacency: GraphSpec | np.ndarray | None = None, h: float = 0.1) -> QuboProblem:
    """Tour QUBO on variables x[i, μ] (city i at position μ), index i·N + μ.

    Positions wrap around, so the last position is followed by the first.
    """
    d = np.asarray(distances, dtype=float)
    N = d.shape[0]
    if d.shape != (N, N):
        raise ContractViolation("distance matrix must be square")
    if not 0 < h * d.max() < 1:
        raise ContractViolation("need 0 < h·max(d) < 1")
    if adjacency is None:
        a = np.ones((N, N)) - np.eye(N)
    elif isinstance(adjacency, GraphSpec):
        a = (adjacency.adjacency() != 0).astype(float)
    else:
        a = (np.asarray(adjacency) != 0).astype(float)
    var = lambda i, mu: i * N + mu  # noqa: E731
    b = _QuboBuilder(N * N)
    for i in range(N):
        b.add_one_minus_sum_squared([var(i, mu) for mu in range(N)])
    for mu in range(N):
        b.add_one_minus_sum_squared([var(i, mu) for i in range(N)])
    for i in range(N):
        for j in range(N):
            w = (1.0 - a[i, j]) + h * d[i, j]
            if w == 0:
                continue
            for mu in range(N):
                b.add_product(var(i, mu), var(j, (mu + 1) % N), w)
    return b.build()


def tour_length(distances, order: Sequence[int]) -> float:
    d = np.asarray(distances, dtype=float)
    return float(sum(d[order[k], order[(k + 1) % len(order)]] for k in range(len(order))))


# ----------------------------------------------------------------------------- Ising mapping


def qubo_to_ising(p: QuboProblem) -> IsingModel:
    q, c = p.q, p.c
    n = p.n
    off = q - np.diag(np.diag(q))
    J = -off / 2
    h = -(off.sum(axis=1) / 2 + (np.diag(q) + c) / 2)
    C = np.triu(off, 1).sum() / 2 + np.sum(np.diag(q) + c) / 2 + p.offset
    return IsingModel(J, h, C)


def ising_to_qubo(m: IsingModel) -> QuboProblem:
    q = -2 * m.J
    c = -2 * m.h + 2 * m.J.sum(axis=1)
    offset = m.C - np.triu(m.J, 1).sum() + m.h.sum()
    return QuboProblem(q, c, offset)


# ----------------------------------------------------------------------------- brute force


def all_bitstrings(n: int) -> np.ndarray:
    """All 2^n bit rows, site 0 most significant."""
    idx = np.arange(2**n)
    return ((idx[:, None] >> np.arange(n - 1, -1, -1)) & 1).astype(np.int8)


def cost_values(problem, bits: np.ndarray) -> np.ndarray:
    if isinstance(problem, QuboProblem):
        return problem.values(bits)
    if isinstance(problem, IsingModel):
        return problem.values(bits)
    if isinstance(problem, PatternSet):
        return problem.values(bits)
    raise ContractViolation("unsupported problem type")


def _n_of(problem) -> int:
    return problem.n


def brute_force_minimize(problem, spectrum: bool = False, chunk: int = 1 << 18):
    """Exhaustive minimum; returns (bits, value) or (bits, value, all values)."""
    n = _n_of(problem)
    if n > BRUTE_FORCE_MAX_N:
        raise ResourceGuardError(f"brute force limited to n <= {BRUTE_FORCE_MAX_N}", estimate=2**n)
    best_val, best_idx = np.inf, 0
    values = np.empty(2**n) if spectrum else None
    shifts = np.arange(n - 1, -1, -1)
    for start in range(0, 2**n, chunk):
        idx = np.arange(start, min(start + chunk, 2**n))
        bits = ((idx[:, None] >> shifts) & 1).astype(np.int8)
        vals = cost_values(problem, bits)
        k = int(np.argmin(vals))
        if vals[k] < best_val - 1e-12:
            best_val, best_idx = float(vals[k]), int(idx[k])
        if spectrum:
            values[idx] = vals
    bits = tuple(int(b) for b in ((best_idx >> shifts) & 1))
    return (bits, best_val, values) if spectrum else (bits, best_val)


# ----------------------------------------------------------------------------- patterns


@dataclass(frozen=True, eq=False)
class PatternSet:
    """Cost Σ_μ kernel_μ[x_μ(σ)] + constant.

    ``patterns`` has entries in {−1, 0, +1}; zero marks sites outside the
    pattern's support.  ``kernels[μ]`` is indexed by the Hamming distance
    ``x`` on the support (length support size + 1), i.e. it tabulates
    𝔥(m − 2x) for overlap ``m − 2x``.
    """

    patterns: np.ndarray
    kernels: tuple
    constant: float = 0.0

    def __post_init__(self):
        pats = np.asarray(self.patterns, dtype=int)
        if pats.ndim != 2 or not np.all(np.isin(pats, (-1, 0, 1))):
            raise ContractViolation("patterns must be a matrix with entries in {-1, 0, 1}")
        kernels = tuple(np.asarray(k, dtype=float) for k in self.kernels)
        if len(kernels) != pats.shape[0]:
            raise ContractViolation("one kernel table per pattern")
        for p, k in zip(pats, kernels):
            if k.shape != (int(np.count_nonzero(p)) + 1,):
                raise ContractViolation("kernel table length must be support size + 1")
        object.__setattr__(self, "patterns", pats)
        object.__setattr__(self, "kernels", kernels)

    @property
    def n(self) -> int:
        return self.patterns.shape[1]

    def hamming(self, bits: np.ndarray) -> np.ndarray:
        sigma = 2 * np.asarray(bits, dtype=int) - 1
        mism = (self.patterns[None, :, :] * sigma[:, None, :]) == -1
        return mism.sum(axis=2)

    def values(self, bits: np.ndarray) -> np.ndarray:
        x = self.hamming(np.atleast_2d(bits))
        out = np.full(x.shape[0], self.constant)
        for mu, k in enumerate(self.kernels):
            out += k[x[:, mu]]
        return out

    @classmethod
    def hopfield(cls, xi, scale: float = 1.0) -> "PatternSet":
        """Cost scale·Σ_μ (ξ^μ·σ)² with full ±1 patterns."""
        xi = np.asarray(xi, dtype=int)
        N = xi.shape[1]
        y = N - 2 * np.arange(N + 1)
        return cls(xi, tuple(scale * y.astype(float) ** 2 for _ in range(xi.shape[0])))

    @classmethod
    def from_kernel(cls, xi, kernel) -> "PatternSet":
        """Full ±1 patterns sharing one kernel function 𝔥(y)."""
        xi = np.asarray(xi, dtype=int)
        N = xi.shape[1]
        y = N - 2 * np.arange(N + 1)
        return cls(xi, tuple(np.array([kernel(v) for v in y], dtype=float) for _ in range(xi.shape[0])))


def ising_to_patterns(m: IsingModel, tol: float = 0.0) -> PatternSet:
    """Couplings become support-2 patterns, fields support-1 patterns."""
    n = m.n
    pats, kernels = [], []
    for i in range(n):
        for j in range(i + 1, n):
            J = m.J[i, j]
            if abs(J) > tol:
                p = np.zeros(n, dtype=int)
                p[i] = p[j] = 1
                y = 2 - 2 * np.arange(3)
                pats.append(p)
                kernels.append(-J * (y**2 / 2 - 1))
    for i in range(n):
        if abs(m.h[i]) > tol:
            p = np.zeros(n, dtype=int)
            p[i] = 1
            pats.append(p)
            kernels.append(-m.h[i] * (1 - 2 * np.arange(2)))
    if not pats:
        pats = [np.zeros(n, dtype=int)]
        kernels = [np.zeros(1)]
    return PatternSet(np.array(pats), tuple(kernels), m.C)


def as_patterns(problem) -> PatternSet:
    if isinstance(problem, PatternSet):
        return problem
    if isinstance(problem, IsingModel):
        return ising_to_patterns(problem)
    if isinstance(problem, QuboProblem):
        return ising_to_patterns(qubo_to_ising(problem))
    raise ContractViolation("unsupported problem type")


def fourier_weights(table: np.ndarray) -> np.ndarray:
    """Ũ_k = (1/√(m+1)) Σ_x e^{−2πikx/(m+1)} table[x]."""
    m1 = table.size
    k = np.arange(m1)
    f = np.exp(-2j * np.pi * np.outer(k, np.arange(m1)) / m1)
    return f @ table / np.sqrt(m1)


def inverse_fourier(weights: np.ndarray) -> np.ndarray:
    m1 = weights.size
    f = np.exp(2j * np.pi * np.outer(np.arange(m1), np.arange(m1)) / m1)
    return f @ weights / np.sqrt(m1)


def _diagonal_pattern_sites(pattern: np.ndarray, table: np.ndarray) -> list[np.ndarray]:
    """Diagonal MPO tensors w[k, b, k'] for diag_b Σ_k (Ũ_k/√(m+1)) e^{2πik x/(m+1)}."""
    n = pattern.size
    support = np.flatnonzero(pattern)
    m1 = table.size
    if support.size == 0:
        return [np.ones((1, 2, 1), dtype=complex) * (table[0] if j == 0 else 1.0) for j in range(n)]
    weights = fourier_weights(table) / np.sqrt(m1)
    k = np.arange(m1)
    first, last = support[0], support[-1]
    sites = []
    for j in range(n):
        if j < first or j > last:
            sites.append(np.ones((1, 2, 1), dtype=complex))
            continue
        if pattern[j] != 0:
            sigma = np.array([-1, 1])
            mismatch = (1 - pattern[j] * sigma) // 2  # per bit b = 0, 1
            diag = np.exp(2j * np.pi * np.outer(k, mismatch) / m1)  # (k, b)
        else:
            diag = np.ones((m1, 2), dtype=complex)
        if j == first:
            diag = diag * weights[:, None]
        if first == last:
            w = diag.sum(axis=0).reshape(1, 2, 1)
        elif j == first:
            w = diag.T[None, :, :]  # (1, b, k)
        elif j == last:
            w = diag[:, :, None]  # (k, b, 1)
        else:
            w = np.zeros((m1, 2, m1), dtype=complex)
            w[k, :, k] = diag
        sites.append(w)
    return sites


def _diag_to_mpo(sites: list[np.ndarray]) -> Mpo:
    out = []
    for w in sites:
        full = np.zeros((w.shape[0], 2, 2, w.shape[2]), dtype=complex)
        full[:, 0, 0, :] = w[:, 0, :]
        full[:, 1, 1, :] = w[:, 1, :]
        out.append(full)
    return Mpo(tuple(out))


def build_uz_pattern_mpo(ps: PatternSet, mu: int, gamma: float) -> Mpo:
    """Diagonal MPO of exp(−iγ·kernel_μ[x_μ(σ)])."""
    table = np.exp(-1j * gamma * ps.kernels[mu])
    return _diag_to_mpo(_diagonal_pattern_sites(ps.patterns[mu], table))


def build_pattern_cost_mpo(ps: PatternSet, mu: int) -> Mpo:
    """Diagonal MPO of kernel_μ[x_μ(σ)] (bond = support size + 1)."""
    return _diag_to_mpo(_diagonal_pattern_sites(ps.patterns[mu], ps.kernels[mu].astype(complex)))


def pattern_energy(ps: PatternSet, s: Mps, cost_mpos=None) -> float:
    mpos = cost_mpos if cost_mpos is not None else [build_pattern_cost_mpo(ps, mu) for mu in range(len(ps.kernels))]
    return float(ps.constant + sum(expectation(s, o).real for o in mpos))


# ----------------------------------------------------------------------------- dQA


@dataclass(frozen=True)
class DqaSchedule:
    P: int
    tau: float

    def __post_init__(self):
        if int(self.P) < 1 or not self.tau > 0:
            raise ContractViolation("schedule needs P >= 1 and tau > 0")

    @property
    def dt(self) -> float:
        return self.tau / self.P

    def angles(self):
        """(β_p, γ_p) for p = 1..P with s_p = p/P."""
        s = np.arange(1, self.P + 1) / self.P
        return (1 - s) * self.dt, s * self.dt


def ux_gate(beta: float) -> np.ndarray:
    """exp(iβX) = exp(−iβ H_x) with H_x = −Σ X."""
    return np.cos(beta) * np.eye(2) + 1j * np.sin(beta) * np.array([[0, 1], [1, 0]])


def _apply_ux(s: Mps, beta: float) -> Mps:
    g = ux_gate(beta)
    for j in range(s.n):
        s = apply_single(s, g, j)
    return s


def _zip_up(sites_w, src, policy) -> Mps:
    """One left-to-right pass of W|s> with a truncated SVD per site.

    Exact whenever the bond cap exceeds the true ranks, since ``src`` is right-canonical.
    """
    out = []
    carry = np.ones((1, 1, 1), dtype=complex)  # (new bond, k, old bond)
    for w, a in zip(sites_w, src):
        t = np.einsum("xka,kbl,abc->xblc", carry, w, a)
        x, b, l, c = t.shape
        res = tc.svd_truncated(t.reshape(x * b, l * c), policy)
        out.append(res.left.reshape(x, b, -1))
        carry = (res.singulars[:, None] * res.right).reshape(-1, l, c)
    out[-1] = np.einsum("xbr,rlc->xbc", out[-1], carry)
    return Mps(tuple(out))


def _fit_diagonal(sites_w, s: Mps, chi: int, sweeps: int) -> Mps:
    """Two-site variational fit of W|s> with W given by diagonal tensors w[k, b, k'].

    The product W|s> is never formed; environments hold (new bond, k, old bond).
    """
    n = s.n
    src = list(canonicalize(s, "right").sites)
    policy = TruncationPolicy(max_bond=chi)
    # The pre-MPO state is a poor guess: its environments can hide correlations
    # between distant pattern sites, leaving the sweeps stuck at too small a bond.
    new = list(canonicalize(_zip_up(sites_w, src, policy), "right").sites)

    def block(i):
        # (W s)_i as a local tensor with legs (k·a, b, k'·a') without fusing the bond
        return np.einsum("kbl,abc->kablc", sites_w[i], src[i])

    blocks = [block(i) for i in range(n)]
    left = [None] * (n + 1)
    right = [None] * (n + 1)
    left[0] = np.ones((1, 1, 1), dtype=complex)
    right[n] = np.ones((1, 1, 1), dtype=complex)

    def upd_left(i):
        t = np.einsum("xka,kabld->xbld", left[i], blocks[i])
        left[i + 1] = np.einsum("xbld,xby->yld", t, new[i].conj())

    def upd_right(i):
        t = np.einsum("kablc,ylc->kaby", blocks[i], right[i + 1])
        right[i] = np.einsum("kaby,xby->xka", t, new[i].conj())

    for i in range(n - 1, 0, -1):
        upd_right(i)
    for _ in range(sweeps):
        for i in range(n - 1):
            t = np.einsum("xka,kabld->xbld", left[i], blocks[i])
            t = np.einsum("xbld,ldcme->xbcme", t, blocks[i + 1])
            t = np.einsum("xbcme,yme->xbcy", t, right[i + 2])
            sh = t.shape
            res = tc.svd_truncated(t.reshape(sh[0] * sh[1], sh[2] * sh[3]), policy)
            new[i] = res.left.reshape(sh[0], sh[1], -1)
            new[i + 1] = (res.singulars[:, None] * res.right).reshape(-1, sh[2], sh[3])
            upd_left(i)
        for i in range(n - 2, -1, -1):
            t = np.einsum("xka,kabld->xbld", left[i], blocks[i])
            t = np.einsum("xbld,ldcme->xbcme", t, blocks[i + 1])
            t = np.einsum("xbcme,yme->xbcy", t, right[i + 2])
            sh = t.shape
            res = tc.svd_truncated(t.reshape(sh[0] * sh[1], sh[2] * sh[3]), policy)
            new[i + 1] = res.right.reshape(-1, sh[2], sh[3])
            new[i] = (res.left * res.singulars[None, :]).reshape(sh[0], sh[1], -1)
            upd_right(i + 1)
    return Mps(tuple(new), center=0, log_norm=s.log_norm, discarded_weight=s.discarded_weight)


def apply_diagonal_mpo(sites_w, s: Mps, chi: int | None, compress: str = "optimized", sweeps: int = 2) -> Mps:
    """Apply a diagonal MPO and bring the bond back to ``chi``; result is normalized."""
    if s.n == 1 or chi is None and compress == "optimized":
        compress = "svd"
    if compress == "optimized":
        out = _fit_diagonal(sites_w, s, chi, sweeps)
    else:
        exact = []
        for w, a in zip(sites_w, s.sites):
            b = np.einsum("kbl,xbc->kxblc", w, a)
            sh = b.shape
            exact.append(b.reshape(sh[0] * sh[1], sh[2], sh[3] * sh[4]))
        out = Mps(tuple(exact), log_norm=s.log_norm, discarded_weight=s.discarded_weight)
        if compress == "svd":
            out = svd_compress(out, TruncationPolicy(max_bond=chi))
        elif compress == "variational":
            out = variational_compress(out, chi if chi is not None else out.max_bond, sweeps)
        else:
            raise ContractViolation(f"unknown compression {compress!r}")
    return out.normalized()


class DqaResult(NamedTuple):
    state: Mps
    energy_trace: list
    residual_energy: float | None


def _pattern_layers(ps: PatternSet, gamma: float):
    for mu in range(len(ps.kernels)):
        table = np.exp(-1j * gamma * ps.kernels[mu])
        yield _diagonal_pattern_sites(ps.patterns[mu], table)


def evolve_angles(problem, betas, gammas, chi: int | None, compress: str = "optimized", sweeps: int = 2,
                  trace: bool = False):
    """|ψ> = Π_p U_x(β_p) U_z(γ_p) |+...+>; returns (state, energy trace, pattern set, cost MPOs)."""
    ps = as_patterns(problem)
    cost_mpos = [build_pattern_cost_mpo(ps, mu) for mu in range(len(ps.kernels))]
    s = make_named_state("plus_all", ps.n)
    energies = []
    for beta, gamma in zip(betas, gammas):
        for sites_w in _pattern_layers(ps, gamma):
            s = apply_diagonal_mpo(sites_w, s, chi, compress, sweeps)
        s = _apply_ux(s, beta)
        if trace:
            energies.append(pattern_energy(ps, s, cost_mpos))
    return s, energies, ps, cost_mpos


def run_dqa(problem, schedule: DqaSchedule, chi: int | None = 16, compress: str = "optimized",
            sweeps: int = 2) -> DqaResult:
    """Digitized annealing from |+...+>; energy recorded after every step.

    The residual energy is final energy minus the brute-force minimum, or
    ``None`` when the instance is too large to enumerate.
    """
    betas, gammas = schedule.angles()
    s, energies, ps, _ = evolve_angles(problem, betas, gammas, chi, compress, sweeps, trace=True)
    residual = None
    if ps.n <= BRUTE_FORCE_MAX_N:
        _, emin = brute_force_minimize(ps)
        residual = energies[-1] - emin
    return DqaResult(s, energies, residual)


def best_of_samples(problem, s: Mps, count: int, rng):
    """Sample ``count`` bitstrings; return (best bits, best value, most frequent bits, its value)."""
    bits, _ = sample_bitstrings(s, count, rng)
    vals = cost_values(problem, bits)
    k = int(np.argmin(vals))
    uniq, inv, counts = np.unique(bits, axis=0, return_inverse=True, return_counts=True)
    top = int(np.argmax(counts))
    top_bits = tuple(int(b) for b in uniq[top])
    return tuple(int(b) for b in bits[k]), float(vals[k]), top_bits, float(cost_values(problem, uniq[top][None])[0])


def qaoa_energy(problem, betas, gammas, chi: int | None = None, compress: str = "optimized") -> float:
    if len(betas) != len(gammas):
        raise ContractViolation("beta and gamma lists differ in length")
    s, _, ps, cost_mpos = evolve_angles(problem, betas, gammas, chi, compress)
    return pattern_energy(ps, s, cost_mpos)


def qaoa_optimize(problem, betas0, gammas0, chi: int | None = None, iterations: int = 200, step: float = 0.1):
    """Plain derivative-free coordinate search over the angles (no claims of optimality)."""
    x = np.concatenate([np.asarray(betas0, float), np.asarray(gammas0, float)])
    p = len(betas0)
    f = lambda v: qaoa_energy(problem, v[:p], v[p:], chi)  # noqa: E731
    best = f(x)
    evals = 1
    while step > 1e-4 and evals < iterations:
        improved = False
        for i in range(x.size):
            for sgn in (1, -1):
                y = x.copy()
                y[i] += sgn * step
                val = f(y)
                evals += 1
                if val < best - 1e-12:
                    x, best, improved = y, val, True
                    break
        if not improved:
            step /= 2
    return x[:p], x[p:], best


# ----------------------------------------------------------------------------- io


def qubo_from_file(path) -> QuboProblem:
    with open(path) as fh:
        return QuboProblem.from_json(json.load(fh))
