"""Matrix product operators and Hamiltonian builders.

Site tensors have legs ``(left bond, out, in, right bond)``.  Builders use
lower-triangular operator-valued bulk matrices: the left boundary is the
last row and the right boundary the first column.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import reduce
from typing import Sequence

import numpy as np

from . import tensor as tc
from .errors import ContractViolation, ShapeMismatchError
from .mps import Mps, canonicalize, svd_compress
from .pauli import I2, X, Y, Z, PauliString, as_pauli
from .tensor import TruncationPolicy

AXES = {"X": X, "Y": Y, "Z": Z}


@dataclass(frozen=True, eq=False)
class Mpo:
    sites: tuple

    def __post_init__(self):
        sites = tuple(tc.as_tensor(w) for w in self.sites)
        if not sites:
            raise ContractViolation("an MPO needs at least one site")
        for w in sites:
            if w.ndim != 4:
                raise ContractViolation("MPO site tensors must be order 4")
        if sites[0].shape[0] != 1 or sites[-1].shape[3] != 1:
            raise ContractViolation("boundary bonds must have dimension 1")
        for a, b in zip(sites[:-1], sites[1:]):
            if a.shape[3] != b.shape[0]:
                raise ContractViolation("adjacent bond dimensions do not match")
        object.__setattr__(self, "sites", sites)

    @property
    def n(self) -> int:
        return len(self.sites)

    @property
    def phys_dims(self) -> list[int]:
        return [w.shape[1] for w in self.sites]

    @property
    def bond_dims(self) -> list[int]:
        return [w.shape[3] for w in self.sites[:-1]]

    def to_dense(self) -> np.ndarray:
        op = self.sites[0][0]  # (out, in, r)
        for w in self.sites[1:]:
            op = np.tensordot(op, w, axes=([-1], [0]))  # (..., out, in, r)
        op = op[..., 0]
        k = self.n
        perm = [2 * i for i in range(k)] + [2 * i + 1 for i in range(k)]
        dim = int(np.prod(self.phys_dims))
        return op.transpose(perm).reshape(dim, dim)

    def dagger(self) -> "Mpo":
        return Mpo(tuple(w.conj().transpose(0, 2, 1, 3) for w in self.sites))

    def scaled(self, c: complex) -> "Mpo":
        sites = list(self.sites)
        sites[0] = sites[0] * c
        return Mpo(tuple(sites))

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "phys": self.phys_dims,
            "sites": [tc.tensor_to_json(w) for w in self.sites],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "Mpo":
        return cls(tuple(tc.tensor_from_json(t) for t in obj["sites"]))


# ----------------------------------------------------------------------------- operator specs


@dataclass(frozen=True)
class OperatorSpec:
    """Symbolic Hamiltonian description; see the classmethod constructors."""

    variant: str
    n: int
    params: dict = field(default_factory=dict)

    @classmethod
    def local_field(cls, h: Sequence[float], axis: str = "Z") -> "OperatorSpec":
        if axis not in AXES:
            raise ContractViolation(f"unknown axis {axis!r}")
        return cls("local_field", len(h), {"h": [float(x) for x in h], "axis": axis})

    @classmethod
    def xxz(cls, n: int, delta: float, J: float = 1.0) -> "OperatorSpec":
        """J Σ (X X + Y Y + Δ Z Z) on nearest neighbours."""
        return cls("xxz", n, {"delta": float(delta), "J": float(J)})

    @classmethod
    def long_range(cls, n: int, alphas, lambdas, op: str = "Z") -> "OperatorSpec":
        """Σ_k Σ_{i<j} α_k λ_k^(j-i-1) S_i S_j."""
        alphas = [float(a) for a in alphas]
        lambdas = [float(x) for x in lambdas]
        if len(alphas) != len(lambdas) or not alphas:
            raise ContractViolation("need matching non-empty weight and decay lists")
        if any(not 0 < x <= 1 for x in lambdas):
            raise ContractViolation("decay rates must lie in (0, 1]")
        return cls("long_range", n, {"alphas": alphas, "lambdas": lambdas, "op": op})

    @classmethod
    def pauli_sum(cls, terms) -> "OperatorSpec":
        parsed = [(complex(c), as_pauli(p)) for c, p in terms]
        if not parsed:
            raise ContractViolation("empty Pauli sum")
        n = parsed[0][1].n
        if any(p.n != n for _, p in parsed):
            raise ShapeMismatchError("Pauli strings of different lengths")
        return cls("pauli_sum", n, {"terms": parsed})

    @classmethod
    def tfi(cls, n: int, J: float = 1.0, g: float = 1.0, h: float = 0.0) -> "OperatorSpec":
        """Transverse-field Ising chain −J Σ ZZ − g Σ X − h Σ Z as a Pauli sum."""
        terms = []
        for i in range(n - 1):
            terms.append((-J, _letters(n, {i: "Z", i + 1: "Z"})))
        for i in range(n):
            terms.append((-g, _letters(n, {i: "X"})))
            if h:
                terms.append((-h, _letters(n, {i: "Z"})))
        return cls.pauli_sum([(c, p) for c, p in terms if c != 0])

    def is_hermitian(self) -> bool:
        if self.variant == "pauli_sum":
            return all(abs((c * p.coefficient()).imag) < 1e-14 for c, p in self.params["terms"])
        return True

    def pauli_terms(self) -> list[tuple[float, PauliString]]:
        """Expansion into real-coefficient Hermitian Pauli strings (no phase)."""
        n = self.n
        out = []
        if self.variant == "local_field":
            ax = self.params["axis"]
            out = [(h, _letters(n, {i: ax})) for i, h in enumerate(self.params["h"])]
        elif self.variant == "xxz":
            J, d = self.params["J"], self.params["delta"]
            for i in range(n - 1):
                for ax, c in (("X", J), ("Y", J), ("Z", J * d)):
                    out.append((c, _letters(n, {i: ax, i + 1: ax})))
        elif self.variant == "long_range":
            ax = self.params["op"]
            for i in range(n):
                for j in range(i + 1, n):
                    c = sum(a * lam ** (j - i - 1) for a, lam in zip(self.params["alphas"], self.params["lambdas"]))
                    out.append((c, _letters(n, {i: ax, j: ax})))
        elif self.variant == "pauli_sum":
            for c, p in self.params["terms"]:
                coeff = c * p.coefficient()
                if abs(coeff.imag) > 1e-14:
                    raise ContractViolation("pauli_sum with a non-real coefficient is not Hermitian")
                out.append((coeff.real, p.with_phase(0)))
        else:
            raise ContractViolation(f"unknown variant {self.variant!r}")
        return [(c, p) for c, p in out if c != 0]

    def to_json(self) -> dict:
        params = dict(self.params)
        if self.variant == "pauli_sum":
            params["terms"] = [[_real_or_pair(c), p.to_text()] for c, p in self.params["terms"]]
        return {"variant": self.variant, "n": self.n, **params}

    @classmethod
    def from_json(cls, obj: dict) -> "OperatorSpec":
        v = obj["variant"]
        if v == "local_field":
            return cls.local_field(obj["h"], obj.get("axis", "Z"))
        if v == "xxz":
            return cls.xxz(obj["n"], obj["delta"], obj.get("J", 1.0))
        if v == "long_range":
            return cls.long_range(obj["n"], obj["alphas"], obj["lambdas"], obj.get("op", "Z"))
        if v == "pauli_sum":
            return cls.pauli_sum([(_complex(c), p) for c, p in obj["terms"]])
        raise ContractViolation(f"unknown variant {v!r}")


def _real_or_pair(c: complex):
    return c.real if c.imag == 0 else [c.real, c.imag]


def _complex(c):
    return complex(c[0], c[1]) if isinstance(c, (list, tuple)) else complex(c)


def _letters(n: int, where: dict) -> PauliString:
    return PauliString.from_text("".join(where.get(i, "I") for i in range(n)))


# ----------------------------------------------------------------------------- builders


def _from_operator_matrix(bulk_fn, n: int, d: int = 2) -> Mpo:
    """Assemble an MPO from per-site operator-valued matrices W_j[a][b] (d×d each).

    The first site keeps the last row, the last site the first column.
    """
    sites = []
    for j in range(n):
        mat = bulk_fn(j)
        D = len(mat)
        w = np.zeros((D, d, d, D), dtype=complex)
        for a in range(D):
            for b in range(D):
                if mat[a][b] is not None:
                    w[a, :, :, b] = mat[a][b]
        if j == 0:
            w = w[-1:]
        if j == n - 1:
            w = w[..., :1]
        sites.append(w)
    return Mpo(tuple(sites))


def build_local_field(h: Sequence[float], axis: str = "Z") -> Mpo:
    op = AXES[axis]
    return _from_operator_matrix(lambda j: [[I2, None], [h[j] * op, I2]], len(h))


def build_xxz(n: int, delta: float, J: float = 1.0) -> Mpo:
    if n < 2:
        raise ContractViolation("xxz needs n >= 2")

    def bulk(j):
        return [
            [I2, None, None, None, None],
            [X, None, None, None, None],
            [Y, None, None, None, None],
            [Z, None, None, None, None],
            [None, J * X, J * Y, J * delta * Z, I2],
        ]

    return _from_operator_matrix(bulk, n)


def build_long_range(n: int, alphas, lambdas, op: str = "Z") -> Mpo:
    if n < 2:
        raise ContractViolation("long-range MPOs need n >= 2")
    s = AXES[op]
    K = len(alphas)

    def bulk(j):
        D = K + 2
        mat = [[None] * D for _ in range(D)]
        mat[0][0] = I2
        mat[D - 1][D - 1] = I2
        for k in range(K):
            mat[k + 1][0] = s
            mat[k + 1][k + 1] = lambdas[k] * I2
            mat[D - 1][k + 1] = alphas[k] * s
        return mat

    return _from_operator_matrix(bulk, n)


def product_mpo(ops: Sequence[np.ndarray], coeff: complex = 1.0) -> Mpo:
    sites = [tc.as_tensor(o).reshape(1, o.shape[0], o.shape[1], 1).copy() for o in ops]
    sites[0] = sites[0] * coeff
    return Mpo(tuple(sites))


def pauli_string_mpo(p, coeff: complex = 1.0) -> Mpo:
    p = as_pauli(p)
    return product_mpo(p.site_ops(), coeff * p.coefficient())


def identity_mpo(n: int, d: int = 2) -> Mpo:
    return product_mpo([np.eye(d, dtype=complex)] * n)


def build_pauli_sum(terms, policy: TruncationPolicy | None = None) -> Mpo:
    """Direct sum of one product MPO per term, optionally compressed."""
    mpos = [pauli_string_mpo(p, c) for c, p in terms]
    out = direct_sum(mpos)
    if policy is not None and out.n > 1:
        out = compress_mpo(out, policy)
    return out


def build_mpo(spec: OperatorSpec, compress: bool = True) -> Mpo:
    v = spec.variant
    if v == "local_field":
        return build_local_field(spec.params["h"], spec.params["axis"])
    if v == "xxz":
        return build_xxz(spec.n, spec.params["delta"], spec.params["J"])
    if v == "long_range":
        return build_long_range(spec.n, spec.params["alphas"], spec.params["lambdas"], spec.params["op"])
    if v == "pauli_sum":
        return build_pauli_sum(spec.params["terms"], TruncationPolicy() if compress else None)
    raise ContractViolation(f"unknown variant {v!r}")


# ----------------------------------------------------------------------------- arithmetic


def _check(a, b):
    if a.n != b.n or a.phys_dims != b.phys_dims:
        raise ShapeMismatchError("registers differ")


def direct_sum(mpos: Sequence[Mpo]) -> Mpo:
    if not mpos:
        raise ContractViolation("nothing to sum")
    for m in mpos[1:]:
        _check(mpos[0], m)
    n = mpos[0].n
    if n == 1:
        return Mpo((sum(m.sites[0] for m in mpos),))
    sites = []
    for j in range(n):
        blocks = [m.sites[j] for m in mpos]
        dl = [b.shape[0] for b in blocks]
        dr = [b.shape[3] for b in blocks]
        d_out, d_in = blocks[0].shape[1:3]
        if j == 0:
            w = np.concatenate(blocks, axis=3)
        elif j == n - 1:
            w = np.concatenate(blocks, axis=0)
        else:
            w = np.zeros((sum(dl), d_out, d_in, sum(dr)), dtype=complex)
            ol = orr = 0
            for b in blocks:
                w[ol : ol + b.shape[0], :, :, orr : orr + b.shape[3]] = b
                ol += b.shape[0]
                orr += b.shape[3]
        sites.append(w)
    return Mpo(tuple(sites))


def mpo_sum(a: Mpo, b: Mpo) -> Mpo:
    return direct_sum([a, b])


def _as_mps(o: Mpo) -> Mps:
    return Mps(tuple(w.reshape(w.shape[0], -1, w.shape[3]) for w in o.sites))


def compress_mpo(o: Mpo, policy: TruncationPolicy) -> Mpo:
    """SVD compression with the physical legs fused into one."""
    if o.n == 1:
        return o
    shapes = [w.shape for w in o.sites]
    m = svd_compress(_as_mps(o), policy)
    sites = [a.reshape(a.shape[0], sh[1], sh[2], a.shape[2]) for a, sh in zip(m.sites, shapes)]
    return Mpo(tuple(sites))


def mpo_product(a: Mpo, b: Mpo) -> Mpo:
    """Operator product a·b."""
    _check(a, b)
    sites = []
    for wa, wb in zip(a.sites, b.sites):
        w = np.einsum("astb,ctud->acsubd", wa, wb)
        sh = w.shape
        sites.append(w.reshape(sh[0] * sh[1], sh[2], sh[3], sh[4] * sh[5]))
    return Mpo(tuple(sites))


def mpo_trace(o: Mpo) -> complex:
    env = np.ones(1, dtype=complex)
    for w in o.sites:
        env = env @ np.trace(w, axis1=1, axis2=2)
    return complex(env[0])


def trace_product(a: Mpo, b: Mpo) -> complex:
    """Tr(a·b) without forming the product."""
    _check(a, b)
    env = np.ones((1, 1), dtype=complex)
    for wa, wb in zip(a.sites, b.sites):
        env = np.einsum("ac,astb,ctsd->bd", env, wa, wb)
    return complex(env[0, 0])


def hermiticity_defect(o: Mpo) -> float:
    """Relative ‖O − O†‖_F / ‖O‖_F from MPO traces."""
    hh = trace_product(o.dagger(), o).real
    h2 = trace_product(o, o).real
    if hh <= 0:
        return 0.0
    return float(np.sqrt(max(2 * hh - 2 * h2, 0.0) / hh))


def is_hermitian(o: Mpo, tol: float = 1e-10) -> bool:
    return hermiticity_defect(o) <= tol


def apply_mpo(o: Mpo, s: Mps, policy: TruncationPolicy | None = None) -> Mps:
    """O|ψ>; the exact product has bond χ·D and is compressed when a policy is given."""
    if o.n != s.n or o.phys_dims != s.phys_dims:
        raise ShapeMismatchError("MPO and MPS registers differ")
    sites = []
    for w, a in zip(o.sites, s.sites):
        b = np.einsum("xsty,atb->xasyb", w, a)
        sh = b.shape
        sites.append(b.reshape(sh[0] * sh[1], sh[2], sh[3] * sh[4]))
    out = Mps(tuple(sites), log_norm=s.log_norm, discarded_weight=s.discarded_weight)
    if policy is not None:
        out = svd_compress(out, policy)
    return out


def expectation(s: Mps, o: Mpo) -> complex:
    """<ψ|O|ψ>/<ψ|ψ>."""
    if o.n != s.n or o.phys_dims != s.phys_dims:
        raise ShapeMismatchError("MPO and MPS registers differ")
    env = np.ones((1, 1, 1), dtype=complex)
    nenv = np.ones((1, 1), dtype=complex)
    for w, a in zip(o.sites, s.sites):
        env = np.einsum("xwa,atb->xwtb", env, a)
        env = np.einsum("xwtb,wsty->xsyb", env, w)
        env = np.einsum("xsyb,xsc->cyb", env, a.conj())
        nenv = np.tensordot(nenv, a, axes=([1], [0]))
        nenv = np.tensordot(a.conj(), nenv, axes=([0, 1], [0, 1]))
    return complex(env[0, 0, 0] / nenv[0, 0].real)


def projector_mpo(psi: Mps) -> Mpo:
    """|ψ><ψ| as an MPO with W = A ⊗ A*."""
    sites = []
    for a in canonicalize(psi, "left").normalized().sites:
        w = np.einsum("asb,ctd->acstbd", a, a.conj())
        sh = w.shape
        sites.append(w.reshape(sh[0] * sh[1], sh[2], sh[3], sh[4] * sh[5]))
    return Mpo(tuple(sites))


def dense_of_terms(terms, n: int) -> np.ndarray:
    """Dense matrix of a list of (coeff, PauliString); used for small checks."""
    dim = 2**n
    out = np.zeros((dim, dim), dtype=complex)
    for c, p in terms:
        out += c * reduce(np.kron, as_pauli(p).site_ops()) * as_pauli(p).coefficient()
    return out


# ----------------------------------------------------------------------------- nearest-neighbour split


def bond_terms(spec: OperatorSpec) -> list[np.ndarray]:
    """Split a nearest-neighbour Hamiltonian into n−1 two-site 4×4 terms.

    One-site terms are shared equally between the adjacent bonds (edge sites
    give theirs entirely to their single bond).
    """
    n = spec.n
    if n < 2:
        raise ContractViolation("need at least two sites")
    if spec.variant == "long_range":
        raise ContractViolation("long-range interactions are not nearest-neighbour")
    bonds = [np.zeros((4, 4), dtype=complex) for _ in range(n - 1)]
    for c, p in spec.pauli_terms():
        support = [i for i in range(n) if p.x[i] or p.z[i]]
        ops = p.site_ops()
        if len(support) == 0:
            bonds[0] += c * np.eye(4)
        elif len(support) == 1:
            j = support[0]
            share = [b for b in (j - 1, j) if 0 <= b < n - 1]
            for b in share:
                local = np.kron(ops[j], I2) if b == j else np.kron(I2, ops[j])
                bonds[b] += (c / len(share)) * local
        elif len(support) == 2 and support[1] == support[0] + 1:
            j = support[0]
            bonds[j] += c * np.kron(ops[j], ops[j + 1])
        else:
            raise ContractViolation(f"term {p.to_text()} is not nearest-neighbour")
    return bonds
