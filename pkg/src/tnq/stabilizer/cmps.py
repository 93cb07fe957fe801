"""Clifford-enhanced MPS: a Clifford unitary acting on a bounded-bond MPS.

The represented state is U_C |core⟩.  Pauli expectations reduce to MPS
expectations of the conjugated string U_C† σ U_C, and Pauli rotations
pushed through the accumulated Clifford become bond-2 MPOs.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import reduce

import numpy as np

from ..errors import ContractViolation, ShapeMismatchError
from ..mpo import Mpo, apply_mpo
from ..mps import Mps, expect_pauli_string, svd_compress
from ..pauli import I2, PauliString, as_pauli
from ..tensor import TruncationPolicy
from .tableau import Tableau

_AXES = ("X", "Y", "Z")


@dataclass
class Cmps:
    clifford: Tableau
    core: Mps

    def __post_init__(self):
        if not isinstance(self.clifford, Tableau):
            self.clifford = Tableau.from_gates(self.core.n, self.clifford)
        if self.clifford.n != self.core.n:
            raise ShapeMismatchError("Clifford and core registers differ")
        if set(self.core.phys_dims) != {2}:
            raise ContractViolation("core must be a qubit MPS")

    @classmethod
    def from_mps(cls, s: Mps) -> "Cmps":
        return cls(Tableau.identity(s.n), s)

    @property
    def n(self) -> int:
        return self.core.n

    def to_dense(self) -> np.ndarray:
        return self.clifford.dense_unitary() @ self.core.to_dense().reshape(-1)

    def expect(self, p) -> float:
        return cmps_expect(self, p)


def cmps_expect(c: Cmps, p) -> float | complex:
    """⟨φ|σ|φ⟩ = ⟨core|U_C† σ U_C|core⟩."""
    p = as_pauli(p)
    if p.n != c.n:
        raise ShapeMismatchError("Pauli string length differs from register")
    return expect_pauli_string(c.core, c.clifford.conjugate(p, "backward"))


# ----------------------------------------------------------------------------- stabilizer MPO


@dataclass(frozen=True)
class StabilizerMpo:
    """cos(θ/2)·I − i·sign·sin(θ/2)·Σ for an unsigned Pauli string Σ."""

    theta: float
    sigma: PauliString
    sign: int = 1

    def __post_init__(self):
        if self.sign not in (1, -1):
            raise ContractViolation("sign must be +1 or -1")
        if not self.sigma.is_hermitian:
            raise ContractViolation("Σ must be Hermitian")
        if self.sigma.phase == 2:
            object.__setattr__(self, "sigma", self.sigma.with_phase(0))
            object.__setattr__(self, "sign", -self.sign)

    @property
    def weights(self) -> tuple[complex, complex]:
        return np.cos(self.theta / 2), -1j * self.sign * np.sin(self.theta / 2)

    def to_mpo(self) -> Mpo:
        return build_stabilizer_mpo(self.theta, self.sigma, self.sign)

    def to_dense(self) -> np.ndarray:
        a, b = self.weights
        return a * np.eye(2**self.sigma.n) + b * self.sigma.to_dense()


def build_stabilizer_mpo(theta: float, sigma, sign: int = 1) -> Mpo:
    """Bond-2 MPO of cos(θ/2)·I − i·sign·sin(θ/2)·Σ.

    Both weights are split evenly over the sites as principal N-th roots,
    so every site tensor carries diag(a^{1/N} I, b^{1/N} σ_j).
    """
    sm = StabilizerMpo(float(theta), as_pauli(sigma), int(sign))
    a, b = sm.weights
    n = sm.sigma.n
    ops = sm.sigma.site_ops()
    if n == 1:
        return Mpo(((a * I2 + b * ops[0])[None, :, :, None],))
    ra = complex(a) ** (1.0 / n)
    rb = complex(b) ** (1.0 / n)
    sites = []
    for j, op in enumerate(ops):
        w = np.zeros((2, 2, 2, 2), dtype=complex)
        w[0, :, :, 0] = ra * I2
        w[1, :, :, 1] = rb * op
        if j == 0:
            w = w[:1] + w[1:]  # row vector (a I, b σ)
        elif j == n - 1:
            w = w[..., :1] + w[..., 1:]  # column vector
        sites.append(w)
    return Mpo(tuple(sites))


def auxiliary_spin_operator(theta: float, sigma, sign: int = 1) -> np.ndarray:
    """⟨θ| K_1 ⋯ K_N |X⟩ with K_j = |0⟩⟨0|⊗I + |1⟩⟨1|⊗σ_j, as a dense matrix.

    A controlled-Pauli reading of the stabilizer MPO; the auxiliary state
    ⟨θ| = (a, b) carries the two weights and |X⟩ = |0⟩ + |1⟩.
    """
    sm = StabilizerMpo(float(theta), as_pauli(sigma), int(sign))
    a, b = sm.weights
    ops = sm.sigma.site_ops()
    dim = 2**sm.sigma.n
    # K_1⋯K_N is block diagonal in the auxiliary qubit
    blocks = [np.eye(dim, dtype=complex), reduce(np.kron, ops)]
    theta_bra = np.array([a, b])
    x_ket = np.ones(2)
    return sum(theta_bra[k] * blocks[k] * x_ket[k] for k in range(2))


# ----------------------------------------------------------------------------- dressing


def _rotation(rot, n: int):
    if rot is None:
        return None
    site, axis, theta = rot
    axis = str(axis).upper()
    if axis not in _AXES:
        raise ContractViolation(f"rotation axis must be one of X, Y, Z, got {axis!r}")
    if not 0 <= int(site) < n:
        raise ContractViolation("rotation site out of range")
    return int(site), axis, float(theta)


def dress_unitary(layers, n: int):
    """Split U = Π_j R_j C_j into (C_acc, [stabilizer MPOs]).

    ``layers`` is a sequence of ``(clifford_gates, rotation)`` with the
    Clifford applied first and ``rotation = (site, axis, θ)`` or ``None``
    meaning R = exp(−iθσ/2).  Then U = C_acc · M_k ⋯ M_1 where M_j is the
    j-th rotation conjugated through the Clifford accumulated so far.
    """
    acc = Tableau.identity(n)
    mpos = []
    for gates, rot in layers:
        acc.apply_gates(gates)
        rot = _rotation(rot, n)
        if rot is None:
            continue
        site, axis, theta = rot
        sigma = acc.conjugate(PauliString.single(n, site, axis), "backward")
        mpos.append(StabilizerMpo(theta, sigma.with_phase(0), sigma.sign))
    return acc, mpos


def apply_dressed(s: Mps, clifford: Tableau, mpos, policy: TruncationPolicy | None = None) -> Cmps:
    """Apply the stabilizer MPOs to ``s`` in order and attach the final Clifford."""
    core = s
    for m in mpos:
        core = apply_mpo(m.to_mpo(), core)
        if policy is not None:
            core = svd_compress(core, policy)
    return Cmps(clifford.copy(), core)


def dense_circuit_unitary(layers, n: int) -> np.ndarray:
    """Dense Π_j R_j C_j for checking ``dress_unitary`` on small registers."""
    from .tableau import GATE_MATRICES, _normalize_gate, embed_gate
    from ..pauli import site_matrix

    letters = {"X": (1, 0), "Y": (1, 1), "Z": (0, 1)}
    u = np.eye(2**n, dtype=complex)
    for gates, rot in layers:
        for g in gates:
            name, qs = _normalize_gate(g)
            u = embed_gate(GATE_MATRICES[name], qs, n) @ u
        rot = _rotation(rot, n)
        if rot is not None:
            site, axis, theta = rot
            sig = site_matrix(*letters[axis])
            r = np.cos(theta / 2) * I2 - 1j * np.sin(theta / 2) * sig
            u = embed_gate(r, (site,), n) @ u
    return u


__all__ = ["Cmps", "cmps_expect", "StabilizerMpo", "build_stabilizer_mpo", "auxiliary_spin_operator",
           "dress_unitary", "apply_dressed", "dense_circuit_unitary"]
