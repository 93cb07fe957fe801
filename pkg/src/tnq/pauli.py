"""Pauli strings in binary symplectic form.

A string is ``i**phase * P_1 ⊗ ... ⊗ P_n`` with each ``P_j`` one of the
Hermitian Paulis I, X, Y, Z encoded by bits ``(x_j, z_j)``:
(0,0)=I, (1,0)=X, (1,1)=Y, (0,1)=Z.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import reduce

import numpy as np

from .errors import ContractViolation, ShapeMismatchError

I2 = np.eye(2, dtype=complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z = np.array([[1, 0], [0, -1]], dtype=complex)
PAULIS = (I2, X, Y, Z)  # index order used by the Pauli-basis code: I, X, Y, Z

_LETTER_BITS = {"I": (0, 0), "X": (1, 0), "Y": (1, 1), "Z": (0, 1)}
_BITS_LETTER = {v: k for k, v in _LETTER_BITS.items()}
_PREFIX = {0: "+", 1: "+i", 2: "-", 3: "-i"}


def site_matrix(x: int, z: int) -> np.ndarray:
    return {(0, 0): I2, (1, 0): X, (1, 1): Y, (0, 1): Z}[(int(x), int(z))]


@dataclass(frozen=True, eq=False)
class PauliString:
    x: np.ndarray
    z: np.ndarray
    phase: int = 0

    def __post_init__(self):
        x = np.asarray(self.x, dtype=np.uint8) & 1
        z = np.asarray(self.z, dtype=np.uint8) & 1
        if x.shape != z.shape or x.ndim != 1:
            raise ContractViolation("x and z bits must be equal-length vectors")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "z", z)
        object.__setattr__(self, "phase", int(self.phase) % 4)

    @property
    def n(self) -> int:
        return int(self.x.size)

    @classmethod
    def from_text(cls, text: str) -> "PauliString":
        s = text.strip()
        phase = 0
        if s.startswith(("+", "-")):
            phase = 0 if s[0] == "+" else 2
            s = s[1:]
        if s.startswith("i"):
            phase += 1
            s = s[1:]
        try:
            bits = [_LETTER_BITS[c] for c in s.upper()]
        except KeyError as exc:
            raise ContractViolation(f"bad Pauli letter in {text!r}") from exc
        if not bits:
            raise ContractViolation("empty Pauli string")
        x, z = zip(*bits)
        return cls(np.array(x), np.array(z), phase)

    @classmethod
    def identity(cls, n: int) -> "PauliString":
        return cls(np.zeros(n, np.uint8), np.zeros(n, np.uint8), 0)

    @classmethod
    def single(cls, n: int, site: int, letter: str) -> "PauliString":
        x = np.zeros(n, np.uint8)
        z = np.zeros(n, np.uint8)
        x[site], z[site] = _LETTER_BITS[letter]
        return cls(x, z, 0)

    def letters(self) -> str:
        return "".join(_BITS_LETTER[(int(a), int(b))] for a, b in zip(self.x, self.z))

    def to_text(self) -> str:
        return _PREFIX[self.phase] + self.letters()

    __str__ = to_text

    def __repr__(self):
        return f"PauliString({self.to_text()!r})"

    def __eq__(self, other):
        return (
            isinstance(other, PauliString)
            and self.phase == other.phase
            and np.array_equal(self.x, other.x)
            and np.array_equal(self.z, other.z)
        )

    def __hash__(self):
        return hash((self.phase, self.x.tobytes(), self.z.tobytes()))

    @property
    def is_hermitian(self) -> bool:
        return self.phase in (0, 2)

    @property
    def sign(self) -> int:
        if not self.is_hermitian:
            raise ContractViolation("non-Hermitian string has no real sign")
        return 1 if self.phase == 0 else -1

    def with_phase(self, phase: int) -> "PauliString":
        return PauliString(self.x, self.z, phase)

    def weight(self) -> int:
        return int(np.count_nonzero(self.x | self.z))

    def site_ops(self) -> list[np.ndarray]:
        """Per-site 2×2 matrices without the global phase."""
        return [site_matrix(a, b) for a, b in zip(self.x, self.z)]

    def coefficient(self) -> complex:
        return 1j**self.phase

    def to_dense(self) -> np.ndarray:
        return self.coefficient() * reduce(np.kron, self.site_ops())

    def __mul__(self, other: "PauliString") -> "PauliString":
        if self.n != other.n:
            raise ShapeMismatchError("Pauli strings differ in length")
        x1, z1, x2, z2 = (v.astype(np.int64) for v in (self.x, self.z, other.x, other.z))
        x3 = x1 ^ x2
        z3 = z1 ^ z2
        extra = int(np.sum(x1 * z1 + x2 * z2 + 2 * z1 * x2 - x3 * z3))
        return PauliString(x3, z3, self.phase + other.phase + extra)


def symplectic_commutes(g: PauliString, h: PauliString) -> bool:
    if g.n != h.n:
        raise ShapeMismatchError("Pauli strings differ in length")
    s = int(np.sum(g.x.astype(np.int64) * h.z) + np.sum(g.z.astype(np.int64) * h.x))
    return s % 2 == 0


def as_pauli(p) -> PauliString:
    return p if isinstance(p, PauliString) else PauliString.from_text(str(p))
