"""Clifford tableaux with destabilizer rows and sign bits.

Rows ``0..n-1`` hold destabilizers ``C X_j C†`` and rows ``n..2n-1`` the
stabilizers ``C Z_j C†`` of the Clifford ``C`` built so far.  Gate updates
follow the conjugation tables of H, S and CNOT, including their sign flips.
"""

from __future__ import annotations

from functools import reduce

import numpy as np

from ..errors import ContractViolation, ShapeMismatchError
from ..pauli import PauliString, as_pauli
from ..rng import as_generator

_SQ2 = 1 / np.sqrt(2)
GATE_MATRICES = {
    "I": np.eye(2, dtype=complex),
    "H": np.array([[1, 1], [1, -1]], dtype=complex) * _SQ2,
    "S": np.diag([1, 1j]).astype(complex),
    "SDG": np.diag([1, -1j]).astype(complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.diag([1, -1]).astype(complex),
    "CNOT": np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex),
    "CZ": np.diag([1, 1, 1, -1]).astype(complex),
    "SWAP": np.array([[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], dtype=complex),
}
_ARITY = {"I": 1, "H": 1, "S": 1, "SDG": 1, "X": 1, "Y": 1, "Z": 1, "CNOT": 2, "CZ": 2, "SWAP": 2}
_INVERSE = {"S": "SDG", "SDG": "S"}


def gf2_rank(m) -> int:
    a = np.array(m, dtype=np.uint8) & 1
    rank = 0
    rows, cols = a.shape
    for c in range(cols):
        pivot = next((r for r in range(rank, rows) if a[r, c]), None)
        if pivot is None:
            continue
        a[[rank, pivot]] = a[[pivot, rank]]
        others = np.flatnonzero(a[:, c])
        others = others[others != rank]
        a[others] ^= a[rank]
        rank += 1
        if rank == rows:
            break
    return rank


def _normalize_gate(gate):
    name, *qubits = gate if not isinstance(gate[1], (tuple, list)) else (gate[0], *gate[1])
    name = str(name).upper()
    if name not in _ARITY:
        raise ContractViolation(f"unknown Clifford gate {name!r}")
    if len(qubits) != _ARITY[name]:
        raise ContractViolation(f"gate {name} takes {_ARITY[name]} qubit(s)")
    return name, tuple(int(q) for q in qubits)


class Tableau:
    def __init__(self, x, z, r, gates=None):
        self.x = np.asarray(x, dtype=np.uint8)
        self.z = np.asarray(z, dtype=np.uint8)
        self.r = np.asarray(r, dtype=np.uint8)
        self.n = self.x.shape[1]
        self.gates = gates  # log of applied gates, used for dense cross-checks

    @classmethod
    def identity(cls, n: int) -> "Tableau":
        eye = np.eye(n, dtype=np.uint8)
        zero = np.zeros((n, n), dtype=np.uint8)
        return cls(np.vstack([eye, zero]), np.vstack([zero, eye]), np.zeros(2 * n, np.uint8), [])

    @classmethod
    def from_gates(cls, n: int, gates) -> "Tableau":
        return cls.identity(n).apply_gates(gates)

    def copy(self) -> "Tableau":
        return Tableau(self.x.copy(), self.z.copy(), self.r.copy(),
                       None if self.gates is None else list(self.gates))

    # -- gates (in place, returning self)

    def _check(self, *qs):
        for q in qs:
            if not 0 <= q < self.n:
                raise ContractViolation(f"qubit {q} out of range")

    def h(self, q):
        self._check(q)
        x, z = self.x[:, q].copy(), self.z[:, q].copy()
        self.r ^= x & z
        self.x[:, q], self.z[:, q] = z, x
        return self

    def s(self, q):
        self._check(q)
        self.r ^= self.x[:, q] & self.z[:, q]
        self.z[:, q] ^= self.x[:, q]
        return self

    def sdg(self, q):
        return self.s(q).s(q).s(q)

    def pauli_x(self, q):
        self._check(q)
        self.r ^= self.z[:, q]
        return self

    def pauli_z(self, q):
        self._check(q)
        self.r ^= self.x[:, q]
        return self

    def pauli_y(self, q):
        self._check(q)
        self.r ^= self.x[:, q] ^ self.z[:, q]
        return self

    def cnot(self, c, t):
        self._check(c, t)
        if c == t:
            raise ContractViolation("CNOT needs distinct qubits")
        xc, zc, xt, zt = self.x[:, c], self.z[:, c], self.x[:, t], self.z[:, t]
        self.r ^= xc & zt & (xt ^ zc ^ 1)
        self.x[:, t] ^= xc
        self.z[:, c] ^= zt
        return self

    def cz(self, a, b):
        return self.h(b).cnot(a, b).h(b)

    def swap(self, a, b):
        return self.cnot(a, b).cnot(b, a).cnot(a, b)

    def apply(self, name, *qubits):
        name, qubits = _normalize_gate((name, *qubits))
        fn = {"I": lambda q: self, "H": self.h, "S": self.s, "SDG": self.sdg, "X": self.pauli_x,
              "Y": self.pauli_y, "Z": self.pauli_z, "CNOT": self.cnot, "CZ": self.cz, "SWAP": self.swap}[name]
        log = self.gates
        self.gates = None  # composite gates call primitives; log only the outer gate
        fn(*qubits)
        self.gates = log
        if log is not None:
            log.append((name, qubits))
        return self

    def apply_gates(self, gates):
        for g in gates:
            name, qubits = _normalize_gate(g)
            self.apply(name, *qubits)
        return self

    # -- rows as Pauli strings

    def row(self, i: int) -> PauliString:
        return PauliString(self.x[i], self.z[i], 2 * int(self.r[i]))

    def stabilizers(self) -> list[PauliString]:
        return [self.row(self.n + j) for j in range(self.n)]

    def destabilizers(self) -> list[PauliString]:
        return [self.row(j) for j in range(self.n)]

    def generator_matrix(self) -> np.ndarray:
        """N × 2N matrix (x | z) of the stabilizer rows."""
        return np.hstack([self.x[self.n:], self.z[self.n:]])

    def to_text(self, destabilizers: bool = False) -> str:
        """Generator matrix rows ``x bits | z bits | sign bit``, stabilizers only by default."""
        rows = range(2 * self.n) if destabilizers else range(self.n, 2 * self.n)
        lines = []
        for i in rows:
            xs = "".join(str(int(b)) for b in self.x[i])
            zs = "".join(str(int(b)) for b in self.z[i])
            lines.append(f"{xs} | {zs} | {int(self.r[i])}")
        return "\n".join(lines)

    def is_valid(self) -> bool:
        n = self.n
        xs, zs = self.x.astype(np.int64), self.z.astype(np.int64)
        comm = (xs @ zs.T + zs @ xs.T) % 2  # 1 where rows anticommute
        expected = np.zeros((2 * n, 2 * n), dtype=np.int64)
        expected[:n, n:] = np.eye(n, dtype=np.int64)
        expected[n:, :n] = np.eye(n, dtype=np.int64)
        return bool(np.array_equal(comm, expected) and gf2_rank(self.generator_matrix()) == n)

    def __eq__(self, other):
        return (isinstance(other, Tableau) and np.array_equal(self.x, other.x)
                and np.array_equal(self.z, other.z) and np.array_equal(self.r, other.r))

    # -- conjugation

    def _forward(self, p: PauliString) -> PauliString:
        """C p C† by composing the images of X_j and Z_j."""
        out = PauliString.identity(self.n).with_phase(p.phase + int(np.sum(p.x & p.z)))
        for j in np.flatnonzero(p.x | p.z):
            if p.x[j]:
                out = out * self.row(j)
            if p.z[j]:
                out = out * self.row(self.n + j)
        return out

    def conjugate(self, p, direction: str = "forward") -> PauliString:
        """``forward``: C p C†.  ``backward``: C† p C."""
        p = as_pauli(p)
        if p.n != self.n:
            raise ShapeMismatchError("Pauli string and tableau sizes differ")
        if direction == "forward":
            return self._forward(p)
        if direction == "backward":
            return self.inverse()._forward(p)
        raise ContractViolation("direction must be 'forward' or 'backward'")

    def inverse(self) -> "Tableau":
        n = self.n
        m = np.hstack([self.x, self.z]).astype(np.int64)  # rows: images of X_1..X_n, Z_1..Z_n
        lam = np.block([[np.zeros((n, n), np.int64), np.eye(n, dtype=np.int64)],
                        [np.eye(n, dtype=np.int64), np.zeros((n, n), np.int64)]])
        inv = (lam @ m.T @ lam) % 2  # symplectic inverse
        out = Tableau(inv[:, :n], inv[:, n:], np.zeros(2 * n, np.uint8))
        # fix signs: if C P' C† = ε g then C† g C = ε P'
        for i in range(2 * n):
            img = self._forward(out.row(i))
            out.r[i] = 1 if img.phase == 2 else 0
        if self.gates is not None:
            out.gates = [(_INVERSE.get(g, g), q) for g, q in reversed(self.gates)]
        return out

    def compose_right(self, k: "Tableau") -> "Tableau":
        """Tableau of C·K (K acts first)."""
        if k.n != self.n:
            raise ShapeMismatchError("tableau sizes differ")
        rows = [self._forward(k.row(i)) for i in range(2 * self.n)]
        out = Tableau(np.array([p.x for p in rows]), np.array([p.z for p in rows]),
                      np.array([p.phase // 2 for p in rows], dtype=np.uint8))
        if self.gates is not None and k.gates is not None:
            out.gates = list(k.gates) + list(self.gates)
        return out

    # -- measurement

    def measure(self, q: int, rng=None, outcome: int | None = None) -> tuple[int, bool]:
        """Z measurement of qubit ``q``; returns (bit, was_random).  Updates in place."""
        self._check(q)
        n = self.n
        hits = np.flatnonzero(self.x[n:, q]) + n
        if hits.size:
            p = int(hits[0])
            for i in np.flatnonzero(self.x[:, q]):
                if i != p:
                    self._set_row(i, self.row(p) * self.row(i))
            self.x[p - n], self.z[p - n], self.r[p - n] = self.x[p], self.z[p], self.r[p]
            bit = int(as_generator(rng).integers(0, 2)) if outcome is None else int(outcome)
            self.x[p] = 0
            self.z[p] = 0
            self.z[p, q] = 1
            self.r[p] = bit
            if self.gates is not None:
                self.gates = None  # no longer a unitary circuit
            return bit, True
        acc = PauliString.identity(n)
        for i in np.flatnonzero(self.x[:n, q]):
            acc = acc * self.row(i + n)
        bit = 1 if acc.phase == 2 else 0
        if outcome is not None and int(outcome) != bit:
            raise ContractViolation("requested outcome has probability zero")
        return bit, False

    def _set_row(self, i, p: PauliString):
        self.x[i], self.z[i] = p.x, p.z
        self.r[i] = (p.phase // 2) & 1

    # -- dense helpers

    def dense_unitary(self) -> np.ndarray:
        if self.gates is None:
            raise ContractViolation("tableau has no gate log")
        u = np.eye(2**self.n, dtype=complex)
        for name, qs in self.gates:
            u = embed_gate(GATE_MATRICES[name], qs, self.n) @ u
        return u


def embed_gate(g: np.ndarray, qubits, n: int) -> np.ndarray:
    """Dense n-qubit matrix of a gate on ``qubits`` (site 0 most significant)."""
    k = len(qubits)
    t = np.eye(2**n, dtype=complex).reshape([2] * (2 * n))
    gt = np.asarray(g, dtype=complex).reshape([2] * (2 * k))
    t = np.tensordot(gt, t, axes=(list(range(k, 2 * k)), list(qubits)))
    t = np.moveaxis(t, list(range(k)), list(qubits))
    return t.reshape(2**n, 2**n)


def random_clifford_gates(n: int, depth: int, rng) -> list[tuple]:
    """Random sequence of H, S and CNOT gates (``depth`` gates in total)."""
    gen = as_generator(rng)
    gates = []
    for _ in range(depth):
        kind = gen.integers(0, 3) if n > 1 else gen.integers(0, 2)
        if kind == 0:
            gates.append(("H", (int(gen.integers(0, n)),)))
        elif kind == 1:
            gates.append(("S", (int(gen.integers(0, n)),)))
        else:
            c, t = gen.choice(n, size=2, replace=False)
            gates.append(("CNOT", (int(c), int(t))))
    return gates


def stabilizer_entropy(t: Tableau, subsystem) -> float:
    """Entanglement entropy (nats) of a stabilizer state across A | B.

    k_A, the number of independent stabilizers supported inside A, is N minus
    the GF(2) rank of the generator matrix restricted to the B columns.
    """
    a = sorted(set(int(q) for q in subsystem))
    if any(not 0 <= q < t.n for q in a):
        raise ContractViolation("subsystem sites out of range")
    b = [q for q in range(t.n) if q not in a]
    if not b:
        return 0.0
    g = t.generator_matrix()
    gb = np.hstack([g[:, b], g[:, [t.n + q for q in b]]])
    k_a = t.n - gf2_rank(gb)
    return float((len(a) - k_a) * np.log(2))


def state_from_tableau(t: Tableau) -> np.ndarray:
    """Dense stabilizer state by projecting |0...0> onto the stabilizer group (small n)."""
    n = t.n
    psi = np.zeros(2**n, dtype=complex)
    proj = np.eye(2**n, dtype=complex)
    for g in t.stabilizers():
        proj = proj @ (np.eye(2**n) + g.to_dense()) / 2
    for seed in range(2**n):
        v = proj[:, seed]
        if np.linalg.norm(v) > 1e-8:
            psi = v / np.linalg.norm(v)
            break
    return psi


def stabilizer_state_count(n: int) -> int:
    """|Stab_n| = 2^n Π_{k=1}^{n} (2^k + 1)."""
    out = 2**n
    for k in range(1, n + 1):
        out *= 2**k + 1
    return out


def enumerate_stabilizer_states(n: int) -> list[np.ndarray]:
    """All n-qubit stabilizer states (dense, up to global phase) by closing |0…0⟩ under H, S, CNOT."""
    if n > 3:
        raise ContractViolation("enumeration limited to n <= 3")

    def key(v):
        k = np.flatnonzero(np.abs(v) > 1e-9)[0]
        w = np.round(v * (abs(v[k]) / v[k]), 8) + 0.0  # drop signed zeros
        return w.tobytes()

    gates = [embed_gate(GATE_MATRICES[g], (q,), n) for g in ("H", "S") for q in range(n)]
    gates += [embed_gate(GATE_MATRICES["CNOT"], (a, b), n) for a in range(n) for b in range(n) if a != b]
    start = np.zeros(2**n, dtype=complex)
    start[0] = 1
    seen = {key(start): start}
    frontier = [start]
    while frontier:
        nxt = []
        for v in frontier:
            for g in gates:
                w = g @ v
                kw = key(w)
                if kw not in seen:
                    seen[kw] = w
                    nxt.append(w)
        frontier = nxt
    return list(seen.values())


__all__ = ["Tableau", "stabilizer_state_count", "enumerate_stabilizer_states", "gf2_rank", "embed_gate", "random_clifford_gates", "stabilizer_entropy",
           "state_from_tableau", "GATE_MATRICES"]
