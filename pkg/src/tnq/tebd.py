"""Trotterized evolution of MPS and brickwork circuit execution."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import tensor as tc
from .errors import ContractViolation
from .mpo import OperatorSpec, bond_terms
from .mps import Mps, apply_gate, apply_two_site, canonicalize
from .rng import as_generator
from .tensor import TruncationPolicy


@dataclass(frozen=True)
class TrotterPlan:
    """Bond gates for one time step, in application order.

    ``gates`` holds ``(bond, 4×4 matrix)`` pairs where bond ``i`` couples
    sites ``i`` and ``i+1``.
    """

    dt: float
    order: int
    mode: str
    n: int
    gates: tuple = field(repr=False)


def _gate(h: np.ndarray, dt: float, mode: str) -> np.ndarray:
    scale = -1j * dt if mode == "real" else -dt
    return tc.expm_hermitian(h, scale)


def step_schedule(n_bonds: int, order: int = 2, layout: str = "brickwork") -> list[tuple[int, float]]:
    """(bond, fraction of dt) pairs for one Trotter step, in application order."""
    if layout == "brickwork":
        even = list(range(0, n_bonds, 2))
        odd = list(range(1, n_bonds, 2))
        if order == 1:
            return [(b, 1.0) for b in even + odd]
        return [(b, 0.5) for b in even] + [(b, 1.0) for b in odd] + [(b, 0.5) for b in even]
    if order == 1:
        return [(b, 1.0) for b in range(n_bonds)]
    return ([(b, 0.5) for b in range(n_bonds - 1)] + [(n_bonds - 1, 1.0)]
            + [(b, 0.5) for b in range(n_bonds - 2, -1, -1)])


def trotterize(h: OperatorSpec, dt: float, order: int = 2, mode: str = "real",
               layout: str = "brickwork") -> TrotterPlan:
    """Trotter plan for one step of length ``dt``.

    ``brickwork``: order 1 applies even bonds then odd bonds; order 2 is the
    symmetric split with half steps on the even layers at both edges.
    ``sweep``: order 1 applies bonds left to right; order 2 sweeps left to
    right and back with half steps, merging the two half steps on the last
    bond.
    """
    if order not in (1, 2):
        raise ContractViolation("order must be 1 or 2")
    if mode not in ("real", "imaginary"):
        raise ContractViolation("mode must be 'real' or 'imaginary'")
    if layout not in ("brickwork", "sweep"):
        raise ContractViolation("layout must be 'brickwork' or 'sweep'")
    terms = bond_terms(h)
    cache = {}

    def gate(b, frac):
        if (b, frac) not in cache:
            cache[b, frac] = _gate(terms[b], dt * frac, mode)
        return cache[b, frac]

    gates = [(b, gate(b, frac)) for b, frac in step_schedule(len(terms), order, layout)]
    return TrotterPlan(float(dt), order, mode, h.n, tuple(gates))


def apply_gate_sequence(s: Mps, gates, policy: TruncationPolicy):
    """Apply (bond, gate) pairs in order; returns (state, discarded weight)."""
    discarded = 0.0
    for k, (b, g) in enumerate(gates):
        # leave the center where the next gate needs it
        toward_right = k + 1 < len(gates) and gates[k + 1][0] > b
        before = s.discarded_weight
        s = apply_two_site(s, g, b, policy, center_right=toward_right)
        discarded += s.discarded_weight - before
    return s, discarded


def evolve(s: Mps, plan: TrotterPlan, steps: int, policy: TruncationPolicy | None = None,
           callback=None):
    """Run ``steps`` Trotter steps.

    Returns the final state, the discarded weight of each step and the norm
    log.  In real mode the norm log holds the state norm after each step.
    In imaginary mode the state is renormalized every step, the log holds the
    norm before renormalization, and the running log-norm is accumulated in
    ``Mps.log_norm``.  ``callback(step, state)`` is called after each step.
    """
    if s.n != plan.n:
        raise ContractViolation("plan and state registers differ")
    policy = policy or TruncationPolicy()
    s = canonicalize(s, "right")
    discarded, norms = [], []
    for k in range(steps):
        s, dw = apply_gate_sequence(s, plan.gates, policy)
        nrm = s.norm()
        if plan.mode == "imaginary":
            s = s.normalized()
        discarded.append(dw)
        norms.append(nrm)
        if callback is not None:
            callback(k + 1, s)
    return s, discarded, norms


# ----------------------------------------------------------------------------- circuits


@dataclass(frozen=True)
class BrickworkCircuit:
    """Alternating layers of two-qubit gates; each layer is a list of (bond, 4×4)."""

    n: int
    layers: tuple

    def __post_init__(self):
        layers = []
        for layer in self.layers:
            checked = []
            for b, u in layer:
                u = tc.as_tensor(u).reshape(4, 4)
                if not np.allclose(u.conj().T @ u, np.eye(4), atol=1e-10):
                    raise ContractViolation(f"gate on bond {b} is not unitary")
                if not 0 <= b < self.n - 1:
                    raise ContractViolation(f"bond {b} out of range")
                checked.append((int(b), u))
            layers.append(tuple(checked))
        object.__setattr__(self, "layers", tuple(layers))

    @property
    def depth(self) -> int:
        return len(self.layers)

    @classmethod
    def random(cls, n: int, depth: int, rng) -> "BrickworkCircuit":
        from scipy.stats import unitary_group

        gen = as_generator(rng)
        layers = []
        for d in range(depth):
            start = d % 2
            layers.append([(b, unitary_group.rvs(4, random_state=gen)) for b in range(start, n - 1, 2)])
        return cls(n, tuple(layers))

    @classmethod
    def uniform(cls, n: int, gate, depth: int = 1) -> "BrickworkCircuit":
        layers = [[(b, gate) for b in range(d % 2, n - 1, 2)] for d in range(depth)]
        return cls(n, tuple(layers))


def run_circuit(s: Mps, c, policy: TruncationPolicy | None = None) -> Mps:
    """Apply a BrickworkCircuit or a gate list ``[{"sites", "matrix"}, ...]``."""
    policy = policy or TruncationPolicy()
    if isinstance(c, BrickworkCircuit):
        if c.n != s.n:
            raise ContractViolation("circuit and state registers differ")
        for layer in c.layers:
            for b, u in layer:
                s = apply_gate(s, u, [b, b + 1], policy)
        return s
    for g in c:
        s = apply_gate(s, g["matrix"], g["sites"], policy)
    return s
