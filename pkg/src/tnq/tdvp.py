"""Time-dependent variational principle for MPS with a Krylov exponential.

One time step is a left-to-right sweep with dt/2 followed by a
right-to-left sweep with dt/2.  The two-site variant evolves pairs forward,
splits them with a truncated SVD and evolves the new center site backward.
The one-site variant evolves single sites forward and bond matrices
backward, keeping all bond dimensions fixed.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.linalg

from . import tensor as tc
from .errors import ContractViolation, NumericError
from .mpo import Mpo, expectation, hermiticity_defect
from .mps import Mps, canonicalize
from .tensor import TruncationPolicy


@dataclass(frozen=True)
class LanczosParams:
    krylov_dim: int = 20
    tol: float = 1e-12
    reorthogonalize: bool = True

    def __post_init__(self):
        if self.krylov_dim < 2:
            raise ContractViolation("krylov_dim must be >= 2")


def lanczos_expm_apply(op, v, scale: complex, p: LanczosParams | None = None):
    """Approximate exp(scale·op)·v in the Krylov space of ``op`` and ``v``.

    ``op`` is a Hermitian matrix or a callable acting on arrays shaped like
    ``v``.  Iteration stops at ``krylov_dim`` vectors, on breakdown, or once
    the weight on the newest Krylov vector falls below the tolerance.
    """
    p = p or LanczosParams()
    v = np.asarray(v, dtype=complex)
    shape = v.shape
    apply = (lambda x: op(x.reshape(shape)).reshape(-1)) if callable(op) else (lambda x: np.asarray(op) @ x)
    x0 = v.reshape(-1)
    beta0 = np.linalg.norm(x0)
    if beta0 == 0:
        raise ContractViolation("cannot exponentiate on a zero vector")
    k = min(p.krylov_dim, x0.size)
    basis = [x0 / beta0]
    alphas, betas = [], []
    coeffs = None
    for j in range(k):
        w = apply(basis[j])
        a = np.vdot(basis[j], w).real
        w = w - a * basis[j]
        if j > 0:
            w = w - betas[j - 1] * basis[j - 1]
        if p.reorthogonalize:
            for _ in range(2):
                for b in basis:
                    w = w - b * np.vdot(b, w)
        alphas.append(a)
        b_next = np.linalg.norm(w)
        t = np.diag(alphas) + np.diag(betas, 1) + np.diag(betas, -1)
        coeffs = scipy.linalg.expm(scale * t)[:, 0]
        if b_next < p.tol or j == k - 1:
            break
        if j >= 1 and abs(b_next * coeffs[-1]) < p.tol:
            break
        betas.append(b_next)
        basis.append(w / b_next)
    m = len(alphas)
    out = beta0 * (np.array(basis[:m]).T @ coeffs)
    if not np.all(np.isfinite(out)):
        raise NumericError("Krylov exponential produced non-finite values")
    return out.reshape(shape)


# ----------------------------------------------------------------------------- environments


def _left_update(env, a, w):
    t = np.tensordot(env, a, axes=([2], [0]))  # (x, w, t, a')
    t = np.tensordot(t, w, axes=([1, 2], [0, 2]))  # (x, a', s, y)
    return np.tensordot(a.conj(), t, axes=([0, 1], [0, 2]))  # (x', a', y)


def _left_update_ordered(env, a, w):
    out = _left_update(env, a, w)  # (x', a', y)
    return out.transpose(0, 2, 1)


def _right_update(env, a, w):
    t = np.tensordot(a, env, axes=([2], [2]))  # (a, t, c, y)
    t = np.tensordot(w, t, axes=([2, 3], [1, 3]))  # (w, s, a, c)
    return np.tensordot(a.conj(), t, axes=([1, 2], [1, 3])).transpose(0, 1, 2)  # (x, w, a)


@dataclass
class EnvBlocks:
    """left[i]: sites < i; right[i]: sites >= i.  Legs (bra, mpo, ket)."""

    left: list = field(default_factory=list)
    right: list = field(default_factory=list)

    def update_left(self, i, a, w):
        self.left[i + 1] = _left_update_ordered(self.left[i], a, w)

    def update_right(self, i, a, w):
        self.right[i] = _right_update(self.right[i + 1], a, w)


def build_env(s: Mps, h: Mpo) -> EnvBlocks:
    if s.n != h.n or s.phys_dims != h.phys_dims:
        raise ContractViolation("MPS and MPO registers differ")
    n = s.n
    env = EnvBlocks([None] * (n + 1), [None] * (n + 1))
    env.left[0] = np.ones((1, 1, 1), dtype=complex)
    env.right[n] = np.ones((1, 1, 1), dtype=complex)
    for i in range(n):
        env.update_left(i, s.sites[i], h.sites[i])
    for i in range(n - 1, -1, -1):
        env.update_right(i, s.sites[i], h.sites[i])
    return env


def apply_eff_two(left, w1, w2, right, theta):
    t = np.tensordot(left, theta, axes=([2], [0]))  # (x, w, t1, t2, b)
    t = np.tensordot(t, w1, axes=([1, 2], [0, 2]))  # (x, t2, b, s1, y)
    t = np.tensordot(t, w2, axes=([4, 1], [0, 2]))  # (x, b, s1, s2, z)
    t = np.tensordot(t, right, axes=([1, 4], [2, 1]))  # (x, s1, s2, c)
    return t


def apply_eff_one(left, w, right, a):
    t = np.tensordot(left, a, axes=([2], [0]))  # (x, w, t, b)
    t = np.tensordot(t, w, axes=([1, 2], [0, 2]))  # (x, b, s, y)
    t = np.tensordot(t, right, axes=([1, 3], [2, 1]))  # (x, s, c)
    return t


def apply_eff_zero(left, right, c):
    t = np.tensordot(left, c, axes=([2], [0]))  # (x, w, b)
    return np.tensordot(t, right, axes=([1, 2], [1, 2]))  # (x, c)


def effective_matrix(fn: Callable, shape) -> np.ndarray:
    """Dense matrix of a local effective map (for checks)."""
    dim = int(np.prod(shape))
    cols = [fn(e.reshape(shape)).reshape(-1) for e in np.eye(dim, dtype=complex)]
    return np.array(cols).T


def energy_from_env(env: EnvBlocks) -> complex:
    return complex(env.left[-1][0, 0, 0])


# ----------------------------------------------------------------------------- sweeps


def _sweep_two_site(s: Mps, h: Mpo, dt: float, policy, p, record):
    n = s.n
    sites = list(canonicalize(s, "right").sites)
    hs = h.sites
    env = build_env(Mps(tuple(sites)), h)
    discarded = 0.0
    half = dt / 2
    # left to right
    for l in range(n - 1):
        theta = np.tensordot(sites[l], sites[l + 1], axes=([2], [0]))
        theta = lanczos_expm_apply(
            lambda x: apply_eff_two(env.left[l], hs[l], hs[l + 1], env.right[l + 2], x), theta, -1j * half, p)
        record(theta, lambda x: apply_eff_two(env.left[l], hs[l], hs[l + 1], env.right[l + 2], x))
        chi_l, d1, d2, chi_r = theta.shape
        res = tc.svd_truncated(theta.reshape(chi_l * d1, d2 * chi_r), policy)
        discarded += res.discarded_weight
        sites[l] = res.left.reshape(chi_l, d1, -1)
        sites[l + 1] = (res.singulars[:, None] * res.right).reshape(-1, d2, chi_r)
        if l != n - 2:
            env.update_left(l, sites[l], hs[l])
            sites[l + 1] = lanczos_expm_apply(
                lambda x: apply_eff_one(env.left[l + 1], hs[l + 1], env.right[l + 2], x), sites[l + 1], 1j * half, p)
    # right to left
    for l in range(n - 2, -1, -1):
        theta = np.tensordot(sites[l], sites[l + 1], axes=([2], [0]))
        theta = lanczos_expm_apply(
            lambda x: apply_eff_two(env.left[l], hs[l], hs[l + 1], env.right[l + 2], x), theta, -1j * half, p)
        chi_l, d1, d2, chi_r = theta.shape
        res = tc.svd_truncated(theta.reshape(chi_l * d1, d2 * chi_r), policy)
        discarded += res.discarded_weight
        sites[l + 1] = res.right.reshape(-1, d2, chi_r)
        sites[l] = (res.left * res.singulars[None, :]).reshape(chi_l, d1, -1)
        if l != 0:
            env.update_right(l + 1, sites[l + 1], hs[l + 1])
            sites[l] = lanczos_expm_apply(
                lambda x: apply_eff_one(env.left[l], hs[l], env.right[l + 1], x), sites[l], 1j * half, p)
    return Mps(tuple(sites), center=0, log_norm=s.log_norm, discarded_weight=s.discarded_weight + discarded), discarded


def _sweep_one_site(s: Mps, h: Mpo, dt: float, p, record):
    n = s.n
    sites = list(canonicalize(s, "right").sites)
    hs = h.sites
    env = build_env(Mps(tuple(sites)), h)
    half = dt / 2
    for l in range(n):
        fn = lambda x, l=l: apply_eff_one(env.left[l], hs[l], env.right[l + 1], x)
        sites[l] = lanczos_expm_apply(fn, sites[l], -1j * half, p)
        record(sites[l], fn)
        if l < n - 1:
            chi_l, d, chi_r = sites[l].shape
            q, c = tc.qr(sites[l].reshape(chi_l * d, chi_r), "left")
            sites[l] = q.reshape(chi_l, d, -1)
            env.update_left(l, sites[l], hs[l])
            c = lanczos_expm_apply(lambda x: apply_eff_zero(env.left[l + 1], env.right[l + 1], x), c, 1j * half, p)
            sites[l + 1] = np.tensordot(c, sites[l + 1], axes=([1], [0]))
    for l in range(n - 1, -1, -1):
        fn = lambda x, l=l: apply_eff_one(env.left[l], hs[l], env.right[l + 1], x)
        sites[l] = lanczos_expm_apply(fn, sites[l], -1j * half, p)
        if l > 0:
            chi_l, d, chi_r = sites[l].shape
            c, q = tc.qr(sites[l].reshape(chi_l, d * chi_r), "right")
            sites[l] = q.reshape(-1, d, chi_r)
            env.update_right(l, sites[l], hs[l])
            c = lanczos_expm_apply(lambda x: apply_eff_zero(env.left[l], env.right[l], x), c, 1j * half, p)
            sites[l - 1] = np.tensordot(sites[l - 1], c, axes=([2], [0]))
    return Mps(tuple(sites), center=0, log_norm=s.log_norm, discarded_weight=s.discarded_weight), 0.0


def tdvp_sweep(s: Mps, h: Mpo, dt: float, variant: str = "two_site",
               policy: TruncationPolicy | None = None, p: LanczosParams | None = None,
               check_effective: bool = False, hermitian_checked: bool = False):
    """One symmetric TDVP time step; returns (state, diagnostics).

    ``diagnostics`` has ``energy``, ``norm``, ``max_bond`` and ``discarded``
    (weight dropped by the SVDs of this step, the projection-error proxy).
    With ``check_effective`` the largest anti-Hermitian part seen in a local
    effective map is reported as ``effective_defect``.
    """
    if s.n != h.n:
        raise ContractViolation("MPS and MPO registers differ")
    if not hermitian_checked and hermiticity_defect(h) > 1e-10:
        raise ContractViolation("TDVP needs a Hermitian MPO")
    policy = policy or TruncationPolicy()
    p = p or LanczosParams()
    defects = []

    def record(x, fn):
        if check_effective:
            m = effective_matrix(fn, x.shape)
            defects.append(float(np.max(np.abs(m - m.conj().T), initial=0.0)))

    if s.n == 1 or dt == 0:
        out, discarded = canonicalize(s, "right"), 0.0
        if s.n == 1 and dt != 0:
            w = h.sites[0][0, :, :, 0]
            out = out.with_sites([np.einsum("st,atb->asb", tc.expm_hermitian(w, -1j * dt), out.sites[0])], 0,
                                 log_norm=s.log_norm, discarded_weight=s.discarded_weight)
    elif variant == "two_site":
        out, discarded = _sweep_two_site(s, h, dt, policy, p, record)
    elif variant == "one_site":
        out, discarded = _sweep_one_site(s, h, dt, p, record)
    else:
        raise ContractViolation(f"unknown variant {variant!r}")
    diag = {
        "energy": float(expectation(out, h).real),
        "norm": out.norm(),
        "max_bond": out.max_bond,
        "discarded": discarded,
    }
    if check_effective:
        diag["effective_defect"] = max(defects, default=0.0)
    return out, diag


def tdvp_evolve(s: Mps, h: Mpo, dt: float, steps: int, variant: str = "two_site",
                policy: TruncationPolicy | None = None, p: LanczosParams | None = None, callback=None):
    """Repeated TDVP steps; returns (state, list of per-step diagnostics with time)."""
    if hermiticity_defect(h) > 1e-10:
        raise ContractViolation("TDVP needs a Hermitian MPO")
    rows = []
    for k in range(steps):
        s, d = tdvp_sweep(s, h, dt, variant, policy, p, hermitian_checked=True)
        rows.append({"time": (k + 1) * dt, **d})
        if callback is not None:
            callback(k + 1, s)
    return s, rows


DIAGNOSTIC_FIELDS = ("time", "energy", "norm", "max_bond", "discarded")


def write_diagnostics_csv(rows, path):
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=DIAGNOSTIC_FIELDS, extrasaction="ignore")
        w.writeheader()
        for r in rows:
            w.writerow(r)
