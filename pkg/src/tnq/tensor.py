"""Dense tensors and the matrix factorizations the network code is built on.

Dense tensors are plain ``numpy`` arrays of ``complex128`` in row-major
order.  This module adds plan-checked reshaping, leg-checked contraction,
the pairwise contraction cost, and SVD/QR/eigendecomposition wrappers with
truncation bookkeeping.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import prod
from typing import Sequence

import numpy as np
import scipy.linalg

from .errors import ContractionError, ContractViolation, InvalidPlanError, NumericError

DEFAULT_TOL = 1e-10


def as_tensor(t) -> np.ndarray:
    return np.asarray(t, dtype=np.complex128)


# ----------------------------------------------------------------------------- reshape


def fuse(t, groups: Sequence[Sequence[int]]) -> np.ndarray:
    """Fuse groups of legs into single legs.

    ``groups`` must reference every leg exactly once.  Legs are permuted into
    group order first, so ``[[0], [2, 1]]`` is a valid plan.
    """
    t = as_tensor(t)
    flat = [ax for g in groups for ax in g]
    if sorted(flat) != list(range(t.ndim)) or any(len(g) == 0 for g in groups):
        raise InvalidPlanError(f"fuse plan {groups!r} does not partition {t.ndim} legs")
    moved = np.transpose(t, flat) if flat != list(range(t.ndim)) else t
    return moved.reshape([prod(t.shape[a] for a in g) for g in groups])


def split(t, axis: int, dims: Sequence[int]) -> np.ndarray:
    """Split leg ``axis`` into legs of the given dimensions (row-major)."""
    t = as_tensor(t)
    if not 0 <= axis < t.ndim:
        raise InvalidPlanError(f"axis {axis} out of range for order {t.ndim}")
    dims = [int(d) for d in dims]
    if any(d < 1 for d in dims) or prod(dims) != t.shape[axis]:
        raise InvalidPlanError(f"split dims {dims} do not multiply to {t.shape[axis]}")
    return t.reshape(t.shape[:axis] + tuple(dims) + t.shape[axis + 1:])


def reshape(t, groups=None, *, split_axis=None, dims=None) -> np.ndarray:
    """Apply a fuse plan (``groups``) or a split plan (``split_axis``, ``dims``)."""
    if groups is not None and split_axis is None:
        return fuse(t, groups)
    if groups is None and split_axis is not None and dims is not None:
        return split(t, split_axis, dims)
    raise InvalidPlanError("give either a fuse plan or a split plan")


# ----------------------------------------------------------------------------- contraction


def contract(a, a_legs: Sequence[int], b, b_legs: Sequence[int]) -> np.ndarray:
    """Sum over paired legs; result legs are free legs of ``a`` then of ``b``."""
    a = as_tensor(a)
    b = as_tensor(b)
    a_legs = list(a_legs)
    b_legs = list(b_legs)
    if len(a_legs) != len(b_legs):
        raise ContractionError("leg lists differ in length")
    if len(set(a_legs)) != len(a_legs) or len(set(b_legs)) != len(b_legs):
        raise ContractionError("a leg is paired twice")
    for i, j in zip(a_legs, b_legs):
        if not (0 <= i < a.ndim and 0 <= j < b.ndim):
            raise ContractionError(f"leg pair ({i}, {j}) out of range")
        if a.shape[i] != b.shape[j]:
            raise ContractionError(
                f"leg {i} of a has dimension {a.shape[i]} but leg {j} of b has {b.shape[j]}"
            )
    return np.tensordot(a, b, axes=(a_legs, b_legs))


def contraction_cost(a_shape: Sequence[int], b_shape: Sequence[int], shared_dims: Sequence[int]) -> int:
    """Scalar multiplications of a pairwise contraction: dim(A)·dim(B)/dim(shared)."""
    da = prod(int(x) for x in a_shape)
    db = prod(int(x) for x in b_shape)
    ds = prod(int(x) for x in shared_dims)
    if ds < 1 or da % ds or db % ds:
        raise ContractViolation(f"shared dimension {ds} does not divide {da} and {db}")
    return da * db // ds


# ----------------------------------------------------------------------------- factorizations


@dataclass(frozen=True)
class TruncationPolicy:
    """Bond truncation rule.

    A singular value is dropped when its squared weight relative to the total
    is below ``sv_cutoff`` or when it falls past ``max_bond``.  ``max_bond``
    of ``None`` means unlimited.  The default cutoff only removes values at
    the level of floating point noise.
    """

    max_bond: int | None = None
    sv_cutoff: float = 1e-28
    renormalize: bool = False

    def __post_init__(self):
        if self.max_bond is not None and int(self.max_bond) < 1:
            raise ContractViolation("max_bond must be >= 1")
        if not 0.0 <= self.sv_cutoff < 1.0:
            raise ContractViolation("sv_cutoff must lie in [0, 1)")

    @classmethod
    def unlimited(cls) -> "TruncationPolicy":
        return cls()

    def keep_count(self, singulars: np.ndarray) -> int:
        total = float(np.sum(singulars**2))
        if total == 0.0:
            return 1
        weights = singulars**2 / total
        keep = int(np.count_nonzero(~(weights < self.sv_cutoff)))
        if self.max_bond is not None:
            keep = min(keep, int(self.max_bond))
        return max(keep, 1)


@dataclass(frozen=True)
class FactorizationResult:
    left: np.ndarray
    singulars: np.ndarray
    right: np.ndarray
    discarded_weight: float


def _svd(m: np.ndarray):
    if not np.all(np.isfinite(m)):
        raise NumericError("SVD input contains non-finite values", {"shape": m.shape})
    try:
        return scipy.linalg.svd(m, full_matrices=False, lapack_driver="gesdd")
    except (np.linalg.LinAlgError, ValueError):
        try:
            return scipy.linalg.svd(m, full_matrices=False, lapack_driver="gesvd")
        except (np.linalg.LinAlgError, ValueError) as exc:
            raise NumericError("SVD did not converge", {"shape": m.shape}) from exc


def svd_truncated(m, policy: TruncationPolicy | None = None) -> FactorizationResult:
    m = as_tensor(m)
    if m.ndim != 2:
        raise ContractViolation("svd_truncated expects a matrix")
    policy = policy or TruncationPolicy()
    u, s, vh = _svd(m)
    k = policy.keep_count(s)
    discarded = float(np.sum(s[k:] ** 2))
    s_kept = s[:k]
    if policy.renormalize:
        norm = np.linalg.norm(s_kept)
        if norm > 0:
            s_kept = s_kept / norm
    return FactorizationResult(u[:, :k], s_kept, vh[:k, :], discarded)


def qr(m, side: str = "left"):
    """``left``: m = Q·R with orthonormal columns.  ``right``: m = L·Q with orthonormal rows."""
    m = as_tensor(m)
    if m.ndim != 2:
        raise ContractViolation("qr expects a matrix")
    try:
        if side == "left":
            q, r = scipy.linalg.qr(m, mode="economic")
            return q, r
        if side == "right":
            q, r = scipy.linalg.qr(m.conj().T, mode="economic")
            return r.conj().T, q.conj().T
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise NumericError("QR failed", {"shape": m.shape}) from exc
    raise ContractViolation(f"unknown side {side!r}")


def eig_hermitian(m, tol: float = DEFAULT_TOL):
    """Eigenvalues in descending order and the matching eigenvector columns."""
    m = as_tensor(m)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ContractViolation("eig_hermitian expects a square matrix")
    scale = max(1.0, float(np.max(np.abs(m))) if m.size else 1.0)
    if np.max(np.abs(m - m.conj().T), initial=0.0) > tol * scale:
        raise ContractViolation("matrix is not Hermitian within tolerance")
    try:
        w, v = scipy.linalg.eigh((m + m.conj().T) / 2)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise NumericError("Hermitian eigensolver failed", {"shape": m.shape}) from exc
    return w[::-1].copy(), v[:, ::-1].copy()


def expm_hermitian(h, scale: complex) -> np.ndarray:
    """exp(scale·h) for Hermitian h via its eigendecomposition."""
    w, v = eig_hermitian(h)
    return (v * np.exp(scale * w)) @ v.conj().T


# ----------------------------------------------------------------------------- serialization


def tensor_to_json(t) -> dict:
    t = as_tensor(t)
    flat = t.reshape(-1)
    return {"shape": list(t.shape), "re": flat.real.tolist(), "im": flat.imag.tolist()}


def tensor_from_json(obj: dict) -> np.ndarray:
    shape = tuple(int(x) for x in obj["shape"])
    re = np.asarray(obj["re"], dtype=float)
    im = np.asarray(obj.get("im", [0.0] * len(re)), dtype=float)
    if re.size != prod(shape) or im.size != re.size:
        raise ContractViolation("element count does not match shape")
    return (re + 1j * im).reshape(shape)
