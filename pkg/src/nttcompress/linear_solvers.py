"""Dense factorizations and iterative solvers used by both pipeline stages."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Union

import numpy as np
from scipy.linalg import lapack, solve_triangular

from .errors import InvalidArgumentError, NumericalBreakdownError

PINV_RCOND = 1e-12


def truncated_svd(Z: np.ndarray, r: int):
    """Best rank-``r`` factorization ``Z ~ left @ right``.

    The singular values are absorbed into the left factor, so ``right`` has
    orthonormal rows.
    """
    Z = np.asarray(Z, dtype=np.float64)
    if Z.ndim != 2:
        raise InvalidArgumentError("truncated_svd expects a matrix")
    if r < 1 or r > min(Z.shape):
        raise InvalidArgumentError(f"rank {r} not in [1, {min(Z.shape)}] for shape {Z.shape}")
    u, s, vt = np.linalg.svd(Z, full_matrices=False)
    return u[:, :r] * s[:r], vt[:r].copy()


@dataclass(frozen=True)
class KronPlusDiagOperator:
    """The operator ``(M_lt kron M_gt) + diag(diag)`` acting on vec'd matrices.

    Vectors are row-major flattenings of ``(len(M_lt), len(M_gt))`` matrices,
    so the Kronecker product acts as ``V -> M_lt @ V @ M_gt.T``.
    """

    M_lt: np.ndarray
    M_gt: np.ndarray
    diag: np.ndarray

    def __post_init__(self):
        m = self.M_lt.shape[0] * self.M_gt.shape[0]
        if self.diag.shape != (m,):
            raise InvalidArgumentError(f"diag has shape {self.diag.shape}, expected ({m},)")

    @property
    def size(self) -> int:
        return self.diag.shape[0]

    def __call__(self, v):
        return kron_plus_diag_apply(self, v)

    def to_dense(self) -> np.ndarray:
        return np.kron(self.M_lt, self.M_gt) + np.diag(self.diag)


def kron_plus_diag_apply(op: KronPlusDiagOperator, v: np.ndarray) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    if v.shape != (op.size,):
        raise InvalidArgumentError(f"vector length {v.shape} does not match operator size {op.size}")
    V = v.reshape(op.M_lt.shape[0], op.M_gt.shape[0])
    return (op.M_lt @ V @ op.M_gt.T).ravel() + op.diag * v


def _as_operator(op) -> Callable[[np.ndarray], np.ndarray]:
    if callable(op):
        return op
    mat = np.asarray(op, dtype=np.float64)
    return lambda x: mat @ x


def cg_solve(
    op: Union[Callable, np.ndarray],
    b: np.ndarray,
    tol: float = 1e-10,
    max_iter: int = 100,
    precond: Optional[np.ndarray] = None,
):
    """(Preconditioned) conjugate gradient from a zero initial guess.

    Parameters
    ----------
    op : callable or ndarray
        Symmetric positive definite operator.
    precond : ndarray, optional
        Diagonal ``D`` approximating ``op``; ``D^{-1}`` is applied to residuals.

    Returns
    -------
    x : ndarray
    iters : int
    residual : float
        Relative residual ``||op(x) - b|| / ||b||`` as tracked by the recurrence.
    """
    if tol <= 0:
        raise InvalidArgumentError("tol must be positive")
    apply = _as_operator(op)
    b = np.asarray(b, dtype=np.float64)
    x = np.zeros_like(b)
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return x, 0, 0.0
    inv_d = None if precond is None else 1.0 / np.asarray(precond, dtype=np.float64)
    r = b.copy()
    z = r if inv_d is None else inv_d * r
    p = z.copy()
    rz = r @ z
    res = 1.0
    it = 0
    while it < max_iter:
        it += 1
        q = apply(p)
        pq = p @ q
        if not np.isfinite(pq) or pq <= 0:
            raise NumericalBreakdownError(f"CG breakdown: p^T A p = {pq!r}", iteration=it)
        step = rz / pq
        x += step * p
        r -= step * q
        res = np.linalg.norm(r) / bnorm
        if not np.isfinite(res):
            raise NumericalBreakdownError("CG produced non-finite residual", iteration=it)
        if res <= tol:
            break
        z = r if inv_d is None else inv_d * r
        rz_new = r @ z
        p = z + (rz_new / rz) * p
        rz = rz_new
    return x, it, float(res)


def batched_cg(
    apply: Callable[[np.ndarray], np.ndarray],
    B: np.ndarray,
    tol: float = 1e-10,
    max_iter: int = 100,
    precond: Optional[np.ndarray] = None,
):
    """Run independent CG solves for every row of ``B`` in lock-step.

    ``apply`` maps a ``(batch, m)`` array to ``(batch, m)``, row by row.
    Rows that have converged are frozen. Returns ``(X, iters, residuals)``
    with per-row iteration counts and relative residuals.
    """
    B = np.asarray(B, dtype=np.float64)
    batch = B.shape[0]
    X = np.zeros_like(B)
    bnorm = np.linalg.norm(B, axis=1)
    active = bnorm > 0
    iters = np.zeros(batch, dtype=np.int64)
    res = np.where(active, 1.0, 0.0)
    safe_b = np.where(active, bnorm, 1.0)
    inv_d = None if precond is None else 1.0 / precond
    R = B.copy()
    Z = R if inv_d is None else inv_d * R
    P = Z.copy()
    rz = np.einsum("bi,bi->b", R, Z)
    for it in range(1, max_iter + 1):
        if not active.any():
            break
        Q = apply(P)
        pq = np.einsum("bi,bi->b", P, Q)
        bad = active & (~np.isfinite(pq) | (pq <= 0))
        if bad.any():
            raise NumericalBreakdownError(
                f"CG breakdown in rows {np.flatnonzero(bad).tolist()}", iteration=it
            )
        step = np.where(active, rz / np.where(active, pq, 1.0), 0.0)
        X += step[:, None] * P
        R -= step[:, None] * Q
        iters += active
        res = np.where(active, np.linalg.norm(R, axis=1) / safe_b, res)
        if not np.all(np.isfinite(res)):
            raise NumericalBreakdownError("CG produced non-finite residual", iteration=it)
        active &= res > tol
        Z = R if inv_d is None else inv_d * R
        rz_new = np.einsum("bi,bi->b", R, Z)
        beta = np.where(active, rz_new / np.where(rz != 0, rz, 1.0), 0.0)
        P = Z + beta[:, None] * P
        rz = rz_new
    return X, iters, res


def _cholesky_or_raise(A: np.ndarray, label: str = "") -> np.ndarray:
    c, info = lapack.dpotrf(A, lower=1, clean=1)
    if info > 0:
        raise NumericalBreakdownError(
            f"matrix{label} is not positive definite: leading minor of order {info} "
            f"(pivot {info - 1}) failed",
            iteration=int(info),
        )
    if info < 0:
        raise InvalidArgumentError(f"dpotrf argument {-info} invalid")
    return c


def direct_spd_solve(A: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Solve ``A x = b`` for SPD ``A`` via Cholesky."""
    A = np.asarray(A, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] != b.shape[0]:
        raise InvalidArgumentError(f"incompatible shapes {A.shape} and {b.shape}")
    L = _cholesky_or_raise(A)
    y = solve_triangular(L, b, lower=True)
    return solve_triangular(L.T, y, lower=False)


def batched_spd_solve(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Solve a stack of SPD systems ``A[j] x[j] = B[j]``."""
    try:
        L = np.linalg.cholesky(A)
    except np.linalg.LinAlgError:
        for j in range(A.shape[0]):
            _cholesky_or_raise(A[j], label=f" {j}")
        raise
    X = np.empty_like(B)
    for j in range(A.shape[0]):
        X[j], info = lapack.dpotrs(L[j], B[j], lower=1)
        if info != 0:
            raise NumericalBreakdownError(f"dpotrs failed on system {j} (info={info})")
    return X


def least_squares_solve(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Minimum-norm least-squares solution of ``A X = B``.

    Singular values below ``1e-12 * sigma_max`` are treated as zero.
    """
    A = np.asarray(A, dtype=np.float64)
    B = np.asarray(B, dtype=np.float64)
    if A.shape[0] != B.shape[0]:
        raise InvalidArgumentError(f"row mismatch: {A.shape} vs {B.shape}")
    if not np.any(A):
        return np.zeros((A.shape[1],) + B.shape[1:])
    return np.linalg.pinv(A, rcond=PINV_RCOND) @ B
