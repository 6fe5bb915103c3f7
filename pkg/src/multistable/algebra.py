"""Dense and sparse complex linear algebra used throughout the package.

All superoperator formulas assume column-major vectorization, i.e.
``vectorize(A @ B @ C) == kron(C.T, A) @ vectorize(B)``.
"""
from __future__ import annotations

from typing import NamedTuple

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

TOL_NULL = 1e-10
EIG_COND_MAX = 1e10


class DimensionError(ValueError):
    """Raised when operand shapes are incompatible."""


class NumericalError(RuntimeError):
    """A decomposition failed or produced unusable output."""


class SolverError(RuntimeError):
    """A linear solve failed; ``residual`` holds the relative residual reached."""

    def __init__(self, message: str, residual: float = float("nan")):
        super().__init__(message)
        self.residual = residual


def is_sparse(a) -> bool:
    return sp.issparse(a)


def vectorize(m) -> np.ndarray:
    """Stack the columns of a square matrix into a vector of length D**2."""
    m = np.asarray(m)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionError(f"vectorize expects a square matrix, got shape {m.shape}")
    return m.reshape(-1, order="F").astype(complex, copy=True)


def devectorize(v, dim: int | None = None) -> np.ndarray:
    v = np.asarray(v).reshape(-1)
    if dim is None:
        dim = int(round(np.sqrt(v.size)))
    if dim * dim != v.size:
        raise DimensionError(f"vector of length {v.size} is not a vectorized {dim}x{dim} matrix")
    return v.reshape((dim, dim), order="F")


def kron(a, b):
    """Kronecker product; sparse if either operand is sparse."""
    if is_sparse(a) or is_sparse(b):
        return sp.kron(a, b, format="csr")
    return np.kron(a, b)


def sparse_from_triplets(rows, cols, values, shape) -> sp.csc_matrix:
    """Assemble a CSC operator from (row, col, value) triplets.

    Duplicate entries are summed. The compressed form is sorted by column, then
    row, so assembly is deterministic for a given triplet multiset.
    """
    rows = np.asarray(rows, dtype=np.int64)
    cols = np.asarray(cols, dtype=np.int64)
    n, m = shape
    if rows.size and (rows.min() < 0 or rows.max() >= n or cols.min() < 0 or cols.max() >= m):
        raise DimensionError(f"triplet index out of range for shape {shape}")
    out = sp.coo_matrix((np.asarray(values, dtype=complex), (rows, cols)), shape=shape).tocsc()
    out.sum_duplicates()
    out.sort_indices()
    return out


def triplets(a) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Nonzero (rows, cols, values) of a dense or sparse matrix, column-major order."""
    if is_sparse(a):
        c = sp.csc_matrix(a)
        c.sum_duplicates()
        c.sort_indices()
        c.eliminate_zeros()
        coo = c.tocoo()
        order = np.lexsort((coo.row, coo.col))
        return coo.row[order], coo.col[order], coo.data[order]
    a = np.asarray(a)
    cols, rows = np.nonzero(a.T)
    return rows, cols, a[rows, cols]


def svd(m):
    """Full SVD ``m = U @ diag(s) @ V.conj().T`` with ``s`` descending.

    Returns ``(U, s, V)``; note ``V`` rather than its adjoint.
    """
    m = np.asarray(m.toarray() if is_sparse(m) else m, dtype=complex)
    try:
        u, s, vh = sla.svd(m, lapack_driver="gesdd")
    except np.linalg.LinAlgError:
        try:
            u, s, vh = sla.svd(m, lapack_driver="gesvd")
        except np.linalg.LinAlgError as exc:
            raise NumericalError(
                f"SVD did not converge for {m.shape} matrix "
                f"(norm {np.linalg.norm(m):.3e}, finite={np.isfinite(m).all()})"
            ) from exc
    return u, s, vh.conj().T


def null_mask(s, tol_null: float = TOL_NULL) -> np.ndarray:
    """Boolean mask of singular values counted as zero (``s <= tol_null * s_max``)."""
    s = np.asarray(s)
    smax = s.max() if s.size else 0.0
    return s <= tol_null * smax


class EigResult(NamedTuple):
    values: np.ndarray
    vectors: np.ndarray
    cond: float


def eig(m) -> EigResult:
    """Eigendecomposition with unit-norm eigenvector columns and cond(T) estimate.

    Hermitian input goes through ``eigh`` so the spectrum is exactly real and T
    unitary.
    """
    m = np.asarray(m.toarray() if is_sparse(m) else m, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionError(f"eig expects a square matrix, got shape {m.shape}")
    scale = max(np.linalg.norm(m), 1.0)
    if np.linalg.norm(m - m.conj().T) <= 1e-14 * scale:
        w, t = np.linalg.eigh(0.5 * (m + m.conj().T))
        return EigResult(w.astype(complex), t, 1.0)
    w, t = np.linalg.eig(m)
    t = t / np.linalg.norm(t, axis=0)
    s = np.linalg.svd(t, compute_uv=False)
    cond = float(s[0] / s[-1]) if s[-1] > 0 else float("inf")
    return EigResult(w, t, cond)


def _as_operator(a):
    if is_sparse(a):
        return sp.csc_matrix(a, dtype=complex)
    return np.asarray(a, dtype=complex)


def solve_linear(
    a,
    b,
    method: str = "direct",
    rtol: float = 1e-10,
    restart: int | None = None,
    maxiter: int | None = None,
    preconditioner: str | None = None,
) -> np.ndarray:
    """Solve ``a @ x = b``.

    ``method="direct"`` uses LU (dense LAPACK or SuperLU); ``"iterative"`` uses
    restarted GMRES, optionally with an incomplete-LU preconditioner
    (``preconditioner="ilu"``). Either way the relative residual must end below
    ``rtol`` (or the rounding floor from :func:`residual_floor`, if higher) or a
    :class:`SolverError` is raised.
    """
    a = _as_operator(a)
    b = np.asarray(b, dtype=complex).reshape(-1)
    n = a.shape[0]
    if a.shape[0] != a.shape[1] or b.size != n:
        raise DimensionError(f"cannot solve {a.shape} system with rhs of length {b.size}")
    bnorm = np.linalg.norm(b)
    if bnorm == 0:
        return np.zeros(n, dtype=complex)

    if method == "direct":
        try:
            if is_sparse(a):
                x = spla.splu(a).solve(b)
            else:
                x = sla.solve(a, b, check_finite=True)
        except (RuntimeError, np.linalg.LinAlgError, sla.LinAlgError) as exc:
            raise SolverError(f"direct solve failed: {exc}") from exc
    elif method == "iterative":
        m_op = None
        if preconditioner == "ilu":
            lu = spla.spilu(sp.csc_matrix(a), drop_tol=1e-6, fill_factor=20)
            m_op = spla.LinearOperator(a.shape, lu.solve, dtype=complex)
        elif preconditioner is not None:
            raise ValueError(f"unknown preconditioner {preconditioner!r}")
        restart = restart or min(n, 200)
        maxiter = maxiter or max(50, 20 * n // restart)
        x, info = spla.gmres(a, b, rtol=rtol, atol=0.0, restart=restart, maxiter=maxiter, M=m_op)
        if info != 0:
            res = np.linalg.norm(a @ x - b) / bnorm
            if not res <= residual_floor(a, x, bnorm, rtol):
                raise SolverError(f"GMRES did not converge (info={info}, relative residual {res:.3e})", res)
    else:
        raise ValueError(f"unknown method {method!r}; expected 'direct' or 'iterative'")

    res = np.linalg.norm(a @ x - b) / bnorm
    tol = residual_floor(a, x, bnorm, rtol)
    if not np.isfinite(res) or res > tol:
        raise SolverError(f"{method} solve residual {res:.3e} exceeds tolerance {tol:.1e}", res)
    return x


def residual_floor(a, x, bnorm: float, rtol: float) -> float:
    """``rtol``, raised to the rounding level ``u ||a||_F ||x|| / ||b||`` when that is larger.

    For ``I - L/eps`` with small ``eps`` the product ``a @ x`` cannot be formed
    more accurately than this in double precision.
    """
    anorm = spla.norm(a) if is_sparse(a) else np.linalg.norm(a)
    return max(rtol, float(np.finfo(float).eps * anorm * np.linalg.norm(x) / bnorm))
