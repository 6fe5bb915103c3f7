"""Steady states reached from a given initial state.

Four routes are provided:

``steady_spectral``
    eigendecomposition ``L T = T diag(lam)``; weights ``c_j`` are overlaps of
    the initial state with the zero-eigenvalue columns in the metric
    ``(T^-1)^+ T^-1``.
``steady_kernel``
    right kernel ``V_j`` of ``L`` paired with a biorthogonal left kernel
    ``U_j`` (conserved quantities); weights are ``U_j^+ vec(rho0)``.
``steady_hermitian``
    for ``L = L^+`` the left and right kernels coincide and the steady state is
    the orthogonal projection of the initial state on the kernel.
``steady_resolvent``
    one linear solve ``(I - L/eps) x = vec(rho0)``, the small-``eps`` stand-in
    for ``lim_{s->0} s (s - L)^-1``. Its bias is ``O(eps / gap)``.

Every returned state is Hermitian-symmetrized and trace-renormalized.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import algebra
from .algebra import DimensionError, NumericalError, devectorize, vectorize
from .lindblad import Superoperator, is_hermitian

DEFAULT_EPSILON = 1e-6


class IllConditionedError(NumericalError):
    """Eigenvector matrix too ill-conditioned for the spectral formula."""


class KernelStructureError(NumericalError):
    """Left and right kernels cannot be paired biorthogonally."""


class ContractError(ValueError):
    """A method was called outside its domain of validity."""


def finalize_state(v, dim: int) -> np.ndarray:
    """Devectorize, symmetrize ``(rho + rho^+)/2`` and rescale to unit trace."""
    rho = devectorize(v, dim)
    rho = 0.5 * (rho + rho.conj().T)
    tr = np.trace(rho).real
    if abs(tr) > 1e-300:
        rho = rho / tr
    return rho


def _check_state(sop: Superoperator | None, rho0, dim: int) -> np.ndarray:
    rho0 = np.asarray(rho0, dtype=complex)
    if rho0.shape != (dim, dim):
        raise DimensionError(f"initial state has shape {rho0.shape}, expected {(dim, dim)}")
    return rho0


def _canonical_kernel(v: np.ndarray) -> np.ndarray:
    """Deterministic orthonormal basis for ``span(v)``.

    Dominant rows are chosen by pivoted QR (invariant under rotations of the
    input basis), the span is re-expressed with unit entries on those rows,
    then Gram-Schmidt runs in order of ascending dominant index. Each column is
    phased to be real positive on its dominant row.
    """
    n = v.shape[1]
    if n == 0:
        return v
    _, _, piv = sla.qr(v.conj().T, pivoting=True, mode="economic")
    rows = np.sort(piv[:n])
    b = v @ np.linalg.inv(v[rows, :])
    q, _ = np.linalg.qr(b)
    for j, r in enumerate(rows):
        ph = q[r, j]
        if abs(ph) > 0:
            q[:, j] *= abs(ph) / ph
    return q


@dataclass(frozen=True, eq=False)
class SteadyStateBasis:
    """Orthonormal right kernel of ``L`` with a biorthogonal left kernel.

    Columns of ``right`` span ``ker L``; columns of ``left`` span ``ker L^+``
    and satisfy ``left^+ right = I``.
    """

    right: np.ndarray
    left: np.ndarray
    dim: int
    hermitian: bool = False
    overlap_cond: float = 1.0
    singular_values: np.ndarray | None = None

    @property
    def n(self) -> int:
        return self.right.shape[1]

    @property
    def right_vectors(self) -> list[np.ndarray]:
        return [self.right[:, j] for j in range(self.n)]

    @property
    def left_vectors(self) -> list[np.ndarray]:
        return [self.left[:, j] for j in range(self.n)]

    def biorthogonality_residual(self) -> float:
        return float(np.abs(self.left.conj().T @ self.right - np.eye(self.n)).max(initial=0.0))

    def orthonormality_residual(self) -> float:
        return float(np.abs(self.right.conj().T @ self.right - np.eye(self.n)).max(initial=0.0))

    def weights(self, rho0) -> np.ndarray:
        """Initial values ``U_j^+ vec(rho0)`` of the conserved quantities."""
        return self.left.conj().T @ vectorize(rho0)


def kernel_basis(sop: Superoperator, tol_null: float = algebra.TOL_NULL,
                 max_overlap_cond: float = 1e12) -> SteadyStateBasis:
    """Biorthogonal kernel pair from a full SVD ``L = U' S V^+``.

    The zero-singular-value columns of ``V`` (right kernel) are brought to a
    deterministic orthonormal basis; with ``M_O = V_null^+ U'_null`` the left
    set is ``U_null = U'_null M_O^-1``.
    """
    if sop.sparse:
        raise ContractError(
            f"kernel extraction needs a dense Liouvillian (D^2={sop.size}); "
            "use steady_resolvent for sparse models"
        )
    u, s, v = algebra.svd(sop.matrix)
    mask = algebra.null_mask(s, tol_null)
    v_null = _canonical_kernel(v[:, mask])
    u_null = u[:, mask]
    n = v_null.shape[1]
    if n == 0:
        raise KernelStructureError("Liouvillian has trivial kernel; no steady state")
    m_o = v_null.conj().T @ u_null
    sv = np.linalg.svd(m_o, compute_uv=False)
    cond = float(sv[0] / sv[-1]) if sv[-1] > 0 else float("inf")
    if cond > max_overlap_cond:
        raise KernelStructureError(
            f"overlap matrix between left and right kernels is singular (cond {cond:.2e}); "
            "left/right kernels are misaligned"
        )
    left = u_null @ np.linalg.inv(m_o)
    return SteadyStateBasis(v_null, left, sop.dim, hermitian=is_hermitian(sop),
                            overlap_cond=cond, singular_values=s)


@dataclass(frozen=True, eq=False)
class SpectralDecomposition:
    """``L T = T diag(values)`` with unit-norm eigenvector columns."""

    T: np.ndarray
    values: np.ndarray
    zero_indices: np.ndarray
    cond: float
    dim: int

    @cached_property
    def T_inv(self) -> np.ndarray:
        return np.linalg.inv(self.T)

    @cached_property
    def metric(self) -> np.ndarray:
        """``(T^-1)^+ T^-1``; memory grows as ``D**4``, so only built on request."""
        return self.T_inv.conj().T @ self.T_inv

    @property
    def kernel_vectors(self) -> np.ndarray:
        return self.T[:, self.zero_indices]


def spectral_decomposition(sop: Superoperator, zero_tol: float = algebra.TOL_NULL) -> SpectralDecomposition:
    if sop.sparse:
        raise ContractError("spectral decomposition needs a dense Liouvillian")
    w, t, cond = algebra.eig(sop.matrix)
    scale = np.abs(w).max(initial=0.0)
    zero = np.flatnonzero(np.abs(w) <= zero_tol * scale) if scale > 0 else np.arange(w.size)
    return SpectralDecomposition(t, w, zero, cond, sop.dim)


def steady_spectral(spec: SpectralDecomposition, rho0, cond_max: float = algebra.EIG_COND_MAX) -> np.ndarray:
    """``rho_SS = sum_j c_j rho_j`` with ``c_j = rho_j^+ (T^-1)^+ T^-1 vec(rho0)``."""
    if spec.cond > cond_max:
        raise IllConditionedError(
            f"eigenvector matrix condition number {spec.cond:.2e} exceeds {cond_max:.0e}; "
            "the Liouvillian is (nearly) defective. Use steady_kernel or steady_resolvent instead."
        )
    rho0 = _check_state(None, rho0, spec.dim)
    r0 = spec.T_inv @ vectorize(rho0)
    rk = spec.T_inv @ spec.kernel_vectors
    c = rk.conj().T @ r0
    return finalize_state(spec.kernel_vectors @ c, spec.dim)


def steady_kernel(basis: SteadyStateBasis, rho0) -> np.ndarray:
    """``rho_SS = sum_j (U_j^+ vec(rho0)) V_j``."""
    rho0 = _check_state(None, rho0, basis.dim)
    return finalize_state(basis.right @ basis.weights(rho0), basis.dim)


def steady_hermitian(basis: SteadyStateBasis, rho0) -> np.ndarray:
    """Orthogonal projection of ``vec(rho0)`` on the kernel; needs ``L = L^+``."""
    if not basis.hermitian:
        raise ContractError("steady_hermitian requires a Hermitian Liouvillian; use steady_kernel")
    rho0 = _check_state(None, rho0, basis.dim)
    c = basis.right.conj().T @ vectorize(rho0)
    return finalize_state(basis.right @ c, basis.dim)


def conserved_quantities(basis: SteadyStateBasis) -> list[np.ndarray]:
    """Devectorized left kernel vectors ``U_j``; ``tr(U_j^+ rho(t))`` is constant."""
    return [devectorize(basis.left[:, j], basis.dim) for j in range(basis.n)]


class ResolventSolver:
    """Factorized ``I - L/eps`` for repeated steady-state solves.

    ``method="direct"`` factorizes once (LAPACK LU or SuperLU);
    ``"iterative"`` runs GMRES for every right-hand side.
    """

    def __init__(self, sop: Superoperator, epsilon: float = DEFAULT_EPSILON, method: str = "direct",
                 rtol: float = 1e-10, preconditioner: str | None = None):
        if not epsilon > 0:
            raise ValueError(f"epsilon must be positive, got {epsilon}")
        self.sop = sop
        self.epsilon = float(epsilon)
        self.method = method
        self.rtol = rtol
        self.preconditioner = preconditioner
        n = sop.size
        if sop.sparse:
            self.a = (sp.identity(n, dtype=complex, format="csc") - sop.matrix / epsilon).tocsc()
        else:
            self.a = np.eye(n, dtype=complex) - sop.matrix / epsilon
        self._lu = None
        if method == "direct":
            try:
                if sop.sparse:
                    self._lu = spla.splu(self.a).solve
                else:
                    lu = sla.lu_factor(self.a)
                    self._lu = lambda b: sla.lu_solve(lu, b)
            except (RuntimeError, ValueError, np.linalg.LinAlgError) as exc:
                raise algebra.SolverError(f"LU factorization of I - L/eps failed: {exc}") from exc
        elif method != "iterative":
            raise ValueError(f"unknown method {method!r}")

    def solve_vector(self, b: np.ndarray) -> tuple[np.ndarray, float]:
        """Raw solution and its relative residual."""
        if self._lu is not None:
            x = self._lu(b)
            # one step of iterative refinement keeps the residual near machine level
            r = b - self.a @ x
            x = x + self._lu(r)
        else:
            x = algebra.solve_linear(self.a, b, method="iterative", rtol=self.rtol,
                                     preconditioner=self.preconditioner)
        res = float(np.linalg.norm(self.a @ x - b) / max(np.linalg.norm(b), 1e-300))
        if not np.isfinite(res):
            raise algebra.SolverError("resolvent solve produced non-finite values", res)
        return x, res

    def __call__(self, rho0, full_output: bool = False, warn_residual: float | None = None):
        """Steady state from ``rho0``.

        ``||L rho||`` equals ``eps * ||x - rho0||`` for the exact solve, so it is
        of order ``eps`` by construction; the warning fires above
        ``warn_residual`` (default ``10 * eps``).
        """
        rho0 = _check_state(self.sop, rho0, self.sop.dim)
        if warn_residual is None:
            warn_residual = 10 * self.epsilon
        x, res = self.solve_vector(vectorize(rho0))
        rho = finalize_state(x, self.sop.dim)
        lres = float(np.linalg.norm(self.sop.matrix @ vectorize(rho)))
        if lres > warn_residual:
            warnings.warn(
                f"||L rho_SS|| = {lres:.2e} after resolvent solve with eps={self.epsilon:g}; "
                "consider a smaller epsilon",
                RuntimeWarning, stacklevel=2,
            )
        if full_output:
            return rho, {"solve_residual": res, "liouvillian_residual": lres,
                         "epsilon": self.epsilon, "method": self.method}
        return rho


def steady_resolvent(sop: Superoperator, rho0, epsilon: float = DEFAULT_EPSILON, method: str = "direct",
                     rtol: float = 1e-10, preconditioner: str | None = None, check_epsilon: bool = False,
                     consistency_tol: float | None = None, full_output: bool = False,
                     warn_residual: float | None = None):
    """Steady state from one solve of ``(I - L/eps) x = vec(rho0)``.

    With ``check_epsilon`` the solve is repeated at ``eps/10`` and a warning is
    issued if the two answers differ (max abs entry) by more than
    ``consistency_tol`` (default ``10 * eps``, i.e. a spectral gap of at least
    0.1 in the units of ``L``).
    """
    solver = ResolventSolver(sop, epsilon, method, rtol, preconditioner)
    rho, info = solver(rho0, full_output=True, warn_residual=warn_residual)
    if check_epsilon:
        rho_fine = ResolventSolver(sop, epsilon / 10, method, rtol, preconditioner)(
            rho0, warn_residual=np.inf)
        diff = float(np.abs(rho - rho_fine).max())
        tol = 10 * epsilon if consistency_tol is None else consistency_tol
        info["epsilon_consistency"] = diff
        if diff > tol:
            warnings.warn(f"resolvent result changes by {diff:.2e} between eps={epsilon:g} and "
                          f"eps={epsilon / 10:g}; spectral gap may be small", RuntimeWarning, stacklevel=2)
    if full_output:
        return rho, info
    return rho
