"""Lindblad models and their vectorized Liouvillian superoperators."""
from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .algebra import DimensionError, devectorize, is_sparse, sparse_from_triplets, triplets, vectorize

SCHEMA_VERSION = 1
DENSE_THRESHOLD = 4096


class ModelError(ValueError):
    """Invalid model definition or model file."""


def _dense(a) -> np.ndarray:
    return np.asarray(a.toarray() if is_sparse(a) else a, dtype=complex)


@dataclass(frozen=True)
class LindbladModel:
    """Hamiltonian plus a list of ``(jump_operator, rate)`` pairs on a D-dim space.

    Rates are kept separate from the operators; ``sqrt(rate)`` is folded in only
    when the Liouvillian is assembled.
    """

    dim: int
    hamiltonian: object = None
    jumps: tuple = ()
    name: str = ""

    def __post_init__(self):
        d = int(self.dim)
        if d < 1:
            raise ModelError(f"dimension must be positive, got {self.dim}")
        h = self.hamiltonian
        h = sp.csr_matrix((d, d), dtype=complex) if h is None else sp.csr_matrix(h, dtype=complex)
        if h.shape != (d, d):
            raise DimensionError(f"Hamiltonian has shape {h.shape}, expected {(d, d)}")
        hnorm = spla.norm(h) if h.nnz else 0.0
        if h.nnz and spla.norm(h - h.conj().T) > 1e-12 * max(1.0, hnorm):
            raise ModelError("Hamiltonian is not Hermitian")
        jumps = []
        for op, rate in self.jumps:
            op = sp.csr_matrix(op, dtype=complex)
            if op.shape != (d, d):
                raise DimensionError(f"jump operator has shape {op.shape}, expected {(d, d)}")
            rate = float(rate)
            if not np.isfinite(rate) or rate < 0:
                raise ModelError(f"jump rate must be a nonnegative number, got {rate}")
            jumps.append((op, rate))
        object.__setattr__(self, "dim", d)
        object.__setattr__(self, "hamiltonian", h)
        object.__setattr__(self, "jumps", tuple(jumps))

    def rhs(self, rho: np.ndarray) -> np.ndarray:
        """Right-hand side of the master equation evaluated directly on ``rho``."""
        h = _dense(self.hamiltonian)
        out = -1j * (h @ rho - rho @ h)
        for op, rate in self.jumps:
            a = _dense(op)
            ad = a.conj().T
            out += rate * (a @ rho @ ad - 0.5 * (ad @ a @ rho + rho @ ad @ a))
        return out


@dataclass(frozen=True, eq=False)
class Superoperator:
    """Vectorized Liouvillian acting on column-major ``vec(rho)``."""

    matrix: object
    dim: int
    meta: dict = field(default_factory=dict, compare=False)

    @property
    def size(self) -> int:
        return self.dim * self.dim

    @property
    def sparse(self) -> bool:
        return is_sparse(self.matrix)

    @cached_property
    def adjoint(self):
        return self.matrix.conj().T.tocsr() if self.sparse else self.matrix.conj().T

    @cached_property
    def norm(self) -> float:
        if self.sparse:
            return float(spla.norm(self.matrix))
        return float(np.linalg.norm(self.matrix))

    @cached_property
    def hermitian_flag(self) -> bool:
        return is_hermitian(self)

    def dense(self) -> np.ndarray:
        return _dense(self.matrix)

    def csr(self) -> sp.csr_matrix:
        return sp.csr_matrix(self.matrix, dtype=complex)

    def __matmul__(self, v):
        return self.matrix @ v


def build_liouvillian(model: LindbladModel, dense_threshold: int = DENSE_THRESHOLD,
                      check_spectrum: bool = False) -> Superoperator:
    """Assemble the Liouvillian of ``model`` in column-major vectorization.

    ``L = -i(I (x) H - H^T (x) I) + sum_j (A_j^* (x) A_j - 1/2 (I (x) A_j^+ A_j + (A_j^+ A_j)^T (x) I))``
    with ``A_j = sqrt(rate_j) * L_j``. Dense storage is used while ``D**2`` does
    not exceed ``dense_threshold``.
    """
    d = model.dim
    eye = sp.identity(d, dtype=complex, format="csr")
    h = model.hamiltonian
    lv = -1j * (sp.kron(eye, h, format="csr") - sp.kron(h.T, eye, format="csr"))
    for op, rate in model.jumps:
        if rate == 0.0:
            continue
        a = np.sqrt(rate) * op
        ada = (a.conj().T @ a).tocsr()
        lv = lv + sp.kron(a.conj(), a, format="csr") - 0.5 * (
            sp.kron(eye, ada, format="csr") + sp.kron(ada.T, eye, format="csr")
        )
    lv = sp.csr_matrix(lv)
    lv.sum_duplicates()
    lv.eliminate_zeros()
    matrix = lv.toarray() if d * d <= dense_threshold else lv
    sop = Superoperator(matrix, d, {"model": model.name})
    if check_spectrum and not sop.sparse:
        spectrum_warning(sop)
    return sop


def spectrum_warning(sop: Superoperator, tol: float = 1e-9) -> float:
    """Warn if any eigenvalue has real part above ``tol``; returns the max real part."""
    w = np.linalg.eigvals(sop.dense())
    top = float(w.real.max()) if w.size else 0.0
    if top > tol:
        warnings.warn(f"Liouvillian has an eigenvalue with real part {top:.3e} > {tol:.0e}",
                      RuntimeWarning, stacklevel=2)
    return top


def is_hermitian(sop: Superoperator, rtol: float = 1e-10) -> bool:
    m = sop.matrix
    if sop.sparse:
        diff = spla.norm(m - m.conj().T)
        scale = spla.norm(m)
    else:
        diff = np.linalg.norm(m - m.conj().T)
        scale = np.linalg.norm(m)
    return bool(diff <= rtol * scale)


def trace_preservation_residual(sop: Superoperator) -> float:
    """``||L^+ vec(I)||``; zero for a trace-preserving generator."""
    return float(np.linalg.norm(sop.adjoint @ vectorize(np.eye(sop.dim))))


def apply(sop: Superoperator, rho) -> np.ndarray:
    """``d rho / dt`` as a matrix: devectorized ``L @ vec(rho)``."""
    rho = np.asarray(rho)
    if rho.shape != (sop.dim, sop.dim):
        raise DimensionError(f"state has shape {rho.shape}, superoperator acts on {sop.dim}x{sop.dim}")
    return devectorize(sop.matrix @ vectorize(rho), sop.dim)


# -- JSON model files -------------------------------------------------------
#
# {
#   "schema_version": 1,
#   "dim": 4,
#   "hamiltonian": {"triplets": [[row, col, re, im], ...]},
#   "jumps": [{"rate": 1.0, "triplets": [[row, col, re, im], ...]}, ...]
# }
#
# Indices are 0-based; duplicate triplets are summed. "hamiltonian" may be
# omitted for H = 0.

def matrix_to_triplets(a) -> list[list]:
    rows, cols, vals = triplets(a)
    return [[int(r), int(c), float(v.real), float(v.imag)] for r, c, v in zip(rows, cols, vals)]


def matrix_from_triplets(items, dim: int):
    if not isinstance(items, list):
        raise ModelError("triplets must be a list of [row, col, re, im]")
    rows, cols, vals = [], [], []
    for t in items:
        if not isinstance(t, (list, tuple)) or len(t) != 4:
            raise ModelError(f"bad triplet {t!r}; expected [row, col, re, im]")
        r, c, re, im = t
        if not all(isinstance(x, int) for x in (r, c)):
            raise ModelError(f"triplet indices must be integers: {t!r}")
        rows.append(r)
        cols.append(c)
        vals.append(complex(float(re), float(im)))
    try:
        return sparse_from_triplets(rows, cols, vals, (dim, dim))
    except DimensionError as exc:
        raise ModelError(str(exc)) from exc


def model_to_dict(model: LindbladModel) -> dict:
    out = {"schema_version": SCHEMA_VERSION, "dim": model.dim}
    if model.name:
        out["name"] = model.name
    out["hamiltonian"] = {"triplets": matrix_to_triplets(model.hamiltonian)}
    out["jumps"] = [{"rate": rate, "triplets": matrix_to_triplets(op)} for op, rate in model.jumps]
    return out


def model_from_dict(doc: dict) -> LindbladModel:
    if not isinstance(doc, dict):
        raise ModelError("model document must be a JSON object")
    version = doc.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ModelError(f"unsupported schema_version {version!r} (expected {SCHEMA_VERSION})")
    try:
        dim = int(doc["dim"])
        ham = doc.get("hamiltonian")
        h = None if ham is None else matrix_from_triplets(ham["triplets"], dim)
        jumps = [(matrix_from_triplets(j["triplets"], dim), float(j["rate"])) for j in doc.get("jumps", [])]
    except (KeyError, TypeError) as exc:
        raise ModelError(f"malformed model document: {exc}") from exc
    return LindbladModel(dim, h, tuple(jumps), name=str(doc.get("name", "")))


def load_model(path) -> LindbladModel:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ModelError(f"{path}: invalid JSON ({exc})") from exc
    return model_from_dict(doc)


def save_model(model: LindbladModel, path) -> None:
    Path(path).write_text(json.dumps(model_to_dict(model), indent=1))
