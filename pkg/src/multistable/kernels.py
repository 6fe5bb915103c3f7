"""Backend selection for the Runge-Kutta kernels.

The compiled extension is used when it imports; set ``MULTISTABLE_PURE_PYTHON=1``
to force the NumPy fallback.
"""
from __future__ import annotations

import os

import numpy as np
import scipy.sparse as sp

from . import _kernels_py

if os.environ.get("MULTISTABLE_PURE_PYTHON", "").strip() not in ("", "0"):
    _impl = _kernels_py
    BACKEND = "python"
else:
    try:
        from . import _kernels as _impl  # type: ignore[attr-defined]
        BACKEND = "cython"
    except ImportError:
        _impl = _kernels_py
        BACKEND = "python"


def backend(name: str | None = None):
    """Kernel module for ``name`` ("cython" or "python"); the active one if None."""
    if name is None:
        return _impl
    if name == "python":
        return _kernels_py
    if name == "cython":
        from . import _kernels  # type: ignore[attr-defined]
        return _kernels
    raise ValueError(f"unknown backend {name!r}")


def csr_arrays(a) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """CSR (indptr, indices, data) as contiguous int64/int64/complex128 arrays."""
    m = sp.csr_matrix(a, dtype=complex)
    m.sum_duplicates()
    m.sort_indices()
    return (np.ascontiguousarray(m.indptr, dtype=np.int64),
            np.ascontiguousarray(m.indices, dtype=np.int64),
            np.ascontiguousarray(m.data, dtype=np.complex128))
