"""Ready-made Lindblad models: two qubits and two collective spin ensembles."""
from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from .lindblad import LindbladModel, Superoperator, build_liouvillian
from .spins import CoupledSpinSpace, SpinEnsemblePair, collective_ops

# two-qubit product basis |1>=|11>, |2>=|10>, |3>=|01>, |4>=|00>
KET1 = np.array([1, 0, 0, 0], dtype=complex)
KET4 = np.array([0, 0, 0, 1], dtype=complex)
PHI_PLUS = np.array([0, 1, 1, 0], dtype=complex) / np.sqrt(2)
PHI_MINUS = np.array([0, 1, -1, 0], dtype=complex) / np.sqrt(2)


def projector(ket) -> np.ndarray:
    ket = np.asarray(ket, dtype=complex)
    return np.outer(ket, ket.conj())


def two_qubit_ops() -> dict[str, np.ndarray]:
    """``S_- = sigma_-^1 + sigma_-^2`` etc. on the 4-dim two-qubit space."""
    ops = collective_ops(SpinEnsemblePair(1, 1))
    sm1 = np.array([[0, 0], [1, 0]], dtype=complex)
    sx1 = sm1 + sm1.T
    ops["sigma_x_sum"] = np.kron(sx1, np.eye(2)) + np.kron(np.eye(2), sx1)
    return ops


def single_qubit_decay(gamma: float = 1.0) -> LindbladModel:
    sm = np.array([[0, 0], [1, 0]], dtype=complex)
    return LindbladModel(2, None, ((sm, gamma),), name="single_qubit_decay")


def two_qubit_balanced(gamma: float = 1.0) -> LindbladModel:
    """``L1 = S_-``, ``L2 = S_+`` with equal rates, ``H = 0``."""
    ops = two_qubit_ops()
    return LindbladModel(4, None, ((ops["Sm"], gamma), (ops["Sp"], gamma)), name="two_qubit_balanced")


def two_qubit_decay(gamma: float = 1.0) -> LindbladModel:
    """Collective decay ``L1 = S_-`` only."""
    ops = two_qubit_ops()
    return LindbladModel(4, None, ((ops["Sm"], gamma),), name="two_qubit_decay")


def two_qubit_driven(omega: float = 1.0, gamma: float = 1.0) -> LindbladModel:
    """Collective decay plus the drive ``H = omega (sigma_x^1 + sigma_x^2)``."""
    ops = two_qubit_ops()
    return LindbladModel(4, omega * ops["sigma_x_sum"], ((ops["Sm"], gamma),), name="two_qubit_driven")


def _chop(a: np.ndarray, tol: float = 1e-13) -> sp.csr_matrix:
    a = np.array(a, dtype=complex)
    scale = max(1.0, float(np.abs(a).max(initial=0.0)))
    a.real[np.abs(a.real) < tol * scale] = 0.0
    a.imag[np.abs(a.imag) < tol * scale] = 0.0
    return sp.csr_matrix(a)


def two_ensemble_model(pair: SpinEnsemblePair, balanced: bool = False, gamma: float = 1.0,
                       basis: str = "coupled") -> LindbladModel:
    """Collective decay ``S_-`` (plus ``S_+`` when ``balanced``) on two ensembles.

    In the coupled basis both jump operators are block diagonal in ``S`` and
    ``L^+ L`` is diagonal, which keeps the Liouvillian very sparse.
    """
    if basis == "coupled":
        ops = CoupledSpinSpace(pair).collective
    elif basis == "product":
        ops = collective_ops(pair)
    else:
        raise ValueError(f"unknown basis {basis!r}")
    jumps = [(_chop(ops["Sm"]), gamma)]
    if balanced:
        jumps.append((_chop(ops["Sp"]), gamma))
    kind = "balanced" if balanced else "decay"
    return LindbladModel(pair.product_dim, None, tuple(jumps),
                         name=f"two_ensemble_{kind}_NA{pair.n_a}_NB{pair.n_b}")


def two_ensemble_liouvillian(pair: SpinEnsemblePair, balanced: bool = False, gamma: float = 1.0,
                             dense_threshold: int | None = None) -> Superoperator:
    kw = {} if dense_threshold is None else {"dense_threshold": dense_threshold}
    return build_liouvillian(two_ensemble_model(pair, balanced, gamma), **kw)
