"""Concurrence and quantum Fisher information (QFI) for phase encoding by a generator G."""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import NamedTuple

import numpy as np

from .algebra import DimensionError
from .spins import CoupledSpinSpace, SpinEnsemblePair, cg_dif_closed, collective_ops, dicke_generator_matrix, p_of_S

SIGMA_Y2 = np.kron(np.array([[0, -1j], [1j, 0]]), np.array([[0, -1j], [1j, 0]]))
RANK_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class Generator:
    matrix: np.ndarray
    label: str = ""

    def __post_init__(self):
        m = np.asarray(self.matrix.toarray() if hasattr(self.matrix, "toarray") else self.matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise DimensionError(f"generator must be square, got shape {m.shape}")
        if np.abs(m - m.conj().T).max(initial=0.0) > 1e-12 * max(1.0, np.abs(m).max(initial=0.0)):
            raise ValueError("generator is not Hermitian")
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]


def _gmat(g) -> np.ndarray:
    return g.matrix if isinstance(g, Generator) else Generator(g).matrix


def differential_generator(pair: SpinEnsemblePair, basis: str = "coupled") -> Generator:
    """``G = S_z^A - S_z^B`` in the coupled (``|S, M>``) or product basis."""
    if basis == "coupled":
        return Generator(dicke_generator_matrix(pair), "Sz_A - Sz_B")
    if basis == "product":
        ops = collective_ops(pair)
        return Generator(ops["Sz_A"] - ops["Sz_B"], "Sz_A - Sz_B")
    raise ValueError(f"unknown basis {basis!r}")


class QfiResult(NamedTuple):
    value: float
    rank_used: int
    method: str
    correction: float = 0.0


def concurrence(rho) -> float:
    """Two-qubit concurrence from the eigenvalues of ``rho @ rho_tilde``.

    ``rho_tilde = (sy x sy) rho^* (sy x sy)``; the square roots of the
    eigenvalues of ``rho rho_tilde`` coincide with the eigenvalues of
    ``sqrt(sqrt(rho) rho_tilde sqrt(rho))``.
    """
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (4, 4):
        raise DimensionError(f"concurrence needs a 4x4 state, got {rho.shape}")
    rt = SIGMA_Y2 @ rho.conj() @ SIGMA_Y2
    ev = np.linalg.eigvals(rho @ rt)
    mu = np.sort(np.sqrt(np.clip(ev.real, 0.0, None)))[::-1]
    return float(max(0.0, mu[0] - mu[1] - mu[2] - mu[3]))


def qfi_pure(psi, g) -> float:
    """``4 (<G^2> - <G>^2)`` for a normalized state vector."""
    psi = np.asarray(psi, dtype=complex).reshape(-1)
    gm = _gmat(g)
    if psi.size != gm.shape[0]:
        raise DimensionError(f"state of length {psi.size} does not match generator of size {gm.shape[0]}")
    norm = np.vdot(psi, psi).real
    if abs(norm - 1.0) > 1e-10:
        raise ValueError(f"state is not normalized (norm^2 = {norm:.12g})")
    gpsi = gm @ psi
    mean = np.vdot(psi, gpsi).real
    second = np.vdot(gpsi, gpsi).real
    return float(max(0.0, 4.0 * (second - mean * mean)))


def qfi_mixed(rho, g, rank_tol: float = RANK_TOL) -> QfiResult:
    """QFI of a mixed state from its spectral decomposition.

    ``F = sum_j p_j F_j - sum_{j != k} 8 p_j p_k / (p_j + p_k) |<j|G|k>|^2`` over
    eigenvectors with ``p_j > rank_tol``. The second sum is reported as
    ``correction``.
    """
    if not rank_tol > 0:
        raise ValueError("rank_tol must be positive")
    rho = np.asarray(rho, dtype=complex)
    gm = _gmat(g)
    if rho.shape != gm.shape:
        raise DimensionError(f"state shape {rho.shape} does not match generator {gm.shape}")
    p, v = np.linalg.eigh(0.5 * (rho + rho.conj().T))
    keep = p > rank_tol
    p, v = p[keep], v[:, keep]
    r = int(p.size)
    if r == 0:
        return QfiResult(0.0, 0, "mixed", 0.0)
    gv = gm @ v
    gjk = v.conj().T @ gv
    mean = np.real(np.diag(gjk))
    second = np.real(np.einsum("ij,ij->j", gv.conj(), gv))
    f_pure = 4.0 * (second - mean ** 2)
    first = float(p @ f_pure)
    w = 8.0 * np.outer(p, p) / (p[:, None] + p[None, :])
    np.fill_diagonal(w, 0.0)
    corr = float(np.sum(w * np.abs(gjk) ** 2))
    value = first - corr
    if value < -1e-9 * max(1.0, abs(first)):
        raise ArithmeticError(f"negative QFI {value:.3e}")
    return QfiResult(max(value, 0.0), r, "pure" if r == 1 else "mixed", corr)


def _check_balanced(n: int, s=None, m=None):
    if n < 0 or n % 2:
        raise ValueError(f"need a nonnegative even N, got {n}")
    if s is not None and not (int(s) == s and 0 <= s <= n // 2):
        raise ValueError(f"need integer 0 <= S <= N/2, got S={s} for N={n}")
    if m is not None and not (int(m) == m and abs(m) <= s):
        raise ValueError(f"need integer |M| <= S, got M={m}, S={s}")


def qfi_dicke_closed(n: int, s: int, m: int) -> float:
    """QFI of ``|S, M>`` for equal ensembles of ``N/2`` qubits, in closed form."""
    _check_balanced(n, s, m)
    s, m, n = Fraction(int(s)), Fraction(int(m)), Fraction(int(n))
    den = 3 - 4 * s * (1 + s)
    val = (12 * m * m + 8 * s * (1 + s) * (s + s * s - m * m - 1)) / den \
        + (1 - 2 * s * (1 + s) + 2 * m * m) / den * (n * n + 4 * n)
    return float(val)


def qfi_balanced_mixture_closed(n: int, s: int) -> float:
    """QFI of the equal mixture over ``M`` in sector ``S``: ``(N^2+4N)/3 - 4S(S+1)/3``."""
    _check_balanced(n, s)
    return float(Fraction(n * n + 4 * n, 3) - Fraction(4, 3) * s * (s + 1))


def qfi_protocol_closed(n: int) -> float:
    """``(N^2 + 2N)/3``: p(S)-weighted QFI of the sector mixtures."""
    _check_balanced(n)
    return float(Fraction(n * n + 2 * n, 3))


def qfi_decay_steady_convex(pair: SpinEnsemblePair) -> float:
    """QFI of ``sum_S p(S) |S,-S><S,-S|`` as the convex sum of the pure-state QFIs.

    Equal ensembles use the closed forms for both ``p(S)`` and the Dicke-state
    QFI; otherwise the Dicke states are built and evaluated with ``G`` from
    the Clebsch-Gordan rotation.
    """
    if pair.balanced:
        n = pair.n
        return float(sum(cg_dif_closed(n, s) ** 2 * qfi_dicke_closed(n, s, -s) for s in range(n // 2 + 1)))
    space = CoupledSpinSpace(pair)
    g = differential_generator(pair)
    return float(sum(p * qfi_pure(space.ket(s, -s), g) for s, p in p_of_S(pair).items()))


def qfi_protocol(pair: SpinEnsemblePair, method: str = "mixed") -> float:
    """``sum_S p(S) F(rho_B,S)``.

    ``method="mixed"`` evaluates every sector mixture with :func:`qfi_mixed`;
    ``"closed"`` (equal ensembles only) uses the closed form per sector.
    """
    ps = p_of_S(pair)
    if method == "closed":
        if not pair.balanced:
            raise ValueError("closed form needs N_A = N_B")
        return float(sum(p * qfi_balanced_mixture_closed(pair.n, s) for s, p in ps.items()))
    if method != "mixed":
        raise ValueError(f"unknown method {method!r}")
    space = CoupledSpinSpace(pair)
    g = differential_generator(pair)
    return float(sum(p * qfi_mixed(space.balanced_mixture(s), g).value for s, p in ps.items()))
