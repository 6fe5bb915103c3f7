"""Collective spin operators for two spin ensembles and the coupled Dicke basis.

Each ensemble of ``N_X`` qubits is kept in its permutation-symmetric sector,
a big spin ``S_X = N_X / 2`` with basis ``|S_X, M_X>`` ordered by descending
``M_X``. The product basis is ``|S_A, M_A> (x) |S_B, M_B>`` (A is the slow
index). The coupled basis lists sectors by ascending total spin ``S`` and,
inside a sector, ascending ``M``.

For one qubit per ensemble the product basis is ``|11>, |10>, |01>, |00>`` with
``|1>`` the excited (spin-up) level, and ``S_-`` equals ``sigma_-^1 + sigma_-^2``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property, lru_cache

import numpy as np


def _twice(x) -> int:
    """``2x`` as an int; rejects values that are not (half-)integers."""
    f = Fraction(x).limit_denominator(4)
    t = 2 * f
    if t.denominator != 1 or abs(float(f) - float(x)) > 1e-9:
        raise ValueError(f"{x!r} is not an integer or half-integer")
    return int(t)


def selection_allowed(j1, j2, j, m1, m2, m) -> bool:
    """Angular-momentum selection rules for ``<j1 m1; j2 m2 | j m>``."""
    try:
        tj1, tj2, tj, tm1, tm2, tm = (_twice(x) for x in (j1, j2, j, m1, m2, m))
    except ValueError:
        return False
    return _allowed2(tj1, tj2, tj, tm1, tm2, tm)


def _allowed2(tj1, tj2, tj, tm1, tm2, tm) -> bool:
    if min(tj1, tj2, tj) < 0:
        return False
    if tm != tm1 + tm2:
        return False
    if not abs(tj1 - tj2) <= tj <= tj1 + tj2 or (tj1 + tj2 + tj) % 2:
        return False
    for tjx, tmx in ((tj1, tm1), (tj2, tm2), (tj, tm)):
        if abs(tmx) > tjx or (tjx + tmx) % 2:
            return False
    return True


@lru_cache(maxsize=None)
def _cg2(tj1: int, tj2: int, tj: int, tm1: int, tm2: int) -> float:
    tm = tm1 + tm2
    if not _allowed2(tj1, tj2, tj, tm1, tm2, tm):
        return 0.0
    # integer arguments of the Racah formula
    a = (tj1 + tj2 - tj) // 2           # j1 + j2 - j
    b = (tj1 - tm1) // 2                # j1 - m1
    c = (tj2 + tm2) // 2                # j2 + m2
    d = (tj - tj2 + tm1) // 2           # j - j2 + m1
    e = (tj - tj1 - tm2) // 2           # j - j1 - m2
    kmin = max(0, -d, -e)
    kmax = min(a, b, c)
    if kmax < kmin:
        return 0.0
    # K * sum_k (-1)^k / [k!(a-k)!(b-k)!(c-k)!(d+k)!(e+k)!] as an exact integer,
    # with K = a! b! c! (d+kmax)! (e+kmax)!
    total = 0
    for k in range(kmin, kmax + 1):
        term = (math.comb(a, k) * math.perm(b, k) * math.perm(c, k)
                * math.perm(d + kmax, kmax - k) * math.perm(e + kmax, kmax - k))
        total += -term if k % 2 else term
    if total == 0:
        return 0.0
    f = math.factorial
    k_scale = f(a) * f(b) * f(c) * f(d + kmax) * f(e + kmax)
    num = ((tj + 1) * f((tj + tj1 - tj2) // 2) * f((tj - tj1 + tj2) // 2) * f(a)
           * f((tj + tm) // 2) * f((tj - tm) // 2) * f((tj1 - tm1) // 2) * f((tj1 + tm1) // 2)
           * f((tj2 - tm2) // 2) * f((tj2 + tm2) // 2))
    den = f((tj1 + tj2 + tj) // 2 + 1)
    value_sq = Fraction(num * total * total, den * k_scale * k_scale)
    return math.copysign(math.sqrt(value_sq), total)


def clebsch_gordan(j1, j2, j, m1, m2, m) -> float:
    """``<j1 m1; j2 m2 | j m>`` in the Condon-Shortley phase convention.

    Arguments may be ints, floats or Fractions holding (half-)integers.
    Combinations violating the selection rules give ``0.0``; use
    :func:`selection_allowed` to tell those apart from accidental zeros.
    """
    try:
        tj1, tj2, tj, tm1, tm2, tm = (_twice(x) for x in (j1, j2, j, m1, m2, m))
    except ValueError:
        return 0.0
    if tm != tm1 + tm2:
        return 0.0
    return _cg2(tj1, tj2, tj, tm1, tm2)


def cg_dif_closed(n: int, s: int) -> float:
    """``<S,0 | N/4, +N/4; N/4, -N/4>`` from its closed product form (even ``N``)."""
    if n % 2 or not 0 <= s <= n // 2:
        raise ValueError(f"need even N and 0 <= S <= N/2, got N={n}, S={s}")
    h = n // 2
    f = math.factorial
    return math.sqrt(Fraction((2 * s + 1) * f(h) ** 2, f(h - s) * f(h + 1 + s)))


def spin_matrices(s) -> dict[str, np.ndarray]:
    """``Sz``, ``Sp``, ``Sm`` for spin ``s`` in the basis ``M = s, s-1, ..., -s``."""
    ts = _twice(s)
    dim = ts + 1
    m = np.array([(ts - 2 * i) / 2 for i in range(dim)])
    sz = np.diag(m).astype(complex)
    sp_ = np.zeros((dim, dim), dtype=complex)
    for i in range(1, dim):
        # <M+1|S+|M> with M = m[i]
        sp_[i - 1, i] = math.sqrt(s * (s + 1) - m[i] * (m[i] + 1))
    return {"Sz": sz, "Sp": sp_, "Sm": sp_.conj().T.copy()}


@dataclass(frozen=True)
class SpinEnsemblePair:
    """Two qubit ensembles of sizes ``n_a >= n_b`` as big spins ``N/2`` each."""

    n_a: int
    n_b: int

    def __post_init__(self):
        if self.n_b < 0 or self.n_a < self.n_b:
            raise ValueError(f"need N_A >= N_B >= 0, got N_A={self.n_a}, N_B={self.n_b}")
        if (self.n_a - self.n_b) % 2:
            raise ValueError("imbalance (N_A - N_B)/2 must be an integer")

    @classmethod
    def from_total(cls, n: int, eta: int = 0) -> "SpinEnsemblePair":
        """``N_A = N/2 + eta`` and ``N_B = N/2 - eta``."""
        if n % 2:
            raise ValueError(f"total qubit number must be even, got {n}")
        return cls(n // 2 + eta, n // 2 - eta)

    @property
    def n(self) -> int:
        return self.n_a + self.n_b

    @property
    def s_a(self) -> Fraction:
        return Fraction(self.n_a, 2)

    @property
    def s_b(self) -> Fraction:
        return Fraction(self.n_b, 2)

    @property
    def eta(self) -> int:
        return (self.n_a - self.n_b) // 2

    @property
    def product_dim(self) -> int:
        return (self.n_a + 1) * (self.n_b + 1)

    @property
    def balanced(self) -> bool:
        return self.n_a == self.n_b

    def product_index(self, m_a, m_b) -> int:
        ia = int(self.s_a - Fraction(m_a))
        ib = int(self.s_b - Fraction(m_b))
        return ia * (self.n_b + 1) + ib


def collective_ops(pair: SpinEnsemblePair) -> dict[str, np.ndarray]:
    """Collective operators on the product space of ``pair``.

    Keys: ``Sm, Sp, Sz, Sx, Sy, S2, Sz_A, Sz_B, Sm_A, Sm_B``.
    """
    a = spin_matrices(pair.s_a)
    b = spin_matrices(pair.s_b)
    ia = np.eye(pair.n_a + 1)
    ib = np.eye(pair.n_b + 1)
    ops = {
        "Sz_A": np.kron(a["Sz"], ib),
        "Sz_B": np.kron(ia, b["Sz"]),
        "Sm_A": np.kron(a["Sm"], ib),
        "Sm_B": np.kron(ia, b["Sm"]),
    }
    ops["Sm"] = ops["Sm_A"] + ops["Sm_B"]
    ops["Sp"] = ops["Sm"].conj().T.copy()
    ops["Sz"] = ops["Sz_A"] + ops["Sz_B"]
    ops["Sx"] = 0.5 * (ops["Sp"] + ops["Sm"])
    ops["Sy"] = -0.5j * (ops["Sp"] - ops["Sm"])
    ops["S2"] = ops["Sx"] @ ops["Sx"] + ops["Sy"] @ ops["Sy"] + ops["Sz"] @ ops["Sz"]
    return ops


class CoupledSpinSpace:
    """Total-spin basis ``|S, M>`` of an ensemble pair.

    ``cg_map`` has the coupled states as columns written in the product basis,
    so ``cg_map.T @ op @ cg_map`` expresses a product-basis operator in the
    coupled basis.
    """

    def __init__(self, pair: SpinEnsemblePair):
        self.pair = pair
        s_min = abs(pair.s_a - pair.s_b)
        s_max = pair.s_a + pair.s_b
        self.sectors = [int(s) for s in range(int(s_min), int(s_max) + 1)]
        self.labels = [(s, m) for s in self.sectors for m in range(-s, s + 1)]
        self._index = {lab: i for i, lab in enumerate(self.labels)}

    @property
    def dim(self) -> int:
        return len(self.labels)

    def index(self, s: int, m: int) -> int:
        return self._index[(s, m)]

    @cached_property
    def cg_map(self) -> np.ndarray:
        p = self.pair
        w = np.zeros((p.product_dim, self.dim))
        ta, tb = _twice(p.s_a), _twice(p.s_b)
        for col, (s, m) in enumerate(self.labels):
            for tma in range(-ta, ta + 1, 2):
                tmb = 2 * m - tma
                if abs(tmb) > tb:
                    continue
                c = _cg2(ta, tb, 2 * s, tma, tmb)
                if c:
                    w[p.product_index(Fraction(tma, 2), Fraction(tmb, 2)), col] = c
        return w

    def to_coupled(self, op) -> np.ndarray:
        w = self.cg_map
        return w.T @ np.asarray(op) @ w

    def to_product(self, op) -> np.ndarray:
        w = self.cg_map
        return w @ np.asarray(op) @ w.T

    def ket(self, s: int, m: int) -> np.ndarray:
        v = np.zeros(self.dim, dtype=complex)
        v[self.index(s, m)] = 1.0
        return v

    def projector(self, s: int, m: int) -> np.ndarray:
        i = self.index(s, m)
        out = np.zeros((self.dim, self.dim), dtype=complex)
        out[i, i] = 1.0
        return out

    def sector_projector(self, s: int) -> np.ndarray:
        diag = np.array([1.0 if lab[0] == s else 0.0 for lab in self.labels])
        return np.diag(diag).astype(complex)

    def sector_populations(self, rho) -> dict[int, float]:
        d = np.real(np.diag(np.asarray(rho)))
        out = {s: 0.0 for s in self.sectors}
        for (s, _), x in zip(self.labels, d):
            out[s] += float(x)
        return out

    def balanced_mixture(self, s: int) -> np.ndarray:
        """``rho_B,S``: equal mixture of ``|S, M>`` over ``M``."""
        return self.sector_projector(s) / (2 * s + 1)

    @cached_property
    def collective(self) -> dict[str, np.ndarray]:
        """Collective operators expressed in the coupled basis."""
        return {k: self.to_coupled(v) for k, v in collective_ops(self.pair).items()}


def psi_dif_ket(pair: SpinEnsemblePair, flipped: bool = False, basis: str = "product") -> np.ndarray:
    """All of A up and B down (``flipped``: A down, B up)."""
    v = np.zeros(pair.product_dim, dtype=complex)
    if flipped:
        v[pair.product_index(-pair.s_a, pair.s_b)] = 1.0
    else:
        v[pair.product_index(pair.s_a, -pair.s_b)] = 1.0
    if basis == "coupled":
        return CoupledSpinSpace(pair).cg_map.T @ v
    if basis != "product":
        raise ValueError(f"unknown basis {basis!r}")
    return v


def psi_dif(pair: SpinEnsemblePair, flipped: bool = False, basis: str = "product") -> np.ndarray:
    v = psi_dif_ket(pair, flipped, basis)
    return np.outer(v, v.conj())


def p_of_S(pair: SpinEnsemblePair) -> dict[int, float]:
    """Total-spin distribution ``|<S, eta | S_A, S_A; S_B, -S_B>|^2`` of ``psi_dif``."""
    ta, tb = _twice(pair.s_a), _twice(pair.s_b)
    out = {}
    for s in range(pair.eta, pair.n // 2 + 1):
        out[s] = _cg2(ta, tb, 2 * s, ta, -tb) ** 2
    return out


def dicke_generator_matrix(pair: SpinEnsemblePair, method: str = "auto") -> np.ndarray:
    """``G = S_z^A - S_z^B`` in the coupled basis.

    For equal ensembles (``method="closed"`` or ``"auto"``) the matrix is
    assembled from its tridiagonal-in-S closed form,
    ``<S-1,M|G|S,M> = sqrt((S^2-M^2)((N/2+1)^2-S^2)/(4S^2-1))``.
    Otherwise (``"cg"``) the product-basis operator is rotated with ``cg_map``.
    """
    space = CoupledSpinSpace(pair)
    if method == "auto":
        method = "closed" if pair.balanced else "cg"
    if method == "cg":
        ops = collective_ops(pair)
        g = space.to_coupled(ops["Sz_A"] - ops["Sz_B"])
        g[np.abs(g) < 1e-14 * max(1.0, np.abs(g).max())] = 0.0
        return g
    if method != "closed":
        raise ValueError(f"unknown method {method!r}")
    if not pair.balanced:
        raise ValueError("closed-form generator is only valid for N_A = N_B")
    n = pair.n
    g = np.zeros((space.dim, space.dim), dtype=complex)
    for s in range(1, n // 2 + 1):
        for m in range(-s + 1, s):
            val = math.sqrt((s * s - m * m) * ((n / 2 + 1) ** 2 - s * s) / (4 * s * s - 1))
            i, j = space.index(s - 1, m), space.index(s, m)
            g[i, j] = g[j, i] = val
    return g


# -- full 2^N construction (oracle for small N) ------------------------------

def full_space_ops(n_a: int, n_b: int) -> dict[str, np.ndarray]:
    """Collective operators on the full ``2**N`` qubit space (A qubits first).

    Single-qubit basis is ``(|1>, |0>)`` = (up, down). Meant for ``N <= 8``.
    """
    n = n_a + n_b
    if n > 10:
        raise ValueError("full-space construction is limited to N <= 10")
    sm1 = np.array([[0, 0], [1, 0]], dtype=complex)
    sz1 = np.diag([0.5, -0.5]).astype(complex)

    def site(op, k):
        out = np.ones((1, 1), dtype=complex)
        for q in range(n):
            out = np.kron(out, op if q == k else np.eye(2))
        return out

    ops = {"Sm_A": sum((site(sm1, k) for k in range(n_a)), np.zeros((2**n, 2**n), complex)),
           "Sm_B": sum((site(sm1, k) for k in range(n_a, n)), np.zeros((2**n, 2**n), complex)),
           "Sz_A": sum((site(sz1, k) for k in range(n_a)), np.zeros((2**n, 2**n), complex)),
           "Sz_B": sum((site(sz1, k) for k in range(n_a, n)), np.zeros((2**n, 2**n), complex))}
    ops["Sm"] = ops["Sm_A"] + ops["Sm_B"]
    ops["Sp"] = ops["Sm"].conj().T.copy()
    ops["Sz"] = ops["Sz_A"] + ops["Sz_B"]
    return ops


def symmetric_embedding(n_a: int, n_b: int) -> np.ndarray:
    """Isometry from the big-spin product basis into the ``2**N`` qubit space."""

    def dicke_vectors(k: int) -> np.ndarray:
        # column i: symmetric state with (k - i) excited qubits, i.e. M = k/2 - i
        cols = np.zeros((2**k, k + 1))
        for idx in range(2**k):
            bits = [(idx >> (k - 1 - q)) & 1 for q in range(k)]
            downs = sum(bits)  # bit 1 -> basis index 1 -> down
            cols[idx, downs] = 1.0
        return cols / np.linalg.norm(cols, axis=0)

    return np.kron(dicke_vectors(n_a), dicke_vectors(n_b))
