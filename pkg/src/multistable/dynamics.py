"""Time integration of the vectorized master equation.

Used as an oracle for the steady-state formulas and as the comparator in the
benchmark. Integration runs in the compiled kernel when available.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from . import kernels
from .algebra import DimensionError, devectorize, vectorize
from .lindblad import Superoperator


class IntegrationError(RuntimeError):
    """Adaptive integration could not continue; ``time`` is where it stopped."""

    def __init__(self, message: str, time: float):
        super().__init__(f"{message} at t={time:.6g}")
        self.time = time


@dataclass
class Trajectory:
    times: np.ndarray
    states: list
    observables: dict = field(default_factory=dict)
    stats: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.times)

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]

    def expectation(self, op) -> np.ndarray:
        op = np.asarray(op.toarray() if hasattr(op, "toarray") else op)
        return np.array([np.trace(op @ r) for r in self.states])

    def to_csv(self, path, parts: str = "real") -> None:
        """Write ``time`` plus one column per observable (real parts by default)."""
        names = list(self.observables)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            header = ["time"]
            for nm in names:
                header += [nm] if parts == "real" else [f"{nm}_re", f"{nm}_im"]
            w.writerow(header)
            for i, t in enumerate(self.times):
                row = [repr(float(t))]
                for nm in names:
                    v = complex(self.observables[nm][i])
                    row += [repr(v.real)] if parts == "real" else [repr(v.real), repr(v.imag)]
                w.writerow(row)


def _operator_arrays(sop: Superoperator):
    key = "_csr_arrays"
    cached = sop.meta.get(key)
    if cached is None:
        cached = kernels.csr_arrays(sop.matrix)
        sop.meta[key] = cached
    return cached


def initial_step(sop: Superoperator, y: np.ndarray, rtol: float, atol: float) -> float:
    """Starting step from the ratio of state and derivative norms (Hairer-Wanner style)."""
    f = sop.matrix @ y
    sc = atol + rtol * np.abs(y)
    d0 = np.sqrt(np.mean(np.abs(y / sc) ** 2))
    d1 = np.sqrt(np.mean(np.abs(f / sc) ** 2))
    if d1 <= 1e-5 or d0 <= 1e-5:
        return 1e-6
    return float(0.01 * d0 / d1)


def _check_rho(sop, rho0):
    rho0 = np.asarray(rho0, dtype=complex)
    if rho0.shape != (sop.dim, sop.dim):
        raise DimensionError(f"initial state has shape {rho0.shape}, expected {(sop.dim, sop.dim)}")
    return rho0


def integrate(sop: Superoperator, rho0, t_final: float, sample_times=None, rtol: float = 1e-8,
              atol: float = 1e-10, method: str = "dopri45", h: float | None = None,
              renormalize: bool = False, observables: dict | None = None, max_steps: int = 10_000_000,
              backend: str | None = None) -> Trajectory:
    """Integrate ``d vec(rho)/dt = L vec(rho)`` from ``t=0`` to ``t_final``.

    ``method="dopri45"`` is the adaptive Dormand-Prince pair (``h`` is then the
    initial step, chosen automatically if None); ``"rk4"`` is fixed-step with
    step ``h``. States are recorded at ``sample_times`` (default: 0 and
    ``t_final``). Trace renormalization after each step is off unless
    ``renormalize`` is set.
    """
    if not t_final > 0:
        raise ValueError(f"t_final must be positive, got {t_final}")
    rho0 = _check_rho(sop, rho0)
    if sample_times is None:
        times = np.array([0.0, float(t_final)])
    else:
        times = np.unique(np.concatenate([np.asarray(sample_times, dtype=float), [t_final]]))
        if times[0] < 0 or times[-1] > t_final:
            raise ValueError("sample times must lie in [0, t_final]")
    impl = kernels.backend(backend)
    ip, ix, data = _operator_arrays(sop)
    y0 = vectorize(rho0)
    rdim = sop.dim if renormalize else 0
    if method == "dopri45":
        h0 = initial_step(sop, y0, rtol, atol) if h is None else float(h)
        ys, h_last, nsteps, nacc, nrej, status, t_end = impl.dopri45(
            ip, ix, data, y0, times, 0.0, rtol, atol, h0, max_steps, rdim)
        if status == 1:
            raise IntegrationError("step size underflow", t_end)
        if status == 2:
            raise IntegrationError(f"max_steps={max_steps} exhausted", t_end)
        stats = {"method": method, "steps": nsteps, "accepted": nacc, "rejected": nrej, "h_last": h_last}
    elif method == "rk4":
        if h is None or not h > 0:
            raise ValueError("rk4 needs a positive step h")
        ys, nsteps = impl.rk4(ip, ix, data, y0, times, 0.0, float(h), rdim)
        stats = {"method": method, "steps": nsteps, "h": float(h)}
    else:
        raise ValueError(f"unknown method {method!r}; expected 'dopri45' or 'rk4'")
    stats["backend"] = "python" if impl is kernels._kernels_py else "cython"
    states = [devectorize(y, sop.dim) for y in ys]
    obs = {}
    for name, op in (observables or {}).items():
        op = np.asarray(op.toarray() if hasattr(op, "toarray") else op, dtype=complex)
        obs[name] = np.array([np.trace(op @ r) for r in states])
    return Trajectory(times, states, obs, stats)


class SteadyResult(NamedTuple):
    state: np.ndarray
    time: float
    converged: bool
    residual: float


def converge_to_steady(sop: Superoperator, rho0, tol: float = 1e-9, t_max: float = 1e4,
                       rtol: float = 1e-12, atol: float = 1e-14, t_first: float = 1.0,
                       backend: str | None = None) -> SteadyResult:
    """Integrate until ``||L vec(rho)||_2 <= tol`` or ``t_max``.

    The horizon doubles between residual checks, so the reported time overshoots
    the first crossing by at most a factor of two. Tolerances are tighter than
    for :func:`integrate`: once the step size is stability limited, the error
    controller leaves stiff components at roughly ``atol + rtol*|y|``, and
    ``||L rho||`` cannot drop much below ``||L||`` times that.
    """
    if not tol > 0:
        raise ValueError(f"tol must be positive, got {tol}")
    rho = _check_rho(sop, rho0)
    y = vectorize(rho)
    res = float(np.linalg.norm(sop.matrix @ y))
    if res <= tol:
        return SteadyResult(rho.copy(), 0.0, True, res)
    impl = kernels.backend(backend)
    ip, ix, data = _operator_arrays(sop)
    t, chunk = 0.0, float(t_first)
    h = initial_step(sop, y, rtol, atol)
    while t < t_max:
        t_next = min(t + chunk, t_max)
        ys, h, _, _, _, status, t_end = impl.dopri45(
            ip, ix, data, y, np.array([t_next]), t, rtol, atol, h, 10_000_000, 0)
        if status != 0:
            raise IntegrationError("integration failed while converging", t_end)
        y, t = ys[0], t_next
        res = float(np.linalg.norm(sop.matrix @ y))
        if res <= tol:
            return SteadyResult(devectorize(y, sop.dim).copy(), t, True, res)
        chunk *= 2
    return SteadyResult(devectorize(y, sop.dim).copy(), t, False, res)


def check_conserved(traj: Trajectory, quantity) -> float:
    """``max_t |tr(Q^+ rho(t)) - tr(Q^+ rho(0))|`` along ``traj``."""
    q = np.asarray(quantity.toarray() if hasattr(quantity, "toarray") else quantity, dtype=complex)
    if q.shape != traj.states[0].shape:
        raise DimensionError(f"quantity shape {q.shape} does not match states {traj.states[0].shape}")
    qd = q.conj().T
    vals = np.array([np.trace(qd @ r) for r in traj.states])
    return float(np.abs(vals - vals[0]).max())
