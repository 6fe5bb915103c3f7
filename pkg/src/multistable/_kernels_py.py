"""Pure-Python/NumPy fallback for the compiled Runge-Kutta kernels.

Signatures and step-control logic mirror ``_kernels.pyx`` exactly, so the two
backends produce the same step sequence up to floating-point summation order.
"""
from __future__ import annotations

import numpy as np
import scipy.sparse as sp

A21 = 1 / 5
A31, A32 = 3 / 40, 9 / 40
A41, A42, A43 = 44 / 45, -56 / 15, 32 / 9
A51, A52, A53, A54 = 19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729
A61, A62, A63, A64, A65 = 9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656
B1, B3, B4, B5, B6 = 35 / 384, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84
E1, E3, E4, E5, E6, E7 = 71 / 57600, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40

SAFETY, FAC_MIN, FAC_MAX = 0.9, 0.2, 5.0


def _csr(indptr, indices, data):
    n = len(indptr) - 1
    return sp.csr_matrix((data, indices, indptr), shape=(n, n))


def _renorm(y, dim):
    if dim > 0:
        tr = y[:: dim + 1].sum()
        if tr != 0:
            y /= tr
    return y


def csr_matvec(indptr, indices, data, x):
    return _csr(indptr, indices, data) @ np.asarray(x, dtype=complex)


def dopri45(indptr, indices, data, y0, times, t0, rtol, atol, h0, max_steps, renorm_dim=0):
    a = _csr(indptr, indices, data)
    ts = np.ascontiguousarray(times, dtype=float)
    n = a.shape[0]
    out = np.full((ts.size, n), np.nan + 0j, dtype=complex)
    y = np.array(y0, dtype=complex)
    t, h = float(t0), float(h0)
    nsteps = naccept = nreject = 0
    status = 0
    k1 = a @ y
    j = 0
    while j < ts.size and ts[j] <= t:
        out[j] = y
        j += 1
    while j < ts.size:
        target = ts[j]
        if nsteps >= max_steps:
            status = 2
            break
        hit = t + h >= target
        hstep = target - t if hit else h
        if hstep <= 1e-15 * max(abs(t), 1.0):
            if hit:
                t = target
                out[j] = y
                j += 1
                continue
            status = 1
            break
        nsteps += 1
        k2 = a @ (y + hstep * A21 * k1)
        k3 = a @ (y + hstep * (A31 * k1 + A32 * k2))
        k4 = a @ (y + hstep * (A41 * k1 + A42 * k2 + A43 * k3))
        k5 = a @ (y + hstep * (A51 * k1 + A52 * k2 + A53 * k3 + A54 * k4))
        k6 = a @ (y + hstep * (A61 * k1 + A62 * k2 + A63 * k3 + A64 * k4 + A65 * k5))
        yn = y + hstep * (B1 * k1 + B3 * k3 + B4 * k4 + B5 * k5 + B6 * k6)
        k7 = a @ yn
        e = hstep * (E1 * k1 + E3 * k3 + E4 * k4 + E5 * k5 + E6 * k6 + E7 * k7)
        sc = atol + rtol * np.maximum(np.abs(y), np.abs(yn))
        err = float(np.sqrt(np.mean(np.abs(e / sc) ** 2))) if n else 0.0
        if err <= 1.0:
            naccept += 1
            t = target if hit else t + hstep
            y, k1 = yn, k7
            if renorm_dim > 0:
                y = _renorm(y, renorm_dim)
                k1 = a @ y
            fac = FAC_MAX if err == 0.0 else min(FAC_MAX, max(FAC_MIN, SAFETY * err ** -0.2))
            if not hit or hstep >= h:
                h = hstep * fac
            if hit:
                out[j] = y
                j += 1
        else:
            nreject += 1
            h = hstep * max(FAC_MIN, SAFETY * err ** -0.2)
    return out, h, nsteps, naccept, nreject, status, t


def rk4(indptr, indices, data, y0, times, t0, h, renorm_dim=0):
    a = _csr(indptr, indices, data)
    ts = np.ascontiguousarray(times, dtype=float)
    out = np.empty((ts.size, a.shape[0]), dtype=complex)
    y = np.array(y0, dtype=complex)
    t = float(t0)
    nsteps = 0
    for j, tj in enumerate(ts):
        dt = tj - t
        if dt > 0:
            m = int(dt / h)
            if m * h < dt * (1 - 1e-12):
                m += 1
            hs = dt / m
            for _ in range(m):
                k1 = a @ y
                k2 = a @ (y + 0.5 * hs * k1)
                k3 = a @ (y + 0.5 * hs * k2)
                k4 = a @ (y + hs * k3)
                y = y + hs / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
                if renorm_dim > 0:
                    y = _renorm(y, renorm_dim)
            nsteps += m
            t = tj
        out[j] = y
    return out, nsteps
