# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled Runge-Kutta kernels for ``dy/dt = A y`` with complex CSR ``A``.

The pure-Python twin lives in ``_kernels_py.py`` and has the same signatures.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, fabs, fmax, fmin, pow
from libc.stdint cimport int64_t

cnp.import_array()

ctypedef double complex cplx

# Dormand-Prince 5(4) tableau
cdef double A21 = 1.0 / 5
cdef double A31 = 3.0 / 40, A32 = 9.0 / 40
cdef double A41 = 44.0 / 45, A42 = -56.0 / 15, A43 = 32.0 / 9
cdef double A51 = 19372.0 / 6561, A52 = -25360.0 / 2187, A53 = 64448.0 / 6561, A54 = -212.0 / 729
cdef double A61 = 9017.0 / 3168, A62 = -355.0 / 33, A63 = 46732.0 / 5247, A64 = 49.0 / 176, A65 = -5103.0 / 18656
cdef double B1 = 35.0 / 384, B3 = 500.0 / 1113, B4 = 125.0 / 192, B5 = -2187.0 / 6784, B6 = 11.0 / 84
cdef double E1 = 71.0 / 57600, E3 = -71.0 / 16695, E4 = 71.0 / 1920, E5 = -17253.0 / 339200
cdef double E6 = 22.0 / 525, E7 = -1.0 / 40

cdef double SAFETY = 0.9
cdef double FAC_MIN = 0.2
cdef double FAC_MAX = 5.0


cdef inline void matvec(const int64_t[::1] indptr, const int64_t[::1] indices, const cplx[::1] data,
                        const cplx[::1] x, cplx[::1] out) noexcept nogil:
    cdef Py_ssize_t i, k, n = out.shape[0]
    cdef cplx acc
    for i in range(n):
        acc = 0
        for k in range(indptr[i], indptr[i + 1]):
            acc = acc + data[k] * x[indices[k]]
        out[i] = acc


cdef inline void renorm(cplx[::1] y, Py_ssize_t dim) noexcept nogil:
    cdef Py_ssize_t i, n = y.shape[0]
    cdef cplx tr = 0
    if dim <= 0:
        return
    for i in range(dim):
        tr = tr + y[i * (dim + 1)]
    if tr == 0:
        return
    for i in range(n):
        y[i] = y[i] / tr


cdef inline double cabs2(cplx z) noexcept nogil:
    return z.real * z.real + z.imag * z.imag


def csr_matvec(int64_t[::1] indptr, int64_t[::1] indices, cplx[::1] data, cplx[::1] x):
    out = np.empty(indptr.shape[0] - 1, dtype=np.complex128)
    cdef cplx[::1] o = out
    with nogil:
        matvec(indptr, indices, data, x, o)
    return out


def dopri45(int64_t[::1] indptr, int64_t[::1] indices, cplx[::1] data, y0, times,
            double t0, double rtol, double atol, double h0, long max_steps, long renorm_dim=0):
    """Adaptive Dormand-Prince 4(5) from ``t0`` through the sorted sample ``times``.

    Returns ``(Y, h, nsteps, naccept, nreject, status, t_reached)``. ``status`` is
    0 on success, 1 on step-size underflow and 2 when ``max_steps`` is exhausted;
    rows of ``Y`` past ``t_reached`` are left as NaN.
    """
    cdef Py_ssize_t n = indptr.shape[0] - 1
    cdef double[::1] ts = np.ascontiguousarray(times, dtype=np.float64)
    cdef Py_ssize_t nt = ts.shape[0]
    out = np.full((nt, n), np.nan + 0j, dtype=np.complex128)
    cdef cplx[:, ::1] Y = out
    cdef cplx[::1] y = np.array(y0, dtype=np.complex128)
    cdef cplx[::1] yn = np.empty(n, dtype=np.complex128)
    cdef cplx[::1] tmp = np.empty(n, dtype=np.complex128)
    cdef cplx[::1] k1 = np.empty(n, dtype=np.complex128)
    cdef cplx[::1] k2 = np.empty(n, dtype=np.complex128)
    cdef cplx[::1] k3 = np.empty(n, dtype=np.complex128)
    cdef cplx[::1] k4 = np.empty(n, dtype=np.complex128)
    cdef cplx[::1] k5 = np.empty(n, dtype=np.complex128)
    cdef cplx[::1] k6 = np.empty(n, dtype=np.complex128)
    cdef cplx[::1] k7 = np.empty(n, dtype=np.complex128)
    cdef cplx[::1] swap
    cdef double t = t0, h = h0, hstep, target, err, sc, fac, ay, an, eps_t
    cdef long nsteps = 0, naccept = 0, nreject = 0
    cdef int status = 0
    cdef Py_ssize_t i, j = 0
    cdef bint hit
    cdef cplx e

    with nogil:
        matvec(indptr, indices, data, y, k1)
        # samples at or before the start time
        while j < nt and ts[j] <= t:
            for i in range(n):
                Y[j, i] = y[i]
            j += 1
        while j < nt:
            target = ts[j]
            if nsteps >= max_steps:
                status = 2
                break
            hit = t + h >= target
            hstep = target - t if hit else h
            eps_t = 1e-15 * fmax(fabs(t), 1.0)
            if hstep <= eps_t:
                if hit:
                    # already at the sample point up to roundoff
                    t = target
                    for i in range(n):
                        Y[j, i] = y[i]
                    j += 1
                    continue
                status = 1
                break
            nsteps += 1
            for i in range(n):
                tmp[i] = y[i] + hstep * A21 * k1[i]
            matvec(indptr, indices, data, tmp, k2)
            for i in range(n):
                tmp[i] = y[i] + hstep * (A31 * k1[i] + A32 * k2[i])
            matvec(indptr, indices, data, tmp, k3)
            for i in range(n):
                tmp[i] = y[i] + hstep * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i])
            matvec(indptr, indices, data, tmp, k4)
            for i in range(n):
                tmp[i] = y[i] + hstep * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i])
            matvec(indptr, indices, data, tmp, k5)
            for i in range(n):
                tmp[i] = y[i] + hstep * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i])
            matvec(indptr, indices, data, tmp, k6)
            for i in range(n):
                yn[i] = y[i] + hstep * (B1 * k1[i] + B3 * k3[i] + B4 * k4[i] + B5 * k5[i] + B6 * k6[i])
            matvec(indptr, indices, data, yn, k7)
            err = 0.0
            for i in range(n):
                e = hstep * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i])
                ay = sqrt(cabs2(y[i]))
                an = sqrt(cabs2(yn[i]))
                sc = atol + rtol * fmax(ay, an)
                err += cabs2(e) / (sc * sc)
            err = sqrt(err / n) if n > 0 else 0.0
            if err <= 1.0:
                naccept += 1
                t = target if hit else t + hstep
                swap = y
                y = yn
                yn = swap
                swap = k1
                k1 = k7
                k7 = swap
                if renorm_dim > 0:
                    renorm(y, renorm_dim)
                    matvec(indptr, indices, data, y, k1)
                fac = FAC_MAX if err == 0.0 else fmin(FAC_MAX, fmax(FAC_MIN, SAFETY * pow(err, -0.2)))
                # a step shortened to land on a sample time says nothing about h
                if not hit or hstep >= h:
                    h = hstep * fac
                if hit:
                    for i in range(n):
                        Y[j, i] = y[i]
                    j += 1
            else:
                nreject += 1
                h = hstep * fmax(FAC_MIN, SAFETY * pow(err, -0.2))
    return out, h, nsteps, naccept, nreject, status, t


def rk4(int64_t[::1] indptr, int64_t[::1] indices, cplx[::1] data, y0, times, double t0, double h,
        long renorm_dim=0):
    """Classical fixed-step RK4; each sampling interval is split into equal steps no longer than ``h``."""
    cdef Py_ssize_t n = indptr.shape[0] - 1
    cdef double[::1] ts = np.ascontiguousarray(times, dtype=np.float64)
    cdef Py_ssize_t nt = ts.shape[0]
    out = np.empty((nt, n), dtype=np.complex128)
    cdef cplx[:, ::1] Y = out
    cdef cplx[::1] y = np.array(y0, dtype=np.complex128)
    cdef cplx[::1] tmp = np.empty(n, dtype=np.complex128)
    cdef cplx[::1] k1 = np.empty(n, dtype=np.complex128)
    cdef cplx[::1] k2 = np.empty(n, dtype=np.complex128)
    cdef cplx[::1] k3 = np.empty(n, dtype=np.complex128)
    cdef cplx[::1] k4 = np.empty(n, dtype=np.complex128)
    cdef double t = t0, dt, hs
    cdef long m, s, nsteps = 0
    cdef Py_ssize_t i, j
    with nogil:
        for j in range(nt):
            dt = ts[j] - t
            if dt > 0:
                m = <long>(dt / h)
                if m * h < dt * (1 - 1e-12):
                    m += 1
                hs = dt / m
                for s in range(m):
                    matvec(indptr, indices, data, y, k1)
                    for i in range(n):
                        tmp[i] = y[i] + 0.5 * hs * k1[i]
                    matvec(indptr, indices, data, tmp, k2)
                    for i in range(n):
                        tmp[i] = y[i] + 0.5 * hs * k2[i]
                    matvec(indptr, indices, data, tmp, k3)
                    for i in range(n):
                        tmp[i] = y[i] + hs * k3[i]
                    matvec(indptr, indices, data, tmp, k4)
                    for i in range(n):
                        y[i] = y[i] + hs / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
                    if renorm_dim > 0:
                        renorm(y, renorm_dim)
                nsteps += m
                t = ts[j]
            for i in range(n):
                Y[j, i] = y[i]
    return out, nsteps
