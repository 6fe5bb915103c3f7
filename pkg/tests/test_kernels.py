import os
import subprocess
import sys

import numpy as np
import pytest
import scipy.sparse as sp

from multistable import _kernels_py, kernels

BACKENDS = [_kernels_py]
try:
    from multistable import _kernels
    BACKENDS.append(_kernels)
except ImportError:
    pass


def decay_csr(g=1.0):
    return kernels.csr_arrays(sp.csr_matrix(np.array([[-g, 0], [g, 0]], dtype=complex)))


@pytest.mark.parametrize("impl", BACKENDS)
def test_csr_matvec(impl, rng):
    a = sp.random(20, 20, density=0.2, random_state=3, format="csr") * (1 + 2j)
    x = rng.standard_normal(20) + 1j * rng.standard_normal(20)
    assert np.allclose(impl.csr_matvec(*kernels.csr_arrays(a), x), a @ x)


@pytest.mark.parametrize("impl", BACKENDS)
def test_dopri45_lands_on_times(impl):
    ip, ix, data = decay_csr()
    y0 = np.array([1, 0], dtype=complex)
    times = np.array([0.0, 0.3, 1.0, 2.5])
    ys, h, nsteps, nacc, nrej, status, t_end = impl.dopri45(ip, ix, data, y0, times, 0.0, 1e-10, 1e-12, 1e-3,
                                                            100000, 0)
    assert status == 0 and t_end == 2.5 and nacc + nrej == nsteps
    assert np.allclose(ys[:, 0], np.exp(-times), atol=1e-9)
    assert np.allclose(ys.sum(axis=1), 1.0, atol=1e-14)


@pytest.mark.parametrize("impl", BACKENDS)
def test_dopri45_status_codes(impl):
    ip, ix, data = decay_csr()
    y0 = np.array([1, 0], dtype=complex)
    *_, status, t_end = impl.dopri45(ip, ix, data, y0, np.array([50.0]), 0.0, 1e-10, 1e-12, 1e-3, 3, 0)
    assert status == 2 and t_end < 50
    ip, ix, data = decay_csr(1e300)
    with np.errstate(all="ignore"):
        *_, status, _ = impl.dopri45(ip, ix, data, y0, np.array([1.0]), 0.0, 1e-10, 1e-12, 1e-3, 10000, 0)
    assert status == 1


@pytest.mark.parametrize("impl", BACKENDS)
def test_rk4_fixed_steps(impl):
    ip, ix, data = decay_csr()
    y0 = np.array([1, 0], dtype=complex)
    ys, nsteps = impl.rk4(ip, ix, data, y0, np.array([0.5, 1.0]), 0.0, 0.1, 0)
    assert nsteps == 10
    # one RK4 step multiplies by the degree-4 Taylor polynomial of exp(-h)
    step = 1 - 0.1 + 0.1**2 / 2 - 0.1**3 / 6 + 0.1**4 / 24
    assert np.isclose(ys[1, 0], step**10, rtol=1e-13)


def test_backends_identical():
    if len(BACKENDS) < 2:
        pytest.skip("compiled extension not built")
    a = sp.random(16, 16, density=0.3, random_state=1, format="csr") * 1j
    a = a - sp.identity(16) * 2
    y0 = np.linspace(0, 1, 16).astype(complex)
    args = (*kernels.csr_arrays(a), y0, np.array([0.7, 1.4]), 0.0, 1e-9, 1e-11, 1e-2, 100000, 4)
    py, cy = (impl.dopri45(*args) for impl in BACKENDS)
    assert py[2:6] == cy[2:6]
    assert np.abs(py[0] - cy[0]).max() < 1e-14


def test_backend_selection():
    assert kernels.BACKEND in ("cython", "python")
    assert kernels.backend("python") is _kernels_py
    with pytest.raises(ValueError):
        kernels.backend("fortran")
    env = dict(os.environ, MULTISTABLE_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", "import multistable; print(multistable.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"


def test_csr_arrays_dtypes():
    ip, ix, data = kernels.csr_arrays(np.array([[1, 0], [2, 3]]))
    assert ip.dtype == np.int64 and ix.dtype == np.int64 and data.dtype == np.complex128
    assert list(ip) == [0, 1, 3]
