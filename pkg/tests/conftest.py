import numpy as np
import pytest
import scipy.linalg as sla

_REPORT = []


def td(a, b):
    """Trace distance from singular values (independent of the package helper)."""
    return 0.5 * np.linalg.svd(np.asarray(a) - np.asarray(b), compute_uv=False).sum()


def ginibre(rng, d):
    g = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    r = g @ g.conj().T
    return r / np.trace(r).real


def wootters(rho):
    """Concurrence via matrix square roots."""
    sy = np.array([[0, -1j], [1j, 0]])
    yy = np.kron(sy, sy)
    rt = yy @ rho.conj() @ yy
    sr = sla.sqrtm(rho)
    lam = np.sort(np.abs(np.linalg.eigvals(sla.sqrtm(sr @ rt @ sr))))[::-1]
    return max(0.0, lam[0] - lam[1] - lam[2] - lam[3])


def is_density_matrix(rho, tol=1e-8):
    rho = np.asarray(rho)
    if np.abs(rho - rho.conj().T).max() > 1e-10 or abs(np.trace(rho) - 1) > 1e-10:
        return False
    return np.linalg.eigvalsh(rho).min() >= -tol


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def record():
    """Collect one acceptance line; printed in the terminal summary."""
    def _add(cid, ok, detail):
        _REPORT.append((cid, bool(ok), detail))
        return ok
    return _add


def pytest_terminal_summary(terminalreporter):
    if not _REPORT:
        return
    terminalreporter.section("acceptance criteria")
    for cid, ok, detail in sorted(_REPORT, key=lambda r: (int(r[0][1:].split(".")[0]), r[0])):
        terminalreporter.write_line(f"{cid:<6} {'PASS' if ok else 'FAIL'}  {detail}")
