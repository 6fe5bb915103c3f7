import numpy as np
import pytest

from multistable import dynamics, models, steady
from multistable.algebra import DimensionError
from multistable.lindblad import LindbladModel, build_liouvillian
from multistable.spins import CoupledSpinSpace, SpinEnsemblePair, psi_dif

from conftest import ginibre, td


def qubit(gamma=0.8, w=1.7):
    sm = np.array([[0, 0], [1, 0]])
    return build_liouvillian(LindbladModel(2, np.diag([w, 0]), ((sm, gamma),)))


def analytic(rho0, t, gamma=0.8, w=1.7):
    e = rho0[0, 0] * np.exp(-gamma * t)
    c = rho0[1, 0] * np.exp((-gamma / 2 + 1j * w) * t)
    return np.array([[e, np.conj(c)], [c, 1 - e]])


@pytest.mark.parametrize("method,kw,tol", [("dopri45", {}, 1e-7), ("rk4", {"h": 1e-3}, 1e-11)])
def test_against_analytic_qubit(rng, method, kw, tol):
    rho0 = ginibre(rng, 2)
    ts = np.linspace(0, 5, 11)
    traj = dynamics.integrate(qubit(), rho0, 5.0, sample_times=ts, method=method, **kw)
    assert np.array_equal(traj.times, ts)
    for t, r in zip(traj.times, traj.states):
        assert np.abs(r - analytic(rho0, t)).max() < tol


def test_rk4_fourth_order(rng):
    rho0 = ginibre(rng, 2)
    ref = analytic(rho0, 2.0)
    errs = [np.abs(dynamics.integrate(qubit(), rho0, 2.0, method="rk4", h=h).final - ref).max()
            for h in (0.1, 0.05)]
    assert 12 < errs[0] / errs[1] < 20


@pytest.mark.parametrize("name", ["python", "cython"])
def test_backends_agree(rng, name):
    if name == "cython":
        pytest.importorskip("multistable._kernels")
    sop = build_liouvillian(models.two_qubit_driven())
    rho0 = ginibre(rng, 4)
    a = dynamics.integrate(sop, rho0, 3.0, sample_times=[1.0, 2.0], backend=name)
    b = dynamics.integrate(sop, rho0, 3.0, sample_times=[1.0, 2.0], backend="python")
    assert a.stats["backend"] == name
    assert a.stats["steps"] == b.stats["steps"]
    for x, y in zip(a.states, b.states):
        assert np.abs(x - y).max() < 1e-13


def test_conserved_along_trajectory(rng):
    sop = build_liouvillian(models.two_qubit_decay())
    basis = steady.kernel_basis(sop)
    traj = dynamics.integrate(sop, ginibre(rng, 4), 10.0, sample_times=np.linspace(0, 10, 21))
    assert dynamics.check_conserved(traj, np.eye(4)) < 1e-9
    assert dynamics.check_conserved(traj, models.projector(models.PHI_MINUS)) < 1e-8
    for q in steady.conserved_quantities(basis):
        assert dynamics.check_conserved(traj, q) < 1e-7
    with pytest.raises(DimensionError):
        dynamics.check_conserved(traj, np.eye(2))


def test_sector_projector_conserved():
    pair = SpinEnsemblePair(3, 3)
    space = CoupledSpinSpace(pair)
    sop = build_liouvillian(models.two_ensemble_model(pair))
    traj = dynamics.integrate(sop, psi_dif(pair, basis="coupled"), 20.0, sample_times=np.linspace(0, 20, 9))
    for s in space.sectors:
        assert dynamics.check_conserved(traj, space.sector_projector(s)) < 1e-7


def test_renormalize_option(rng):
    sop = build_liouvillian(models.two_qubit_driven())
    traj = dynamics.integrate(sop, ginibre(rng, 4), 5.0, renormalize=True, rtol=1e-4, atol=1e-6)
    assert abs(np.trace(traj.final) - 1) < 1e-14


def test_converge_to_steady_matches_resolvent(rng):
    for m in (models.two_qubit_balanced(), models.two_qubit_driven()):
        sop = build_liouvillian(m)
        rho0 = ginibre(rng, 4)
        res = dynamics.converge_to_steady(sop, rho0)
        assert res.converged and res.residual <= 1e-9
        assert td(res.state, steady.steady_kernel(steady.kernel_basis(sop), rho0)) < 1e-8


def test_converge_immediately_when_steady():
    sop = build_liouvillian(models.two_qubit_decay())
    ground = models.projector(models.KET4)
    res = dynamics.converge_to_steady(sop, ground)
    assert res.time == 0.0 and res.converged


def test_converge_reports_failure(rng):
    res = dynamics.converge_to_steady(qubit(gamma=1e-3), ginibre(rng, 2), t_max=2.0)
    assert not res.converged and res.time == 2.0


def test_halving_rtol_tightens(rng):
    sop = build_liouvillian(models.two_qubit_driven())
    rho0 = ginibre(rng, 4)
    ref = steady.steady_kernel(steady.kernel_basis(sop), rho0)
    d1 = td(dynamics.integrate(sop, rho0, 60.0, rtol=1e-6, atol=1e-8).final, ref)
    d2 = td(dynamics.integrate(sop, rho0, 60.0, rtol=5e-7, atol=5e-9).final, ref)
    assert d2 < 10 * d1


def test_errors(rng):
    sop = qubit()
    rho0 = ginibre(rng, 2)
    with pytest.raises(ValueError):
        dynamics.integrate(sop, rho0, 0.0)
    with pytest.raises(ValueError):
        dynamics.integrate(sop, rho0, 1.0, method="rk4")
    with pytest.raises(ValueError):
        dynamics.integrate(sop, rho0, 1.0, method="euler")
    with pytest.raises(ValueError):
        dynamics.integrate(sop, rho0, 1.0, sample_times=[2.0])
    with pytest.raises(DimensionError):
        dynamics.integrate(sop, np.eye(3), 1.0)
    with pytest.raises(dynamics.IntegrationError) as exc:
        dynamics.integrate(sop, rho0, 100.0, max_steps=5)
    assert 0 < exc.value.time < 100


def test_observables_and_csv(tmp_path, rng):
    sop = build_liouvillian(models.two_qubit_decay())
    ops = models.two_qubit_ops()
    traj = dynamics.integrate(sop, ginibre(rng, 4), 2.0, sample_times=[0.5, 1.0],
                              observables={"Sz": ops["Sz"]})
    assert np.allclose(traj.observables["Sz"], traj.expectation(ops["Sz"]))
    assert len(traj) == 3 and traj.times[0] == 0.5
    path = tmp_path / "t.csv"
    traj.to_csv(path)
    rows = path.read_text().splitlines()
    assert rows[0] == "time,Sz" and len(rows) == 4
    assert float(rows[2].split(",")[1]) == traj.observables["Sz"][1].real
