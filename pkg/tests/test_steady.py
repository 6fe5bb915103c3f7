import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from multistable import models, steady
from multistable.algebra import DimensionError, vectorize
from multistable.lindblad import build_liouvillian

from conftest import ginibre, is_density_matrix, td

TWO_QUBIT = {
    "balanced": models.two_qubit_balanced(),
    "decay": models.two_qubit_decay(),
    "driven": models.two_qubit_driven(),
}


@pytest.fixture(scope="module")
def bases():
    return {k: steady.kernel_basis(build_liouvillian(m)) for k, m in TWO_QUBIT.items()}


def balanced_law(rho0):
    """Analytic steady state of the balanced model: singlet weight kept, triplet equalized."""
    c2 = np.real(models.PHI_MINUS.conj() @ rho0 @ models.PHI_MINUS)
    singlet = models.projector(models.PHI_MINUS)
    return c2 * singlet + (1 - c2) / 3 * (np.eye(4) - singlet)


def test_kernel_dims_and_biorthogonality(bases):
    assert {k: b.n for k, b in bases.items()} == {"balanced": 2, "decay": 4, "driven": 2}
    for b in bases.values():
        assert b.biorthogonality_residual() < 1e-12
        assert b.orthonormality_residual() < 1e-12
    assert bases["balanced"].hermitian and not bases["decay"].hermitian


def test_single_qubit_relaxes_to_ground(rng):
    sop = build_liouvillian(models.single_qubit_decay(0.3))
    ground = np.diag([0, 1]).astype(complex)
    rho0 = ginibre(rng, 2)
    basis = steady.kernel_basis(sop)
    assert basis.n == 1
    assert td(steady.steady_kernel(basis, rho0), ground) < 1e-12
    assert td(steady.steady_spectral(steady.spectral_decomposition(sop), rho0), ground) < 1e-12
    assert td(steady.steady_resolvent(sop, rho0, 1e-8), ground) < 1e-7


def test_balanced_matches_law(rng, bases):
    sop = build_liouvillian(TWO_QUBIT["balanced"])
    spec = steady.spectral_decomposition(sop)
    for _ in range(20):
        rho0 = ginibre(rng, 4)
        ref = balanced_law(rho0)
        assert td(steady.steady_hermitian(bases["balanced"], rho0), ref) < 1e-12
        assert td(steady.steady_kernel(bases["balanced"], rho0), ref) < 1e-12
        assert td(steady.steady_spectral(spec, rho0), ref) < 1e-12


def test_decay_special_states(bases):
    b = bases["decay"]
    ground = models.projector(models.KET4)
    assert td(steady.steady_kernel(b, models.projector(models.KET1)), ground) < 1e-12
    dark = models.projector(models.PHI_MINUS)
    assert td(steady.steady_kernel(b, dark), dark) < 1e-12
    # |phi+> decays to the ground state
    assert td(steady.steady_kernel(b, models.projector(models.PHI_PLUS)), ground) < 1e-12
    # |1><1| + |phi+><phi+| + |4><4| is conserved and has unit overlap with |1><1|
    u1 = models.projector(models.KET1) + models.projector(models.PHI_PLUS) + ground
    sop = build_liouvillian(TWO_QUBIT["decay"])
    assert np.abs(sop.adjoint @ u1.reshape(-1, order="F")).max() < 1e-12
    assert np.trace(u1.conj().T @ models.projector(models.KET1)).real == pytest.approx(1.0)


def test_spectral_refuses_defective():
    spec = steady.spectral_decomposition(build_liouvillian(TWO_QUBIT["decay"]))
    with pytest.raises(steady.IllConditionedError, match="steady_kernel or steady_resolvent"):
        steady.steady_spectral(spec, np.eye(4) / 4)


def test_hermitian_needs_hermitian(bases):
    with pytest.raises(steady.ContractError):
        steady.steady_hermitian(bases["driven"], np.eye(4) / 4)


def test_sparse_kernel_is_contract_error():
    sop = build_liouvillian(TWO_QUBIT["decay"], dense_threshold=1)
    with pytest.raises(steady.ContractError):
        steady.kernel_basis(sop)
    with pytest.raises(steady.ContractError):
        steady.spectral_decomposition(sop)


def test_trivial_kernel_raises():
    from multistable.lindblad import Superoperator
    with pytest.raises(steady.KernelStructureError):
        steady.kernel_basis(Superoperator(-np.eye(4, dtype=complex), 2))


def test_wrong_shape(bases):
    with pytest.raises(DimensionError):
        steady.steady_kernel(bases["decay"], np.eye(2))
    with pytest.raises(DimensionError):
        steady.steady_resolvent(build_liouvillian(TWO_QUBIT["decay"]), np.eye(3))


def test_conserved_quantities(rng, bases):
    for name, b in bases.items():
        sop = build_liouvillian(TWO_QUBIT[name])
        qs = steady.conserved_quantities(b)
        # identity lies in the span of the conserved quantities
        u = np.array([vectorize(q) for q in qs]).T
        coef, *_ = np.linalg.lstsq(u, vectorize(np.eye(4)), rcond=None)
        assert np.linalg.norm(u @ coef - vectorize(np.eye(4))) < 1e-10
        x = vectorize(rng.standard_normal((4, 4)))
        for q in qs:
            assert abs(np.vdot(vectorize(q), sop.matrix @ x)) < 1e-12


def test_degenerate_basis_invariance(rng, bases):
    """Any other biorthogonal pairing of the same kernels gives the same state."""
    for b in bases.values():
        q = rng.standard_normal((b.n, b.n)) + 1j * rng.standard_normal((b.n, b.n))
        other = steady.SteadyStateBasis(b.right @ q, b.left @ np.linalg.inv(q).conj().T, b.dim)
        assert other.biorthogonality_residual() < 1e-10
        for _ in range(5):
            rho0 = ginibre(rng, 4)
            assert td(steady.steady_kernel(other, rho0), steady.steady_kernel(b, rho0)) < 1e-10


def test_canonical_kernel_is_deterministic(rng):
    sop = build_liouvillian(TWO_QUBIT["decay"])
    b = steady.kernel_basis(sop)
    q, _ = np.linalg.qr(rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4)))
    assert np.allclose(steady._canonical_kernel(b.right @ q), b.right, atol=1e-12)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0.0, 1.0))
def test_steady_maps_are_linear(seed, lam):
    rng = np.random.default_rng(seed)
    sop = build_liouvillian(TWO_QUBIT["driven"])
    b = steady.kernel_basis(sop)
    r1, r2 = ginibre(rng, 4), ginibre(rng, 4)
    mix = lam * r1 + (1 - lam) * r2
    for f in (lambda r: steady.steady_kernel(b, r), lambda r: steady.steady_resolvent(sop, r)):
        out = f(mix)
        assert is_density_matrix(out)
        assert np.allclose(out, lam * f(r1) + (1 - lam) * f(r2), atol=1e-12)


@pytest.mark.parametrize("name", list(TWO_QUBIT))
def test_resolvent_bias_scales_with_epsilon(rng, bases, name):
    sop = build_liouvillian(TWO_QUBIT[name])
    rho0 = ginibre(rng, 4)
    ref = steady.steady_kernel(bases[name], rho0)
    d1 = td(steady.steady_resolvent(sop, rho0, 1e-4), ref)
    d2 = td(steady.steady_resolvent(sop, rho0, 1e-6), ref)
    assert d2 < 1e-5
    assert 50 < d1 / d2 < 200


def test_resolvent_variants_agree(rng):
    sop = build_liouvillian(TWO_QUBIT["driven"])
    sparse = build_liouvillian(TWO_QUBIT["driven"], dense_threshold=1)
    rho0 = ginibre(rng, 4)
    ref = steady.steady_resolvent(sop, rho0)
    assert np.allclose(steady.steady_resolvent(sparse, rho0), ref, atol=1e-12)
    ilu = steady.steady_resolvent(sparse, rho0, method="iterative", preconditioner="ilu")
    assert np.allclose(ilu, ref, atol=1e-9)
    solver = steady.ResolventSolver(sop)
    rho, info = solver(rho0, full_output=True)
    assert np.array_equal(rho, ref)
    assert info["liouvillian_residual"] <= 10 * info["epsilon"]


def test_resolvent_warnings(rng):
    sop = build_liouvillian(models.single_qubit_decay())
    rho0 = ginibre(rng, 2)
    # ||L rho|| = eps ||x - rho0|| <= 2 eps, so the default 10 eps only trips on a broken solve
    with pytest.warns(RuntimeWarning, match="smaller epsilon"):
        steady.steady_resolvent(sop, rho0, epsilon=0.5, warn_residual=1e-3)
    with pytest.warns(RuntimeWarning, match="spectral gap"):
        steady.steady_resolvent(sop, rho0, epsilon=1e-2, check_epsilon=True, consistency_tol=1e-4,
                                 warn_residual=np.inf)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        rho, info = steady.steady_resolvent(sop, rho0, check_epsilon=True, full_output=True)
    assert info["epsilon_consistency"] < 1e-5
    with pytest.raises(ValueError):
        steady.ResolventSolver(sop, epsilon=0)
