"""Steady states of multistable Lindblad master equations, predicted from the initial state.

Submodules: ``algebra`` (linear algebra), ``lindblad`` (models, Liouvillians),
``steady`` (spectral, kernel, Hermitian and resolvent solvers), ``dynamics``
(Runge-Kutta integration), ``spins`` (collective spins, Clebsch-Gordan),
``metrology`` (concurrence, QFI), ``models``, ``scenarios`` and ``cli``.
"""
from .algebra import DimensionError, NumericalError, SolverError
from .kernels import BACKEND
from .lindblad import LindbladModel, Superoperator, build_liouvillian, load_model, save_model
from .steady import (
    ResolventSolver,
    conserved_quantities,
    kernel_basis,
    spectral_decomposition,
    steady_hermitian,
    steady_kernel,
    steady_resolvent,
    steady_spectral,
)

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "DimensionError", "LindbladModel", "NumericalError", "ResolventSolver", "SolverError",
    "Superoperator", "build_liouvillian", "conserved_quantities", "kernel_basis", "load_model",
    "save_model", "spectral_decomposition", "steady_hermitian", "steady_kernel", "steady_resolvent",
    "steady_spectral",
]
