"""Command-line interface: ``multistable {solve,kernel,scenario,bench,sample}``.

Exit codes: 0 success, 1 scenario checks failed, 2 bad arguments or input
files, 3 numerical/solver failure.
"""
from __future__ import annotations

import argparse
import sys
import warnings
from pathlib import Path

import numpy as np

from . import __version__, fileio, models, scenarios, steady
from .algebra import DimensionError, NumericalError, SolverError
from .lindblad import ModelError, build_liouvillian, load_model, save_model
from .spins import SpinEnsemblePair

EXIT_OK, EXIT_CHECKS, EXIT_USAGE, EXIT_SOLVER = 0, 1, 2, 3

BUILTINS = ("two_qubit_balanced", "two_qubit_decay", "two_qubit_driven",
            "two_ensemble_decay", "two_ensemble_balanced")


class UsageError(Exception):
    pass


def builtin_model(name: str, n: int = 4, eta: int = 0, gamma: float = 1.0, omega: float = 1.0):
    if name == "two_qubit_balanced":
        return models.two_qubit_balanced(gamma)
    if name == "two_qubit_decay":
        return models.two_qubit_decay(gamma)
    if name == "two_qubit_driven":
        return models.two_qubit_driven(omega, gamma)
    if name in ("two_ensemble_decay", "two_ensemble_balanced"):
        try:
            pair = SpinEnsemblePair.from_total(n, eta)
        except ValueError as exc:
            raise UsageError(str(exc)) from exc
        return models.two_ensemble_model(pair, balanced=name.endswith("balanced"), gamma=gamma)
    raise UsageError(f"unknown builtin model {name!r}; available: {', '.join(BUILTINS)}")


def _model_args(p):
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--model", type=Path, help="model JSON file")
    src.add_argument("--builtin", choices=BUILTINS, help="use a built-in model")
    p.add_argument("--N", dest="n", type=int, default=4, help="total qubits for ensemble models")
    p.add_argument("--eta", type=int, default=0)
    p.add_argument("--gamma", type=float, default=1.0)
    p.add_argument("--omega", type=float, default=1.0)
    p.add_argument("--dump-model", type=Path, help="also write the model as JSON")
    p.add_argument("--tol-null", type=float, default=1e-10)


def _out_path(arg, default_name: str) -> Path:
    if arg is not None:
        return Path(arg)
    out = fileio.default_output_dir()
    out.mkdir(parents=True, exist_ok=True)
    return out / default_name


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="multistable", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="steady state reached from an initial state")
    _model_args(p)
    p.add_argument("--rho0", type=Path, required=True, help="initial state JSON (matrix or ket)")
    meth = p.add_mutually_exclusive_group()
    for m in ("spectral", "kernel", "hermitian", "resolvent"):
        meth.add_argument(f"--{m}", dest="method", action="store_const", const=m)
    p.add_argument("--epsilon", type=float, default=steady.DEFAULT_EPSILON)
    p.add_argument("--iterative", action="store_true", help="GMRES instead of LU for the resolvent")
    p.add_argument("--ilu", action="store_true", help="ILU preconditioner for GMRES")
    p.add_argument("--rtol", type=float, default=1e-10)
    p.add_argument("--check-epsilon", action="store_true", help="repeat with eps/10 and compare")
    p.add_argument("--output", "-o", type=Path)
    p.set_defaults(method="resolvent")

    p = sub.add_parser("kernel", help="kernel vectors and conserved quantities")
    _model_args(p)
    p.add_argument("--output", "-o", type=Path)

    p = sub.add_parser("scenario", help="run a named scenario")
    p.add_argument("name", help="one of: " + ", ".join(sorted(scenarios.REGISTRY)))
    p.add_argument("--samples", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--kind", choices=scenarios.RandomStateSampler.KINDS)
    p.add_argument("--N", dest="n", type=int)
    p.add_argument("--eta", type=int)
    p.add_argument("--gamma", type=float)
    p.add_argument("--omega", type=float)
    p.add_argument("--ratios", type=float, nargs="+")
    p.add_argument("--epsilon", type=float)
    p.add_argument("--dynamics", action="store_true", default=None, help="also integrate the trajectories")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--out", type=Path, help="output directory (default $%s or .)" % fileio.OUTPUT_ENV)

    p = sub.add_parser("bench", help="resolvent vs Runge-Kutta timing table")
    p.add_argument("--N", dest="n_list", type=int, nargs="+", default=[4, 8, 12, 16])
    p.add_argument("--repeats", type=int, default=5)
    p.add_argument("--epsilon", type=float, default=steady.DEFAULT_EPSILON)
    p.add_argument("--rtol", type=float, default=1e-8)
    p.add_argument("--gamma-t", type=float, nargs="+", default=[20.0, 40.0, 80.0])
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--out", type=Path)

    p = sub.add_parser("sample", help="draw seeded random density matrices")
    p.add_argument("--dim", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--kind", choices=scenarios.RandomStateSampler.KINDS, default="mixed_ginibre")
    p.add_argument("--count", type=int, default=1)
    p.add_argument("--output", "-o", type=Path, help="file name; an index is appended when count > 1")
    return ap


def _load(args):
    if args.model is not None:
        model = load_model(args.model)
    else:
        model = builtin_model(args.builtin, args.n, args.eta, args.gamma, args.omega)
    if args.dump_model is not None:
        save_model(model, args.dump_model)
    return model


def cmd_solve(args) -> int:
    model = _load(args)
    rho0 = fileio.read_matrix(args.rho0)
    if rho0.shape != (model.dim, model.dim):
        raise UsageError(f"initial state is {rho0.shape[0]}x{rho0.shape[1]} but the model has dim {model.dim}")
    sop = build_liouvillian(model)
    n = None
    info = {}
    if args.method == "resolvent":
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            rho, info = steady.steady_resolvent(
                sop, rho0, args.epsilon, method="iterative" if args.iterative else "direct", rtol=args.rtol,
                preconditioner="ilu" if args.ilu else None, check_epsilon=args.check_epsilon, full_output=True)
        for w in caught:
            print(f"warning: {w.message}", file=sys.stderr)
        if not sop.sparse:
            n = steady.kernel_basis(sop, args.tol_null).n
    elif args.method == "spectral":
        spec = steady.spectral_decomposition(sop, args.tol_null)
        rho, n = steady.steady_spectral(spec, rho0), len(spec.zero_indices)
    else:
        if sop.sparse:
            raise steady.ContractError("kernel methods need a dense Liouvillian; use --resolvent")
        basis = steady.kernel_basis(sop, args.tol_null)
        n = basis.n
        rho = steady.steady_kernel(basis, rho0) if args.method == "kernel" else steady.steady_hermitian(basis, rho0)
    residual = float(np.linalg.norm(sop.matrix @ rho.reshape(-1, order="F")))
    out = _out_path(args.output, "steady_state.json")
    fileio.write_matrix(rho, out)
    print(f"method={args.method} n={n if n is not None else 'n/a'} residual={residual:.3e} output={out}")
    if "epsilon_consistency" in info:
        print(f"epsilon_consistency={info['epsilon_consistency']:.3e}")
    return EXIT_OK


def cmd_kernel(args) -> int:
    model = _load(args)
    sop = build_liouvillian(model, dense_threshold=max(4096, model.dim ** 2))
    basis = steady.kernel_basis(sop, args.tol_null)
    doc = {"n": basis.n, "hermitian": bool(basis.hermitian),
           "biorthogonality_residual": basis.biorthogonality_residual(),
           "orthonormality_residual": basis.orthonormality_residual(),
           "right": [fileio.matrix_to_dict(v.reshape(model.dim, model.dim, order="F")) for v in basis.right_vectors],
           "left": [fileio.matrix_to_dict(m) for m in steady.conserved_quantities(basis)]}
    out = _out_path(args.output, "kernel.json")
    fileio.write_json(doc, out)
    print(f"n={basis.n} hermitian={basis.hermitian} biorthogonality_residual={doc['biorthogonality_residual']:.3e} "
          f"output={out}")
    return EXIT_OK


def cmd_scenario(args) -> int:
    if args.name not in scenarios.REGISTRY:
        print(f"unknown scenario {args.name!r}; available: {', '.join(sorted(scenarios.REGISTRY))}",
              file=sys.stderr)
        return EXIT_USAGE
    keys = ("samples", "seed", "kind", "n", "eta", "gamma", "omega", "epsilon", "dynamics")
    overrides = {k: getattr(args, k) for k in keys if getattr(args, k) is not None}
    if args.ratios is not None:
        overrides["ratios"] = tuple(args.ratios)
    overrides["threads"] = args.threads
    out = args.out if args.out is not None else fileio.default_output_dir()
    try:
        result = scenarios.run_scenario(args.name, output_dir=out, **overrides)
    except scenarios.ScenarioError as exc:
        raise UsageError(str(exc)) from exc
    print(result.summary_line())
    return EXIT_OK if result.passed else EXIT_CHECKS


def cmd_bench(args) -> int:
    out = args.out if args.out is not None else fileio.default_output_dir()
    result = scenarios.run_scenario("benchmark", output_dir=out, n_list=tuple(args.n_list), repeats=args.repeats,
                                    epsilon=args.epsilon, rtol=args.rtol, gamma_t=tuple(args.gamma_t),
                                    seed=args.seed, threads=args.threads)
    print(f"{'N':>4} {'method':<20} {'gamma_t':>8} {'mean_s':>11} {'std_s':>11} {'error':>10}")
    for r in result.rows:
        gt = f"{r['gamma_t']:g}" if r["gamma_t"] != "" else "-"
        print(f"{r['N']:>4} {r['method']:<20} {gt:>8} {r['mean_s']:>11.4e} {r['std_s']:>11.4e} {r['error']:>10.2e}"
              + ("" if r["status"] == "ok" else f"  {r['status']}"))
    for n, ratio in result.summary["observed_speedup_ode_over_resolvent"].items():
        print(f"N={n}: ODE/resolvent time ratio {ratio:.3g}")
    print(result.summary_line())
    return EXIT_OK if result.passed else EXIT_CHECKS


def cmd_sample(args) -> int:
    try:
        sampler = scenarios.RandomStateSampler(args.seed, args.kind)
        states = [sampler.sample(args.dim) for _ in range(args.count)]
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    base = _out_path(args.output, f"sample_{args.seed}.json")
    for i, rho in enumerate(states):
        path = base if args.count == 1 else base.with_name(f"{base.stem}_{i}{base.suffix}")
        fileio.write_matrix(rho, path)
        print(path)
    return EXIT_OK


COMMANDS = {"solve": cmd_solve, "kernel": cmd_kernel, "scenario": cmd_scenario, "bench": cmd_bench,
            "sample": cmd_sample}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    try:
        return COMMANDS[args.command](args)
    except (UsageError, ModelError, DimensionError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (SolverError, NumericalError, steady.ContractError) as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
