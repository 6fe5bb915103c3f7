"""Compiled vs pure-Python Runge-Kutta kernels on two-ensemble Liouvillians.

    python benchmarks/bench_kernels.py --N 4 8 12 --repeats 3

Prints one row per (N, integrator, backend) with the mean wall time, and the
speedup of the compiled extension. Both backends take identical steps, so the
max difference between their final states is reported as a sanity check.
"""
import argparse
import time

import numpy as np

from multistable import kernels, models
from multistable.algebra import vectorize
from multistable.spins import SpinEnsemblePair, psi_dif


def timed(fn, repeats):
    out, times = None, []
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return out, float(np.mean(times)), float(np.std(times))


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--N", dest="n_list", type=int, nargs="+", default=[4, 8, 12])
    ap.add_argument("--repeats", type=int, default=3)
    ap.add_argument("--t-final", type=float, default=5.0)
    args = ap.parse_args(argv)
    try:
        impls = {"python": kernels.backend("python"), "cython": kernels.backend("cython")}
    except ImportError:
        raise SystemExit("compiled extension not built; reinstall with Cython available")

    print(f"{'N':>4} {'integrator':<8} {'backend':<7} {'mean_s':>10} {'std_s':>10} {'steps':>7}")
    for n in args.n_list:
        pair = SpinEnsemblePair.from_total(n)
        sop = models.two_ensemble_liouvillian(pair)
        ip, ix, data = kernels.csr_arrays(sop.matrix)
        y0 = vectorize(psi_dif(pair, basis="coupled"))
        times = np.array([args.t_final])
        runs = {
            "dopri45": lambda m: m.dopri45(ip, ix, data, y0, times, 0.0, 1e-8, 1e-10, 1e-3, 10_000_000, 0),
            "rk4": lambda m: m.rk4(ip, ix, data, y0, times, 0.0, 1e-3, 0),
        }
        for name, run in runs.items():
            res = {}
            for label, impl in impls.items():
                out, mean, std = timed(lambda: run(impl), args.repeats)
                steps = out[2] if name == "dopri45" else out[1]
                res[label] = (out[0], mean)
                print(f"{n:>4} {name:<8} {label:<7} {mean:>10.4e} {std:>10.4e} {steps:>7}")
            diff = np.abs(res["python"][0] - res["cython"][0]).max()
            print(f"{'':>4} {name:<8} speedup {res['python'][1] / res['cython'][1]:.1f}x, max |diff| {diff:.1e}")


if __name__ == "__main__":
    main()
