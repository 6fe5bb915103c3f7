"""Named end-to-end experiments with built-in consistency checks.

Each scenario returns a :class:`ScenarioResult` holding table rows, a summary
dict and named boolean checks. :func:`run_scenario` also writes
``<scenario>_<seed>.csv`` and ``<scenario>_<seed>.json`` when given an output
directory.
"""
from __future__ import annotations

import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from . import dynamics, fileio, metrology, models, steady
from .lindblad import build_liouvillian
from .spins import CoupledSpinSpace, SpinEnsemblePair, p_of_S, psi_dif

# Per-method agreement required inside every scenario.
METHOD_TOL = 1e-5


class ScenarioError(ValueError):
    """Unknown scenario or parameters outside the documented range."""


@dataclass
class ScenarioConfig:
    name: str = "two_qubit_balanced"
    seed: int = 7
    samples: int = 300
    kind: str = "mixed_ginibre"
    n: int = 4
    eta: int = 0
    gamma: float = 1.0
    omega: float = 1.0
    ratios: tuple = (0.5, 1.0, 2.0)
    epsilon: float = steady.DEFAULT_EPSILON
    n_list: tuple = (4, 8, 12, 16)
    gamma_t: tuple = (20.0, 40.0, 80.0)
    repeats: int = 5
    rtol: float = 1e-8
    dynamics: bool = False
    threads: int = 1


@dataclass
class ScenarioResult:
    name: str
    config: ScenarioConfig
    rows: list = field(default_factory=list)
    summary: dict = field(default_factory=dict)
    checks: dict = field(default_factory=dict)
    columns: list | None = None
    trajectory: dynamics.Trajectory | None = None

    @property
    def passed(self) -> bool:
        return all(self.checks.values())

    def summary_line(self) -> str:
        bad = [k for k, v in self.checks.items() if not v]
        status = "PASS" if not bad else "FAIL (" + ", ".join(bad) + ")"
        keys = [k for k in self.summary if isinstance(self.summary[k], (int, float)) and not isinstance(self.summary[k], bool)]
        stats = " ".join(f"{k}={self.summary[k]:.6g}" for k in keys[:6])
        return f"{self.name}: {status} {stats}".rstrip()


# -- random initial states ----------------------------------------------------

class RandomStateSampler:
    """Seeded random density matrices.

    ``mixed_ginibre``: ``G G^+ / tr(G G^+)`` with i.i.d. standard complex
    Gaussian ``G`` (Hilbert-Schmidt measure). ``pure_haar``: projector on a
    normalized complex Gaussian vector.
    """

    KINDS = ("mixed_ginibre", "pure_haar")

    def __init__(self, seed: int = 0, kind: str = "mixed_ginibre"):
        if kind not in self.KINDS:
            raise ValueError(f"unknown sampler kind {kind!r}; expected one of {self.KINDS}")
        self.seed = seed
        self.kind = kind
        self.rng = np.random.default_rng(seed)

    def _gauss(self, shape):
        return (self.rng.standard_normal(shape) + 1j * self.rng.standard_normal(shape)) / np.sqrt(2)

    def sample(self, dim: int) -> np.ndarray:
        if dim < 2:
            raise ValueError(f"dim must be at least 2, got {dim}")
        if self.kind == "mixed_ginibre":
            g = self._gauss((dim, dim))
            rho = g @ g.conj().T
        else:
            v = self._gauss(dim)
            rho = np.outer(v, v.conj())
        rho = 0.5 * (rho + rho.conj().T)
        return rho / np.trace(rho).real


def sample_state(sampler: RandomStateSampler, dim: int) -> np.ndarray:
    return sampler.sample(dim)


# -- helpers ------------------------------------------------------------------

def trace_distance(a, b) -> float:
    d = np.asarray(a) - np.asarray(b)
    return float(0.5 * np.abs(np.linalg.eigvalsh(0.5 * (d + d.conj().T))).sum())


def state_is_valid(rho, tol: float = 1e-8) -> bool:
    rho = np.asarray(rho)
    herm = np.abs(rho - rho.conj().T).max() <= 1e-12
    tr = abs(np.trace(rho) - 1) <= 1e-10
    psd = np.linalg.eigvalsh(0.5 * (rho + rho.conj().T)).min() >= -tol
    return bool(herm and tr and psd)


def _pmap(fn, items, threads: int):
    if threads <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(fn, items))


def _draw(cfg: ScenarioConfig, dim: int) -> list:
    sampler = RandomStateSampler(cfg.seed, cfg.kind)
    return [sampler.sample(dim) for _ in range(cfg.samples)]


def _singlet_overlap(rho) -> float:
    return float(np.real(models.PHI_MINUS.conj() @ rho @ models.PHI_MINUS))


# -- two qubits -----------------------------------------------------------------

def run_two_qubit_balanced(cfg: ScenarioConfig) -> ScenarioResult:
    """Concurrence of the steady state against the singlet overlap ``c2``.

    For this Hermitian Liouvillian the steady state is
    ``c2 |phi-><phi-| + (1 - c2)/3 (triplet projector)``, so ``C = max(0, 2 c2 - 1)``.
    """
    if cfg.samples < 1:
        raise ScenarioError("samples must be at least 1")
    sop = build_liouvillian(models.two_qubit_balanced(cfg.gamma))
    basis = steady.kernel_basis(sop)
    solver = steady.ResolventSolver(sop, cfg.epsilon)
    states = _draw(cfg, 4)

    def one(rho0):
        c2 = _singlet_overlap(rho0)
        rh = steady.steady_hermitian(basis, rho0)
        rr = solver(rho0)
        return c2, rh, rr

    rows, worst_c, worst_law, worst_td, valid = [], 0.0, 0.0, 0.0, True
    for i, (c2, rh, rr) in enumerate(_pmap(one, states, cfg.threads)):
        ch, cr = metrology.concurrence(rh), metrology.concurrence(rr)
        law = max(0.0, 2 * c2 - 1)
        dist = trace_distance(rh, rr)
        worst_c = max(worst_c, abs(ch - cr))
        worst_law = max(worst_law, abs(ch - law))
        worst_td = max(worst_td, dist)
        valid &= state_is_valid(rh) and state_is_valid(rr)
        rows.append({"sample": i, "c2": c2, "concurrence_hermitian": ch, "concurrence_resolvent": cr,
                     "concurrence_law": law, "trace_distance": dist})
    summary = {"kernel_dim": basis.n, "max_concurrence_diff": worst_c, "max_law_deviation": worst_law,
               "max_trace_distance": worst_td, "samples": len(rows)}
    checks = {"kernel_dim": basis.n == 2, "methods_agree": worst_c <= METHOD_TOL and worst_td <= METHOD_TOL,
              "concurrence_law": worst_law <= 1e-6, "valid_states": valid}
    return ScenarioResult(cfg.name, cfg, rows, summary, checks)


def _kernel_vs_resolvent(cfg: ScenarioConfig, model, extra: dict | None = None):
    # Agreement is judged on the states. Concurrence takes square roots of the
    # eigenvalues of rho rho_tilde, so on rank-deficient steady states an O(eps)
    # residue in the resolvent output moves it by O(sqrt(eps)); it is reported only.
    sop = build_liouvillian(model)
    basis = steady.kernel_basis(sop)
    solver = steady.ResolventSolver(sop, cfg.epsilon)
    states = _draw(cfg, 4)

    def one(rho0):
        return _singlet_overlap(rho0), steady.steady_kernel(basis, rho0), solver(rho0)

    rows, worst_c, worst_td, valid = [], 0.0, 0.0, True
    for i, (c2, rk, rr) in enumerate(_pmap(one, states, cfg.threads)):
        ck, cr = metrology.concurrence(rk), metrology.concurrence(rr)
        dist = trace_distance(rk, rr)
        worst_c = max(worst_c, abs(ck - cr))
        worst_td = max(worst_td, dist)
        valid &= state_is_valid(rk) and state_is_valid(rr)
        row = {"sample": i, "c2_tilde": c2, "concurrence_kernel": ck, "concurrence_resolvent": cr,
               "trace_distance": dist}
        row.update(extra or {})
        rows.append(row)
    return basis, rows, worst_c, worst_td, valid


def run_two_qubit_single_decay(cfg: ScenarioConfig) -> ScenarioResult:
    """Collective decay only: biorthogonal-kernel states against resolvent states."""
    basis, rows, worst_c, worst_td, valid = _kernel_vs_resolvent(cfg, models.two_qubit_decay(cfg.gamma))
    sop = build_liouvillian(models.two_qubit_decay(cfg.gamma))
    top = steady.steady_kernel(basis, models.projector(models.KET1))
    dark = steady.steady_kernel(basis, models.projector(models.PHI_MINUS))
    summary = {"kernel_dim": basis.n, "max_concurrence_diff": worst_c, "max_trace_distance": worst_td,
               "samples": len(rows)}
    checks = {
        "kernel_dim": basis.n == 4,
        "methods_agree": worst_td <= METHOD_TOL,
        "excited_decays_to_ground": trace_distance(top, models.projector(models.KET4)) <= 1e-8,
        "singlet_is_dark": trace_distance(dark, models.projector(models.PHI_MINUS)) <= 1e-8,
        "hermitian_flag": not sop.hermitian_flag,
        "valid_states": valid,
    }
    return ScenarioResult(cfg.name, cfg, rows, summary, checks)


def run_two_qubit_driven(cfg: ScenarioConfig) -> ScenarioResult:
    """Collective decay plus a collective drive, for several ``gamma / omega``."""
    if not cfg.omega > 0:
        raise ScenarioError("omega must be positive")
    rows, summary, checks = [], {}, {}
    for ratio in cfg.ratios:
        model = models.two_qubit_driven(cfg.omega, ratio * cfg.omega)
        basis, r, worst_c, worst_td, valid = _kernel_vs_resolvent(cfg, model, {"gamma_over_omega": ratio})
        singlet = steady.steady_kernel(basis, models.projector(models.PHI_MINUS))
        low = [x for x in r if x["c2_tilde"] < 0.2]
        tag = f"{ratio:g}"
        summary[f"kernel_dim[{tag}]"] = basis.n
        summary[f"max_trace_distance[{tag}]"] = worst_td
        summary[f"max_concurrence_low_overlap[{tag}]"] = max((x["concurrence_kernel"] for x in low), default=0.0)
        checks[f"kernel_dim[{tag}]"] = basis.n == 2
        summary[f"max_concurrence_diff[{tag}]"] = worst_c
        checks[f"methods_agree[{tag}]"] = worst_td <= METHOD_TOL
        checks[f"singlet_dark[{tag}]"] = abs(metrology.concurrence(singlet) - 1) <= 1e-8
        checks[f"valid_states[{tag}]"] = valid
        rows.extend(r)
    if 2.0 in [float(x) for x in cfg.ratios]:
        checks["entangled_at_low_overlap[2]"] = summary["max_concurrence_low_overlap[2]"] > 0
    return ScenarioResult(cfg.name, cfg, rows, summary, checks)


# -- two ensembles ------------------------------------------------------------------

def _pair(cfg: ScenarioConfig) -> SpinEnsemblePair:
    if cfg.n < 2 or cfg.n % 2:
        raise ScenarioError(f"N must be even and at least 2, got {cfg.n}")
    if not 0 <= cfg.eta <= cfg.n // 2:
        raise ScenarioError(f"need 0 <= eta <= N/2, got eta={cfg.eta}")
    return SpinEnsemblePair.from_total(cfg.n, cfg.eta)


def decay_mixture(pair: SpinEnsemblePair) -> np.ndarray:
    """``sum_S p(S) |S,-S><S,-S|`` in the coupled basis."""
    space = CoupledSpinSpace(pair)
    out = np.zeros((space.dim, space.dim), dtype=complex)
    for s, p in p_of_S(pair).items():
        out[space.index(s, -s), space.index(s, -s)] = p
    return out


def run_two_ensemble_decay(cfg: ScenarioConfig) -> ScenarioResult:
    """Steady state of two ensembles under collective decay from ``psi_dif``."""
    pair = _pair(cfg)
    if cfg.n > 40:
        raise ScenarioError("two_ensemble_decay is limited to N <= 40")
    space = CoupledSpinSpace(pair)
    sop = models.two_ensemble_liouvillian(pair, balanced=False, gamma=cfg.gamma)
    solver = steady.ResolventSolver(sop, cfg.epsilon)
    rho_ss = solver(psi_dif(pair, basis="coupled"))
    rho_flip = solver(psi_dif(pair, flipped=True, basis="coupled"))
    target = decay_mixture(pair)
    g = metrology.differential_generator(pair)
    q = metrology.qfi_mixed(rho_ss, g)
    q_convex = metrology.qfi_decay_steady_convex(pair)
    pops = space.sector_populations(rho_ss)
    ps = p_of_S(pair)
    rows = [{"S": s, "p_S": ps.get(s, 0.0), "population": pops[s],
             "qfi_dicke": metrology.qfi_pure(space.ket(s, -s), g)} for s in space.sectors]
    summary = {
        "N": pair.n, "eta": pair.eta, "dim": space.dim,
        "trace_distance_to_mixture": trace_distance(rho_ss, target),
        "flipped_trace_distance": trace_distance(rho_ss, rho_flip),
        "qfi": q.value, "qfi_convex_sum": q_convex, "qfi_correction": q.correction,
        "support_min_S": min(s for s, p in ps.items() if p > 1e-14),
    }
    checks = {
        "matches_mixture": summary["trace_distance_to_mixture"] <= METHOD_TOL,
        "flipped_same_state": summary["flipped_trace_distance"] <= 1e-6,
        "qfi_convex_sum": abs(q.value - q_convex) <= 1e-6 * max(1.0, q_convex),
        "support_starts_at_eta": summary["support_min_S"] == pair.eta,
        "valid_state": state_is_valid(rho_ss),
    }
    traj = _dynamics_check(pair, sop, summary, checks, rho_ss) if cfg.dynamics else None
    return ScenarioResult(cfg.name, cfg, rows, summary, checks, trajectory=traj)


def _dynamics_check(pair, sop, summary, checks, rho_ref):
    """Integrate from both initial product states and compare the end points."""
    ops = CoupledSpinSpace(pair).collective
    finals = []
    for flipped in (False, True):
        res = dynamics.converge_to_steady(sop, psi_dif(pair, flipped=flipped, basis="coupled"), tol=1e-9)
        finals.append(res)
    summary["dynamics_converged"] = all(r.converged for r in finals)
    summary["dynamics_trace_distance"] = trace_distance(finals[0].state, finals[1].state)
    summary["dynamics_vs_resolvent"] = max(trace_distance(r.state, rho_ref) for r in finals)
    summary["dynamics_time"] = max(r.time for r in finals)
    checks["dynamics_same_state"] = summary["dynamics_converged"] and summary["dynamics_trace_distance"] <= 1e-6
    checks["dynamics_vs_resolvent"] = summary["dynamics_vs_resolvent"] <= METHOD_TOL
    t_end = min(summary["dynamics_time"], 20.0)
    return dynamics.integrate(sop, psi_dif(pair, basis="coupled"), t_end, np.linspace(0, t_end, 201),
                              observables={"Sz_A": ops["Sz_A"], "Sz_B": ops["Sz_B"]})


def run_balanced_protocol(cfg: ScenarioConfig) -> ScenarioResult:
    """Two-stage protocol: decay under ``S_-``, then balanced ``S_-``/``S_+`` from ``|S,-S>``.

    Stage 1 fixes the sector weights ``p(S)``; stage 2 turns each ``|S,-S>`` into
    the sector mixture ``rho_B,S``. The protocol QFI is the ``p(S)``-weighted QFI of
    those mixtures.
    """
    pair = _pair(cfg)
    space = CoupledSpinSpace(pair)
    g = metrology.differential_generator(pair)
    decay = models.two_ensemble_liouvillian(pair, balanced=False, gamma=cfg.gamma)
    balanced = models.two_ensemble_liouvillian(pair, balanced=True, gamma=cfg.gamma)
    rho0 = psi_dif(pair, basis="coupled")
    rho1 = steady.ResolventSolver(decay, cfg.epsilon)(rho0)
    pops = space.sector_populations(rho1)
    ps = p_of_S(pair)
    stage2 = steady.ResolventSolver(balanced, cfg.epsilon)
    rows, worst_b = [], 0.0
    f_num = f_exact = 0.0
    for s in space.sectors:
        if s < pair.eta:
            continue
        rb = stage2(space.projector(s, -s))
        dist = trace_distance(rb, space.balanced_mixture(s))
        worst_b = max(worst_b, dist)
        q_num = metrology.qfi_mixed(rb, g).value
        q_exact = metrology.qfi_mixed(space.balanced_mixture(s), g).value
        f_num += pops[s] * q_num
        f_exact += ps[s] * q_exact
        row = {"S": s, "p_S": ps[s], "population": pops[s], "qfi_mixture": q_num, "qfi_mixture_exact": q_exact,
               "trace_distance": dist}
        if pair.balanced:
            row["qfi_mixture_closed"] = metrology.qfi_balanced_mixture_closed(pair.n, s)
        rows.append(row)
    f_l1 = metrology.qfi_mixed(rho1, g).value
    f_direct = metrology.qfi_mixed(stage2(rho0), g).value
    summary = {"N": pair.n, "eta": pair.eta, "F_pro": f_exact, "F_pro_numeric": f_num, "F_decay": f_l1,
               "F_direct_balanced": f_direct, "ratio": f_exact / f_l1 if f_l1 > 0 else float("inf"),
               "max_stage2_trace_distance": worst_b,
               "max_population_error": max(abs(pops[s] - ps.get(s, 0.0)) for s in space.sectors)}
    checks = {
        "stage1_weights": summary["max_population_error"] <= METHOD_TOL,
        "stage2_mixtures": worst_b <= 1e-6,
        "numeric_matches_exact": abs(f_num - f_exact) <= METHOD_TOL * max(1.0, f_exact),
        "ratio_above_one": summary["ratio"] > 1,
        "direct_balanced_lower": f_direct < f_exact,
    }
    if pair.balanced:
        closed = metrology.qfi_protocol_closed(pair.n)
        summary["F_pro_closed"] = closed
        checks["closed_form"] = abs(f_exact - closed) <= 1e-8 * closed
    return ScenarioResult(cfg.name, cfg, rows, summary, checks)


# -- benchmark ------------------------------------------------------------------

REFERENCE_CLAIM = "resolvent reported at least one order of magnitude faster than RK integration"


def _timed(fn, repeats: int):
    times, out = [], None
    for _ in range(max(1, repeats)):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return out, float(np.mean(times)), float(np.std(times))


def run_benchmark(cfg: ScenarioConfig) -> ScenarioResult:
    """Wall-clock of the resolvent solve against Runge-Kutta integration.

    Model: two balanced ensembles under collective decay from ``psi_dif``. The
    direct resolvent result is the reference for every error column. Rows that
    raise are recorded with their error message instead of aborting the run.
    """
    rows = []
    for n in cfg.n_list:
        pair = SpinEnsemblePair.from_total(int(n))
        sop = models.two_ensemble_liouvillian(pair, balanced=False, gamma=cfg.gamma)
        rho0 = psi_dif(pair, basis="coupled")
        base = {"N": int(n), "dim": sop.dim, "superop_dim": sop.size}

        def resolvent(method, pre=None):
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", RuntimeWarning)
                return steady.steady_resolvent(sop, rho0, cfg.epsilon, method=method, preconditioner=pre)

        ref, t_dir, s_dir = _timed(lambda: resolvent("direct"), cfg.repeats)
        rows.append({**base, "method": "resolvent_direct", "gamma_t": "", "mean_s": t_dir, "std_s": s_dir,
                     "error": 0.0, "status": "ok"})
        jobs = [("resolvent_iterative", "", lambda: resolvent("iterative", "ilu")),
                ("ode_converge", "", lambda: dynamics.converge_to_steady(sop, rho0, tol=1e-9).state)]
        for gt in cfg.gamma_t:
            jobs.append(("ode_fixed", float(gt), lambda gt=gt: dynamics.integrate(
                sop, rho0, float(gt) / cfg.gamma, rtol=cfg.rtol, atol=cfg.rtol * 1e-2).final))
        for name, gt, fn in jobs:
            try:
                out, mean, std = _timed(fn, cfg.repeats)
                rows.append({**base, "method": name, "gamma_t": gt, "mean_s": mean, "std_s": std,
                             "error": trace_distance(out, ref), "status": "ok"})
            except Exception as exc:  # recorded, not fatal
                rows.append({**base, "method": name, "gamma_t": gt, "mean_s": float("nan"),
                             "std_s": float("nan"), "error": float("nan"), "status": f"error: {exc}"})
    by = {}
    for r in rows:
        by.setdefault(r["N"], {})[(r["method"], r["gamma_t"])] = r
    ratios = {}
    for n, d in by.items():
        ode = d.get(("ode_converge", ""))
        if ode and ode["status"] == "ok":
            ratios[n] = ode["mean_s"] / d[("resolvent_direct", "")]["mean_s"]
    errors = [r["error"] for r in rows]
    summary = {"max_error": float(np.nanmax(errors)) if errors else 0.0,
               "observed_speedup_ode_over_resolvent": ratios, "reference_claim": REFERENCE_CLAIM,
               "repeats": cfg.repeats}
    checks = {"complete": all(r["status"] == "ok" for r in rows),
              "errors_within_tol": all(r["error"] <= METHOD_TOL for r in rows if r["status"] == "ok")}
    cols = ["N", "dim", "superop_dim", "method", "gamma_t", "mean_s", "std_s", "error", "status"]
    return ScenarioResult(cfg.name, cfg, rows, summary, checks, cols)


# -- registry -----------------------------------------------------------------

REGISTRY = {
    "two_qubit_balanced": run_two_qubit_balanced,
    "two_qubit_single_decay": run_two_qubit_single_decay,
    "two_qubit_driven": run_two_qubit_driven,
    "two_ensemble_decay": run_two_ensemble_decay,
    "balanced_protocol": run_balanced_protocol,
    "benchmark": run_benchmark,
}


# The ensemble checks compare two resolvent states against each other at 1e-6, and
# each carries an O(epsilon / gap) bias, so that scenario runs one decade lower.
SCENARIO_EPSILON = {"two_ensemble_decay": 1e-7}


def run_scenario(name: str, output_dir=None, **overrides) -> ScenarioResult:
    """Run a registered scenario; writes CSV and JSON summary if ``output_dir`` is set."""
    if name not in REGISTRY:
        raise ScenarioError(f"unknown scenario {name!r}; available: {', '.join(sorted(REGISTRY))}")
    known = set(ScenarioConfig.__dataclass_fields__)
    bad = set(overrides) - known
    if bad:
        raise ScenarioError(f"unknown parameters: {', '.join(sorted(bad))}")
    overrides.setdefault("epsilon", SCENARIO_EPSILON.get(name, steady.DEFAULT_EPSILON))
    cfg = replace(ScenarioConfig(name=name), **overrides)
    result = REGISTRY[name](cfg)
    if output_dir is not None:
        write_result(result, output_dir)
    return result


def write_result(result: ScenarioResult, output_dir) -> tuple[Path, Path]:
    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    stem = f"{result.name}_{result.config.seed}"
    csv_path, json_path = out / f"{stem}.csv", out / f"{stem}.json"
    fileio.write_csv(result.rows, csv_path, result.columns)
    if result.trajectory is not None:
        result.trajectory.to_csv(out / f"{stem}_trajectory.csv")
    fileio.write_json({"scenario": result.name, "config": asdict(result.config), "summary": result.summary,
                       "checks": result.checks, "passed": result.passed, "csv": csv_path.name}, json_path)
    return csv_path, json_path
