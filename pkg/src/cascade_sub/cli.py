"""Command-line driver: trajectory runs, parameter sweeps, qubit-pair reports,
and the cross-validation suite, emitting deterministic CSV files with
companion figures and a run.json metadata record.

Usage:
    cascade-sub <experiment> [--config FILE] [--preset NAME] [--out DIR]
                [--workers K] [--no-plots] [overrides...]

Experiments: evolve, steady_sweep, negativity_sweep, nong_sweep, qubit_pair,
validate.  Presets fig1..fig4 encode the reference parameter choices
(fig1/fig2: time evolution for N=2 and N=3; fig3: stationary P1 and
negativity sweeps; fig4: nonGaussianity sweeps).  Config-file values override
preset values; command-line flags override both.  Exit status: 0 on success,
1 on validation/integration failure, 2 on a configuration error.

Numbers in CSV output are formatted with 12 significant digits; identical
configurations produce byte-identical files, independent of the worker count.
"""

from __future__ import annotations

import argparse
import json
import math
import platform
import sys
import time
from dataclasses import dataclass, asdict
from multiprocessing import Pool
from pathlib import Path

import numpy as np

from . import __version__
from .fock import (
    DensityMatrix,
    FockBasis,
    embed_with_vacuum,
    mode_annihilator,
    number_operator,
    charge_operator,
    partial_trace,
    save_matrix,
)
from .dynamics import (
    CascadeParams,
    ConvergenceError,
    IntegrationError,
    TRUNCATION_WARN_LEVEL,
    build_effective_liouvillian,
    build_hamiltonian,
    build_liouvillian,
    evolve,
    measure,
    steady_state,
)
from .subradiance import (
    EPSILON_ACCURACY_FLOOR,
    EPSILON_MAX,
    analytic_p1_n2,
    dark_space,
    delta_p,
    epsilon_pair,
    ground_state,
    log_sum_beta_sq,
    mean_k,
    mean_k_hypergeometric,
    normalization_constant,
    p_from_epsilon,
    qubit_pair,
    subradiant_state,
    subradiant_state_n2,
    subradiant_state_n3,
)
from .entanglement import (
    CM_PRINTED_RESCALE,
    ThermalReference,
    analytic_negativity_n2,
    analytic_negativity_n2_lines,
    covariance_matrix,
    cv_ppt_test,
    nong_measure,
    nong_stationary,
    nong_subradiant_closed_form,
    ppt_report,
    reference_gaussian,
    stationary_occupations,
    stationary_overlaps,
    stationary_overlaps_printed,
    steady_state_density,
    subradiant_cm_diagonal,
)

EXPERIMENTS = ("evolve", "steady_sweep", "negativity_sweep", "nong_sweep",
               "qubit_pair", "validate")

DEFAULT_GRID = (0.0, EPSILON_MAX, 121)


class ConfigError(ValueError):
    """Invalid run configuration (exit status 2)."""


# ---------------------------------------------------------------------------
# CSV formatting (the determinism contract)
# ---------------------------------------------------------------------------

def format_value(x) -> str:
    if isinstance(x, str):
        return x
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    xf = float(x)
    if math.isnan(xf):
        return "nan"
    return "%.12g" % xf


def write_csv(path, header: str, rows) -> Path:
    path = Path(path)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(header + "\n")
        for row in rows:
            fh.write(",".join(format_value(v) for v in row) + "\n")
    return path


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------

@dataclass
class RunConfig:
    experiment: str
    N: int = 2
    epsilon: float = 0.3
    kappa: float = 0.2
    g: float = 1.0
    n_max: int | None = None
    dt: float | None = None
    t_end: float = 60.0
    t_max: float | None = None
    grid: tuple[float, float, int] = DEFAULT_GRID
    p: int | None = None
    cases: list[dict] | None = None
    out: str = "out"
    workers: int = 1
    plots: bool = True

    def resolved_n_max(self, N: int | None = None) -> int:
        # Q = 2 n0 + n1 + n caps the photon number at 2N for the |N,0,0,0>
        # initial state, so 2N photons is an exact truncation there.
        n = self.N if N is None else N
        return self.n_max if self.n_max is not None else 2 * n

    def params(self, N: int | None = None, epsilon: float | None = None,
               kappa: float | None = None) -> CascadeParams:
        return CascadeParams(
            g=self.g,
            epsilon=self.epsilon if epsilon is None else epsilon,
            kappa=self.kappa if kappa is None else kappa,
        )

    def grid_points(self) -> np.ndarray:
        lo, hi, n = self.grid
        return np.linspace(lo, hi, int(n))

    def validate_config(self) -> None:
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {self.experiment!r}")
        if self.N < 1:
            raise ConfigError("N must be >= 1")
        if self.g <= 0:
            raise ConfigError("g must be > 0")
        if self.kappa < 0 or self.epsilon < 0:
            raise ConfigError("kappa and epsilon must be >= 0")
        if self.dt is not None and self.dt <= 0:
            raise ConfigError("dt must be > 0")
        if self.t_max is not None and self.t_max <= 0:
            raise ConfigError("t_max must be > 0")
        if self.t_end <= 0:
            raise ConfigError("t_end must be > 0")
        lo, hi, n = self.grid
        if n < 2 or lo < 0 or hi <= lo:
            raise ConfigError(f"invalid grid {self.grid}")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if self.experiment == "nong_sweep" and self.N >= 4 and hi > EPSILON_MAX + 1e-9:
            raise ConfigError(
                f"grid upper bound {hi} outside the dark-state existence window "
                f"[0, {EPSILON_MAX:.6f}] for the large-N sweep")
        if self.experiment == "qubit_pair":
            if self.p is None:
                raise ConfigError("qubit_pair requires p")
            if self.N % 2 != 0:
                raise ConfigError("qubit_pair requires even N")
            if not 0 < self.p <= self.N / 4:
                raise ConfigError("qubit_pair requires 0 < p <= N/4")


PRESETS: dict[str, dict] = {
    # time evolution from |N,0,0,0>; two reference runs
    "fig1": {
        "experiment": "evolve",
        "t_end": 60.0,
        "cases": [
            {"N": 2, "kappa": 0.2, "epsilon": 0.3},
            {"N": 3, "kappa": 0.3, "epsilon": 0.5},
        ],
    },
    # stationary P1 and negativity vs epsilon
    "fig3": {
        "grid": [0.0, EPSILON_MAX, 121],
        "cases": [
            {"N": 2, "kappa": 10.0},
            {"N": 3, "kappa": 0.8},
        ],
    },
    # nonGaussianity vs epsilon
    "fig4": {
        "grid": [0.0, EPSILON_MAX, 121],
        "cases": [
            {"N": 50},
            {"N": 2, "kappa": 10.0},
            {"N": 3, "kappa": 0.8},
        ],
    },
}
PRESETS["fig2"] = dict(PRESETS["fig1"])  # same runs; probability figure included


def resolve_config(args: argparse.Namespace) -> RunConfig:
    merged: dict = {}
    if args.preset:
        if args.preset not in PRESETS:
            raise ConfigError(f"unknown preset {args.preset!r}")
        merged.update(PRESETS[args.preset])
    if args.config:
        try:
            with open(args.config, encoding="utf-8") as fh:
                file_cfg = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
        if not isinstance(file_cfg, dict):
            raise ConfigError("config file must hold a JSON object")
        merged.update(file_cfg)
    merged["experiment"] = args.experiment
    for key in ("N", "epsilon", "kappa", "g", "n_max", "dt", "t_end", "t_max",
                "p", "out", "workers"):
        val = getattr(args, key, None)
        if val is not None:
            merged[key] = val
    if args.grid is not None:
        merged["grid"] = args.grid
    if args.no_plots:
        merged["plots"] = False
    known = set(RunConfig.__dataclass_fields__)
    unknown = set(merged) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    if "grid" in merged:
        g = merged["grid"]
        if not (isinstance(g, (list, tuple)) and len(g) == 3):
            raise ConfigError("grid must be [lo, hi, npoints]")
        merged["grid"] = (float(g[0]), float(g[1]), int(g[2]))
    try:
        cfg = RunConfig(**merged)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc
    cfg.validate_config()
    return cfg


def _expand_cases(cfg: RunConfig) -> list[dict]:
    if not cfg.cases:
        return [{"N": cfg.N, "epsilon": cfg.epsilon, "kappa": cfg.kappa}]
    out = []
    for case in cfg.cases:
        base = {"N": cfg.N, "epsilon": cfg.epsilon, "kappa": cfg.kappa}
        base.update(case)
        out.append(base)
    return out


# ---------------------------------------------------------------------------
# sweep workers (module level so they pickle for the worker pool)
# ---------------------------------------------------------------------------

def _steady_point(task):
    N, g, kappa, eps, n_max, dt, t_max = task
    try:
        basis = FockBasis.full(N, n_max)
        params = CascadeParams(g=g, epsilon=eps, kappa=kappa)
        L = build_liouvillian(basis, params)
        rho0 = DensityMatrix.fock_state((N, 0, 0, 0) if basis.has_photon else (N, 0, 0), basis)
        result = steady_state(L, rho0, dt=dt, t_max=t_max)
        obs = measure(result.state, eps)
        red = partial_trace(result.state, keep=("0", "1", "2"))
        return {
            "epsilon": eps, "P1": obs.p1, "P0": obs.p0,
            "t_converged": result.t_converged, "residual": result.residual,
            "top_layer": result.info.get("top_layer_population", 0.0),
            "reduced": red.matrix, "error": "",
        }
    except (ConvergenceError, IntegrationError) as exc:
        return {"epsilon": eps, "P1": float("nan"), "P0": float("nan"),
                "t_converged": float("nan"), "residual": float("nan"),
                "top_layer": float("nan"), "reduced": None, "error": str(exc)}


def _nong_largeN_point(task):
    N, eps = task
    if eps < EPSILON_ACCURACY_FLOOR:
        return {"epsilon": eps, "p_real": float("nan"), "p_rounded": float("nan"),
                "delta": float("nan"),
                "note": f"excluded: epsilon below accuracy floor {EPSILON_ACCURACY_FLOOR}"}
    p_real = p_from_epsilon(N, eps)
    p_int = max(0, int(round(p_real)))
    delta = nong_subradiant_closed_form(N, p_int, eps)
    return {"epsilon": eps, "p_real": p_real, "p_rounded": p_int,
            "delta": delta, "note": ""}


def _map_tasks(fn, tasks, workers: int):
    if workers <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with Pool(processes=workers) as pool:
        return pool.map(fn, tasks)


# ---------------------------------------------------------------------------
# experiment runners
# ---------------------------------------------------------------------------

def run_evolve(cfg: RunConfig, outdir: Path):
    from . import plotting
    artifacts, diagnostics = [], {}
    trajectories = {}
    for case in _expand_cases(cfg):
        N, eps, kappa = case["N"], case["epsilon"], case["kappa"]
        basis = FockBasis.full(N, cfg.resolved_n_max(N))
        params = CascadeParams(g=cfg.g, epsilon=eps, kappa=kappa)
        L = build_liouvillian(basis, params)
        rho0 = DensityMatrix.fock_state((N, 0, 0, 0), basis)
        traj = evolve(L, rho0, t_end=cfg.t_end, dt=cfg.dt)
        label = f"N={N}, kappa={kappa}g, eps={eps}"
        trajectories[label] = traj
        path = outdir / f"evolve_N{N}.csv"
        traj.to_csv(path)
        artifacts.append(path)
        state_path = outdir / f"evolve_N{N}_final_state.json"
        save_matrix(state_path, traj.final_state.matrix, basis, kind="density")
        artifacts.append(state_path)
        diagnostics[f"evolve_N{N}"] = {
            "trace_drift": traj.trace_drift,
            "top_layer_population": traj.top_layer_max,
            "truncation_ok": bool(traj.top_layer_max < TRUNCATION_WARN_LEVEL),
            "dt": traj.dt,
        }
    if cfg.plots:
        artifacts.append(plotting.plot_populations(trajectories, outdir / "evolve_populations.png"))
        artifacts.append(plotting.plot_probabilities(trajectories, outdir / "evolve_probabilities.png"))
    return artifacts, diagnostics, True


def run_steady_sweep(cfg: RunConfig, outdir: Path):
    from . import plotting
    artifacts, diagnostics = [], {}
    eps_grid = cfg.grid_points()
    for case in _expand_cases(cfg):
        N, kappa = case["N"], case["kappa"]
        n_max = cfg.resolved_n_max(N)
        tasks = [(N, cfg.g, kappa, float(e), n_max, cfg.dt, cfg.t_max) for e in eps_grid]
        points = _map_tasks(_steady_point, tasks, cfg.workers)
        rows = []
        for pt in points:
            analytic = analytic_p1_n2(pt["epsilon"]) if N == 2 else float("nan")
            rows.append((pt["epsilon"], pt["P1"], analytic,
                         pt["t_converged"], pt["residual"], pt["error"]))
        path = write_csv(outdir / f"steady_sweep_N{N}.csv",
                         "epsilon,P1,P1_analytic,t_converged,residual,error", rows)
        artifacts.append(path)
        n_failed = sum(1 for pt in points if pt["error"])
        diagnostics[f"steady_sweep_N{N}"] = {
            "kappa": kappa, "points": len(points), "failed": n_failed,
            "max_residual": max((pt["residual"] for pt in points
                                 if not math.isnan(pt["residual"])), default=float("nan")),
        }
        if cfg.plots:
            curves = {f"N={N} numeric": (eps_grid, [pt["P1"] for pt in points], "o-")}
            if N == 2:
                curves["N=2 analytic"] = (eps_grid, [analytic_p1_n2(e) for e in eps_grid], "k--")
            artifacts.append(plotting.plot_sweep(
                curves, outdir / f"steady_sweep_N{N}.png", ylabel=r"$P_1$",
                title=f"stationary dark-state weight, kappa={kappa}g"))
    return artifacts, diagnostics, True


def run_negativity_sweep(cfg: RunConfig, outdir: Path):
    from . import plotting
    artifacts, diagnostics = [], {}
    eps_grid = cfg.grid_points()
    for case in _expand_cases(cfg):
        N, kappa = case["N"], case["kappa"]
        rows = []
        mins_for_plot = []
        if N == 2:
            # bad-cavity stationary form with the analytic weight; the PT
            # eigensolve is the numeric side, the closed form the reference.
            for e in eps_grid:
                e = float(e)
                p1 = analytic_p1_n2(e)
                rho = steady_state_density(2, e, p1)
                rep = ppt_report(rho)
                delta = nong_stationary(2, e, p1)
                rows.append((e, p1) + rep.min_by_slot + (analytic_negativity_n2(e), delta))
                mins_for_plot.append(rep.min_eigenvalue)
            diagnostics["negativity_sweep_N2"] = {
                "max_closed_form_deviation": max(
                    abs(r[2] - r[5]) for r in rows),
            }
        else:
            n_max = cfg.resolved_n_max(N)
            tasks = [(N, cfg.g, kappa, float(e), n_max, cfg.dt, cfg.t_max) for e in eps_grid]
            points = _map_tasks(_steady_point, tasks, cfg.workers)
            for pt in points:
                if pt["reduced"] is None:
                    rows.append((pt["epsilon"], float("nan")) + (float("nan"),) * 3
                                + (float("nan"), float("nan")))
                    mins_for_plot.append(float("nan"))
                    continue
                red = DensityMatrix(pt["reduced"], FockBasis.atomic(N))
                rep = ppt_report(red)
                delta = nong_stationary(N, pt["epsilon"], min(max(pt["P1"], 0.0), 1.0)) \
                    if N in (2, 3) else float("nan")
                rows.append((pt["epsilon"], pt["P1"]) + rep.min_by_slot
                            + (float("nan"), delta))
                mins_for_plot.append(rep.min_eigenvalue)
            diagnostics[f"negativity_sweep_N{N}"] = {
                "kappa": kappa, "failed": sum(1 for pt in points if pt["error"]),
            }
        path = write_csv(
            outdir / f"negativity_sweep_N{N}.csv",
            "epsilon,P1,A_min_slot0,A_min_slot1,A_min_slot2,A_analytic,delta", rows)
        artifacts.append(path)
        if cfg.plots:
            curves = {f"N={N} min PT eigenvalue": (eps_grid, mins_for_plot, "o-")}
            if N == 2:
                curves["N=2 closed form"] = (
                    eps_grid, [analytic_negativity_n2(e) for e in eps_grid], "k--")
            artifacts.append(plotting.plot_sweep(
                curves, outdir / f"negativity_sweep_N{N}.png",
                ylabel=r"$A_N(\epsilon)$", title="PT negativity"))
    return artifacts, diagnostics, True


def run_nong_sweep(cfg: RunConfig, outdir: Path):
    from . import plotting
    artifacts, diagnostics = [], {}
    eps_grid = cfg.grid_points()
    for case in _expand_cases(cfg):
        N = case["N"]
        if N >= 4:
            tasks = [(N, float(e)) for e in eps_grid]
            points = _map_tasks(_nong_largeN_point, tasks, cfg.workers)
            rows = [(pt["epsilon"], pt["p_real"], pt["p_rounded"], pt["delta"], pt["note"])
                    for pt in points]
            path = write_csv(outdir / f"nong_sweep_N{N}.csv",
                             "epsilon,p_real,p_rounded,delta,note", rows)
            deltas = [pt["delta"] for pt in points if not math.isnan(pt["delta"])]
            diagnostics[f"nong_sweep_N{N}"] = {
                "min_delta": min(deltas), "max_delta": max(deltas),
                "max_over_min": max(deltas) / min(deltas),
                "excluded_points": sum(1 for pt in points if pt["note"]),
            }
            if cfg.plots:
                artifacts.append(plotting.plot_sweep(
                    {f"N={N}": (eps_grid, [pt["delta"] for pt in points], "-")},
                    outdir / f"nong_sweep_N{N}.png", ylabel=r"$\delta$",
                    title="nonGaussianity of the dark state"))
            artifacts.append(path)
            continue
        kappa = case["kappa"]
        rows = []
        if N == 2:
            for e in eps_grid:
                e = float(e)
                p1 = analytic_p1_n2(e)
                rows.append((e, p1, nong_stationary(2, e, p1)))
            diagnostics["nong_sweep_N2"] = {"P1_source": "closed form (bad cavity)"}
        elif N == 3:
            n_max = cfg.resolved_n_max(N)
            tasks = [(N, cfg.g, kappa, float(e), n_max, cfg.dt, cfg.t_max) for e in eps_grid]
            points = _map_tasks(_steady_point, tasks, cfg.workers)
            for pt in points:
                if pt["error"]:
                    rows.append((pt["epsilon"], float("nan"), float("nan")))
                    continue
                p1 = min(max(pt["P1"], 0.0), 1.0)
                rows.append((pt["epsilon"], p1, nong_stationary(3, pt["epsilon"], p1)))
            diagnostics["nong_sweep_N3"] = {
                "kappa": kappa, "failed": sum(1 for pt in points if pt["error"]),
            }
        path = write_csv(outdir / f"nong_sweep_N{N}.csv", "epsilon,P1,delta", rows)
        artifacts.append(path)
        if cfg.plots:
            artifacts.append(plotting.plot_sweep(
                {f"N={N}": (eps_grid, [r[2] for r in rows], "-")},
                outdir / f"nong_sweep_N{N}.png", ylabel=r"$\delta$",
                title="nonGaussianity of the stationary state"))
    return artifacts, diagnostics, True


def run_qubit_pair(cfg: RunConfig, outdir: Path):
    pair = qubit_pair(cfg.N, cfg.p)
    split = delta_p(pair)
    report = {
        "N": pair.N, "p": pair.p, "eps0": pair.eps0, "eps1": pair.eps1,
        "alpha": pair.alpha,
        "delta_direct": split.direct, "delta_printed": split.printed,
    }
    path = outdir / f"qubit_pair_N{cfg.N}_p{cfg.p}.json"
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
    diagnostics = {"qubit_pair": {
        "orthonormality_residual": float(abs(np.vdot(pair.phi_plus, pair.phi_minus))),
        "printed_formula_discrepancy": split.discrepancy,
    }}
    return [path], diagnostics, True


# ---------------------------------------------------------------------------
# validation suite
# ---------------------------------------------------------------------------

def _check(name, passed, value, tolerance=None, note=""):
    return {"name": name, "passed": bool(passed), "value": value,
            "tolerance": tolerance, "note": note}


def _validation_checks() -> list[dict]:
    checks = []

    # dark-state residuals across the closed-form family
    worst = 0.0
    for N in (2, 4, 6, 8, 10):
        for p in range(N // 2 + 1):
            for eps in (0.2, 0.5, 1.5):
                sr = subradiant_state(N, p, eps)
                worst = max(worst, sr.lowering_residual())
    worst = max(worst, subradiant_state_n3(0.5).lowering_residual())
    checks.append(_check("dark_state_residuals", worst < 1e-12, worst, 1e-12,
                         "max ||S- |sr>|| over even N<=10, all p, eps in {0.2,0.5,1.5}"))

    # stationarity of the embedded dark projector under the full generator
    worst = 0.0
    for N, eps in ((2, 0.3), (3, 0.5)):
        basis = FockBasis.full(N, 2)
        params = CascadeParams(g=1.0, epsilon=eps, kappa=0.5)
        L = build_liouvillian(basis, params)
        sr = subradiant_state_n2(eps) if N == 2 else subradiant_state_n3(eps)
        vec = embed_with_vacuum(sr.vector, sr.basis, basis)
        rho = np.outer(vec, vec.conj())
        worst = max(worst, float(np.linalg.norm(L.matrix @ rho.flatten())))
    checks.append(_check("liouvillian_dark_stationarity", worst < 1e-12, worst, 1e-12,
                         "||L vec(|sr><sr| (x) |0><0|)|| for N=2,3"))

    # normalization identity: |C_p|^-2 vs sum of beta_k^2 (relative)
    worst = 0.0
    for N, p, eps in ((2, 1, 0.5), (8, 3, 0.2), (50, 10, 0.7), (50, 25, 2.0)):
        log_closed = -2.0 * math.log(normalization_constant(N, p, eps))
        rel = abs(math.exp(log_closed - log_sum_beta_sq(N, p, eps)) - 1.0)
        worst = max(worst, rel)
    checks.append(_check("normalization_identity", worst < 1e-10, worst, 1e-10,
                         "hypergeometric closed form vs amplitude sum, relative"))

    # <k>_p from amplitudes vs hypergeometric ratio
    worst = 0.0
    for N, p, eps in ((2, 1, 0.5), (8, 2, 0.7), (50, 10, 0.618), (50, 10, 1.618)):
        a = mean_k(N, p, eps)
        b = mean_k_hypergeometric(N, p, eps)
        worst = max(worst, abs(a - b) / max(1.0, abs(a)))
    checks.append(_check("mean_k_identity", worst < 1e-12, worst, 1e-12,
                         "amplitude sum vs terminating-series ratio"))

    # epsilon-pair roundtrip and product
    worst_rt, worst_prod = 0.0, 0.0
    for N, p in ((8, 2), (50, 5), (50, 10), (100, 25)):
        e0, e1 = epsilon_pair(N, p)
        worst_prod = max(worst_prod, abs(e0 * e1 - 1.0))
        worst_rt = max(worst_rt, abs(p_from_epsilon(N, e0) - p),
                       abs(p_from_epsilon(N, e1) - p))
    checks.append(_check("epsilon_pair_product", worst_prod < 1e-12, worst_prod, 1e-12))
    checks.append(_check("epsilon_pair_roundtrip", worst_rt < 1e-10, worst_rt, 1e-10))

    # negative PT eigenvalue: closed form vs eigensolve on the stationary form
    worst = 0.0
    for e in np.linspace(0.0, EPSILON_MAX, 25):
        e = float(e)
        rho = steady_state_density(2, e, analytic_p1_n2(e))
        rep = ppt_report(rho)
        worst = max(worst, abs(rep.min_eigenvalue - analytic_negativity_n2(e)))
    checks.append(_check("negativity_closed_form_oracle", worst < 1e-8, worst, 1e-8,
                         "min PT eigenvalue vs closed form, 25-point grid"))

    # the two printed closed-form lines differ by a factor eps
    worst = 0.0
    for e in (0.3, 0.5, 0.9, 1.0, 1.5, 2.0):
        l1, l2 = analytic_negativity_n2_lines(e)
        worst = max(worst, abs(l2 - e * l1))
    checks.append(_check("negativity_two_lines_relation", worst < 1e-12, worst, 1e-12,
                         "moment-product line equals eps times the eigenvalue line; "
                         "the eigensolve confirms the first line"))

    # covariance matrix: brute force vs closed-form diagonal
    sr = subradiant_state(4, 2, 0.7)
    cm = covariance_matrix(sr)
    diag_closed = subradiant_cm_diagonal(4, 2, 0.7)
    dev = float(np.max(np.abs(np.diag(cm.sigma) - diag_closed)))
    offd = float(np.max(np.abs(cm.sigma - np.diag(np.diag(cm.sigma)))))
    checks.append(_check("cm_diagonal_closed_form", dev < 1e-10 and offd < 1e-12,
                         max(dev, offd), 1e-10,
                         f"(<n_j> + 1/2) convention; printed thermal diagonals are "
                         f"1/{CM_PRINTED_RESCALE:g} of these; the printed first-diagonal "
                         "reduction with '-1/2' is a sign slip for '+1/2'"))

    # stationary-state overlaps: closed forms vs direct diagonal traces
    worst, printed_dev = 0.0, 0.0
    for N, eps in ((2, 0.5), (2, 1.3), (3, 0.5), (3, 0.8)):
        p1 = analytic_p1_n2(eps) if N == 2 else 0.4
        tau = ThermalReference(occupations=stationary_occupations(N, eps, p1))
        rho0 = DensityMatrix.pure(ground_state(N).vector, FockBasis.atomic(N))
        dark = subradiant_state_n2(eps) if N == 2 else subradiant_state_n3(eps)
        rho1 = DensityMatrix.pure(dark.vector, dark.basis)
        k0, k1 = stationary_overlaps(N, eps, p1)
        worst = max(worst, abs(k0 - tau.overlap_with(rho0)),
                    abs(k1 - tau.overlap_with(rho1)))
        kp0, kp1 = stationary_overlaps_printed(N, eps, p1)
        printed_dev = max(printed_dev, abs(kp0 - tau.overlap_with(rho0)),
                          abs(kp1 - tau.overlap_with(rho1)))
    checks.append(_check("appendix_overlaps_oracle", worst < 1e-10, worst, 1e-10,
                         f"corrected closed forms; as-printed variant deviates by up to "
                         f"{printed_dev:.3e} (extra (1+y_j) weights and a fixed y2 power)"))

    # nonGaussianity: closed form vs Hilbert-Schmidt computation (pure states)
    worst = 0.0
    for N, p, eps in ((2, 1, 0.5), (3, 1, 0.8), (4, 1, 1.2), (4, 2, 0.7)):
        if N == 2:
            sr = subradiant_state_n2(eps)
        elif N == 3:
            sr = subradiant_state_n3(eps)
        else:
            sr = subradiant_state(N, p, eps)
        rho = DensityMatrix.pure(sr.vector, sr.basis)
        direct = nong_measure(rho, reference_gaussian(rho))
        closed = nong_subradiant_closed_form(N, p if N != 3 else 1, eps)
        worst = max(worst, abs(direct - closed))
    checks.append(_check("nong_pure_closed_form_oracle", worst < 1e-10, worst, 1e-10))

    # nonGaussianity of the stationary mixture: normalized closed form vs direct
    worst = 0.0
    for N, eps in ((2, 0.5), (3, 0.6)):
        p1 = analytic_p1_n2(eps) if N == 2 else 0.35
        rho = steady_state_density(N, eps, p1)
        direct = nong_measure(rho, reference_gaussian(rho))
        closed = nong_stationary(N, eps, p1)
        worst = max(worst, abs(direct - closed))
    checks.append(_check(
        "nong_stationary_closed_form_oracle", worst < 1e-10, worst, 1e-10,
        "normalized by the mixture purity mu_rho = P1^2 + (1-P1)^2; the bare "
        "combination P1(P1-1) + (1+mu_tau)/2 - ... equals delta * mu_rho"))

    # thermal input has delta = 0; truncated-series purity agrees with closed form
    occ = (0.08, 0.05, 0.1)
    tau = ThermalReference(occupations=occ)
    n_cut = 8
    states = tuple((i, j, k) for i in range(n_cut + 1)
                   for j in range(n_cut + 1) for k in range(n_cut + 1))
    cube = FockBasis(slots=("0", "1", "2"), states=states)
    weights = np.array([tau.weight(s) for s in cube.states])
    rho_th = DensityMatrix(np.diag(weights / weights.sum()).astype(complex), cube)
    delta_th = nong_measure(rho_th, reference_gaussian(rho_th))
    mu_series, tail = tau.purity_series()
    mu_dev = abs(mu_series - tau.purity())
    checks.append(_check("nong_thermal_zero", abs(delta_th) < 1e-10, abs(delta_th), 1e-10))
    checks.append(_check("thermal_purity_truncation", mu_dev < 1e-10 and tail < 1e-10,
                         max(mu_dev, tail), 1e-10,
                         "geometric closed form vs truncated series (tail bounded)"))

    # CV PPT blindness vs discrete-variable negativity
    contrast_ok = True
    for N, eps in ((2, 0.5), (3, 0.5), (8, 0.7)):
        if N == 2:
            sr = subradiant_state_n2(eps)
        elif N == 3:
            sr = subradiant_state_n3(eps)
        else:
            sr = subradiant_state(8, 2, eps)
        cm = covariance_matrix(sr)
        cv = cv_ppt_test(cm)
        dv = ppt_report(DensityMatrix.pure(sr.vector, sr.basis))
        contrast_ok &= (not cv.any_violation) and dv.fully_inseparable
    checks.append(_check("cv_vs_dv_contrast", contrast_ok, float(contrast_ok), None,
                         "symplectic test satisfied while PT spectrum is negative"))

    # generator structure: atom-number conservation and charge monotonicity
    basis = FockBasis.full(2, 4)
    params = CascadeParams(g=1.0, epsilon=0.3, kappa=0.2)
    H = build_hamiltonian(basis, params)
    a = mode_annihilator(basis, "photon").matrix
    nph = a.conj().T @ a
    n_at = sum(number_operator(basis, str(j)) for j in range(3))
    q_op = charge_operator(basis)
    adj_n = 1j * (H @ n_at - n_at @ H) + 2 * params.kappa * (
        a.conj().T @ n_at @ a - 0.5 * (nph @ n_at + n_at @ nph))
    adj_q = 1j * (H @ q_op - q_op @ H) + 2 * params.kappa * (
        a.conj().T @ q_op @ a - 0.5 * (nph @ q_op + q_op @ nph))
    v_at = float(np.linalg.norm(adj_n))
    v_q = float(np.linalg.norm(adj_q + 2 * params.kappa * nph))
    checks.append(_check("atom_number_conservation", v_at < 1e-12, v_at, 1e-12,
                         "adjoint generator annihilates N0+N1+N2"))
    checks.append(_check("charge_monotonicity", v_q < 1e-12, v_q, 1e-12,
                         "d<Q>/dt = -2 kappa <n_ph> <= 0 as an operator identity"))

    # integrator health on the reference run, plus the sum rule
    basis = FockBasis.full(2, 4)
    L = build_liouvillian(basis, params)
    rho0 = DensityMatrix.fock_state((2, 0, 0, 0), basis)
    traj = evolve(L, rho0, t_end=60.0)
    sum_dev = float(np.max(np.abs(traj.n0 + traj.n1 + traj.n2 - 2.0)))
    checks.append(_check("trace_drift", traj.trace_drift < 1e-6, traj.trace_drift, 1e-6))
    checks.append(_check("atom_sum_rule", sum_dev < 1e-8, sum_dev, 1e-8))
    checks.append(_check("truncation_sufficiency",
                         traj.top_layer_max < TRUNCATION_WARN_LEVEL,
                         traj.top_layer_max, TRUNCATION_WARN_LEVEL,
                         "population of the n = n_max photon layer"))

    # stationary coherence between the two dark states (structurally zero:
    # they carry different charge Q and the initial state is a Q eigenstate)
    red = partial_trace(traj.final_state, keep=("0", "1", "2"))
    v0 = ground_state(2).vector
    v1 = subradiant_state_n2(0.3).vector
    coh = float(abs(v0.conj() @ red.matrix @ v1))
    checks.append(_check("dark_coherence_absent", coh < 1e-12, coh, 1e-12,
                         "stationary mixture is diagonal in the dark basis"))

    # the effective superradiant equation reproduces the closed-form weight
    worst = 0.0
    for eps in (0.3, 0.7, 2.0):
        ab = FockBasis.atomic(2)
        Leff = build_effective_liouvillian(ab, CascadeParams(g=1.0, epsilon=eps, kappa=1.0))
        r0 = DensityMatrix.fock_state((2, 0, 0), ab)
        res = steady_state(Leff, r0, dt=0.005)
        worst = max(worst, abs(measure(res.state, eps).p1 - analytic_p1_n2(eps)))
    checks.append(_check("effective_equation_p1", worst < 1e-8, worst, 1e-8,
                         "cavity-eliminated generator integrated to stationarity"))

    # bad-cavity equivalence at kappa = 10 g (full equation vs closed form)
    worst = 0.0
    per_eps = {}
    for eps in (0.1, 0.3, 0.5, 0.7, 0.9, 1.2, 2.0):
        basis = FockBasis.full(2, 4)
        p = CascadeParams(g=1.0, epsilon=eps, kappa=10.0)
        L = build_liouvillian(basis, p)
        r0 = DensityMatrix.fock_state((2, 0, 0, 0), basis)
        res = steady_state(L, r0)
        p1 = measure(res.state, eps).p1
        dev = abs(p1 - analytic_p1_n2(eps))
        per_eps[eps] = dev
        worst = max(worst, dev)
    checks.append(_check(
        "bad_cavity_equivalence_10g", worst < 1e-3, worst, 1e-3,
        "residual adiabatic-elimination error at kappa=10g; deviations scale as "
        f"(g/kappa)^2 and per-eps values are {per_eps}"))

    # good-cavity deviation is qualitative only: recorded, not bounded
    basis = FockBasis.full(2, 4)
    L = build_liouvillian(basis, CascadeParams(g=1.0, epsilon=0.3, kappa=0.2))
    res = steady_state(L, DensityMatrix.fock_state((2, 0, 0, 0), basis))
    dev02 = abs(measure(res.state, 0.3).p1 - analytic_p1_n2(0.3))
    checks.append(_check("bad_cavity_deviation_recorded_02g", True, dev02, None,
                         "P1 deviation from the closed form at kappa=0.2g, eps=0.3 "
                         "(no bound asserted)"))

    # dark-space kernel dimensions
    dims_ok = True
    k2 = dark_space(FockBasis.atomic(2), 0.5).shape[0]
    k3 = dark_space(FockBasis.atomic(3), 0.5).shape[0]
    k4 = dark_space(FockBasis.atomic(4), 0.5).shape[0]
    dims_ok = (k2 == 2) and (k3 == 2) and (k4 >= 3)
    checks.append(_check("dark_space_dimensions", dims_ok, float(k2 + k3 + k4), None,
                         f"kernel dims N=2:{k2} N=3:{k3} N=4:{k4}"))
    return checks


def run_validate(cfg: RunConfig, outdir: Path):
    checks = _validation_checks()
    all_passed = all(c["passed"] for c in checks)
    report = {
        "all_passed": all_passed,
        "cm_printed_rescale_factor": CM_PRINTED_RESCALE,
        "checks": checks,
    }
    path = outdir / "validation.json"
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=2, default=float)
        fh.write("\n")
    for c in checks:
        tag = "PASS" if c["passed"] else "FAIL"
        tol = f" (tol {c['tolerance']:g})" if c["tolerance"] else ""
        print(f"[{tag}] {c['name']}: {c['value']:.3e}{tol}")
    return [path], {"checks_failed": sum(not c["passed"] for c in checks)}, all_passed


RUNNERS = {
    "evolve": run_evolve,
    "steady_sweep": run_steady_sweep,
    "negativity_sweep": run_negativity_sweep,
    "nong_sweep": run_nong_sweep,
    "qubit_pair": run_qubit_pair,
    "validate": run_validate,
}


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cascade-sub",
        description="N-atom degenerate-cascade subradiance: simulation sweeps, "
                    "entanglement and nonGaussianity analysis.")
    parser.add_argument("experiment", choices=EXPERIMENTS)
    parser.add_argument("--config", help="JSON configuration file")
    parser.add_argument("--preset", help=f"named parameter preset ({', '.join(PRESETS)})")
    parser.add_argument("--out", help="output directory (default 'out')")
    parser.add_argument("--workers", type=int, help="sweep worker processes")
    parser.add_argument("--no-plots", action="store_true", help="skip figure rendering")
    parser.add_argument("--N", type=int, help="atom number")
    parser.add_argument("--epsilon", type=float, help="rate ratio (point runs)")
    parser.add_argument("--kappa", type=float, help="cavity linewidth in units of g")
    parser.add_argument("--g", type=float, help="coupling constant (time unit 1/g)")
    parser.add_argument("--n-max", dest="n_max", type=int, help="photon truncation")
    parser.add_argument("--dt", type=float, help="integrator step")
    parser.add_argument("--t-end", dest="t_end", type=float, help="evolution horizon")
    parser.add_argument("--t-max", dest="t_max", type=float,
                        help="steady-state convergence horizon")
    parser.add_argument("--grid", nargs=3, type=float, metavar=("LO", "HI", "NPTS"),
                        help="epsilon grid for sweeps")
    parser.add_argument("--p", type=int, help="dark-state index (qubit_pair)")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve_config(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    outdir = Path(cfg.out)
    outdir.mkdir(parents=True, exist_ok=True)
    t0 = time.time()
    try:
        artifacts, diagnostics, ok = RUNNERS[cfg.experiment](cfg, outdir)
    except (IntegrationError, ConvergenceError) as exc:
        print(f"run failed: {exc}", file=sys.stderr)
        return 1
    run_record = {
        "config": asdict(cfg),
        "versions": {
            "cascade_sub": __version__,
            "numpy": np.__version__,
            "python": platform.python_version(),
        },
        "runtime_seconds": time.time() - t0,
        "artifacts": [str(p) for p in artifacts],
        "diagnostics": diagnostics,
    }
    with open(outdir / "run.json", "w", encoding="utf-8") as fh:
        json.dump(run_record, fh, indent=2, default=float)
        fh.write("\n")
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
