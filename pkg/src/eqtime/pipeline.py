"""Experiment pipelines behind the command-line subcommands.

Each ``run_*`` function takes a validated config and returns an
:class:`~eqtime.output.OutputSet`, a JSON-able summary and an exit status.
Nothing touches the filesystem here; the CLI commits the outputs.
"""
from __future__ import annotations

import json
import time
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager
from functools import cached_property
from pathlib import Path

import numpy as np

from . import __version__
from .bounds import (
    best_eps,
    bound_report,
    central_window,
    commutator_value,
    default_window,
    microcanonical_window,
    proposition1_bound,
    t_eq,
    theorem3_bound,
    theorem4_bound,
    truncate,
    truncated_closeness,
)
from .config import ConfigError, sweep_points, t_values
from .dynamics import expectation_trace, haar_typicality, make_time_grid, time_average
from .gaps import (
    AMPLITUDE_FLOOR,
    GAP_AGG_RTOL,
    a_delta,
    binomial_distribution,
    build_gap_distribution,
    count_local_maxima,
    default_eps_grid,
    effective_dimension,
    histogram,
    omega_rank,
    q_purity_bound,
    sigma_spectral,
    xi_profile,
)
from .models import PAULI, InitialStateSpec, build_initial_state, embed_system_observable, free_spin, ising_ring, random_ring, system_state
from .output import OutputSet
from .spectral import DEGENERACY_RTOL, InsufficientSpectralData, diagonalize, fit_density_of_states, to_eigenbasis

__all__ = ["Experiment", "COMMANDS", "run_command", "run_sweep"]

ENERGY = "[Omega]"
TIME = "[1/Omega]"
BOUND_SLACK = 1e-10


class Experiment:
    """Lazily built model, state, observable and their spectral data."""

    def __init__(self, cfg: dict):
        self.cfg = cfg
        self.stages = {}

    @contextmanager
    def stage(self, name):
        t0 = time.perf_counter()
        try:
            yield
        finally:
            self.stages[name] = self.stages.get(name, 0.0) + time.perf_counter() - t0

    @property
    def seed(self) -> int:
        return int(self.cfg["seed"])

    @cached_property
    def model(self):
        m = self.cfg["model"]
        with self.stage("model"):
            if m["kind"] == "ising_ring":
                return ising_ring(m["L"], m["omega"], m["gamma"])
            if m["kind"] == "random_ring":
                seed = self.seed if m["seed"] is None else m["seed"]
                return random_ring(m["L"], m["omega"], m["gamma"], m["width"], seed)
            return free_spin(m["L"], m["omega"], m["gamma"])

    @cached_property
    def A_S(self) -> np.ndarray:
        obs = self.cfg["observable"]
        if isinstance(obs, str):
            return PAULI[obs[1]].astype(complex)
        if "matrix" in obs:
            raw = obs["matrix"]
        else:
            path = Path(obs["file"])
            try:
                raw = np.load(path) if path.suffix == ".npy" else json.loads(path.read_text())
            except (OSError, ValueError) as exc:
                raise ConfigError(f"observable.file: cannot read {path}: {exc}") from None
        try:
            A = np.asarray(raw, dtype=complex)
        except (TypeError, ValueError):
            raise ConfigError("observable: matrix entries must be numbers") from None
        if A.shape != (2, 2) or not np.allclose(A, A.conj().T):
            raise ConfigError("observable: expected a Hermitian 2x2 matrix")
        if not np.any(A):
            raise ConfigError("observable: matrix must be non-zero")
        return A

    @cached_property
    def A(self) -> np.ndarray:
        return embed_system_observable(self.A_S, self.model)

    @cached_property
    def rho_S(self) -> np.ndarray:
        s = self.cfg["initial"]["system_state"]
        try:
            return system_state(s)
        except ValueError as exc:
            raise ConfigError(f"initial.system_state: {exc}") from None

    @cached_property
    def bath_decomp(self):
        with self.stage("diagonalize_bath"):
            return diagonalize(self.model.h_bath)

    @cached_property
    def decomp(self):
        with self.stage("diagonalize"):
            return diagonalize(self.model.H)

    @cached_property
    def window(self):
        ini = self.cfg["initial"]
        if ini["center"] is not None or ini["width"] is not None:
            E = self.bath_decomp.energies
            center = float(np.median(E)) if ini["center"] is None else ini["center"]
            width = float(E[-1] - E[0]) / 4 if ini["width"] is None else ini["width"]
            return microcanonical_window(self.bath_decomp, center, width)
        if ini["window"] == "central":
            return central_window(self.bath_decomp)
        return default_window(self.bath_decomp)

    @cached_property
    def rho0(self) -> np.ndarray:
        ini = self.cfg["initial"]
        kind = ini["bath_kind"]
        seed = self.seed if ini["seed"] is None else ini["seed"]
        if kind == "mixed":
            spec = InitialStateSpec(self.rho_S, "mixed")
        else:
            spec = InitialStateSpec(self.rho_S, kind, self.window.E_B, self.window.Delta, seed)
        return build_initial_state(spec, self.model, self.bath_decomp if kind != "mixed" else None)

    @cached_property
    def rho0_eig(self):
        return to_eigenbasis(self.rho0, self.decomp)

    @cached_property
    def A_eig(self):
        return to_eigenbasis(self.A, self.decomp)

    @cached_property
    def dist(self):
        with self.stage("gap_distribution"):
            return build_gap_distribution(self.rho0_eig, self.A_eig, self.decomp)

    @cached_property
    def commutator(self) -> float:
        return commutator_value(self.rho0_eig, self.A_eig, self.decomp)

    @cached_property
    def T_grid(self) -> np.ndarray:
        return t_values(self.cfg)

    def eps_list(self, fallback_T=None):
        eps = self.cfg["analysis"]["eps"]
        if eps is not None:
            return [float(e) for e in eps]
        if self.dist.equilibrated:
            return [1.0]
        T = float(self.T_grid.max()) if fallback_T is None else fallback_T
        return [best_eps(self.dist, T)[0]]

    def provenance(self) -> dict:
        return {
            "model": self.model.params,
            "seed": self.seed,
            "degeneracy_rtol": DEGENERACY_RTOL,
            "gap_agg_rtol": GAP_AGG_RTOL,
            "amplitude_floor": AMPLITUDE_FLOOR,
        }

    @cached_property
    def trace(self):
        T_max = float(max(self.T_grid.max(), max(self.cfg["analysis"]["T_markers"] or [0])))
        gap = float(self.decomp.energies[-1] - self.decomp.energies[0])
        grid = make_time_grid(T_max, gap, self.cfg["analysis"]["n_times"])
        with self.stage("evolve"):
            return expectation_trace(self.rho0_eig, self.A_eig, self.decomp, grid, self.dist.norm_A)

    def exact_averages(self, Ts) -> np.ndarray:
        return np.array([time_average(self.trace, float(T)) for T in Ts])


def _plot_script(csv_name: str, x: str, ys, logx=False, logy=False, title="") -> str:
    return f'''"""Plot {csv_name}; generated alongside the data, not run by the tool."""
import csv
import sys

import matplotlib.pyplot as plt

with open("{csv_name}") as fh:
    rows = list(csv.DictReader(fh))
x = [float(r["{x}"]) for r in rows]
for col in {list(ys)!r}:
    plt.plot(x, [float(r[col]) for r in rows], label=col)
{"plt.xscale('log')" if logx else ""}
{"plt.yscale('log')" if logy else ""}
plt.xlabel("{x}")
plt.title("{title}")
plt.legend()
plt.savefig(sys.argv[1] if len(sys.argv) > 1 else "{csv_name[:-4]}.png", dpi=150)
'''


def _equilibrated(out: OutputSet, exp: Experiment):
    out.add_text(
        "EQUILIBRATED",
        "Q = 0: every amplitude rho_jk A_kj on a non-zero gap vanishes, so the expectation value "
        "is constant and already equal to its equilibrium value.\n",
    )


def run_spectrum(exp: Experiment):
    out = OutputSet()
    E = exp.decomp.energies
    Eb = exp.bath_decomp.energies
    out.add_csv("eigenvalues.csv", ["index", f"energy {ENERGY}"], [np.arange(E.size), E])
    out.add_csv("bath_eigenvalues.csv", ["index", f"energy {ENERGY}"], [np.arange(Eb.size), Eb])
    fits = {}
    for name, levels in (("bath", Eb), ("full", E)):
        try:
            f = fit_density_of_states(levels, n_bins=exp.cfg["analysis"]["dos_bins"])
            fits[name] = {
                "beta": f.beta,
                "norm_const": f.norm_const,
                "fit_window": list(f.fit_window),
                "residual": f.residual,
                "n_bins_used": f.n_bins_used,
                "n_bins_dropped": f.n_bins_dropped,
            }
        except InsufficientSpectralData as exc:
            fits[name] = {"error": str(exc)}
    out.add_json("dos_fit.json", {"model": exp.model.params, "dimension": exp.model.dim, "fits": fits})
    return out, {"dimension": exp.model.dim, "E_min": float(E[0]), "E_max": float(E[-1])}, 0


def run_gapdist(exp: Experiment):
    out = OutputSet()
    an = exp.cfg["analysis"]
    if an["mode"] == "binomial":
        with exp.stage("gap_distribution"):
            dist = binomial_distribution(an["n_bits"])
        eps = np.asarray(an["eps"] if an["eps"] is not None else np.arange(1, 2001), dtype=float)
        prof = xi_profile(dist, eps)
        out.add_csv("xi_profile.csv", ["eps", "xi", "a", "delta"], [prof.eps_grid, prof.xi_values, prof.a_values, prof.delta_values])
        out.add_text("plot_xi_profile.py", _plot_script("xi_profile.csv", "eps", ["a", "delta"], logx=True, title="binomial"))
        summary = {
            "mode": "binomial",
            "n_bits": an["n_bits"],
            "sigma": prof.sigma_G,
            "a_min": float(prof.a_values.min()),
            "a_max": float(prof.a_values.max()),
        }
        out.add_json("gapdist.json", summary)
        return out, summary, 0

    dist = exp.dist
    summary = {
        "mode": "hamiltonian",
        "Q": dist.Q,
        "Q_purity_bound": q_purity_bound(exp.rho0_eig, omega_rank(exp.rho0_eig)),
        "n_atoms": dist.n_atoms,
        "n_pairs": dist.n_pairs,
        "discarded_mass": dist.discarded_mass,
        "d_eff": effective_dimension(exp.rho0_eig),
        "provenance": exp.provenance(),
    }
    if dist.equilibrated:
        _equilibrated(out, exp)
        summary["equilibrated"] = True
        out.add_json("gapdist.json", summary)
        return out, summary, 0
    centers, probs, _ = histogram(dist, an["n_bins"])
    eps = None if an["eps"] is None else np.asarray(an["eps"], float)
    prof = xi_profile(dist, eps, an["n_eps"])
    summary.update(
        equilibrated=False,
        sigma_G=prof.sigma_G,
        local_maxima=count_local_maxima(probs),
    )
    out.add_csv("histogram.csv", [f"gap {ENERGY}", "probability"], [centers, probs])
    out.add_csv(
        "xi_profile.csv",
        [f"eps {ENERGY}", "xi", "a", "delta"],
        [prof.eps_grid, prof.xi_values, prof.a_values, prof.delta_values],
    )
    out.add_text("plot_histogram.py", _plot_script("histogram.csv", f"gap {ENERGY}", ["probability"], title=exp.model.description))
    out.add_text("plot_xi_profile.py", _plot_script("xi_profile.csv", f"eps {ENERGY}", ["a", "delta"], logx=True, title=exp.model.description))
    out.add_json("gapdist.json", summary)
    return out, summary, 0


def run_bound(exp: Experiment):
    out = OutputSet()
    Ts = exp.T_grid
    reports = []
    cols = {k: [] for k in ("eps", "T", "prop1", "sigma", "comm")}
    for eps in exp.eps_list():
        with exp.stage("bounds"):
            r = bound_report(exp.rho0_eig, exp.A_eig, exp.decomp, eps, Ts, exp.dist, exp.cfg["analysis"]["tight"], exp.provenance())
        reports.append(r.to_dict())
        cols["eps"] += [eps] * Ts.size
        cols["T"] += list(Ts)
        cols["prop1"] += list(r.proposition1_curve)
        cols["sigma"] += list(r.sigma_form_curve)
        cols["comm"] += list(r.commutator_form_curve)
    if exp.dist.equilibrated:
        _equilibrated(out, exp)
    out.add_json("bound.json", {"reports": reports})
    out.add_csv(
        "bound_curve.csv",
        [f"eps {ENERGY}", f"T {TIME}", "proposition1", "sigma_form", "commutator_form"],
        [cols[k] for k in ("eps", "T", "prop1", "sigma", "comm")],
    )
    out.add_text("plot_bound_curve.py", _plot_script("bound_curve.csv", f"T {TIME}", ["proposition1", "sigma_form", "commutator_form"], True, True))
    first = reports[0]
    summary = {k: first[k] for k in ("Q", "eps", "a", "delta", "T_eq", "sigma_spectral", "sigma_commutator", "commutator_value")}
    return out, summary, 0


def run_evolve(exp: Experiment):
    out = OutputSet()
    tr = exp.trace
    out.add_csv(
        "evolve_trace.csv",
        [f"t {TIME}", "expectation", "weak_dist", "running_avg"],
        [tr.times, tr.expectation, tr.weak_dist, tr.running_avg],
    )
    Ts = exp.T_grid
    exact = exp.exact_averages(Ts)
    header = [f"T {TIME}", "exact_avg", "proposition1"]
    columns = [Ts, exact, proposition1_bound(exp.dist, Ts, exp.cfg["analysis"]["tight"])]
    for i, eps in enumerate(exp.eps_list()):
        s, c = theorem3_bound(exp.dist, eps, Ts, exp.commutator, tight=exp.cfg["analysis"]["tight"])
        header += [f"sigma_form_eps{i}", f"commutator_form_eps{i}"]
        columns += [s, c]
    if exp.cfg["initial"]["bath_kind"] == "microcanonical" and exp.model.norm_HI() > 0:
        K = exp.cfg["analysis"]["K"]
        res = theorem4_bound(
            exp.model, exp.rho0, exp.window, K, exp.eps_list()[0], Ts, exp.A,
            rho_S=exp.rho_S, decomp=exp.decomp,
            use_truncated=exp.cfg["analysis"]["use_truncated_distribution"],
        )
        header.append("theorem4")
        columns.append(res.bound)
    violations = {h: int(np.count_nonzero(c < exact - BOUND_SLACK)) for h, c in zip(header[2:], columns[2:])}
    out.add_csv("evolve_bounds.csv", header, columns)
    out.add_text("plot_evolve_bounds.py", _plot_script("evolve_bounds.csv", f"T {TIME}", header[1:], True, True))
    summary = {"T": Ts.tolist(), "exact_avg": exact.tolist(), "violations": violations, "grid_points": int(tr.times.size)}
    out.add_json("evolve.json", summary)
    return out, summary, 0


def run_truncate(exp: Experiment):
    if exp.cfg["initial"]["bath_kind"] != "microcanonical":
        raise ConfigError("initial.bath_kind: truncate needs a 'microcanonical' bath")
    out = OutputSet()
    an = exp.cfg["analysis"]
    fit_info = None
    try:
        fit = fit_density_of_states(exp.bath_decomp, n_bins=an["dos_bins"])
    except InsufficientSpectralData as exc:
        fit, fit_info = None, str(exc)
    with exp.stage("truncate"):
        rep = truncate(exp.model, exp.rho0, exp.window, an["K"], exp.A, fit, exp.rho_S, exp.decomp, exp.rho0_eig)
    Ts = exp.T_grid
    res = theorem4_bound(
        exp.model, exp.rho0, exp.window, an["K"], exp.eps_list()[0], Ts, exp.A,
        fit, exp.rho_S, exp.decomp, rep, an["use_truncated_distribution"],
    )
    exact = exp.exact_averages(Ts)
    out.add_csv(
        "theorem4.csv",
        [f"T {TIME}", "exact_avg", "bound_exact_Q", "bound_purity_route", "bound_count_route", "bound_thermal_route"],
        [Ts, exact, res.bound, res.bound_purity_route, res.bound_count_route, res.bound_thermal_route],
    )
    times = np.linspace(0, float(Ts.max()), 50)
    close = truncated_closeness(rep, exp.rho0_eig, exp.A_eig, exp.decomp, times)
    out.add_csv("truncated_closeness.csv", [f"t {TIME}", "weak_dist_truncated", "limit_1_over_K2"], [times, close, np.full(times.size, 1 / an["K"] ** 2)])
    report = res.to_dict()
    report["window"] = exp.window.to_dict()
    report["dos_fit_error"] = fit_info
    out.add_json("truncation.json", report)
    summary = {
        "precondition_holds": rep.precondition_holds,
        "leakage": rep.leakage,
        "trace_dist": rep.trace_dist,
        "d_trunc_exact": rep.d_trunc_exact,
        "d_trunc_count_bound": rep.d_trunc_count_bound,
        "Q2": rep.Q2,
        "violations": int(np.count_nonzero(res.bound < exact - BOUND_SLACK)),
    }
    status = 0 if rep.precondition_holds else 3
    return out, summary, status


def run_typicality(exp: Experiment):
    out = OutputSet()
    an = exp.cfg["analysis"]
    workers = exp.cfg["parallelism"]["workers"]
    with exp.stage("typicality"):
        rep = haar_typicality(
            exp.model, exp.window, an["n_samples"], exp.seed, float(exp.T_grid.max()), exp.rho_S, exp.A_S,
            n_times=an["n_times"], workers=workers, decomp=exp.decomp, bath_decomp=exp.bath_decomp,
        )
    out.add_csv(
        "typicality_curve.csv",
        [f"t {TIME}", "mc_mean", "mc_stderr", "microcanonical", "bound"],
        [rep.times, rep.mean_curve, rep.stderr_curve, rep.reference_curve, rep.bound_curve],
    )
    out.add_csv("typicality_samples.csv", ["sample", "time_avg"], [np.arange(rep.n_samples), rep.per_sample_avg])
    out.add_text("plot_typicality.py", _plot_script("typicality_curve.csv", f"t {TIME}", ["mc_mean", "microcanonical", "bound"]))
    summary = {
        "n_samples": rep.n_samples,
        "seed": rep.seed,
        "d_B_window": rep.d_B_window,
        "correction": rep.correction,
        "mc_mean": rep.mc_mean,
        "mc_stderr": rep.mc_stderr,
        "reference_avg": rep.reference_avg,
        "violations": rep.violations,
        "window": list(rep.window),
    }
    out.add_json("typicality.json", summary)
    return out, summary, 0


COMMANDS = {
    "spectrum": run_spectrum,
    "gapdist": run_gapdist,
    "bound": run_bound,
    "evolve": run_evolve,
    "truncate": run_truncate,
    "typicality": run_typicality,
}


def run_command(name: str, cfg: dict):
    exp = Experiment(cfg)
    out, summary, status = COMMANDS[name](exp)
    return out, summary, status, exp


def _aggregate_rows(exp: Experiment, markers):
    dist = exp.dist
    rows = []
    exact = exp.exact_averages(markers) if len(markers) and not dist.equilibrated else np.zeros(len(markers))
    for eps in exp.eps_list():
        if dist.equilibrated:
            a = delta = T_e = 0.0
        else:
            a, delta = a_delta(dist, eps)
            try:
                T_e = t_eq(a, dist.norm_A, dist.Q, exp.commutator)
            except ValueError:
                T_e = float("inf")
        rows.append([eps, a, delta, dist.Q, T_e, *exact])
    return rows


def run_sweep(cfg: dict, workers: int = 1):
    """Run ``cfg['command']`` at every sweep point and aggregate a, delta, Q and T_eq."""
    points = sweep_points(cfg)
    keys = list(cfg["sweep"])
    markers = [float(m) for m in cfg["analysis"]["T_markers"]]
    command = cfg["command"]

    def one(item):
        idx, (assignment, point_cfg) = item
        try:
            out, summary, status, exp = run_command(command, point_cfg)
            rows = _aggregate_rows(exp, markers)
            return idx, assignment, out, summary, status, rows, None
        except Exception as exc:  # recorded per point; other points continue
            return idx, assignment, None, None, None, [], f"{type(exc).__name__}: {exc}"

    items = list(enumerate(points))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(one, items))
    else:
        results = [one(it) for it in items]
    results.sort(key=lambda r: r[0])

    out = OutputSet()
    header = ["point", *keys, f"eps {ENERGY}", "a", "delta", "Q", f"T_eq {TIME}", *[f"exact_avg_T{m:g}" for m in markers]]
    table = []
    failures = []
    statuses = []
    for idx, assignment, sub, summary, status, rows, err in results:
        if err is not None:
            failures.append({"point": idx, "assignment": assignment, "error": err})
            continue
        statuses.append(status)
        out.merge(sub, f"point_{idx:04d}")
        for r in rows:
            table.append([idx, *[assignment[k] for k in keys], *r])
    cols = [list(c) for c in zip(*table)] if table else [[] for _ in header]
    out.add_csv("aggregate.csv", header, cols)
    if "model.seed" in keys and table:
        out.add_csv(*_seed_statistics(table, keys))
    out.add_text("plot_aggregate.py", _plot_script("aggregate.csv", f"eps {ENERGY}", ["a", "delta"], logx=True))
    summary = {"n_points": len(points), "failures": failures, "keys": keys}
    status = 0
    if failures:
        status = 4
    elif any(s == 3 for s in statuses):
        status = 3
    return out, summary, status


def _seed_statistics(table, keys):
    """Mean and standard deviation of a and delta over seeds, per other key and eps."""
    seed_col = 1 + keys.index("model.seed")
    others = [i for i in range(1, 1 + len(keys)) if i != seed_col]
    eps_col = 1 + len(keys)
    groups = {}
    for row in table:
        gk = tuple(row[i] for i in others) + (row[eps_col],)
        groups.setdefault(gk, []).append((row[eps_col + 1], row[eps_col + 2]))
    header = [*[keys[i - 1] for i in others], f"eps {ENERGY}", "n_seeds", "a_mean", "a_std", "delta_mean", "delta_std"]
    rows = []
    for gk in sorted(groups):
        vals = np.array(groups[gk])
        ddof = 1 if len(vals) > 1 else 0
        rows.append([*gk, len(vals), vals[:, 0].mean(), vals[:, 0].std(ddof=ddof), vals[:, 1].mean(), vals[:, 1].std(ddof=ddof)])
    return "aggregate_seed_stats.csv", header, [list(c) for c in zip(*rows)]


def manifest(command: str, cfg: dict, out: OutputSet, summary: dict, status: int, stages: dict) -> dict:
    return {
        "tool": "eqtime",
        "version": __version__,
        "command": command,
        "status": status,
        "config": cfg,
        "seeds": {"master": cfg["seed"], "model": cfg["model"]["seed"], "initial": cfg["initial"]["seed"]},
        "tolerances": {
            "degeneracy_rtol": DEGENERACY_RTOL,
            "gap_agg_rtol": GAP_AGG_RTOL,
            "amplitude_floor": AMPLITUDE_FLOOR,
            "bound_slack": BOUND_SLACK,
        },
        "stages_seconds": stages,
        "summary": summary,
        "files": out.inventory(),
    }
