"""Figure reproduction and generic parameter sweeps with CSV + JSON manifest output.

Independent integrations (one per rate set and initial state, one per
microwave drive strength) are fanned out to a process pool; results are
gathered by task index, so output bytes never depend on completion order.
"""

from __future__ import annotations

import csv
import itertools
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Callable, Iterable, Sequence

import numpy as np

from . import __version__
from .config import SWEEP_AXES, RunConfig, echo_config
from .lindblad import IntegratorConfig, StateValidity
from .model import RateSet
from .protocol import ReadoutCurves, branch_emission, curves_from_branches, simulate_pi_pulse
from .statistics import fidelity_from_means, fidelity_map, min_efficiency_single_shot, single_shot_region
from .units import rad_per_ns_to_hz

FIGURE_IDS = ("2a", "2b", "2c", "2d", "3a", "3b", "4a", "4b")

FIGURE_COLUMNS = {
    "2a": ["t_readout_ns", "N_E_T", "N_E_S", "N_B"],
    "2b": ["eta", "t_readout_ns", "threshold", "lambda_T", "lambda_S", "fidelity", "p_false_negative", "p_false_positive"],
    "2c": ["eta", "t_readout_ns", "threshold", "lambda_T", "lambda_S", "fidelity", "p_false_negative", "p_false_positive"],
    "2d": ["eta", "threshold", "max_fidelity", "t_readout_ns"],
    "3a": ["eta", "t_readout_ns", "max_fidelity", "best_threshold", "single_shot"],
    "3b": ["gamma_F_MHz", "eta_min", "eta_lower", "fidelity_at_min", "t_readout_ns", "threshold"],
    "4a": ["omega_MW_MHz", "time_ns", "transfer_population"],
    "4b": ["omega_MW_MHz", "transfer_probability", "t_first_max_ns"],
}

SWEEP_COLUMNS = [
    "gamma_F_MHz",
    "omega_MW_MHz",
    "t_readout_ns",
    "eta",
    "N_E_T",
    "N_E_S",
    "N_B",
    "lambda_T",
    "lambda_S",
    "threshold",
    "fidelity",
    "p_false_negative",
    "p_false_positive",
    "transfer_probability",
    "total_fidelity",
    "status",
]


class RunFailed(RuntimeError):
    """A figure run aborted; ``manifest`` records the failing point."""

    def __init__(self, message: str, manifest: "ResultManifest"):
        super().__init__(message)
        self.manifest = manifest


@dataclass
class Artifact:
    path: str
    columns: list[str]
    rows: int


@dataclass
class ResultManifest:
    run: str
    config: dict[str, Any]
    artifacts: list[Artifact] = field(default_factory=list)
    version: str = __version__
    status: str = "ok"
    failures: list[dict[str, Any]] = field(default_factory=list)
    state_validity: dict[str, Any] = field(default_factory=dict)
    duration_s: float = 0.0

    def to_dict(self) -> dict[str, Any]:
        """Deterministic content; wall-clock time lives in the separate timing file."""
        doc = asdict(self)
        doc.pop("duration_s")
        doc["tool"] = "qdmro"
        return doc

    def write(self, out_dir: Path, stem: str) -> Path:
        out_dir.mkdir(parents=True, exist_ok=True)
        path = out_dir / f"{stem}_manifest.json"
        path.write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
        timing = out_dir / f"{stem}_timing.json"
        timing.write_text(json.dumps({"run": self.run, "duration_s": self.duration_s}) + "\n", encoding="utf-8")
        return path


def format_value(value: Any) -> str:
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    return str(value)


def write_csv(path: Path, columns: Sequence[str], rows: Iterable[Sequence[Any]]) -> int:
    path.parent.mkdir(parents=True, exist_ok=True)
    n = 0
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            if len(row) != len(columns):
                raise ValueError(f"{path.name}: row has {len(row)} fields, header has {len(columns)}")
            writer.writerow([format_value(v) for v in row])
            n += 1
    return n


def read_csv_header(path: Path) -> list[str]:
    with path.open(newline="", encoding="utf-8") as fh:
        return next(csv.reader(fh))


# -- task execution ---------------------------------------------------------


def _guarded(fn: Callable, args: tuple) -> tuple[str, Any]:
    try:
        return "ok", fn(*args)
    except Exception as exc:  # reported per task, never swallowed silently
        return "error", f"{type(exc).__name__}: {exc}"


def run_tasks(fn: Callable, arg_list: Sequence[tuple], workers: int) -> list[tuple[str, Any]]:
    """Apply ``fn`` to each argument tuple; results come back in input order."""
    if workers <= 1 or len(arg_list) <= 1:
        return [_guarded(fn, args) for args in arg_list]
    with ProcessPoolExecutor(max_workers=min(workers, len(arg_list))) as pool:
        return list(pool.map(_guarded, itertools.repeat(fn), arg_list))


def _branch_task(rates: RateSet, initial: str, t_grid: np.ndarray, cfg: IntegratorConfig):
    return branch_emission(rates, initial, t_grid, cfg)


def _pi_task(rates: RateSet, cfg: IntegratorConfig, n_samples: int):
    res = simulate_pi_pulse(rates, cfg, n_samples=n_samples)
    validity = res.trajectory.validity() if res.trajectory is not None else StateValidity()
    return res.transfer_probability, res.t_first_max, res.times, res.probability, validity


class _Batch:
    """Deduplicated task list with keyed lookup of results."""

    def __init__(self):
        self.keys: list[Any] = []
        self.args: list[tuple] = []

    def add(self, key, args: tuple) -> None:
        if key not in self.keys:
            self.keys.append(key)
            self.args.append(args)

    def run(self, fn: Callable, workers: int) -> dict[Any, tuple[str, Any]]:
        return dict(zip(self.keys, run_tasks(fn, self.args, workers)))


def _mhz(rate: float) -> float:
    # 12 digits hides the 2*pi round trip (1000.0000000000002 -> 1000)
    return float(format(rad_per_ns_to_hz(rate) / 1e6, ".12g"))


# -- figures ----------------------------------------------------------------


def run_figures(
    ids: Sequence[str],
    cfg: RunConfig,
    out_dir: str | Path | None = None,
    workers: int | None = None,
) -> dict[str, ResultManifest]:
    """Compute the requested figure panels, sharing integrations between them."""
    unknown = [i for i in ids if i not in FIGURE_IDS]
    if unknown:
        raise ValueError(f"unknown figure id(s) {unknown}; choose from {', '.join(FIGURE_IDS)}")
    start = time.perf_counter()
    out = Path(out_dir if out_dir is not None else cfg.output_dir)
    workers = workers or cfg.workers
    echo = echo_config(cfg)
    t_grid = cfg.grids["t_readout"].points()
    etas = cfg.grids["eta"].points()

    branches = _Batch()
    needs_base = any(i in ("2a", "2b", "2c", "2d", "3a") for i in ids)
    gamma_F_values = cfg.grids["gamma_F"].points() if "3b" in ids else np.array([])
    rate_sets = ([cfg.rates] if needs_base else []) + [cfg.rates.replace(gamma_F=float(g)) for g in gamma_F_values]
    for rates in rate_sets:
        for initial in ("T0", "S"):
            branches.add((rates.gamma_F, initial), (rates, initial, t_grid, cfg.integrator))

    pis = _Batch()
    omegas = cfg.grids["omega_MW"].points() if any(i in ("4a", "4b") for i in ids) else np.array([])
    for w in omegas:
        pis.add(float(w), (cfg.rates.replace(omega_MW=float(w)), cfg.integrator, cfg.figures.pi_pulse_samples))

    branch_results = branches.run(_branch_task, workers)
    pi_results = pis.run(_pi_task, workers)

    def curves_for(rates: RateSet) -> ReadoutCurves:
        res_T = branch_results[(rates.gamma_F, "T0")]
        res_S = branch_results[(rates.gamma_F, "S")]
        for initial, res in (("T0", res_T), ("S", res_S)):
            if res[0] != "ok":
                raise _PointError({"gamma_F_MHz": _mhz(rates.gamma_F), "initial": initial, "error": res[1]})
        return curves_from_branches(cfg.protocol_params(rates=rates), t_grid, res_T[1], res_S[1])

    manifests: dict[str, ResultManifest] = {}
    for fig in ids:
        manifest = ResultManifest(run=f"figure {fig}", config=echo)
        csv_path = out / f"fig{fig}.csv"
        try:
            rows, validity = _figure_rows(fig, cfg, t_grid, etas, curves_for, gamma_F_values, omegas, pi_results)
        except _PointError as exc:
            manifest.status = "failed"
            manifest.failures.append(exc.point)
            manifest.duration_s = time.perf_counter() - start
            manifest.write(out, f"fig{fig}")
            raise RunFailed(f"figure {fig} failed at {exc.point}", manifest) from None
        n = write_csv(csv_path, FIGURE_COLUMNS[fig], rows)
        manifest.artifacts.append(Artifact(csv_path.name, FIGURE_COLUMNS[fig], n))
        manifest.state_validity = validity.as_dict()
        manifest.duration_s = time.perf_counter() - start
        manifest.write(out, f"fig{fig}")
        manifests[fig] = manifest
    return manifests


def run_figure(fig: str, cfg: RunConfig, out_dir: str | Path | None = None, workers: int | None = None) -> ResultManifest:
    return run_figures([fig], cfg, out_dir, workers)[fig]


class _PointError(Exception):
    def __init__(self, point: dict[str, Any]):
        super().__init__(str(point))
        self.point = point


def _figure_rows(fig, cfg: RunConfig, t_grid, etas, curves_for, gamma_F_values, omegas, pi_results):
    if fig in ("2a", "2b", "2c", "2d", "3a"):
        curves = curves_for(cfg.rates)
        validity = curves.validity
        if fig == "2a":
            rows = list(zip(t_grid, curves.n_emitted_T, curves.n_emitted_S, curves.n_background))
        elif fig in ("2b", "2c"):
            n_t = cfg.figures.fig2b_threshold if fig == "2b" else cfg.figures.fig2c_threshold
            fmap = fidelity_map(t_grid, etas, curves, n_t)
            rows = [
                (eta, t, int(fmap.threshold[i, j]), fmap.lambda_T[i, j], fmap.lambda_S[i, j], fmap.fidelity[i, j],
                 fmap.p_false_negative[i, j], fmap.p_false_positive[i, j])
                for i, eta in enumerate(etas)
                for j, t in enumerate(t_grid)
            ]
        elif fig == "2d":
            rows = []
            for eta in cfg.figures.fig2d_efficiencies:
                lam_T, lam_S = curves.lambdas(eta)
                for n_t in cfg.thresholds:
                    f = fidelity_from_means(lam_T, lam_S, n_t)[0]
                    j = int(np.argmax(f))
                    rows.append((eta, n_t, f[j], t_grid[j]))
        else:
            fmap = fidelity_map(t_grid, etas, curves, cfg.thresholds)
            mask = single_shot_region(fmap)
            rows = [
                (eta, t, fmap.fidelity[i, j], int(fmap.threshold[i, j]), bool(mask[i, j]))
                for i, eta in enumerate(etas)
                for j, t in enumerate(t_grid)
            ]
        return rows, validity

    if fig == "3b":
        rows = []
        validity = StateValidity()
        for g in gamma_F_values:
            curves = curves_for(cfg.rates.replace(gamma_F=float(g)))
            validity = validity.merge(curves.validity)
            try:
                res = min_efficiency_single_shot(curves, cfg.figures.eta_min_bounds, cfg.thresholds)
            except ValueError as exc:
                raise _PointError({"gamma_F_MHz": _mhz(g), "error": str(exc)}) from None
            rows.append((_mhz(g), res.eta_min, res.eta_lower, res.fidelity_at_min, res.t_readout, res.threshold))
        return rows, validity

    rows = []
    validity = StateValidity()
    for w in omegas:
        status, res = pi_results[float(w)]
        if status != "ok":
            raise _PointError({"omega_MW_MHz": _mhz(w), "error": res})
        p, t_max, times, prob, v = res
        validity = validity.merge(v)
        if fig == "4a":
            rows.extend((_mhz(w), t, pt) for t, pt in zip(times, prob))
        else:
            rows.append((_mhz(w), p, t_max))
    return rows, validity


# -- generic sweep ----------------------------------------------------------


@dataclass
class SweepResult:
    manifest: ResultManifest
    rows: list[tuple]
    failed_points: int


def sweep_axes(cfg: RunConfig) -> dict[str, np.ndarray]:
    """Axis values in lexicographic (outermost first) order; unswept axes hold the base value."""
    base = {
        "gamma_F": np.array([cfg.rates.gamma_F]),
        "omega_MW": np.array([cfg.rates.omega_MW]),
        "t_readout": np.array([cfg.protocol.t_readout]),
        "eta": np.array([cfg.eta]),
    }
    return {name: (cfg.sweep[name].points() if name in cfg.sweep else base[name]) for name in SWEEP_AXES}


def run_sweep(cfg: RunConfig, out_dir: str | Path | None = None, workers: int | None = None) -> SweepResult:
    """Evaluate the full protocol on the Cartesian product of the sweep axes.

    Each point reports its best threshold from ``cfg.thresholds`` and the
    total fidelity including the finite-Rabi pi-pulse. Failed points are
    kept as rows with an error status.
    """
    start = time.perf_counter()
    out = Path(out_dir if out_dir is not None else cfg.output_dir)
    workers = workers or cfg.workers
    axes = sweep_axes(cfg)
    t_grid = np.unique(axes["t_readout"])
    if np.any(t_grid <= 0):
        raise ValueError("sweep durations must be > 0")

    branches = _Batch()
    pis = _Batch()
    for g in axes["gamma_F"]:
        rates = cfg.rates.replace(gamma_F=float(g))
        for initial in ("T0", "S"):
            branches.add((float(g), initial), (rates, initial, t_grid, cfg.integrator))
        for w in axes["omega_MW"]:
            pis.add((float(g), float(w)), (rates.replace(omega_MW=float(w)), cfg.integrator, cfg.figures.pi_pulse_samples))
    branch_results = branches.run(_branch_task, workers)
    pi_results = pis.run(_pi_task, workers)

    rows: list[tuple] = []
    failures: list[dict[str, Any]] = []
    validity = StateValidity()
    curves_cache: dict[float, ReadoutCurves | str] = {}
    for g in axes["gamma_F"]:
        g = float(g)
        res_T, res_S = branch_results[(g, "T0")], branch_results[(g, "S")]
        if res_T[0] == "ok" and res_S[0] == "ok":
            params = cfg.protocol_params(rates=cfg.rates.replace(gamma_F=g))
            curves_cache[g] = curves_from_branches(params, t_grid, res_T[1], res_S[1])
            validity = validity.merge(curves_cache[g].validity)
        else:
            curves_cache[g] = res_T[1] if res_T[0] != "ok" else res_S[1]
        for w in axes["omega_MW"]:
            status, pi = pi_results[(g, float(w))]
            if status == "ok":
                validity = validity.merge(pi[4])

    nan = math.nan
    for g, w, t, eta in itertools.product(*(axes[name] for name in SWEEP_AXES)):
        g, w, t, eta = float(g), float(w), float(t), float(eta)
        point = {"gamma_F_MHz": _mhz(g), "omega_MW_MHz": _mhz(w), "t_readout_ns": t, "eta": eta}
        curves = curves_cache[g]
        status_pi, pi = pi_results[(g, w)]
        errors = []
        if isinstance(curves, str):
            errors.append(curves)
            budget_vals = [nan] * 5
            stats_vals = [0, nan, nan, nan]
            fidelity = nan
        else:
            j = int(np.searchsorted(t_grid, t))
            budget = curves.budget(j, eta)
            f, p_fn, p_fp, n_t = fidelity_from_means(budget.lambda_T, budget.lambda_S, cfg.thresholds)
            fidelity = float(f)
            budget_vals = [budget.n_emitted_T, budget.n_emitted_S, budget.n_background, budget.lambda_T, budget.lambda_S]
            stats_vals = [int(n_t), fidelity, float(p_fn), float(p_fp)]
        if status_pi == "ok":
            transfer = pi[0]
            total = fidelity * transfer if not math.isnan(fidelity) else nan
        else:
            errors.append(pi)
            transfer = total = nan
        status = "ok" if not errors else "error: " + "; ".join(errors)
        if errors:
            failures.append({**point, "error": "; ".join(errors)})
        rows.append((point["gamma_F_MHz"], point["omega_MW_MHz"], t, eta, *budget_vals, *stats_vals, transfer, total, status))

    csv_path = out / "sweep.csv"
    n = write_csv(csv_path, SWEEP_COLUMNS, rows)
    manifest = ResultManifest(
        run="sweep",
        config=echo_config(cfg),
        artifacts=[Artifact(csv_path.name, SWEEP_COLUMNS, n)],
        status="ok" if not failures else "partial",
        failures=failures,
        state_validity=validity.as_dict(),
        duration_s=time.perf_counter() - start,
    )
    manifest.write(out, "sweep")
    return SweepResult(manifest, rows, len(failures))
