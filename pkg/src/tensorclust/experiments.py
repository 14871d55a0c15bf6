"""Seeded, reproducible experiment runners and their CSV/JSON outputs.

Every runner returns (details, summary) row lists and, when an output
directory is configured, writes them as CSV with a header row.  CSV
content is a pure function of (config, seeds); wall-clock timings go to a
separate metrics JSON so reruns produce byte-identical CSV files.
"""

import csv
import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .baselines import baseline_kmeans, baseline_trr
from .clustering import affinity_from_z, choose_k, clustering_accuracy, spectral_cluster
from .linalg import solve_spd
from .model import Hyperparams, fit
from .simulate import SimConfig, generate
from .tensor_ops import unfold
from .tensorfile import read_tensor
from .tuning import GridSpec, grid_search, select_lambda_a

EXPERIMENT_KINDS = (
    "benchmark-sweep",
    "anomaly-ablation",
    "dimred-sweep",
    "tuning-grid",
    "fit-single",
)

_TABLE3_PSI = (4.0, 5.0, 6.0, 7.0, 8.0)
_TABLE3_RATIOS = (0.05, 0.1, 0.125, 0.15, 0.175, 0.2, 0.225)


class ExperimentError(RuntimeError):
    pass


@dataclass
class ExperimentConfig:
    kind: str
    sim: SimConfig = field(default_factory=SimConfig)
    input_path: Optional[str] = None
    grid: Optional[GridSpec] = None
    replications: int = 20
    k: int = 3
    seed: int = 0
    psi_values: tuple = _TABLE3_PSI
    ratio_values: tuple = _TABLE3_RATIOS
    methods: tuple = ("lrtsd", "kmeans", "trr")
    trr_lambda_values: tuple = (1e-5, 1e-4, 1e-3)
    trr_keep: Optional[int] = None          # default 3*k
    lambda_z: float = 1e-3                  # single-fit / ablation / dimred fits
    lambda_e: float = 1.0
    lambda_a: Optional[float] = None        # None -> Otsu-selected from a warm start
    dimred_ranks: tuple = (50, 25, 15, 12, 10, 5)
    max_sweeps: int = 100
    rel_tol: float = 1e-6
    output_dir: Optional[str] = None
    jobs: int = 1

    def __post_init__(self):
        if self.kind not in EXPERIMENT_KINDS:
            raise ValueError(f"unknown experiment kind {self.kind!r}")
        if self.replications < 1:
            raise ValueError("replications must be >= 1")
        if self.grid is None:
            p = self.sim.k_clusters * min(self.sim.intrinsic_dims)
            p2 = min(p, self.sim.ambient_dims[0])
            p3 = min(p, self.sim.ambient_dims[1])
            self.grid = GridSpec(
                lambda_z_values=(1e-4, 1e-3),
                lambda_e_values=(1.0,),
                lambda_a_values=(2.0, 4.0),
                p2=p2,
                p3=p3,
                seed=self.seed,
                max_sweeps=self.max_sweeps,
                rel_tol=self.rel_tol,
            )

    @classmethod
    def from_dict(cls, raw):
        raw = dict(raw)
        kind = raw.pop("kind", None)
        if kind is None:
            raise ValueError("config is missing 'kind'")
        sim = SimConfig(**{k: tuple(v) if isinstance(v, list) else v
                           for k, v in raw.pop("sim", {}).items()})
        grid_raw = raw.pop("grid", None)
        grid = None
        if grid_raw is not None:
            grid_raw = {k: tuple(v) if isinstance(v, list) else v for k, v in grid_raw.items()}
            grid = GridSpec(**grid_raw)
        trr_raw = raw.pop("trr", {})
        if "lambda_values" in trr_raw:
            raw["trr_lambda_values"] = tuple(trr_raw["lambda_values"])
        if "keep" in trr_raw:
            raw["trr_keep"] = trr_raw["keep"]
        for key in ("psi_values", "ratio_values", "methods", "dimred_ranks"):
            if key in raw and isinstance(raw[key], list):
                raw[key] = tuple(raw[key])
        return cls(kind=kind, sim=sim, grid=grid, **raw)


def load_config(path):
    with open(path) as fh:
        return ExperimentConfig.from_dict(json.load(fh))


def _fmt(value):
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return str(float(value))
    return str(value)


def write_csv(path, rows, columns):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_fmt(row.get(c)) for c in columns])


def _parallel(jobs, func, items):
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(func, items))
    return [func(item) for item in items]


def _sim_for_cell(cfg, psi, ratio, rep):
    base = asdict(cfg.sim)
    base["anomaly_intensity"] = psi
    base["anomaly_ratio"] = ratio
    base["seed"] = cfg.seed + rep
    base["keep_clean"] = False
    for key in ("ambient_dims", "intrinsic_dims"):
        base[key] = tuple(base[key])
    return SimConfig(**base)


def _lrtsd_accuracy(x, truth, lz, le, la, grid, k, seed, timings):
    h = Hyperparams(
        lambda_z=lz, lambda_a=la, lambda_e=le,
        p2=grid.p2, p3=grid.p3, max_sweeps=grid.max_sweeps, rel_tol=grid.rel_tol,
    )
    t0 = time.perf_counter()
    state = fit(x, h)
    timings.append(time.perf_counter() - t0)
    result = spectral_cluster(affinity_from_z(state.z), k, seed)
    return clustering_accuracy(result.labels, truth)


def run_benchmark_sweep(cfg):
    """Accuracy of each method per (psi, ratio) cell, mean/std over seeds.

    Tuned methods (lrtsd over its lambda grid, trr over its lambda list)
    report the grid point with the best mean accuracy, mirroring a grid
    search that keeps the best clustering per setting."""
    grid = cfg.grid
    keep = cfg.trr_keep if cfg.trr_keep is not None else 3 * cfg.k
    details, summary = [], []
    timings = []

    for psi in cfg.psi_values:
        for ratio in cfg.ratio_values:
            datasets = [
                generate(_sim_for_cell(cfg, psi, ratio, rep)) for rep in range(cfg.replications)
            ]

            def cell_rows(method, params, accs, errors=None):
                rows = []
                for rep, acc in enumerate(accs):
                    rows.append({
                        "psi": psi, "ratio": ratio, "method": method,
                        "lambda_z": params.get("lambda_z"),
                        "lambda_e": params.get("lambda_e"),
                        "lambda_a": params.get("lambda_a"),
                        "trr_lambda": params.get("trr_lambda"),
                        "keep": params.get("keep"),
                        "p2": params.get("p2"), "p3": params.get("p3"),
                        "seed": cfg.seed + rep, "rep": rep,
                        "accuracy": acc,
                        "error": None if errors is None else errors[rep],
                        "selected": params.get("selected", True),
                    })
                return rows

            if "kmeans" in cfg.methods:
                accs, errs = [], []
                for rep, data in enumerate(datasets):
                    try:
                        labels = baseline_kmeans(data.x, cfg.k, cfg.seed + rep)
                        accs.append(clustering_accuracy(labels, data.truth_labels))
                        errs.append(None)
                    except Exception as exc:
                        accs.append(None)
                        errs.append(f"{type(exc).__name__}: {exc}")
                details.extend(cell_rows("kmeans", {}, accs, errs))
                valid = [a for a in accs if a is not None]
                summary.append(_summary_row(psi, ratio, "kmeans", {}, valid, cfg))

            if "trr" in cfg.methods:
                best = None
                all_rows = []
                for lam in cfg.trr_lambda_values:
                    accs, errs = [], []
                    for rep, data in enumerate(datasets):
                        try:
                            labels = baseline_trr(data.x, cfg.k, lam, keep, cfg.seed + rep)
                            accs.append(clustering_accuracy(labels, data.truth_labels))
                            errs.append(None)
                        except Exception as exc:
                            accs.append(None)
                            errs.append(f"{type(exc).__name__}: {exc}")
                    valid = [a for a in accs if a is not None]
                    mean = float(np.mean(valid)) if valid else -1.0
                    params = {"trr_lambda": lam, "keep": keep, "selected": False}
                    all_rows.append((lam, mean, cell_rows("trr", params, accs, errs), valid))
                    if best is None or mean > best[1]:
                        best = (lam, mean, valid)
                for lam, _, rows, _ in all_rows:
                    if lam == best[0]:
                        for row in rows:
                            row["selected"] = True
                    details.extend(rows)
                summary.append(_summary_row(
                    psi, ratio, "trr", {"trr_lambda": best[0], "keep": keep}, best[2], cfg
                ))

            if "lrtsd" in cfg.methods:
                def eval_point(coords):
                    lz, le, la = coords
                    accs, errs = [], []
                    for rep, data in enumerate(datasets):
                        try:
                            acc = _lrtsd_accuracy(
                                data.x, data.truth_labels, lz, le, la,
                                grid, cfg.k, cfg.seed + rep, timings,
                            )
                            accs.append(acc)
                            errs.append(None)
                        except Exception as exc:
                            accs.append(None)
                            errs.append(f"{type(exc).__name__}: {exc}")
                    return coords, accs, errs

                results = _parallel(cfg.jobs, eval_point, grid.cells())
                best = None
                for coords, accs, errs in results:
                    valid = [a for a in accs if a is not None]
                    mean = float(np.mean(valid)) if valid else -1.0
                    if best is None or mean > best[1]:
                        best = (coords, mean, valid)
                for coords, accs, errs in results:
                    lz, le, la = coords
                    params = {
                        "lambda_z": lz, "lambda_e": le, "lambda_a": la,
                        "p2": grid.p2, "p3": grid.p3,
                        "selected": coords == best[0],
                    }
                    details.extend(cell_rows("lrtsd", params, accs, errs))
                lz, le, la = best[0]
                summary.append(_summary_row(
                    psi, ratio, "lrtsd",
                    {"lambda_z": lz, "lambda_e": le, "lambda_a": la,
                     "p2": grid.p2, "p3": grid.p3},
                    best[2], cfg,
                ))

    _emit(cfg, "benchmark", details, summary, timings)
    return details, summary


def _summary_row(psi, ratio, method, params, accs, cfg):
    row = {
        "psi": psi, "ratio": ratio, "method": method,
        "lambda_z": params.get("lambda_z"),
        "lambda_e": params.get("lambda_e"),
        "lambda_a": params.get("lambda_a"),
        "trr_lambda": params.get("trr_lambda"),
        "keep": params.get("keep"),
        "p2": params.get("p2"), "p3": params.get("p3"),
        "seed": cfg.seed, "replications": cfg.replications,
        "failures": cfg.replications - len(accs),
    }
    if accs:
        row["mean_accuracy"] = float(np.mean(accs))
        row["std_accuracy"] = float(np.std(accs, ddof=1)) if len(accs) > 1 else 0.0
    else:
        row["mean_accuracy"] = None
        row["std_accuracy"] = None
    return row


_DETAIL_COLUMNS = [
    "psi", "ratio", "method", "lambda_z", "lambda_e", "lambda_a", "trr_lambda",
    "keep", "p2", "p3", "seed", "rep", "accuracy", "error", "selected",
]
_SUMMARY_COLUMNS = [
    "psi", "ratio", "method", "lambda_z", "lambda_e", "lambda_a", "trr_lambda",
    "keep", "p2", "p3", "seed", "replications", "failures",
    "mean_accuracy", "std_accuracy",
]


def run_anomaly_ablation(cfg):
    """Paired accuracy difference, anomaly term on vs off, on shared data.

    The control fit (anomaly pinned at zero) doubles as the warm start for
    Otsu selection of lambda_a in the treatment fit."""
    grid = cfg.grid
    details, summary = [], []
    timings = []
    for psi in cfg.psi_values:
        for ratio in cfg.ratio_values:
            def eval_rep(rep):
                data = generate(_sim_for_cell(cfg, psi, ratio, rep))
                h_off = Hyperparams(
                    lambda_z=cfg.lambda_z, lambda_a=1.0, lambda_e=cfg.lambda_e,
                    p2=grid.p2, p3=grid.p3, max_sweeps=cfg.max_sweeps,
                    rel_tol=cfg.rel_tol, anomaly_enabled=False,
                )
                t0 = time.perf_counter()
                control = fit(data.x, h_off)
                if cfg.lambda_a is not None:
                    lam_a = cfg.lambda_a
                else:
                    lam_a = select_lambda_a(data.x, control.model, cfg.lambda_e)
                h_on = Hyperparams(
                    lambda_z=cfg.lambda_z, lambda_a=lam_a, lambda_e=cfg.lambda_e,
                    p2=grid.p2, p3=grid.p3, max_sweeps=cfg.max_sweeps, rel_tol=cfg.rel_tol,
                )
                treatment = fit(data.x, h_on)
                timings.append(time.perf_counter() - t0)
                seed = cfg.seed + rep
                acc_off = clustering_accuracy(
                    spectral_cluster(affinity_from_z(control.z), cfg.k, seed).labels,
                    data.truth_labels,
                )
                acc_on = clustering_accuracy(
                    spectral_cluster(affinity_from_z(treatment.z), cfg.k, seed).labels,
                    data.truth_labels,
                )
                assert np.all(control.anomaly == 0.0)
                return {
                    "psi": psi, "ratio": ratio, "seed": seed, "rep": rep,
                    "lambda_z": cfg.lambda_z, "lambda_e": cfg.lambda_e,
                    "lambda_a": lam_a, "p2": grid.p2, "p3": grid.p3,
                    "accuracy_on": acc_on, "accuracy_off": acc_off,
                    "difference": acc_on - acc_off,
                }

            rows = _parallel(cfg.jobs, eval_rep, range(cfg.replications))
            details.extend(rows)
            diffs = [r["difference"] for r in rows]
            summary.append({
                "psi": psi, "ratio": ratio,
                "lambda_z": cfg.lambda_z, "lambda_e": cfg.lambda_e,
                "p2": grid.p2, "p3": grid.p3, "seed": cfg.seed,
                "replications": cfg.replications,
                "mean_difference": float(np.mean(diffs)),
                "positive_fraction": float(np.mean([d > 0 for d in diffs])),
            })
    if cfg.output_dir:
        write_csv(Path(cfg.output_dir) / "ablation_details.csv", details, [
            "psi", "ratio", "seed", "rep", "lambda_z", "lambda_e", "lambda_a",
            "p2", "p3", "accuracy_on", "accuracy_off", "difference",
        ])
        write_csv(Path(cfg.output_dir) / "ablation_summary.csv", summary, [
            "psi", "ratio", "lambda_z", "lambda_e", "p2", "p3", "seed",
            "replications", "mean_difference", "positive_fraction",
        ])
        _write_metrics(cfg, "ablation", timings)
    return details, summary


def _ridge_labels(x, k, lam, seed):
    rows = unfold(x, 1)
    n = rows.shape[0]
    gram = rows @ rows.T
    z = solve_spd(np.eye(n) + lam * gram, lam * gram)
    return spectral_cluster(affinity_from_z(z), k, seed).labels


def run_dimred_sweep(cfg):
    """Accuracy versus dimension-reduction factor.

    Factor 1 is no reduction: ridge self-expression directly on the mode-1
    unfolding (best over the trr lambda list).  Other factors fit the full
    model at rank (P, P) with P = ambient / factor."""
    grid = cfg.grid
    i2, i3 = cfg.sim.ambient_dims
    details, summary = [], []
    timings = []
    ranks = [r for r in cfg.dimred_ranks if r <= min(i2, i3)]

    def eval_rep(rep):
        data = generate(_sim_for_cell(
            cfg, cfg.sim.anomaly_intensity, cfg.sim.anomaly_ratio, rep
        ))
        seed = cfg.seed + rep
        accs = {}
        best_raw = 0.0
        for lam in cfg.trr_lambda_values:
            try:
                labels = _ridge_labels(data.x, cfg.k, lam, seed)
                best_raw = max(best_raw, clustering_accuracy(labels, data.truth_labels))
            except Exception:
                pass
        accs[1.0] = best_raw
        for rank in ranks:
            h = Hyperparams(
                lambda_z=cfg.lambda_z,
                lambda_a=cfg.lambda_a if cfg.lambda_a is not None else 2.0 * cfg.lambda_e,
                lambda_e=cfg.lambda_e,
                p2=rank, p3=rank, max_sweeps=cfg.max_sweeps, rel_tol=cfg.rel_tol,
            )
            t0 = time.perf_counter()
            state = fit(data.x, h)
            timings.append(time.perf_counter() - t0)
            result = spectral_cluster(affinity_from_z(state.z), cfg.k, seed)
            factor = float(np.sqrt((i2 / rank) * (i3 / rank)))
            accs[factor] = clustering_accuracy(result.labels, data.truth_labels)
        return rep, accs

    results = _parallel(cfg.jobs, eval_rep, range(cfg.replications))
    factors = sorted(results[0][1].keys())
    above_min = {f: [] for f in factors}
    for rep, accs in results:
        floor = min(accs.values())
        for f in factors:
            above_min[f].append(accs[f] - floor)
            details.append({
                "factor": f, "rank": "" if f == 1.0 else round(i2 / f),
                "seed": cfg.seed + rep, "rep": rep,
                "psi": cfg.sim.anomaly_intensity, "ratio": cfg.sim.anomaly_ratio,
                "lambda_z": cfg.lambda_z, "lambda_e": cfg.lambda_e,
                "accuracy": accs[f], "above_min": accs[f] - floor,
            })
    for f in factors:
        summary.append({
            "factor": f, "rank": "" if f == 1.0 else round(i2 / f),
            "psi": cfg.sim.anomaly_intensity, "ratio": cfg.sim.anomaly_ratio,
            "lambda_z": cfg.lambda_z, "lambda_e": cfg.lambda_e, "seed": cfg.seed,
            "replications": cfg.replications,
            "mean_above_min": float(np.mean(above_min[f])),
            "mean_accuracy": float(np.mean([a for _, accs in results for ff, a in accs.items() if ff == f])),
        })
    if cfg.output_dir:
        write_csv(Path(cfg.output_dir) / "dimred_details.csv", details, [
            "factor", "rank", "seed", "rep", "psi", "ratio", "lambda_z", "lambda_e",
            "accuracy", "above_min",
        ])
        write_csv(Path(cfg.output_dir) / "dimred_summary.csv", summary, [
            "factor", "rank", "psi", "ratio", "lambda_z", "lambda_e", "seed",
            "replications", "mean_above_min", "mean_accuracy",
        ])
        _write_metrics(cfg, "dimred", timings)
    return details, summary


def run_tuning_grid(cfg):
    """Full NC-score table over the lambda grid on one instance."""
    if cfg.input_path:
        x = read_tensor(cfg.input_path)
        truth = None
    else:
        data = generate(cfg.sim)
        x, truth = data.x, data.truth_labels
    t0 = time.perf_counter()
    best, table = grid_search(x, cfg.grid, cfg.k, n_jobs=cfg.jobs)
    elapsed = time.perf_counter() - t0
    rows = []
    for cell in table:
        acc = None
        if truth is not None and cell.labels is not None:
            acc = clustering_accuracy(cell.labels, truth)
        rows.append({
            "lambda_z": cell.lambda_z, "lambda_e": cell.lambda_e,
            "lambda_a": cell.lambda_a, "p2": cfg.grid.p2, "p3": cfg.grid.p3,
            "seed": cfg.grid.seed, "nc_score": cell.nc_score, "accuracy": acc,
            "converged": cell.converged, "sweeps": cell.sweeps_run,
            "error": cell.error,
            "selected": (cell.lambda_z, cell.lambda_e, cell.lambda_a)
            == (best.lambda_z, best.lambda_e, best.lambda_a),
        })
    if cfg.output_dir:
        write_csv(Path(cfg.output_dir) / "tuning_table.csv", rows, [
            "lambda_z", "lambda_e", "lambda_a", "p2", "p3", "seed",
            "nc_score", "accuracy", "converged", "sweeps", "error", "selected",
        ])
        out = Path(cfg.output_dir) / "tuning_selected.json"
        out.parent.mkdir(parents=True, exist_ok=True)
        with open(out, "w") as fh:
            json.dump({
                "lambda_z": best.lambda_z, "lambda_a": best.lambda_a,
                "lambda_e": best.lambda_e, "p2": best.p2, "p3": best.p3,
            }, fh, indent=2, sort_keys=True)
        _write_metrics(cfg, "tuning", [elapsed])
    return best, rows


def run_fit_single(cfg):
    """One fit on simulated or loaded data; metrics plus cluster labels."""
    from .pipeline import fit_with_auto_lambda_a  # local import to avoid cycle

    if cfg.input_path:
        x = read_tensor(cfg.input_path)
        truth = None
    else:
        data = generate(cfg.sim)
        x, truth = data.x, data.truth_labels
    state, h, elapsed = fit_with_auto_lambda_a(
        x, cfg.lambda_z, cfg.lambda_a, cfg.lambda_e,
        cfg.grid.p2, cfg.grid.p3, cfg.max_sweeps, cfg.rel_tol,
    )
    result = spectral_cluster(affinity_from_z(state.z), cfg.k, cfg.seed)
    out = {
        "hyperparams": {
            "lambda_z": h.lambda_z, "lambda_a": h.lambda_a, "lambda_e": h.lambda_e,
            "p2": h.p2, "p3": h.p3,
        },
        "sweeps_run": state.sweeps_run,
        "converged": state.converged,
        "objective_trace": state.objective_trace,
        "fit_seconds": elapsed,
        "k": cfg.k,
        "labels": [int(v) for v in result.labels],
        "nc_score": result.nc_score,
    }
    if truth is not None:
        out["accuracy"] = clustering_accuracy(result.labels, truth)
    if cfg.output_dir:
        path = Path(cfg.output_dir) / "fit_single.json"
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w") as fh:
            json.dump(out, fh, indent=2, sort_keys=True)
    return out


def _emit(cfg, name, details, summary, timings):
    if not cfg.output_dir:
        return
    write_csv(Path(cfg.output_dir) / f"{name}_details.csv", details, _DETAIL_COLUMNS)
    write_csv(Path(cfg.output_dir) / f"{name}_summary.csv", summary, _SUMMARY_COLUMNS)
    _write_metrics(cfg, name, timings)


def _write_metrics(cfg, name, timings):
    path = Path(cfg.output_dir) / f"{name}_metrics.json"
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = {
        "experiment": cfg.kind,
        "fits": len(timings),
        "mean_fit_seconds": float(np.mean(timings)) if timings else None,
        "max_fit_seconds": float(np.max(timings)) if timings else None,
    }
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)


def run_experiment(cfg):
    runner = {
        "benchmark-sweep": run_benchmark_sweep,
        "anomaly-ablation": run_anomaly_ablation,
        "dimred-sweep": run_dimred_sweep,
        "tuning-grid": run_tuning_grid,
        "fit-single": run_fit_single,
    }[cfg.kind]
    return runner(cfg)
