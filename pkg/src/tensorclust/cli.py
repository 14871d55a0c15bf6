"""Command-line interface.

Exit codes: 0 success, 2 usage error (argparse), 3 unreadable or missing
file, 4 malformed file or config, 5 computation failure, 1 unexpected
internal error.  Failures print one JSON object per line to stderr:
{"error": {"code": .., "type": .., "message": ..}}.
"""

import argparse
import json
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from .clustering import (
    ClusteringError,
    affinity_from_z,
    choose_k,
    laplacian_spectrum,
    spectral_cluster,
)
from .experiments import (
    ExperimentConfig,
    ExperimentError,
    run_experiment,
)
from .linalg import LinearAlgebraError
from .model import SolverError
from .pipeline import fit_with_auto_lambda_a
from .simulate import SimConfig, generate
from .tensorfile import TensorFileError, read_matrix, read_tensor, write_tensor
from .tuning import TuningError

EXIT_OK = 0
EXIT_UNEXPECTED = 1
EXIT_USAGE = 2
EXIT_IO = 3
EXIT_FORMAT = 4
EXIT_COMPUTE = 5

_IO_ERRORS = (FileNotFoundError, PermissionError, IsADirectoryError)
_FORMAT_ERRORS = (TensorFileError, json.JSONDecodeError, ValueError, TypeError, KeyError)
_COMPUTE_ERRORS = (
    SolverError,
    LinearAlgebraError,
    ClusteringError,
    TuningError,
    ExperimentError,
)


def _emit_error(code, exc):
    payload = {"error": {"code": code, "type": type(exc).__name__, "message": str(exc)}}
    sys.stderr.write(json.dumps(payload) + "\n")
    return code


def _load_json(path):
    with open(path) as fh:
        return json.load(fh)


def _parse_ranks(text):
    parts = text.split(",")
    if len(parts) != 2:
        raise ValueError(f"--ranks expects 'P2,P3', got {text!r}")
    return int(parts[0]), int(parts[1])


def _write_json(path, payload):
    path = Path(path)
    if path.parent != Path(""):
        path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def cmd_simulate(args):
    raw = _load_json(args.config) if args.config else {}
    raw = {k: tuple(v) if isinstance(v, list) else v for k, v in raw.items()}
    if args.seed is not None:
        raw["seed"] = args.seed
    cfg = SimConfig(**raw)
    data = generate(cfg)
    write_tensor(args.output, data.x)
    sidecar = args.sidecar or (args.output + ".json")
    coords = np.argwhere(data.anomaly_support)
    _write_json(sidecar, {
        "config": {k: list(v) if isinstance(v, tuple) else v for k, v in asdict(cfg).items()},
        "truth_labels": [int(v) for v in data.truth_labels],
        "anomaly_support": [[int(i) for i in c] for c in coords],
    })
    return EXIT_OK


def cmd_fit(args):
    x = read_tensor(args.input)
    p2, p3 = _parse_ranks(args.ranks)
    state, h, elapsed = fit_with_auto_lambda_a(
        x, args.lambda_z, args.lambda_a, args.lambda_e, p2, p3,
        max_sweeps=args.max_sweeps, rel_tol=args.rel_tol,
        anomaly_enabled=not args.no_anomaly,
    )
    out = Path(args.output)
    stem = out.with_suffix("") if out.suffix == ".json" else out
    artifacts = {
        "z": f"{stem}.z.lrt",
        "anomaly": f"{stem}.anomaly.lrt",
        "core": f"{stem}.core.lrt",
        "u2": f"{stem}.u2.lrt",
        "u3": f"{stem}.u3.lrt",
    }
    write_tensor(artifacts["z"], state.z)
    write_tensor(artifacts["anomaly"], state.anomaly)
    write_tensor(artifacts["core"], state.model.core)
    write_tensor(artifacts["u2"], state.model.u2)
    write_tensor(artifacts["u3"], state.model.u3)
    _write_json(args.output, {
        "hyperparams": {
            "lambda_z": h.lambda_z, "lambda_a": h.lambda_a, "lambda_e": h.lambda_e,
            "p2": h.p2, "p3": h.p3, "max_sweeps": h.max_sweeps, "rel_tol": h.rel_tol,
            "anomaly_enabled": h.anomaly_enabled,
        },
        "objective_trace": state.objective_trace,
        "sweeps_run": state.sweeps_run,
        "converged": state.converged,
        "fit_seconds": elapsed,
        "files": artifacts,
    })
    return EXIT_OK


def cmd_cluster(args):
    z = read_matrix(args.input)
    w = affinity_from_z(z)
    k = choose_k(w, args.k_max) if args.auto_k else args.k
    result = spectral_cluster(w, k, args.seed)
    payload = {
        "k": int(k),
        "auto_k": bool(args.auto_k),
        "labels": [int(v) for v in result.labels],
        "nc_score": result.nc_score,
        "eigenvalues": [float(v) for v in result.eigenvalues],
    }
    if args.output:
        _write_json(args.output, payload)
    else:
        json.dump(payload, sys.stdout)
        sys.stdout.write("\n")
    return EXIT_OK


def _experiment_config(args, kind):
    raw = _load_json(args.config) if args.config else {}
    declared = raw.pop("kind", None)
    if declared is not None and declared != kind:
        raise ValueError(f"config kind {declared!r} does not match subcommand {kind!r}")
    raw["kind"] = kind
    if args.output:
        raw["output_dir"] = args.output
    if getattr(args, "seed", None) is not None:
        raw["seed"] = args.seed
    if getattr(args, "replications", None) is not None:
        raw["replications"] = args.replications
    if getattr(args, "jobs", None) is not None:
        raw["jobs"] = args.jobs
    if getattr(args, "input", None):
        raw["input_path"] = args.input
    if getattr(args, "k", None) is not None:
        raw["k"] = args.k
    return ExperimentConfig.from_dict(raw)


def cmd_tune(args):
    cfg = _experiment_config(args, "tuning-grid")
    best, _ = run_experiment(cfg)
    sys.stdout.write(
        json.dumps({
            "lambda_z": best.lambda_z, "lambda_a": best.lambda_a,
            "lambda_e": best.lambda_e, "p2": best.p2, "p3": best.p3,
        }) + "\n"
    )
    return EXIT_OK


def _make_experiment_cmd(kind):
    def cmd(args):
        cfg = _experiment_config(args, kind)
        run_experiment(cfg)
        return EXIT_OK

    return cmd


def build_parser():
    parser = argparse.ArgumentParser(
        prog="tensorclust",
        description="Joint low-rank, sparse-anomaly, self-expression tensor clustering.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate a synthetic clustered tensor")
    p.add_argument("--config", help="JSON file of generator settings")
    p.add_argument("--seed", type=int)
    p.add_argument("--output", required=True, help="output .lrt tensor path")
    p.add_argument("--sidecar", help="labels/support JSON path (default <output>.json)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fit", help="fit the decomposition model to a tensor")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True, help="fit metrics JSON path")
    p.add_argument("--lambda-z", type=float, default=1e-3)
    p.add_argument("--lambda-a", type=float, default=None,
                   help="sparsity weight; omitted -> Otsu-selected")
    p.add_argument("--lambda-e", type=float, default=1.0)
    p.add_argument("--ranks", default="15,15", help="target ranks 'P2,P3'")
    p.add_argument("--max-sweeps", type=int, default=200)
    p.add_argument("--rel-tol", type=float, default=1e-6)
    p.add_argument("--no-anomaly", action="store_true")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("cluster", help="cluster a saved self-expression matrix")
    p.add_argument("--input", required=True, help="z matrix .lrt path")
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--k", type=int)
    group.add_argument("--auto-k", action="store_true", help="eigengap cluster count")
    p.add_argument("--k-max", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--output", help="labels JSON path (default stdout)")
    p.set_defaults(func=cmd_cluster)

    p = sub.add_parser("tune", help="normalized-cut grid search")
    p.add_argument("--input", help="tensor .lrt path (default: simulate from config)")
    p.add_argument("--config", help="experiment JSON (grid, sim, ...)")
    p.add_argument("--k", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--jobs", type=int)
    p.add_argument("--output", help="output directory")
    p.set_defaults(func=cmd_tune)

    for kind, name, helptext in [
        ("benchmark-sweep", "bench", "accuracy sweep over anomaly settings"),
        ("anomaly-ablation", "ablate-anomaly", "anomaly term on/off paired comparison"),
        ("dimred-sweep", "ablate-dimred", "accuracy versus reduction factor"),
    ]:
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--config", help="experiment JSON")
        p.add_argument("--seed", type=int)
        p.add_argument("--replications", type=int)
        p.add_argument("--jobs", type=int)
        p.add_argument("--output", required=True, help="output directory")
        p.set_defaults(func=_make_experiment_cmd(kind))

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except _IO_ERRORS as exc:
        return _emit_error(EXIT_IO, exc)
    except TensorFileError as exc:
        return _emit_error(EXIT_FORMAT, exc)
    except _COMPUTE_ERRORS as exc:
        return _emit_error(EXIT_COMPUTE, exc)
    except _FORMAT_ERRORS as exc:
        return _emit_error(EXIT_FORMAT, exc)
    except Exception as exc:  # anything else is an internal error
        return _emit_error(EXIT_UNEXPECTED, exc)


if __name__ == "__main__":
    sys.exit(main())
