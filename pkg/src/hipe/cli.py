"""Command-line harness.

Subcommands: ``run`` (seeded experiments from a JSON config, flag overrides),
``eval-acq`` (print one acquisition value for a batch file), ``bench-list``,
``version``. Exit codes: 0 success, 1 config error, 2 runtime/numerical
error, 3 partial success (some seeds failed).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .acquisition import ACQUISITIONS, make_acquisition, make_context
from .benchmarks import registry
from .errors import ConfigError
from .experiment import (
    ExperimentConfig,
    derive_seed,
    parse_seeds,
    run_experiment,
    write_outputs,
)
from .gp import Dataset
from .model import FullyBayesianGP


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hipe", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a seeded experiment from a config file")
    run.add_argument("--config", required=True, help="path to a flat JSON config")
    run.add_argument("--algo", help="override: selection algorithm")
    run.add_argument("--benchmark", help="override: benchmark name")
    run.add_argument("--q", type=int, help="override: batch size")
    run.add_argument("--batches", type=int, help="override: number of batches")
    run.add_argument("--seeds", help="override: seeds, e.g. '0..19' or '0,3,7'")
    run.add_argument("--out", help="override: output directory")

    ev = sub.add_parser("eval-acq", help="evaluate one acquisition value for a batch")
    ev.add_argument("--algo", required=True, choices=ACQUISITIONS)
    ev.add_argument("--batch-file", required=True, help="JSON file with a 'points' matrix")
    ev.add_argument("--data-file", help="JSON file with 'points' and 'outcomes'")
    ev.add_argument("--dim", type=int, help="input dimension (required without data)")
    ev.add_argument("--t-points", type=int, default=256)
    ev.add_argument("--n-draws", type=int, default=64)
    ev.add_argument("--beta", default="auto")
    ev.add_argument("--seed", type=int, default=0)

    sub.add_parser("bench-list", help="list benchmark names")
    sub.add_parser("version", help="print the package version")
    return parser


def _load_points(path: str, key: str = "points") -> np.ndarray:
    try:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    if key not in payload:
        raise ConfigError(f"{path} is missing the {key!r} field")
    return np.asarray(payload[key], dtype=np.float64)


def _cmd_run(args) -> int:
    raw = json.loads(Path(args.config).read_text(encoding="utf-8"))
    if not isinstance(raw, dict):
        raise ConfigError("config file must contain a JSON object")
    if args.algo:
        raw["algo"] = args.algo
    if args.benchmark:
        raw["benchmark"] = args.benchmark
    if args.q is not None:
        raw["q"] = args.q
    if args.batches is not None:
        raw["batches"] = args.batches
    if args.seeds is not None:
        raw["seeds"] = parse_seeds(args.seeds)
    if args.out is not None:
        raw["out_dir"] = args.out
    cfg = ExperimentConfig.from_dict(raw)
    records, n_failed = run_experiment(cfg)
    csv_path = write_outputs(records, cfg.out_dir)
    ok = sum(1 for r in records if r.status == "ok")
    print(f"wrote {csv_path} ({ok} seeds ok, {n_failed} failed)")
    if n_failed == len(records):
        return 2
    return 3 if n_failed else 0


def _cmd_eval_acq(args) -> int:
    batch = _load_points(args.batch_file)
    if batch.ndim == 1:
        batch = batch.reshape(1, -1)
    if args.data_file:
        X = _load_points(args.data_file)
        y = _load_points(args.data_file, key="outcomes").reshape(-1)
        dim = X.shape[1]
    else:
        dim = args.dim if args.dim is not None else batch.shape[1]
        X = np.empty((0, dim))
        y = np.empty(0)
    if batch.shape[1] != dim:
        raise ConfigError(
            f"batch has dimension {batch.shape[1]} but data has dimension {dim}"
        )
    model = FullyBayesianGP(random_state=derive_seed(args.seed, 1)).fit(X, y)
    test_points = np.random.default_rng(derive_seed(args.seed, 2)).uniform(
        size=(args.t_points, dim)
    )
    beta = args.beta if args.beta == "auto" else float(args.beta)
    ctx = make_context(
        model.ensemble_,
        model.dataset_,
        test_points,
        q=batch.shape[0],
        n_draws=args.n_draws,
        seed=derive_seed(args.seed, 3),
        beta=beta,
    )
    value = make_acquisition(args.algo, ctx)(batch)
    print(repr(value))
    return 0


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "eval-acq":
            return _cmd_eval_acq(args)
        if args.command == "bench-list":
            for bench in registry():
                print(
                    f"{bench.name}  dim={bench.total_dim} "
                    f"(effective {bench.effective_dim})  noise_sd={bench.noise_sd}"
                )
            return 0
        if args.command == "version":
            print(__version__)
            return 0
        raise ConfigError(f"unknown command {args.command!r}")
    except (ConfigError, FileNotFoundError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except json.JSONDecodeError as exc:
        print(f"config error: invalid JSON ({exc})", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
