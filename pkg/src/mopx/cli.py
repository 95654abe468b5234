"""Command-line entry points.

Subcommands: ``run`` (experiment sweep), ``schedule`` (round plan as JSON),
``gaps`` (gap report for an instance), ``hv`` (hypervolume of a point file),
``features`` (PCA feature extraction). Exit codes: 0 success, 1 partial cell
failures in a sweep, 2 configuration error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .core import MopxError
from .environments import load_instance_json
from .features import load_embeddings_csv, pca_reduce, write_features_csv
from .gaps import constrained_gap_report, hardness, pareto_gap_report
from .harness import load_experiment_config, run_experiment, write_outputs
from .metrics import hypervolume
from .schedulers import make_schedule


def _cmd_run(args) -> int:
    config = load_experiment_config(args.config)
    outcome = run_experiment(config, jobs=args.jobs)
    out_dir = args.out or config.out_dir or "results"
    paths = write_outputs(out_dir, outcome)
    print(f"wrote {len(outcome.records)} records to {paths['records']}")
    if outcome.failures:
        print(f"{len(outcome.failures)} cell(s) failed; see {paths['failures']}", file=sys.stderr)
        return 1
    return 0


def _cmd_schedule(args) -> int:
    schedule = make_schedule(args.scheduler, args.k, args.budget)
    print(json.dumps(schedule.to_dict(), indent=2))
    return 0


def _cmd_gaps(args) -> int:
    instance = load_instance_json(args.instance)
    if args.tau is not None:
        report = constrained_gap_report(instance.means, args.tau)
        payload = report.to_dict()
        payload["hardness"] = hardness(instance.means, args.tau)
    else:
        payload = pareto_gap_report(instance.means).to_dict()
    print(json.dumps(payload, indent=2))
    return 0


def _load_points(path: str) -> np.ndarray:
    rows = []
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if not line:
            continue
        parts = line.split(",")
        try:
            rows.append([float(v) for v in parts])
        except ValueError:
            continue  # header line
    return np.array(rows, dtype=float)


def _cmd_hv(args) -> int:
    points = _load_points(args.points)
    reference = [float(v) for v in args.ref.split(",")]
    print(repr(hypervolume(points, reference)))
    return 0


def _cmd_features(args) -> int:
    table = load_embeddings_csv(args.embeddings)
    feats, _, _ = pca_reduce(table, args.dim)
    write_features_csv(args.out, feats)
    print(f"wrote {feats.shape[0]} x {feats.shape[1]} features to {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mopx", description="Multi-objective pure-exploration bandit toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run an experiment sweep from a JSON config")
    p_run.add_argument("--config", required=True)
    p_run.add_argument("--jobs", type=int, default=1)
    p_run.add_argument("--out", default=None)
    p_run.set_defaults(func=_cmd_run)

    p_sched = sub.add_parser("schedule", help="print a round plan as JSON")
    p_sched.add_argument("--k", type=int, required=True)
    p_sched.add_argument("--budget", type=int, required=True)
    p_sched.add_argument("--scheduler", default="sh", choices=["sh", "sr", "sequential_halving", "successive_rejects"])
    p_sched.set_defaults(func=_cmd_schedule)

    p_gaps = sub.add_parser("gaps", help="print a gap report for an instance file")
    p_gaps.add_argument("--instance", required=True)
    p_gaps.add_argument("--tau", type=float, default=None)
    p_gaps.set_defaults(func=_cmd_gaps)

    p_hv = sub.add_parser("hv", help="hypervolume of a CSV point file")
    p_hv.add_argument("--points", required=True)
    p_hv.add_argument("--ref", default="0,0")
    p_hv.set_defaults(func=_cmd_hv)

    p_feat = sub.add_parser("features", help="PCA-reduce an embedding table")
    p_feat.add_argument("--embeddings", required=True)
    p_feat.add_argument("--dim", type=int, required=True)
    p_feat.add_argument("--out", required=True)
    p_feat.set_defaults(func=_cmd_features)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except MopxError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except FileNotFoundError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
