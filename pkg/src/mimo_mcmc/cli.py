"""Command-line front end for the experiment runners.

Exit codes: 0 on success, 2 for configuration problems, 3 when a run needs an
exhaustive reference beyond the enumeration cap.
"""

from __future__ import annotations

import argparse
import json
import sys

from .experiments import EXPERIMENTS, ExperimentConfig, run_experiment
from .oracle import OracleCapError

# Per-subcommand defaults, small enough to finish quickly when run bare.
_DEFAULTS = {
    "tv_curve": dict(q=2, nt=2, nr=2, snr_db_list=[8.0], n_chains=100000),
    "rate_boxplot": dict(q=2, nt=2, nr=2, snr_db_list=[4.0, 6.0, 8.0, 10.0], n_realizations=100),
    "ser_sweep": dict(
        q=4, nt=4, nr=4, snr_db_list=[12.0, 14.0, 16.0, 18.0], n_vectors=2000,
        detectors=["dmala", "mmse", "map"], sampler={"n_iters": 100, "n_chains": 16},
    ),
    "llr_fidelity": dict(q=2, nt=4, nr=4, snr_db_list=[8.0], n_realizations=20),
    "dist_histogram": dict(q=2, nt=2, nr=2, snr_db_list=[8.0], n_chains=100000),
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mimo-mcmc",
        description="Langevin MCMC detection experiments",
    )
    sub = parser.add_subparsers(dest="experiment", required=True)
    for name in EXPERIMENTS:
        cmd = sub.add_parser(name.replace("_", "-"), help=f"run the {name} experiment")
        cmd.add_argument("--config", help="JSON config file; keys mirror ExperimentConfig")
        cmd.add_argument("--seed", type=int, help="override the config seed")
        cmd.add_argument("--out", help="output directory for CSV/JSON artifacts")
        cmd.add_argument("--threads", type=int, default=1,
                         help="worker threads across realizations; never changes results")
        cmd.set_defaults(experiment=name)
    return parser


def _load(args) -> ExperimentConfig:
    data = dict(_DEFAULTS[args.experiment])
    data["experiment"] = args.experiment
    if args.config:
        with open(args.config) as fh:
            loaded = json.load(fh)
        if loaded.get("experiment", args.experiment) != args.experiment:
            raise ValueError(
                f"config is for {loaded['experiment']!r} but the subcommand is {args.experiment!r}"
            )
        data.update(loaded)
        data["experiment"] = args.experiment
    if args.seed is not None:
        data["seed"] = args.seed
    return ExperimentConfig.from_dict(data)


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        config = _load(args)
    except (OSError, ValueError, TypeError, KeyError, json.JSONDecodeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    try:
        record = run_experiment(config, out=args.out, threads=max(1, args.threads))
    except OracleCapError as exc:
        print(f"exhaustive reference unavailable: {exc}", file=sys.stderr)
        return 3
    summary = json.dumps(record.to_json_dict(), sort_keys=True)
    print(summary)
    if record.wall_clock_s is not None:
        print(f"wall clock: {record.wall_clock_s:.2f}s", file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())
