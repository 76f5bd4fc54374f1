"""Command-line experiment runner.

Reads a YAML config describing the world and the runs, executes every
(strategy, species, seed) combination, and writes results.csv,
aggregates.csv and map_curves.svg to the output directory.
"""

from __future__ import annotations

import argparse
import logging
import sys

import yaml

from .errors import RangeSurveyError
from .experiment import config_from_dict, run_experiment

log = logging.getLogger(__name__)


def load_config(path):
    with open(path) as fh:
        raw = yaml.safe_load(fh)
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise RangeSurveyError(f"config root must be a mapping, got {type(raw).__name__}")
    return raw


def build_parser():
    parser = argparse.ArgumentParser(
        prog="rangesurvey",
        description="Simulate active survey strategies for species range estimation.")
    parser.add_argument("--config", required=True, help="YAML experiment config")
    parser.add_argument("--out", help="output directory (overrides config out_dir)")
    parser.add_argument("--seed", type=int, help="master seed (overrides config)")
    parser.add_argument("--threads", type=int, help="worker threads (overrides config)")
    parser.add_argument("--strategies",
                        help="comma-separated strategy names (overrides config)")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        raw = load_config(args.config)
        if args.out is not None:
            raw["out_dir"] = args.out
        if args.seed is not None:
            raw["master_seed"] = args.seed
        if args.threads is not None:
            raw["threads"] = args.threads
        if args.strategies is not None:
            raw["strategies"] = [s.strip() for s in args.strategies.split(",") if s.strip()]
        cfg = config_from_dict(raw)
        result = run_experiment(cfg)
    except RangeSurveyError as exc:
        log.error("%s", exc)
        return 1
    for name, curve in result.aggregates.items():
        last = curve.n_timesteps - 1
        print(f"{name}: MAP[t={last}]={curve.map_mean[last]:.4f} "
              f"MAP-AUC[t={last}]={curve.map_auc_mean[last]:.4f}")
    if result.aborted:
        log.error("%d run(s) aborted", len(result.aborted))
        return 1
    if cfg.out_dir is not None:
        print(f"wrote results to {cfg.out_dir}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
