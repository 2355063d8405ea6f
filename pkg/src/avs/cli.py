"""Command line front end: ``avs run`` executes an experiment matrix from a
config file (plus overrides) and writes the aggregate CSV."""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace

from .harness import (
    ExperimentConfig,
    load_config,
    run_experiment,
    write_csv,
)

_POLICY_TOKENS = {"pomcp": ("pomcp",), "random": ("random",), "both": ("pomcp", "random")}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="avs", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run an experiment matrix and write a CSV")
    run.add_argument("--config", help="key = value config file")
    run.add_argument("--out", required=True, help="output CSV path")
    run.add_argument("--sims", help="comma list of simulation counts, e.g. 4,50,200")
    run.add_argument("--particles", help="comma list of particle counts")
    run.add_argument("--episodes", type=int)
    run.add_argument("--seed", type=int, help="seed base for the episode matrix")
    run.add_argument("--policy", choices=sorted(_POLICY_TOKENS))
    run.add_argument("--obs", choices=["grid", "binary"])
    run.add_argument("--stage", choices=["2d", "3d"], help="'3d' runs the 2d+3d pipeline")
    run.add_argument("--map", dest="map_file", help="ASCII map file for the true scene")
    run.add_argument("--noise", type=float, help="border-cell observation noise probability")
    run.add_argument("--jobs", type=int, default=1, help="parallel episode workers")
    return parser


def _apply_overrides(cfg: ExperimentConfig, args: argparse.Namespace) -> ExperimentConfig:
    updates: dict = {}
    if args.sims:
        updates["n_sim"] = tuple(int(v) for v in args.sims.split(","))
    if args.particles:
        updates["particles"] = tuple(int(v) for v in args.particles.split(","))
    if args.episodes is not None:
        updates["episodes"] = args.episodes
    if args.seed is not None:
        updates["seed_base"] = args.seed
    if args.policy is not None:
        updates["policy"] = _POLICY_TOKENS[args.policy]
    if args.obs is not None:
        updates["obs_model"] = args.obs
    if args.stage is not None:
        updates["stage"] = "2d" if args.stage == "2d" else "2d+3d"
    if args.map_file is not None:
        updates["map_file"] = args.map_file
    if args.noise is not None:
        updates["p_noise"] = args.noise
    return replace(cfg, **updates) if updates else cfg


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "run":
        cfg = load_config(args.config) if args.config else ExperimentConfig()
        cfg = _apply_overrides(cfg, args)
        rows = run_experiment(cfg, jobs=args.jobs)
        write_csv(rows, args.out)
        for row in rows:
            print(
                f"{row.policy:>6} obs={row.obs_model} stage={row.stage} "
                f"n_sim={row.n_sim} K={row.particles}: found {row.found}/{row.episodes}"
            )
        return 0
    return 2


if __name__ == "__main__":
    sys.exit(main())
