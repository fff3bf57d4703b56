"""Command-line entry point.

Subcommands: ``solve`` (offline grid solve to a policy artifact),
``run-cloud`` (Monte Carlo episodes under a solved policy), ``run-robot``
(receding-horizon navigation episodes), ``verify`` (oracle identity
suite), and ``grid-info``. Every run writes a ``manifest.json`` echoing
the fully resolved configuration; all numeric CSV output uses 17
significant digits so reruns diff exactly.

Exit codes: 0 success, 2 configuration error, 3 size guard exceeded,
4 verification failure.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import cloud as cloud_mod
from . import robot as robot_mod
from .errors import ConfigMismatchError, ModelValidationError, SizeGuardError
from .seeding import episode_seed
from .solver import PolicyArtifact, simplex_point_count
from .verification import run_verification

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_GUARD = 3
EXIT_VERIFY = 4

REWARD_KINDS = ("smoothing-averse", "min-info-gain")


def _fmt(x: float) -> str:
    return f"{float(x):.17g}"


def _out_dir(args) -> Path:
    out = os.environ.get("COVERTCTL_OUT_DIR", args.out)
    if out is None:
        raise ModelValidationError("no output directory given (--out or COVERTCTL_OUT_DIR)")
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _write_manifest(out: Path, command: str, config: dict) -> None:
    config = dict(config)
    config["command"] = command
    config["max_workers"] = os.environ.get("COVERTCTL_MAX_WORKERS")
    with open(out / "manifest.json", "w") as fh:
        json.dump(config, fh, indent=2, sort_keys=True)


def cmd_solve(args) -> int:
    scenario = (
        cloud_mod.CloudScenario.load(args.scenario)
        if args.scenario
        else cloud_mod.CloudScenario.default()
    )
    out = _out_dir(args)
    start = time.monotonic()
    artifact = cloud_mod.solve_scenario(
        scenario, reward_kind=args.reward, resolution=args.resolution, n_cells=args.cells
    )
    wall = time.monotonic() - start
    artifact_path = out / f"policy_{args.reward}.json"
    artifact.save(artifact_path)
    report = {
        "reward_kind": args.reward,
        "grid_points": artifact.grid.n_points,
        "wall_time_s": wall,
        "value_at_initial": artifact.value_at(scenario.hmm.initial),
    }
    with open(out / "solve_report.json", "w") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
    _write_manifest(out, "solve", {
        "scenario": args.scenario,
        "reward": args.reward,
        "resolution": args.resolution,
        "cells": args.cells,
        "artifact": str(artifact_path),
    })
    print(f"solved {args.reward}: {artifact.grid.n_points} grid points, "
          f"J0(initial) = {report['value_at_initial']:.6f}, {wall:.1f}s")
    return EXIT_OK


def cmd_run_cloud(args) -> int:
    scenario = (
        cloud_mod.CloudScenario.load(args.scenario)
        if args.scenario
        else cloud_mod.CloudScenario.default()
    )
    artifact = PolicyArtifact.load(args.policy)
    cloud_mod.check_artifact(scenario, artifact)
    out = _out_dir(args)
    name = artifact.header.get("reward_kind", "policy")

    entropies, errors = [], []
    with open(out / "episodes.jsonl", "w") as fh:
        for i in range(args.runs):
            record = cloud_mod.run_episode(scenario, artifact, episode_seed(args.seed, i))
            entropies.append(record.trajectory_entropy)
            errors.append(record.map_errors / scenario.horizon)
            fh.write(json.dumps({
                "episode": i,
                "states": record.states.tolist(),
                "controls": record.controls.tolist(),
                "observations": [float(y) for y in record.observations],
                "realized_objective": record.realized_objective,
                "trajectory_entropy": record.trajectory_entropy,
                "map_errors": record.map_errors,
            }, sort_keys=True) + "\n")
    with open(out / "metrics.csv", "w") as fh:
        fh.write("policy,mean_entropy_nats,map_error,n_runs,seed\n")
        fh.write(f"{name},{_fmt(np.mean(entropies))},{_fmt(np.mean(errors))},"
                 f"{args.runs},{args.seed}\n")
    _write_manifest(out, "run-cloud", {
        "scenario": args.scenario,
        "policy": args.policy,
        "runs": args.runs,
        "seed": args.seed,
    })
    print(f"{name}: mean entropy {np.mean(entropies):.4f} nats, "
          f"MAP error {np.mean(errors):.4f} over {args.runs} runs")
    return EXIT_OK


def cmd_run_robot(args) -> int:
    scenario = (
        robot_mod.RobotScenario.load(args.scenario)
        if args.scenario
        else robot_mod.RobotScenario()
    )
    if args.gamma is not None:
        scenario = dataclasses.replace(scenario, gamma=args.gamma)
    out = _out_dir(args)

    records = []
    with open(out / "trajectories.csv", "w") as fh:
        fh.write("episode,t,x,y,heading,u2,h_post,h_pred,h_noise\n")
        for i in range(args.episodes):
            record = robot_mod.run_navigation(scenario, episode_seed(args.seed, i))
            records.append(record)
            fh.write(f"{i},0,{_fmt(record.poses[0, 0])},{_fmt(record.poses[0, 1])},"
                     f"{_fmt(record.poses[0, 2])},,,,\n")
            for t in range(record.steps):
                pose = record.poses[t + 1]
                rew = record.rewards[t]
                fh.write(f"{i},{t + 1},{_fmt(pose[0])},{_fmt(pose[1])},{_fmt(pose[2])},"
                         f"{_fmt(record.controls[t])},{_fmt(rew[0])},{_fmt(rew[1])},"
                         f"{_fmt(rew[2])}\n")
    stats = robot_mod.trajectory_stats(records, scenario)
    with open(out / "stats.csv", "w") as fh:
        fh.write("metric,value\n")
        for key in ("mean_final_goal_distance", "mean_min_landmark_distance",
                    "reached_fraction", "mean_steps", "n_episodes"):
            fh.write(f"{key},{_fmt(stats[key])}\n")
    _write_manifest(out, "run-robot", {
        "scenario": args.scenario,
        "gamma": scenario.gamma,
        "episodes": args.episodes,
        "seed": args.seed,
    })
    print(f"gamma={scenario.gamma}: final goal distance "
          f"{stats['mean_final_goal_distance']:.2f} m, min landmark distance "
          f"{stats['mean_min_landmark_distance']:.2f} m, reached "
          f"{stats['reached_fraction']:.0%}")
    return EXIT_OK


def cmd_verify(args) -> int:
    results = run_verification()
    failed = 0
    for res in results:
        status = "pass" if res.passed else "FAIL"
        print(f"{status}  {res.name} [{res.check}]: discrepancy {res.discrepancy:.3e} "
              f"(tolerance {res.tolerance:.0e})")
        if not res.passed:
            failed += 1
    if failed:
        print(f"{failed} of {len(results)} checks failed", file=sys.stderr)
        return EXIT_VERIFY
    print(f"all {len(results)} checks passed")
    return EXIT_OK


def cmd_grid_info(args) -> int:
    count = simplex_point_count(args.n_states, args.resolution)
    print(f"{args.n_states} states at resolution {args.resolution}: {count} grid points")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="covertctl",
        description="Entropy-maximising control for concealing state trajectories "
                    "from fixed-interval smoothers.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="grid-solve a scenario to a policy artifact")
    p.add_argument("--scenario", default=None, help="scenario JSON (default: built-in)")
    p.add_argument("--reward", choices=REWARD_KINDS, default="smoothing-averse")
    p.add_argument("--resolution", type=float, default=cloud_mod.DEFAULT_RESOLUTION)
    p.add_argument("--cells", type=int, default=60)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("run-cloud", help="simulate episodes under a solved policy")
    p.add_argument("--scenario", default=None)
    p.add_argument("--policy", required=True)
    p.add_argument("--runs", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_run_cloud)

    p = sub.add_parser("run-robot", help="receding-horizon navigation episodes")
    p.add_argument("--scenario", default=None)
    p.add_argument("--gamma", type=float, default=None)
    p.add_argument("--episodes", type=int, default=25)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_run_robot)

    p = sub.add_parser("verify", help="run the oracle identity suite")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("grid-info", help="report the belief-grid size")
    p.add_argument("--n-states", type=int, required=True)
    p.add_argument("--resolution", type=float, required=True)
    p.set_defaults(func=cmd_grid_info)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except SizeGuardError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_GUARD
    except (ModelValidationError, ConfigMismatchError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
