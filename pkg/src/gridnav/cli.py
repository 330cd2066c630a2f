"""Command-line entry points: run, generate, ablate.

Exit codes: 0 success, 2 config error, 3 missing fixture, 4 transport
error. The remote endpoint is taken from the GRIDNAV_REMOTE_ENDPOINT
environment variable.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor

from gridnav import metrics as metrics_mod
from gridnav.errors import ConfigError, FixtureError, TransportError
from gridnav.perception import RemotePerception
from gridnav.runner import RunConfig, run_episode
from gridnav.world import Episode
from gridnav.worldgen import TEMPLATES, generate_episodes

ABLATION_AXES = ("constraints", "thresholds", "update", "strategy",
                 "gamma", "lambda", "region_size")


def load_episode_file(path: str) -> list[Episode]:
    with open(path) as fh:
        data = json.load(fh)
    return [Episode.from_json(d) for d in data["episodes"]]


def write_episode_file(path: str, episodes: list[Episode]) -> None:
    data = {
        "schema_version": 1,
        "episodes": [ep.to_json(include_world=True) for ep in episodes],
    }
    with open(path, "w") as fh:
        json.dump(data, fh, sort_keys=True)
        fh.write("\n")


def build_config(args) -> RunConfig:
    if getattr(args, "config", None):
        with open(args.config) as fh:
            cfg = RunConfig.from_json(json.load(fh))
    else:
        cfg = RunConfig()
    overrides = {
        "backend": "backend", "strategy": "strategy", "gamma": "gamma",
        "lam": "lam", "region_size": "region_size", "min_steps": "min_steps",
        "max_steps": "max_steps", "seed": "seed", "jobs": "jobs",
        "snapshots": "snapshot_dir", "fixtures": "fixture_path",
    }
    for arg_name, field_name in overrides.items():
        val = getattr(args, arg_name, None)
        if val is not None:
            setattr(cfg, field_name, val)
    endpoint = os.environ.get("GRIDNAV_REMOTE_ENDPOINT")
    if endpoint:
        cfg.remote_endpoint = endpoint
    cfg.validate()
    return cfg


def make_perception_factory(config: RunConfig):
    """None for the oracle backend (the runner builds one per episode)."""
    if config.backend == "oracle":
        return None
    mode = "replay" if config.backend == "replay" else "live"
    client = RemotePerception(endpoint=config.remote_endpoint,
                              fixture_path=config.fixture_path or None,
                              mode=mode)
    return lambda episode: client


def _run_one(payload):
    ep_json, cfg_json = payload
    config = RunConfig.from_json(cfg_json)
    episode = Episode.from_json(ep_json)
    factory = make_perception_factory(config)
    perception = factory(episode) if factory else None
    result = run_episode(episode, config, perception)
    return result.summary()


def execute_suite(episodes: list[Episode], config: RunConfig) -> list[dict]:
    """Run all episodes, summaries ordered by episode id."""
    episodes = sorted(episodes, key=lambda e: e.id)
    payloads = [(ep.to_json(include_world=True), config.to_json())
                for ep in episodes]
    if config.jobs > 1:
        with ProcessPoolExecutor(max_workers=config.jobs) as pool:
            summaries = list(pool.map(_run_one, payloads))
    else:
        summaries = [_run_one(p) for p in payloads]
    return summaries


def write_results(path: str, config: RunConfig, summaries: list[dict]) -> dict:
    agg = _aggregate_summaries(summaries)
    with open(path, "w") as fh:
        fh.write(json.dumps({"config": config.to_json()}, sort_keys=True) + "\n")
        for s in summaries:
            fh.write(json.dumps(s, sort_keys=True) + "\n")
        fh.write(json.dumps({"aggregate": agg}, sort_keys=True) + "\n")
    return agg


def _aggregate_summaries(summaries: list[dict]) -> dict:
    keys = ("ne", "osr", "sr", "spl", "ndtw", "sdtw", "trajectory_length")
    if not summaries:
        return {k: math.nan for k in keys}
    n = len(summaries)
    return {k: sum(s["metrics"][k] for s in summaries) / n for k in keys}


def cmd_run(args) -> int:
    config = build_config(args)
    if args.dry_run:
        print(json.dumps(config.to_json(), sort_keys=True, indent=2))
        return 0
    episodes = []
    for path in args.episodes:
        episodes.extend(load_episode_file(path))
    summaries = execute_suite(episodes, config)
    agg = write_results(args.output, config, summaries)
    print(metrics_mod.report_table(agg))
    return 0


def cmd_generate(args) -> int:
    episodes = generate_episodes(args.seed, args.template, args.count)
    write_episode_file(args.output, episodes)
    print(f"wrote {len(episodes)} episodes to {args.output}")
    return 0


def _ablation_variants(axis: str, base: RunConfig):
    """Configuration variants for one ablation axis."""
    def variant(label, **kw):
        cfg = RunConfig.from_json(base.to_json())
        for k, v in kw.items():
            setattr(cfg, k, v)
        return label, cfg

    if axis == "constraints":
        return [variant("all constraints"),
                variant("final only", final_only_constraints=True)]
    if axis == "thresholds":
        return [variant(f"{lo}/{hi}", min_steps=lo, max_steps=hi)
                for lo, hi in ((0, 0), (5, 15), (10, 25), (15, 35))]
    if axis == "update":
        return [variant("default"),
                variant("reset on switch", reset_on_switch=True),
                variant("no decay", disable_historical_decay=True),
                variant("no trajectory mask", disable_trajectory_mask=True)]
    if axis == "strategy":
        return [variant(s, strategy=s) for s in ("fbe", "pixel", "orp", "superpixel")]
    if axis == "gamma":
        return [variant(f"gamma={g}", gamma=g) for g in (0.0, 0.25, 0.5, 0.75)]
    if axis == "lambda":
        return [variant(f"lambda={l}", lam=l) for l in (0.85, 0.9, 0.95, 1.0)]
    if axis == "region_size":
        return [variant(f"region_size={s}", region_size=s) for s in (24, 48, 96)]
    raise ConfigError(f"unknown ablation axis {axis!r}; choose from {ABLATION_AXES}")


def cmd_ablate(args) -> int:
    base = build_config(args)
    episodes = []
    for path in args.episodes:
        episodes.extend(load_episode_file(path))
    variants = _ablation_variants(args.axis, base)
    rows = []
    for label, cfg in variants:
        summaries = execute_suite(episodes, cfg)
        agg = _aggregate_summaries(summaries)
        rows.append((label, agg))
    width = max(len(label) for label, _ in rows)
    cols = ("ne", "osr", "sr", "spl", "ndtw", "sdtw")
    print(" " * (width + 2) + "  ".join(f"{c.upper():>6}" for c in cols))
    for label, agg in rows:
        print(f"{label:<{width}}  " +
              "  ".join(f"{agg[c]:6.3f}" for c in cols))
    if args.output:
        with open(args.output, "w") as fh:
            json.dump({"axis": args.axis,
                       "rows": [{"label": l, "aggregate": a} for l, a in rows]},
                      fh, sort_keys=True, indent=2)
            fh.write("\n")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gridnav")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run an episode suite")
    run.add_argument("--config")
    run.add_argument("--episodes", nargs="+", required=True)
    run.add_argument("--output", default="results.jsonl")
    run.add_argument("--backend", choices=("oracle", "remote", "replay"))
    run.add_argument("--strategy")
    run.add_argument("--gamma", type=float)
    run.add_argument("--lambda", dest="lam", type=float)
    run.add_argument("--region-size", dest="region_size", type=int)
    run.add_argument("--min-steps", dest="min_steps", type=int)
    run.add_argument("--max-steps", dest="max_steps", type=int)
    run.add_argument("--snapshots")
    run.add_argument("--fixtures")
    run.add_argument("--jobs", type=int)
    run.add_argument("--seed", type=int)
    run.add_argument("--dry-run", action="store_true")
    run.set_defaults(func=cmd_run)

    gen = sub.add_parser("generate", help="generate worlds and episodes")
    gen.add_argument("--seed", type=int, required=True)
    gen.add_argument("--template", choices=TEMPLATES, required=True)
    gen.add_argument("--count", type=int, required=True)
    gen.add_argument("--output", required=True)
    gen.set_defaults(func=cmd_generate)

    abl = sub.add_parser("ablate", help="sweep one configuration axis")
    abl.add_argument("--axis", required=True)
    abl.add_argument("--config")
    abl.add_argument("--episodes", nargs="+", required=True)
    abl.add_argument("--output")
    abl.add_argument("--backend", choices=("oracle", "remote", "replay"))
    abl.add_argument("--jobs", type=int)
    abl.add_argument("--seed", type=int)
    abl.set_defaults(func=cmd_ablate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except FixtureError as exc:
        print(f"fixture error: {exc}", file=sys.stderr)
        return 3
    except TransportError as exc:
        print(f"transport error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
