"""Command-line interface: ``dsaclab <subcommand> ...``.

Exit codes: 0 success, 2 configuration error, 3 data or compatibility error,
4 numerical failure (a NaN or infinity surfaced during training).
Set ``IL_LOG_LEVEL`` to ``error``, ``info`` (default) or ``debug``.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from .autodiff import NonFiniteError
from .config import ConfigError, load_config
from .harness import (
    CheckpointError,
    MetricsFormatError,
    WrapperMismatchError,
    evaluate_checkpoint,
    imitate_from_file,
    load_checkpoint,
    plot,
    record_demos_to_file,
    sweep,
    train_expert,
)
from .replay import DemoFormatError, EnvMismatchError, load_demos

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4
LOG_LEVELS = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}

log = logging.getLogger("dsaclab")


def _common(p: argparse.ArgumentParser, out_default: str) -> None:
    p.add_argument("--config", type=Path, help="key = value configuration file")
    p.add_argument("--seed", type=int, help="root seed (overrides the config)")
    p.add_argument("--out", type=Path, default=Path(out_default), help=f"output directory (default {out_default})")
    p.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                   help="override one config key; repeatable")


def parse_seeds(text: str) -> list[int]:
    """``"1-5"`` or ``"1,3,7"`` (or a mix such as ``"1-3,8"``)."""
    seeds = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if "-" in part[1:]:
            lo, hi = part.split("-", 1) if not part.startswith("-") else (part, part)
            seeds.extend(range(int(lo), int(hi) + 1))
        else:
            seeds.append(int(part))
    if not seeds:
        raise argparse.ArgumentTypeError("empty seed list")
    return seeds


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dsaclab", description="Soft-Q imitation learning experiments.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train-expert", help="train a SAC expert on the environment reward")
    _common(p, "runs/expert")

    p = sub.add_parser("record-demos", help="roll out an expert checkpoint into a demo file")
    p.add_argument("--checkpoint", type=Path, required=True)
    p.add_argument("-n", "--episodes", type=int, default=4)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=Path, default=Path("demos.json"), help="demo file, or a directory to hold demos.json")
    p.add_argument("--config", type=Path, help="optional config; its env must match the checkpoint")
    p.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE")

    p = sub.add_parser("imitate", help="run SQIL, DSAC or BC from a demo file")
    _common(p, "runs/imitate")
    p.add_argument("--demos", type=Path, required=True)

    p = sub.add_parser("evaluate", help="noise-free evaluation of a checkpoint")
    p.add_argument("--checkpoint", type=Path, required=True)
    p.add_argument("--episodes", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=Path, help="also write the summary JSON here")

    p = sub.add_parser("sweep", help="imitation runs over several seeds plus an aggregate")
    _common(p, "runs/sweep")
    p.add_argument("--demos", type=Path, required=True)
    p.add_argument("--seeds", type=parse_seeds, default=parse_seeds("1-5"))

    p = sub.add_parser("plot", help="score and reward curves from metrics files")
    p.add_argument("metrics", type=Path, nargs="+")
    p.add_argument("--out", type=Path, default=Path("scores.svg"))
    p.add_argument("--expert-return", type=float)
    return parser


def _config(args, **explicit):
    return load_config(args.config, args.overrides, seed=getattr(args, "seed", None), **explicit)


def _run(args) -> int:
    if args.command == "train-expert":
        cfg = _config(args)
        result = train_expert(cfg, args.out)
        print(json.dumps({"out": str(args.out), "env_steps": result.env_steps, "final_eval": result.final_eval}))
        return EXIT_OK

    if args.command == "record-demos":
        ckpt = load_checkpoint(args.checkpoint)
        if args.config is not None or args.overrides:
            cfg = load_config(args.config, args.overrides)
            if cfg.env != ckpt.env:
                raise CheckpointError(f"checkpoint was trained on {ckpt.env!r}, config asks for {cfg.env!r}")
        if args.episodes < 1:
            raise ConfigError(["episodes: must be >= 1"])
        path = args.out if args.out.suffix == ".json" else args.out / "demos.json"
        path.parent.mkdir(parents=True, exist_ok=True)
        trajs = record_demos_to_file(ckpt, args.episodes, args.seed, path)
        print(json.dumps({"out": str(path), "episodes": len(trajs), "returns": [t.env_return for t in trajs]}))
        return EXIT_OK

    if args.command == "imitate":
        cfg = _config(args)
        result = imitate_from_file(cfg, args.demos, args.out)
        print(json.dumps({"out": str(args.out), "final_eval": result.final_eval, "best_eval": result.best_eval}))
        return EXIT_OK

    if args.command == "evaluate":
        if args.episodes < 1:
            raise ConfigError(["episodes: must be >= 1"])
        summary = evaluate_checkpoint(load_checkpoint(args.checkpoint), args.episodes, args.seed)
        text = json.dumps(summary, indent=1)
        if args.out is not None:
            args.out.parent.mkdir(parents=True, exist_ok=True)
            args.out.write_text(text + "\n")
        print(text)
        return EXIT_OK

    if args.command == "sweep":
        cfg = _config(args)
        demos = load_demos(args.demos, _env_spec(cfg.env)).trajectories
        result = sweep(cfg, args.seeds, demos, args.out)
        print(json.dumps({"out": str(args.out), "seeds": args.seeds, "failed": sorted(result.failures)}))
        return EXIT_OK if result.ok else EXIT_DATA

    if args.command == "plot":
        files = plot(args.metrics, args.out, args.expert_return)
        print(json.dumps({"files": [str(f) for f in files]}))
        return EXIT_OK
    raise AssertionError(args.command)


def _env_spec(name):
    from .envs import env_spec

    return env_spec(name)


def main(argv=None) -> int:
    level = os.environ.get("IL_LOG_LEVEL", "info").lower()
    logging.basicConfig(level=LOG_LEVELS.get(level, logging.INFO), format="%(levelname)s %(message)s", stream=sys.stderr)
    if level not in LOG_LEVELS:
        log.warning("IL_LOG_LEVEL=%r not recognised; using info", level)
    args = build_parser().parse_args(argv)
    try:
        return _run(args)
    except ConfigError as e:
        for problem in e.problems:
            print(f"config error: {problem}", file=sys.stderr)
        return EXIT_CONFIG
    except NonFiniteError as e:
        print(f"numerical failure: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    except (DemoFormatError, EnvMismatchError, CheckpointError, WrapperMismatchError, MetricsFormatError,
            FileNotFoundError) as e:
        print(f"data error: {e}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
