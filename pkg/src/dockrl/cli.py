"""dockrl command line: train, eval, plot, check."""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from .config import ConfigError, RunConfig
from .harness import (
    evaluate,
    plot_trajectories,
    read_trajectory_csv,
    train,
)
from .nn import CheckpointFormatError


def _default_out_root() -> Path:
    return Path(os.environ.get("DOCKRL_OUT", "runs"))


def _load_config(args) -> RunConfig:
    cfg = RunConfig.load(args.config)
    for override in args.set or []:
        cfg.apply_override(override)
    if args.seed is not None:
        cfg.harness.seed = args.seed
    cfg.validate()
    return cfg


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", required=True, help="path to a JSON run config")
    p.add_argument("--seed", type=int, default=None, help="override harness.seed")
    p.add_argument("--out", default=None, help="output directory")
    p.add_argument(
        "--set",
        action="append",
        metavar="KEY=VALUE",
        help="dotted config override, e.g. agent.gamma=0.95 (repeatable)",
    )


def cmd_train(args) -> int:
    cfg = _load_config(args)
    out = Path(args.out) if args.out else _default_out_root() / "train"
    result = train(cfg, out)
    print(json.dumps(result))
    return 0


def cmd_eval(args) -> int:
    cfg = _load_config(args)
    out = Path(args.out) if args.out else _default_out_root() / "eval"
    out.mkdir(parents=True, exist_ok=True)
    summary, records = evaluate(cfg, args.checkpoint, out)
    _, geom, _ = cfg._reward_objects()
    svg = plot_trajectories(records, geom, cfg.env.workspace_half_extent)
    (out / "trajectories.svg").write_text(svg)
    print(json.dumps(summary.to_dict()))
    return 0


def cmd_plot(args) -> int:
    cfg = RunConfig.load(args.config) if args.config else RunConfig()
    _, geom, _ = cfg._reward_objects()
    records = [
        read_trajectory_csv(p, geom, cfg.env.workspace_half_extent)
        for p in args.trajectories
    ]
    svg = plot_trajectories(records, geom, cfg.env.workspace_half_extent)
    out = Path(args.out) if args.out else Path("trajectories.svg")
    out.write_text(svg)
    print(str(out))
    return 0


def cmd_check(args) -> int:
    cfg = _load_config(args)
    print(json.dumps(cfg.to_dict(), indent=2))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dockrl", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="train an agent")
    _add_common(p_train)
    p_train.set_defaults(fn=cmd_train)

    p_eval = sub.add_parser("eval", help="evaluate a checkpoint")
    _add_common(p_eval)
    p_eval.add_argument("--checkpoint", required=True, help="actor checkpoint file")
    p_eval.set_defaults(fn=cmd_eval)

    p_plot = sub.add_parser("plot", help="plot trajectory CSVs as SVG")
    p_plot.add_argument("trajectories", nargs="+", help="trajectory CSV files")
    p_plot.add_argument("--config", default=None, help="config for geometry (optional)")
    p_plot.add_argument("--out", default=None, help="output SVG path")
    p_plot.set_defaults(fn=cmd_plot)

    p_check = sub.add_parser("check", help="validate and print the resolved config")
    _add_common(p_check)
    p_check.set_defaults(fn=cmd_check)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as e:
        print(f"error: config: {e}", file=sys.stderr)
        return 2
    except CheckpointFormatError as e:
        print(f"error: checkpoint: {e}", file=sys.stderr)
        return 2
    except (OSError, ValueError, RuntimeError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
