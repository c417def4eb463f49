#!/usr/bin/env python3
"""Full-size experiment driver: train + evaluate the full_* reference
configs (400-300-200-100 networks, 1e5 steps) for one or more algorithms.

Outputs land under runs/full/<algo>_seed<seed>/ with a train/ subfolder
(learning curve, checkpoints) and an eval/ subfolder (summary JSON,
trajectory CSVs, SVG plot).
"""

import argparse
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(ROOT / "src"))

from dockrl.config import RunConfig  # noqa: E402
from dockrl.harness import evaluate, train  # noqa: E402


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--algos", nargs="*", default=["td3", "sac", "ppo"])
    ap.add_argument("--seeds", nargs="*", type=int, default=[0])
    ap.add_argument("--out", default=str(ROOT / "runs" / "full"))
    args = ap.parse_args(argv)

    for algo in args.algos:
        for seed in args.seeds:
            cfg = RunConfig.load(ROOT / "configs" / f"full_{algo}.json")
            cfg.harness.seed = seed
            cfg.validate()
            base = Path(args.out) / f"{algo}_seed{seed}"
            print(f"{algo} seed {seed}: training ...", flush=True)
            train(cfg, base / "train")
            summary, _ = evaluate(cfg, base / "train" / "actor_final.bin", base / "eval")
            print(
                f"{algo} seed {seed}: success {summary.success_count}/10, "
                f"mean return {summary.mean_return:.1f}, "
                f"mean steps {summary.mean_steps_to_goal}",
                flush=True,
            )
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
