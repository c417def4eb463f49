#!/usr/bin/env python3
"""Pre-train the cached desk-scale runs consumed by tests/test_acceptance.py.

Runs every (algo, seed) pair that is missing from results/acceptance and
prints a one-line evaluation summary per run.  Safe to re-run: existing
runs are left untouched (training is deterministic, so a cached run and a
fresh one are byte-identical anyway).
"""

import argparse
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(ROOT / "src"))

from dockrl.config import RunConfig  # noqa: E402
from dockrl.harness import evaluate_policy, policy_from_checkpoint, train  # noqa: E402

RESULTS = ROOT / "results" / "acceptance"
SEEDS = (0, 1, 2)


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--algos", nargs="*", default=["td3", "sac", "ppo"])
    ap.add_argument("--seeds", nargs="*", type=int, default=list(SEEDS))
    args = ap.parse_args(argv)

    for algo in args.algos:
        for seed in args.seeds:
            cfg = RunConfig.load(ROOT / "configs" / f"desk_{algo}.json")
            cfg.harness.seed = seed
            cfg.validate()
            out = RESULTS / f"{algo}_seed{seed}"
            if (out / "actor_final.bin").exists():
                print(f"{algo} seed {seed}: cached at {out}")
            else:
                print(f"{algo} seed {seed}: training ...", flush=True)
                train(cfg, out)
            policy = policy_from_checkpoint(algo, out / "actor_final.bin")
            summary, _ = evaluate_policy(cfg, policy)
            print(
                f"{algo} seed {seed}: success {summary.success_count}/10, "
                f"mean return {summary.mean_return:.1f}, "
                f"mean steps {summary.mean_steps_to_goal}",
                flush=True,
            )
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
