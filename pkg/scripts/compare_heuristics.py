"""Mean Z of every heuristic on generated instances, final and at generation 10.

    python scripts/compare_heuristics.py --instances gbrt01:0 gbrt02:0 gbrt01:1 --seeds 10
"""

import argparse
import statistics
import time

from drcsched.agent import Agent, TrainerConfig, ppo_train
from drcsched.dataio import generate_instance, preset
from drcsched.search import HEURISTICS, reference_baseline, run_heuristic


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--instances", nargs="+", default=["gbrt01:0", "gbrt02:0", "gbrt01:1"], help="preset:seed")
    ap.add_argument("--heuristics", default=",".join(HEURISTICS))
    ap.add_argument("--seeds", type=int, default=10)
    ap.add_argument("--budget", type=int, default=500)
    ap.add_argument("--train-steps", type=int, default=30_000)
    ap.add_argument("--agent-mode", choices=("greedy", "sample"), default="sample")
    args = ap.parse_args()
    heuristics = args.heuristics.split(",")

    print("instance\theuristic\tmean_z\tstd_z\tmean_z_gen10\tseconds")
    for spec in args.instances:
        name, seed = spec.split(":")
        inst = generate_instance(preset(name, seed=int(seed)))
        base = reference_baseline(inst)
        policy = None
        if "gasa-rl" in heuristics:
            run = ppo_train(inst, config=TrainerConfig(total_steps=args.train_steps), seed=int(seed), baseline=base)
            policy = Agent(run.net, args.agent_mode)
        for h in heuristics:
            t0 = time.perf_counter()
            runs = [run_heuristic(h, inst, args.budget, s, policy=policy, baseline=base) for s in range(args.seeds)]
            zs = [r.best_z for r in runs]
            at10 = [r.z_curve[min(10, len(r.z_curve) - 1)] for r in runs]
            std = statistics.stdev(zs) if len(zs) > 1 else 0.0
            print(
                f"{spec}\t{h}\t{statistics.fmean(zs):.4f}\t{std:.4f}\t{statistics.fmean(at10):.4f}\t{time.perf_counter() - t0:.1f}",
                flush=True,
            )


if __name__ == "__main__":
    main()
