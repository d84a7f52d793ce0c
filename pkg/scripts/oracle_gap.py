"""How often GA, GASA and GASA+RL reach the exhaustive optimum on tiny instances.

    python scripts/oracle_gap.py --instances 50 --budget 500
"""

import argparse

from drcsched.agent import Agent, TrainerConfig, ppo_train
from drcsched.dataio import generate_instance, preset
from drcsched.search import brute_force, reference_baseline, run_heuristic


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--instances", type=int, default=50)
    ap.add_argument("--budget", type=int, default=500)
    ap.add_argument("--train-steps", type=int, default=3000)
    args = ap.parse_args()

    trainer = generate_instance(preset("tiny", seed=999))
    run = ppo_train(trainer, config=TrainerConfig(total_steps=args.train_steps), seed=0, baseline=reference_baseline(trainer))
    hits = {h: 0 for h in ("ga", "gasa", "gasa-rl")}
    print("seed\toptimum\tga\tgasa\tgasa-rl")
    for seed in range(args.instances):
        inst = generate_instance(preset("tiny", seed=seed))
        base = reference_baseline(inst)
        opt = brute_force(inst, base).z
        row = [f"{seed}", f"{opt:.6f}"]
        for h in hits:
            policy = Agent(run.net, "sample") if h == "gasa-rl" else None
            z = run_heuristic(h, inst, args.budget, seed, policy=policy, baseline=base).best_z
            hits[h] += abs(z - opt) <= 1e-9
            row.append(f"{z:.6f}")
        print("\t".join(row), flush=True)
    for h, n in hits.items():
        print(f"{h}: {n}/{args.instances} optimal")


if __name__ == "__main__":
    main()
