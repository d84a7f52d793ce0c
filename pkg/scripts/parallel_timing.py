"""Wall time per generation and best Z at several parallelism levels.

    python scripts/parallel_timing.py --preset realworld --levels 1 2 4
"""

import argparse
import os
import statistics

from drcsched.dataio import generate_instance, preset
from drcsched.search import reference_baseline, run_heuristic


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--preset", default="realworld")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--heuristic", default="gasa")
    ap.add_argument("--budget", type=int, default=500)
    ap.add_argument("--levels", type=int, nargs="+", default=[1, 2, 4])
    args = ap.parse_args()

    inst = generate_instance(preset(args.preset, seed=args.seed))
    base = reference_baseline(inst)
    print(f"{len(inst.tasks)} tasks, {os.cpu_count()} cores")
    print("parallelism\tbest_z\tseconds_per_generation")
    for p in args.levels:
        res = run_heuristic(args.heuristic, inst, args.budget, 1, parallelism=p, baseline=base)
        print(f"{p}\t{res.best_z:.6f}\t{statistics.fmean(res.iteration_times[1:]):.4f}", flush=True)


if __name__ == "__main__":
    main()
