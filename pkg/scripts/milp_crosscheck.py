"""Solve the exported MILP with HiGHS and compare against the exhaustive decode.

Needs the optional ``highspy`` package.

    python scripts/milp_crosscheck.py --instances 10 --tasks 2
"""

import argparse
import os
import tempfile

import highspy

from drcsched.dataio import export_milp, generate_instance, preset
from drcsched.search import brute_force, reference_baseline


def solve(text):
    h = highspy.Highs()
    h.setOptionValue("output_flag", False)
    # default relative gap leaves differences around 1e-5
    h.setOptionValue("mip_rel_gap", 0.0)
    h.setOptionValue("mip_abs_gap", 0.0)
    fd, path = tempfile.mkstemp(suffix=".lp")
    with os.fdopen(fd, "w") as f:
        f.write(text)
    try:
        h.readModel(path)
        h.run()
    finally:
        os.unlink(path)
    return h.modelStatusToString(h.getModelStatus()), h.getInfo().objective_function_value


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--instances", type=int, default=10)
    ap.add_argument("--tasks", type=int, default=2)
    args = ap.parse_args()

    print("seed\tstatus\tmilp_z\tsimulated_optimum\tgap")
    for seed in range(args.instances):
        inst = generate_instance(preset("tiny", seed=seed, n_tasks=args.tasks))
        base = reference_baseline(inst)
        status, z = solve(export_milp(inst, baseline=base).text)
        opt = brute_force(inst, base).z
        print(f"{seed}\t{status}\t{z:.6f}\t{opt:.6f}\t{opt - z:.2e}", flush=True)


if __name__ == "__main__":
    main()
