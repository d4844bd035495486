"""Run the full N x k x M x W grid and print the omega/tau tables.

    python scripts/run_table_grid.py [--out runs/table] [--seed 0] [--scenario regional]
"""

import argparse
from dataclasses import replace

from edgeplace.experiment import ExperimentManifest, run_grid


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default="runs/table")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--scenario", default="regional")
    args = ap.parse_args()

    m = ExperimentManifest(out_dir=args.out)
    m.pipeline = replace(m.pipeline, seed=args.seed)
    m.trace = replace(m.trace, scenario=args.scenario)
    rows = run_grid(m.validate(), progress=lambda r: print(".", end="", flush=True))
    print()
    print(open(f"{args.out}/summary.txt").read())

    # message accounting next to the full-broadcast baseline
    print(f"{'N':>4} {'k':>2} {'M':>3} {'W':>3} {'repl':>6} {'baseline':>9} {'vec/s':>8}")
    for r in rows:
        print(f"{r['N']:>4} {r['k']:>2} {r['M']:>3} {r['W']:>3} {r['repl_msgs']:>6} {r['baseline_msgs']:>9} "
              f"{float(r['vectors_per_sec']):>8.0f}")


if __name__ == "__main__":
    main()
