"""How tau moves with N under each workload scenario and seed.

Prints the final-moment tau (the reported metric) next to the insert-time
tau diagnostic, for W=10 and every (k, M). Useful when checking whether
tau rises with the number of nodes.

    python scripts/compare_scenarios.py [--seeds 0 1 2] [--scenarios regional pooled cold]
"""

import argparse

from edgeplace.experiment import ExperimentManifest, load_matrix, run_cell


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2])
    ap.add_argument("--scenarios", nargs="+", default=["regional", "pooled", "cold"])
    ap.add_argument("--nodes", type=int, nargs="+", default=[10, 50, 100])
    args = ap.parse_args()

    base = ExperimentManifest()
    mats = {m: load_matrix(base.trace, m) for m in (2, 10)}
    print(f"{'scenario':<9} {'seed':>4} {'k':>2} {'M':>3} " + " ".join(f"{'N=' + str(n):>17}" for n in args.nodes))
    for scen in args.scenarios:
        for seed in args.seeds:
            man = ExperimentManifest()
            man.trace.scenario = scen
            man.pipeline.seed = seed
            for k in (2, 5):
                for m in (2, 10):
                    cells = []
                    for n in args.nodes:
                        r = run_cell(man, n, k, m, 10, mats[m])
                        cells.append(f"{r.tau:.4f}/{r.tau_at_insert:.4f} w{r.omega:.2f}")
                    print(f"{scen:<9} {seed:>4} {k:>2} {m:>3} " + " ".join(f"{c:>17}" for c in cells))
    print("\ncells: final tau / insert-time tau, w = omega")


if __name__ == "__main__":
    main()
