"""Vectors per second at N=100, M=10 for both windows, a few repeats each."""

import time

from edgeplace.experiment import ExperimentManifest, load_matrix, run_cell

man = ExperimentManifest()
mat = load_matrix(man.trace, 10)
for w in (10, 50):
    for k in (2, 5):
        rates = []
        for _ in range(3):
            t0 = time.perf_counter()
            run_cell(man, 100, k, 10, w, mat)
            rates.append(man.trace.stream_length / (time.perf_counter() - t0))
        print(f"N=100 M=10 W={w} k={k}: best {max(rates):.0f} vec/s, worst {min(rates):.0f} vec/s")
