"""
Multi-hop error growth
======================

In a chain, a depth-j measurement is translated through j fitted per-link
parameter sets, so per-link noise compounds with depth.  This runs 6-hop,
600 s experiments and reports the mean absolute error per hop level.
"""

import numpy as np

from synclab.analysis import accuracy_metrics, run_config
from synclab.config import multihop_accuracy_config

SEEDS = range(10)
HOPS = 6

by_level = {level: [] for level in range(1, HOPS + 1)}
for seed in SEEDS:
    report = accuracy_metrics(run_config(multihop_accuracy_config(seed=seed)))
    for level, stats in report.by_level.items():
        by_level[level].extend(stats.errors_s)

print(f"pooled over {len(list(SEEDS))} seeds, {HOPS}-hop chain, 600 s, SI = 1 s:")
print("  hops from head    n     MAE (us)    max |err| (us)")
previous = None
for level in range(1, HOPS + 1):
    errs = np.abs(np.asarray(by_level[level]))
    growth = "" if previous is None else f"   (+{(errs.mean() - previous) * 1e6:.2f})"
    print(
        f"  {level:14d}    {len(errs):4d} {errs.mean() * 1e6:9.3f}    "
        f"{errs.max() * 1e6:11.3f}{growth}"
    )
    previous = errs.mean()

print(
    "\ntakeaway: each hop adds roughly a microsecond of MAE -- translation"
    "\nerrors accumulate near-linearly with depth, which is why deep chains"
    "\nneed either better per-link estimates or shorter sync intervals."
)
