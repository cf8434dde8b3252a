"""A small run of the cycle-count harness.

Counts sign changes of the displacement function on three rays (from A1,
A2 and S) over a delta x gamma grid and reports the largest counts seen.
The acceptance suite runs the same harness on a 100 x 100 grid.

    python3 demos/03_count_harness.py
"""
import time

import numpy as np

from qbl import fixtures
from qbl.bifurcation import cycle_count_harness
from qbl.model import ModelParams

h = fixtures.load()["scenario"]["harness"]
base = ModelParams(**h["base"])
grid = {"delta": np.linspace(0.15, 0.30, 8), "gamma": np.linspace(-0.53, -0.47, 25)}
t0 = time.perf_counter()
out = cycle_count_harness(base, grid)
print(f"{out['samples']} samples in {time.perf_counter() - t0:.1f} s, {out['skipped']} without an A1/S/A2 triple")
print(f"largest total {out['max_total']}, largest concentric {out['max_concentric']}")
print(f"histogram of totals: {out['histogram']}")
