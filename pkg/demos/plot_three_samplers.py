"""
One law, three samplers
=======================

The walk stopped at its first descent below the start, a marked birth-death
process and a critical binary branching process all produce the same random
point set on the positive half-line.  We compare the total number of points.
"""

# %%
import numpy as np

from laplacewalk import branching, exact, walk

n = 40_000
samples = {
    "walk": walk.stopped_walk_batch(np.random.default_rng(1), n, n_low=1, n_high=1),
    "marked": branching.marked_bd_batch(np.random.default_rng(2), n),
    "geiger": branching.geiger_batch(np.random.default_rng(3), n),
}

# %%
# Frequencies of 0..5 points, with the exact law in the last row.

pmf = exact.nu_pmf_series(6).to_float().coeffs
for name, b in samples.items():
    freq = np.bincount(np.minimum(b.total, 6), minlength=7)[:6] / n
    print(f"{name:>7}", np.round(freq, 4))
print(f"{'exact':>7}", np.round(np.asarray(pmf[:6], dtype=float), 4))

# %%
# The highest point exceeds ``t`` with probability ``1 / (2 + t)``.

for t in (0.5, 1.0, 4.0):
    row = [(b.high[:, 0] > t).mean() for b in samples.values()]
    print(t, np.round(row, 4), round(exact.max_mnu_tail(t), 4))
