"""
Rescaled deep gaps
==================

Far above the minimum, ``sqrt(k/2) D_k`` settles to a fixed law, namely
that of ``eps / (2 chi_3)`` with ``eps`` standard exponential and ``chi_3``
the norm of a 3-d standard Gaussian.  The script writes a plot-ready CSV of
the empirical and limit CDFs.
"""

# %%
import numpy as np

from laplacewalk import branching, exact, io

rng = np.random.default_rng(7)
k = 200
w, _ = branching.w_branching_batch(rng, 20_000, k)
x = np.sqrt(k / 2) * (w[:, k - 1] - w[:, k - 2])

# %%
grid = np.linspace(0.0, 1.5, 31)
emp = (x[:, None] <= grid).mean(axis=0)
limit = exact.limit_cdf(grid)
print("largest CDF gap:", np.abs(emp - limit).max())

# %%
# The ratio representation gives a second, independent sample.

ratio = rng.standard_exponential(20_000) / (2 * np.linalg.norm(rng.standard_normal((20_000, 3)), axis=1))
print("ratio sample, largest CDF gap:", np.abs((ratio[:, None] <= grid).mean(axis=0) - limit).max())

# %%
text = io.csv_text(["x", "empirical", "limit"], zip(grid, emp, limit))
with open("scaling_limit_cdf.csv", "w", newline="") as fh:
    fh.write(text)
