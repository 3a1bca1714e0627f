"""
Gaps above the minimum
======================

The gaps ``D_k`` between consecutive order statistics of a long Laplace walk,
counted from the overall minimum, have closed-form tails.  Here we draw the
gaps from the critical branching construction and set the empirical tails
beside the exact ones.
"""

# %%
import numpy as np

from laplacewalk import branching, exact

rng = np.random.default_rng(2024)
w, _ = branching.w_branching_batch(rng, 50_000, 6)
gaps = np.diff(np.concatenate([np.zeros((w.shape[0], 1)), w], axis=1), axis=1)

# %%
# Empirical against exact ``P(D_k > v)``.  The standard error of each
# empirical entry is about ``sqrt(p (1 - p) / 50000)``, near 0.002.

print(" k     v   empirical      exact")
for k in (1, 2, 4, 6):
    for v in (0.2, 0.5, 1.0):
        emp = (gaps[:, k - 1] > v).mean()
        print(f"{k:2d} {v:5.1f} {emp:11.4f} {exact.tail_dk(k, v):10.4f}")

# %%
# Mean gaps shrink like ``u_k ~ 1/sqrt(pi k)``.

for k in range(1, 7):
    print(k, round(gaps[:, k - 1].mean(), 4), round(exact.expected_gap(k), 4))
