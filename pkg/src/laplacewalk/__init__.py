"""Extreme order statistics of the symmetric Laplace random walk.

Closed-form laws live in :mod:`laplacewalk.exact`; the samplers in
:mod:`laplacewalk.walk`, :mod:`laplacewalk.branching`,
:mod:`laplacewalk.bessel` and :mod:`laplacewalk.embed` simulate the same
point processes by different constructions, and :mod:`laplacewalk.verify`
checks that they agree.
"""

__version__ = "0.1.0"
