"""Brownian motion and BES3 observed at the times of a rate-1/2 Poisson clock.

Brownian motion sampled at ``2 gamma_1 < 2 gamma_2 < ...`` is the Laplace
walk.  Seen from its overall minimum, a long walk looks like two independent
BES3 processes (one per time direction) sampled the same way, so the lowest
walk values above the continuous minimum converge to the lowest values of
the merged BES3 samples.

BES3 is the norm of a 3-d Brownian motion.  A run from radius ``r`` above
the target level ``v`` comes back to ``v`` with probability ``v / r``; by
rotation invariance and the memoryless clock it then restarts from
``(v, 0, 0)``.  This gives an exact stopping rule.  The alternative
``safety`` rule (stop once the radius exceeds ``safety * v``) is biased by
at most ``1 / safety`` per run and is kept for convergence studies.
"""

from __future__ import annotations

import math

import numpy as np

from .points import BatchAccumulator, PointBatch, PointSample
from .rng import as_generator
from .walk import CHUNK_BUDGET

MAX_STEPS = 10**7
MAX_CANDIDATES = 200_000


def bes3_poisson_batch(
    rng,
    size: int,
    v_target: float,
    safety: float | None = None,
    n_low: int = 1,
    levels=(),
    max_steps: int = MAX_STEPS,
    stop=None,
) -> PointBatch:
    """Values ``<= v_target`` of BES3 from 0 sampled at lags ``2 Exp(1)``.

    ``safety=None`` uses the exact escape rule; otherwise a run stops once
    its radius exceeds ``safety * v_target``.  ``stop``, if given, maps the
    current level counts ``(size, len(levels))`` to a boolean mask of runs
    to abandon early; their output is incomplete.
    """
    if v_target <= 0:
        raise ValueError("v_target must be positive")
    if safety is not None and safety < 10:
        raise ValueError("safety must be >= 10")
    rng = as_generator(rng)
    acc = BatchAccumulator(size, n_low, 0, levels)
    pos = np.zeros((size, 3))
    active = np.arange(size)
    steps = 0
    L = 8
    while active.size:
        a = active.size
        lag = 2 * rng.standard_exponential((a, L))
        inc = rng.standard_normal((a, L, 3)) * np.sqrt(lag)[..., None]
        path = pos[active, None, :] + np.cumsum(inc, axis=1)
        r = np.sqrt((path**2).sum(axis=2))
        if safety is None:
            # first sample above the target decides escape or restart
            above = r > v_target
            hit = above.any(axis=1)
            first = np.where(hit, above.argmax(axis=1), L)
            valid = np.arange(L)[None, :] < first[:, None]
            acc.add(active, r, valid)
            rows = np.flatnonzero(hit)
            r_hit = r[rows, first[rows]]
            back = rng.random(rows.size) < v_target / r_hit
            pos[active] = path[:, -1, :]
            pos[active[rows[back]]] = (v_target, 0.0, 0.0)
            done = np.zeros(a, dtype=bool)
            done[rows[~back]] = True
        else:
            over = r > safety * v_target
            hit = over.any(axis=1)
            first = np.where(hit, over.argmax(axis=1), L)
            valid = (np.arange(L)[None, :] < first[:, None]) & (r <= v_target)
            acc.add(active, r, valid)
            pos[active] = path[:, -1, :]
            done = hit
        if stop is not None:
            done |= stop(acc.counts)[active]
        steps += L
        if steps > max_steps:
            raise RuntimeError(
                f"BES3 sampling exceeded {max_steps} steps with {active.size} runs "
                f"unfinished (v_target={v_target}, safety={safety})"
            )
        active = active[~done]
        L = int(min(max(8, CHUNK_BUDGET // (3 * max(active.size, 1))), 4096))
    return acc.result()


def sample_bes3_poisson(v_target: float, safety: float | None = None, rng=None) -> PointSample:
    """Every sampled BES3 value ``<= v_target`` from one run started at 0."""
    if v_target <= 0:
        raise ValueError("v_target must be positive")
    if safety is not None and safety < 10:
        raise ValueError("safety must be >= 10")
    rng = as_generator(rng)
    vals = []
    p = np.zeros(3)
    for _ in range(MAX_STEPS):
        p = p + rng.standard_normal(3) * math.sqrt(2 * rng.standard_exponential())
        r = float(np.linalg.norm(p))
        if safety is None:
            if r > v_target:
                if rng.random() >= v_target / r:
                    return PointSample(np.array(vals))
                p = np.array([v_target, 0.0, 0.0])
                continue
        elif r > safety * v_target:
            return PointSample(np.array(vals))
        if r <= v_target:
            vals.append(r)
    raise RuntimeError("BES3 sampling exceeded the step budget")


def _pool_draw(rng, m: int, v: float, lower: float, K: int, safety):
    """Both BES3 sides for ``m`` replicas at target ``v``.

    Returns the ``K+1`` lowest pooled values and a mask of draws rejected
    because at least ``K+1`` values fall at or below ``lower``.  Those are
    abandoned as soon as the count is reached.
    """
    levels = (lower,) if lower > 0 else ()

    def stop(counts):
        pair = counts[:m, 0] + counts[m:, 0] >= K + 1
        return np.concatenate([pair, pair])

    b = bes3_poisson_batch(rng, 2 * m, v, safety, n_low=K + 1, levels=levels, stop=stop if levels else None)
    pool = np.sort(np.concatenate([b.low[:m], b.low[m:]], axis=1), axis=1)[:, : K + 1]
    rejected = stop(b.counts)[:m] if levels else np.zeros(m, dtype=bool)
    return pool, rejected


def mk_infty_batch(rng, size: int, K: int, v_target: float = 6.0, safety: float | None = None) -> np.ndarray:
    """``(M_0, ..., M_K)`` of the merged two-sided BES3 pool, shape ``(size, K+1)``.

    A draw at target ``v`` is complete when ``M_K <= v``.  Replicas that
    fail go to target ``2v`` and are redrawn until ``M_K`` lands above
    ``v``, so every replica follows the unconditional law rather than the
    law given an early success.
    """
    rng = as_generator(rng)
    out = np.empty((size, K + 1))
    todo = np.arange(size)
    v, lower = float(v_target), 0.0
    for _ in range(30):
        escalate = []
        drawn, kept = 0, 0
        while todo.size:
            # candidates are iid, so the first non-rejected ones serve the
            # waiting replicas in order
            rate = (kept + 1) / (drawn + 1)
            n = int(min(max(todo.size / rate, todo.size), MAX_CANDIDATES))
            pool, rejected = _pool_draw(rng, n, v, lower, K, safety)
            drawn += n
            keep = np.flatnonzero(~rejected)[: todo.size]
            kept += keep.size
            rows, todo = todo[: keep.size], todo[keep.size :]
            ok = np.isfinite(pool[keep, -1])
            out[rows[ok]] = pool[keep[ok]]
            escalate.append(rows[~ok])
        todo = np.concatenate(escalate)
        if not todo.size:
            return out
        v, lower = 2 * v, v
    raise RuntimeError("could not collect enough BES3 values below the target")


def sample_mk_infty(K: int, v_target: float = 6.0, safety: float | None = None, rng=None) -> PointSample:
    """The ``K`` smallest values above ``M_0`` of the merged BES3 pool,
    i.e. ``M_1 < ... < M_K`` (``M_0``, the smallest value, is excluded)."""
    if K < 1:
        raise ValueError("K must be >= 1")
    return PointSample(mk_infty_batch(rng, 1, K, v_target, safety)[0, 1:])


# --------------------------------------------------------------------------
# Brownian embedding of the walk


def bridge_minimum(rng, a, b, t):
    """Minimum of a Brownian bridge from ``a`` to ``b`` over duration ``t``
    (inverse of ``P(min < m) = exp(-2 (a - m)(b - m) / t)``)."""
    a, b, t = np.broadcast_arrays(*(np.asarray(x, dtype=float) for x in (a, b, t)))
    e = rng.standard_exponential(a.shape)
    return 0.5 * (a + b - np.sqrt((a - b) ** 2 + 2 * t * e))


def embedded_walk(rng, size: int, n: int):
    """Brownian motion at ``n`` Poisson times: ``(S, lags, bridge_minima)``.

    ``S`` has shape ``(size, n+1)`` with ``S[:, 0] = 0``.
    """
    rng = as_generator(rng)
    lags = 2 * rng.standard_exponential((size, n))
    inc = rng.standard_normal((size, n)) * np.sqrt(lags)
    S = np.concatenate([np.zeros((size, 1)), np.cumsum(inc, axis=1)], axis=1)
    mins = bridge_minimum(rng, S[:, :-1], S[:, 1:], lags)
    return S, lags, mins


def walk_minimum_gap_batch(rng, size: int, n: int) -> np.ndarray:
    """``M_{0,n} - M_{-,n}``: lowest walk value minus the Brownian minimum."""
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = as_generator(rng)
    out = np.empty(size)
    rows = max(1, CHUNK_BUDGET // (n + 1))
    for lo in range(0, size, rows):
        b = min(rows, size - lo)
        S, _, mins = embedded_walk(rng, b, n)
        out[lo : lo + b] = S.min(axis=1) - np.minimum(mins.min(axis=1), 0.0)
    return out


def sample_walk_minimum_gap(n: int, rng) -> float:
    return float(walk_minimum_gap_batch(rng, 1, n)[0])
