"""The symmetric Laplace walk: paths, order statistics, Feller chains and the
walk stopped when it first goes negative.

Single-path functions (``sample_laplace_walk``, ``sample_stopped_walk``) are
the readable reference; the ``*_batch`` functions simulate many independent
replicas at once and are what the statistical checks use.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import stats
from .points import BatchAccumulator, PointBatch
from .rng import as_generator

DEFAULT_CAP = 10**7
# elements per vectorised chunk; bounds peak memory of the batch engines
CHUNK_BUDGET = 1 << 21


def laplace_increments(rng, shape) -> np.ndarray:
    """Standard Laplace draws as differences of two unit exponentials."""
    rng = as_generator(rng)
    return rng.standard_exponential(shape) - rng.standard_exponential(shape)


# --------------------------------------------------------------------------
# paths and order statistics


@dataclass(frozen=True)
class WalkPath:
    increments: np.ndarray
    sums: np.ndarray  # S_0 = 0, S_1, ..., S_n

    @property
    def n(self) -> int:
        return self.increments.size


def sample_laplace_walk(n: int, rng) -> WalkPath:
    """``n`` steps of the Laplace walk; resampled in the (null) event of a tie."""
    if n < 0:
        raise ValueError("n must be nonnegative")
    rng = as_generator(rng)
    while True:
        x = laplace_increments(rng, n)
        s = np.concatenate([[0.0], np.cumsum(x)])
        if np.unique(s).size == s.size:
            return WalkPath(x, s)


@dataclass(frozen=True)
class OrderStats:
    sorted: np.ndarray  # M_{0,n} <= ... <= M_{n,n}
    gaps: np.ndarray  # D_{k,n}, k = 1..n
    shifted: np.ndarray  # W_{k,n} = M_{k,n} - M_{0,n}, k = 0..n


def order_stats(path: WalkPath | Sequence[float]) -> OrderStats:
    sums = path.sums if isinstance(path, WalkPath) else np.asarray(path, dtype=float)
    m = np.sort(sums, kind="stable")
    return OrderStats(m, np.diff(m), m - m[0])


def feller_chains(path: WalkPath) -> tuple[np.ndarray, np.ndarray]:
    """Upward and downward Feller chains of a finite path.

    ``up`` collects the partial sums of the increments ``X_k`` with
    ``S_k > 0``, ``down`` those with ``S_k <= 0``.  Both start with the value
    0 at index 0, so ``len(up) + len(down) == n + 2`` and
    ``S_k == up[N+_k] + down[N-_k]``.
    """
    pos = path.sums[1:] > 0
    x = path.increments
    up = np.concatenate([[0.0], np.cumsum(x[pos])])
    down = np.concatenate([[0.0], np.cumsum(x[~pos])])
    return up, down


def reconstruct_from_chains(path: WalkPath, up: np.ndarray, down: np.ndarray) -> np.ndarray:
    pos = path.sums[1:] > 0
    n_up = np.concatenate([[0], np.cumsum(pos)])
    n_down = np.concatenate([[0], np.cumsum(~pos)])
    return up[n_up] + down[n_down]


def feller_levels(path: WalkPath) -> np.ndarray:
    """Sorted levels ``{S_up_j, j>=1} u {-S_down_j, j>=1}``; ``W_1, W_2, ...``."""
    up, down = feller_chains(path)
    return np.sort(np.concatenate([up[1:], -down[1:]]))


def feller_w_batch(rng, size: int, n: int, K: int, side: str = "both") -> np.ndarray:
    """Lowest ``K`` Feller-chain levels of ``size`` walks of length ``n``.

    With ``side='both'`` these are ``(W_1, ..., W_K)``: every step contributes
    one level, ``S_up`` at its current index if ``S_k > 0`` and otherwise
    ``-S_down``.  ``side='up'`` keeps only the upward chain.
    """
    if side not in ("both", "up"):
        raise ValueError("side must be 'both' or 'up'")
    rng = as_generator(rng)
    rows = max(1, CHUNK_BUDGET // max(n, 1))
    out = np.empty((size, K))
    for lo in range(0, size, rows):
        b = min(rows, size - lo)
        x = laplace_increments(rng, (b, n))
        s = np.cumsum(x, axis=1)
        pos = s > 0
        up = np.cumsum(np.where(pos, x, 0.0), axis=1)
        if side == "up":
            levels = np.where(pos, up, np.inf)
        else:
            down = np.cumsum(np.where(pos, 0.0, x), axis=1)
            levels = np.where(pos, up, -down)
        part = np.partition(levels, K - 1, axis=1)[:, :K]
        out[lo : lo + b] = np.sort(part, axis=1)
    return out


def walk_gaps_batch(rng, size: int, n: int, K: int) -> np.ndarray:
    """Lowest ``K`` gaps ``D_{k,n}`` of ``size`` independent n-step walks."""
    rng = as_generator(rng)
    rows = max(1, CHUNK_BUDGET // max(n + 1, 1))
    out = np.empty((size, K))
    for lo in range(0, size, rows):
        b = min(rows, size - lo)
        s = np.concatenate([np.zeros((b, 1)), np.cumsum(laplace_increments(rng, (b, n)), axis=1)], axis=1)
        part = np.sort(np.partition(s, K, axis=1)[:, : K + 1], axis=1)
        out[lo : lo + b] = np.diff(part, axis=1)
    return out


# --------------------------------------------------------------------------
# the walk stopped at its first descending ladder time


@dataclass(frozen=True)
class StoppedWalk:
    """One walk run until ``S_k < 0`` (or until the step cap).

    ``levels`` are ``M_1 < ... < M_nu``, the sorted values ``S_1..S_nu``;
    ``M_0 = 0`` is implicit.  A truncated walk has ``nu`` as a lower bound and
    no overshoot.
    """

    sums: np.ndarray
    nu: int
    levels: np.ndarray
    overshoot: float
    truncated: bool = False

    @property
    def spacings(self) -> np.ndarray:
        return np.diff(np.concatenate([[0.0], self.levels]))

    @property
    def max_level(self) -> float:
        return float(self.levels[-1]) if self.nu else 0.0


def sample_stopped_walk(rng, cap: int = DEFAULT_CAP, chunk: int = 256) -> StoppedWalk:
    """Run one walk until it first goes negative.

    ``E nu`` is infinite, so walks still nonnegative after ``cap`` steps are
    returned with ``truncated=True``.
    """
    rng = as_generator(rng)
    pieces = [np.zeros(1)]
    s = 0.0
    steps = 0
    while steps < cap + 1:
        L = min(chunk, cap + 1 - steps)
        p = s + np.cumsum(laplace_increments(rng, L))
        neg = np.flatnonzero(p < 0)
        if neg.size:
            j = neg[0]
            pieces.append(p[: j + 1])
            sums = np.concatenate(pieces)
            body = sums[1:-1]
            return StoppedWalk(sums, body.size, np.sort(body), float(-sums[-1]))
        pieces.append(p)
        s = p[-1]
        steps += L
        chunk = min(chunk * 2, 1 << 16)
    sums = np.concatenate(pieces)
    return StoppedWalk(sums, sums.size - 1, np.sort(sums[1:]), math.nan, truncated=True)


def stopped_walk_batch(
    rng,
    size: int,
    cap: int = 10**5,
    n_low: int = 1,
    n_high: int = 1,
    levels: Sequence[float] = (),
) -> PointBatch:
    """Simulate ``size`` stopped walks in lockstep.

    The points of a replica are its levels ``M_1..M_nu`` and ``total`` is
    ``nu``.  Active walks advance in chunks whose length grows as walks
    finish, so the number of Python-level iterations stays small even though
    ``nu`` has infinite mean.  Walks still nonnegative after ``cap + 1`` steps
    (``nu > cap``) are flagged as truncated and summarised from the path so
    far.  ``extra['overshoot']`` holds ``-S_tau`` (NaN when truncated).
    """
    rng = as_generator(rng)
    acc = BatchAccumulator(size, n_low, n_high, levels)
    S = np.zeros(size)
    over = np.full(size, np.nan)
    active = np.arange(size)
    steps = 0
    max_steps = cap + 1
    while active.size:
        a = active.size
        L = int(min(max(8, CHUNK_BUDGET // a), max_steps - steps))
        p = S[active, None] + np.cumsum(laplace_increments(rng, (a, L)), axis=1)
        neg = p < 0
        stopped = neg.any(axis=1)
        first = np.where(stopped, neg.argmax(axis=1), L)
        acc.add(active, p, np.arange(L)[None, :] < first[:, None])
        rows = np.flatnonzero(stopped)
        over[active[rows]] = -p[rows, first[rows]]
        S[active] = p[:, -1]
        steps += L
        keep = ~stopped
        if steps >= max_steps:
            acc.truncated[active[keep]] = True
            keep[:] = False
        active = active[keep]
    acc.extra["overshoot"] = over
    return acc.result()


# --------------------------------------------------------------------------
# conditioned excursions


@dataclass
class ConditionedSample:
    low: np.ndarray  # lowest levels of accepted walks, shape (accepted, K)
    acceptance: float
    attempted: int
    truncated: int

    @property
    def spacings(self) -> np.ndarray:
        return np.diff(np.concatenate([np.zeros((self.low.shape[0], 1)), self.low], axis=1), axis=1)


def sample_conditioned_excursion(
    m: float,
    mode: str,
    rng,
    size: int,
    K: int = 3,
    cap: int = 10**6,
) -> ConditionedSample:
    """Rejection sample the lowest ``K`` levels given a long or high excursion.

    ``mode='long'`` conditions on ``tau > m`` (``nu >= m``), ``mode='high'``
    on ``max_{k < tau} S_k > m``.  Truncated walks are counted and excluded.
    """
    if m < 1:
        raise ValueError("m must be >= 1")
    if mode not in ("long", "high"):
        raise ValueError("mode must be 'long' or 'high'")
    b = stopped_walk_batch(rng, size, cap=cap, n_low=K, n_high=1)
    if mode == "long":
        ok = b.nu >= m
    else:
        ok = b.last > m
    ok &= ~b.truncated
    acc = ok.sum() / size
    if acc < 1e-6:
        raise RuntimeError(
            f"acceptance {acc:.3g} below 1e-6 for mode={mode}, m={m}; "
            "lower m or raise the replica count"
        )
    return ConditionedSample(b.low[ok], float(acc), size, int(b.truncated.sum()))


# --------------------------------------------------------------------------
# reversibility of spacings


def spacings_given_nu(n: int, R: int, rng, max_batches: int = 10_000) -> np.ndarray:
    """``R`` draws of ``(Delta_1, ..., Delta_n)`` given ``nu = n`` by rejection."""
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = as_generator(rng)
    out = []
    got = 0
    batch = max(1024, CHUNK_BUDGET // (n + 1))
    for _ in range(max_batches):
        s = np.cumsum(laplace_increments(rng, (batch, n + 1)), axis=1)
        ok = (s[:, :n] >= 0).all(axis=1) & (s[:, n] < 0)
        lv = np.sort(s[ok, :n], axis=1)
        out.append(np.diff(np.concatenate([np.zeros((lv.shape[0], 1)), lv], axis=1), axis=1))
        got += lv.shape[0]
        if got >= R:
            return np.concatenate(out)[:R]
    raise RuntimeError(f"only {got} of {R} replicas accepted for nu = {n}")


def spacing_reversal_test(n: int, R: int, rng, threshold: float = 0.01) -> list[stats.TestReport]:
    """Compare forward and reversed spacing vectors given ``nu = n``.

    Two independent halves of ``2R`` accepted replicas are used so each KS
    test compares independent samples: component ``j`` of the first half
    against component ``n+1-j`` of the second, and likewise for partial sums.
    """
    d = spacings_given_nu(n, 2 * R, rng)
    fwd, rev = d[:R], d[R:, ::-1]
    reports = []
    for j in range(n):
        reports.append(stats.ks_two_sample(
            fwd[:, j], rev[:, j], name=f"reversal_spacing_{j + 1}", threshold=threshold,
            params={"nu": n, "component": j + 1},
        ))
    cf, cr = np.cumsum(fwd, axis=1), np.cumsum(rev, axis=1)
    for j in range(1, n):
        reports.append(stats.ks_two_sample(
            cf[:, j], cr[:, j], name=f"reversal_partial_sum_{j + 1}", threshold=threshold,
            params={"nu": n, "terms": j + 1},
        ))
    return reports


def ndes_counts_batch(rng, size: int, levels: Sequence[float], cap: int = 10**5) -> PointBatch:
    """Counts ``N_des(v)`` at each level, walk side."""
    return stopped_walk_batch(rng, size, cap=cap, n_low=0, n_high=0, levels=levels)
