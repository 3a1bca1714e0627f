"""Branching-process constructions of the stopped-walk levels and of ``W_k``.

Two continuous-"time" birth-death processes, indexed by level, generate the
same point process as the levels ``M_1 < ... < M_nu`` of the stopped walk:

* the marked process: one ancestor with probability 1/2; with ``j`` alive,
  an event occurs at rate ``2j`` and is a birth, a death or a mark with
  probabilities 1/4, 1/4, 1/2; every event is a point;
* the critical binary process started from a Geometric(1/2) population,
  where each individual lives an Exp(2) time and then splits in two or
  dies with probability 1/2 each; only deaths are points.

The ``h``-chain ``Y_up`` (the absorbed lazy walk conditioned never to die)
gives ``W_k = sum_{j<=k} eps_j / (2 Y_up_j)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .points import BatchAccumulator, PointBatch, PointSample
from .rng import as_generator
from .walk import CHUNK_BUDGET, laplace_increments

BIRTH, DEATH, MARK = 1, -1, 0
DEFAULT_POINT_CAP = 10**7


@dataclass(frozen=True)
class BranchingRun:
    """One realisation: event times, kinds and the population before each."""

    times: np.ndarray
    kinds: np.ndarray
    initial: int
    emitted: tuple
    truncated: bool = False

    @property
    def population(self) -> np.ndarray:
        """Population just after each event, with the initial count first."""
        return self.initial + np.concatenate([[0], np.cumsum(self.kinds)])

    @property
    def points(self) -> PointSample:
        keep = np.isin(self.kinds, self.emitted)
        return PointSample(self.times[keep], self.truncated)


def _run(rng, initial: int, probs, emitted, level_cap: float, point_cap: int) -> BranchingRun:
    """Event-driven simulation with competing exponential clocks."""
    times, kinds = [], []
    j, t, n_points = initial, 0.0, 0
    truncated = False
    kinds_all = np.array([BIRTH, DEATH, MARK])
    while j > 0:
        t += rng.standard_exponential() / (2 * j)
        if t > level_cap:
            break
        kind = int(rng.choice(kinds_all, p=probs))
        if kind in emitted:
            if n_points == point_cap:
                truncated = True
                break
            n_points += 1
        times.append(t)
        kinds.append(kind)
        j += kind
    return BranchingRun(np.array(times), np.array(kinds, dtype=int), initial, emitted, truncated)


MARKED_PROBS = (0.25, 0.25, 0.5)
GEIGER_PROBS = (0.5, 0.5, 0.0)


def run_marked_bd(rng, level_cap: float = math.inf, point_cap: int = DEFAULT_POINT_CAP) -> BranchingRun:
    rng = as_generator(rng)
    z0 = int(rng.random() < 0.5)
    return _run(rng, z0, MARKED_PROBS, (BIRTH, DEATH, MARK), level_cap, point_cap)


def simulate_marked_bd(rng, level_cap: float = math.inf, point_cap: int = DEFAULT_POINT_CAP) -> PointSample:
    """Points ``<= level_cap`` of the marked birth-death process."""
    if not level_cap > 0:
        raise ValueError("level_cap must be positive")
    return run_marked_bd(rng, level_cap, point_cap).points


def geometric_half(rng, size=None):
    """Geometric(1/2) on ``{0, 1, ...}``: heads before the first tail."""
    return rng.geometric(0.5, size) - 1


def run_geiger(rng, level_cap: float = math.inf, point_cap: int = DEFAULT_POINT_CAP,
               initial: int | None = None) -> BranchingRun:
    rng = as_generator(rng)
    z0 = int(geometric_half(rng)) if initial is None else int(initial)
    return _run(rng, z0, GEIGER_PROBS, (DEATH,), level_cap, point_cap)


def simulate_geiger(rng, level_cap: float = math.inf, point_cap: int = DEFAULT_POINT_CAP) -> PointSample:
    """Death times ``<= level_cap`` of critical binary branching from a
    Geometric(1/2) population."""
    if not level_cap > 0:
        raise ValueError("level_cap must be positive")
    return run_geiger(rng, level_cap, point_cap).points


# --------------------------------------------------------------------------
# vectorised engines


def birth_death_batch(
    rng,
    initial: np.ndarray,
    probs=MARKED_PROBS,
    emitted=(BIRTH, DEATH, MARK),
    level_cap=math.inf,
    point_cap: int = 10**5,
    n_low: int = 1,
    n_high: int = 1,
    levels=(),
) -> PointBatch:
    """Run one birth-death process per entry of ``initial`` in lockstep.

    ``level_cap`` may be a scalar or one cap per replica.  A replica with
    more than ``point_cap`` emitted points is stopped and flagged truncated,
    matching the step cap of the stopped walk (there ``nu > cap``).
    ``extra`` records ``initial`` and the first death time.
    """
    rng = as_generator(rng)
    initial = np.asarray(initial, dtype=np.int64)
    size = initial.size
    caps = np.broadcast_to(np.asarray(level_cap, dtype=float), (size,))
    acc = BatchAccumulator(size, n_low, n_high, levels)
    emit_lut = np.array([k in emitted for k in (MARK, BIRTH, DEATH)])  # index kind % 3
    cum = np.cumsum(probs)[:2]
    first_death = np.full(size, np.inf)
    J = initial.copy()
    T = np.zeros(size)
    active = np.flatnonzero(J > 0)
    while active.size:
        a = active.size
        L = int(max(8, CHUNK_BUDGET // a))
        u = rng.random((a, L))
        kind = np.where(u < cum[0], BIRTH, np.where(u < cum[1], DEATH, MARK))
        after = J[active, None] + np.cumsum(kind, axis=1)
        before = after - kind
        alive = np.minimum.accumulate(before > 0, axis=1)
        dt = rng.standard_exponential((a, L)) / (2 * np.maximum(before, 1))
        t = T[active, None] + np.cumsum(np.where(alive, dt, 0.0), axis=1)
        valid = alive & (t <= caps[active, None])
        emit = valid & emit_lut[kind % 3]
        # enforce the point budget
        seen = acc.total[active, None] + np.cumsum(emit, axis=1)
        over = emit & (seen > point_cap)
        hit = over.any(axis=1)
        if hit.any():
            cut = np.where(hit, over.argmax(axis=1), L)
            inside = np.arange(L)[None, :] < cut[:, None]
            valid &= inside
            emit &= inside
            acc.truncated[active[hit]] = True
        acc.add(active, t, emit)
        deaths = valid & (kind == DEATH)
        has = deaths.any(axis=1)
        rows = active[has]
        fresh = np.isinf(first_death[rows])
        first_death[rows[fresh]] = t[has][fresh, deaths[has][fresh].argmax(axis=1)]
        done = hit | ~valid[:, -1]
        J[active] = after[:, -1]
        T[active] = t[:, -1]
        active = active[~done]
    acc.extra["initial"] = initial
    acc.extra["first_death"] = first_death
    return acc.result()


def marked_bd_batch(rng, size: int, level_cap=math.inf, point_cap: int = 10**5, **kw) -> PointBatch:
    rng = as_generator(rng)
    z0 = (rng.random(size) < 0.5).astype(np.int64)
    return birth_death_batch(rng, z0, MARKED_PROBS, (BIRTH, DEATH, MARK), level_cap, point_cap, **kw)


def geiger_batch(rng, size: int, level_cap=math.inf, point_cap: int = 10**5, initial=None, **kw) -> PointBatch:
    rng = as_generator(rng)
    if initial is None:
        z0 = geometric_half(rng, size)
    else:
        z0 = np.full(size, int(initial), dtype=np.int64)
    return birth_death_batch(rng, z0, GEIGER_PROBS, (DEATH,), level_cap, point_cap, **kw)


# --------------------------------------------------------------------------
# the h-chain and the branching representation of W


@dataclass(frozen=True)
class HChainPath:
    states: np.ndarray  # Y_up_1 = 1, ..., Y_up_K


def h_chain_step(rng, y: np.ndarray) -> np.ndarray:
    """One step from each state: stay 1/2, up (i+1)/(4i), down (i-1)/(4i)."""
    u = rng.random(y.shape)
    up = u < (y + 1) / (4 * y)
    down = (u >= 0.5) & (u < 0.5 + (y - 1) / (4 * y))
    return y + up - down


def h_chain_batch(rng, size: int, K: int) -> np.ndarray:
    """``size`` independent h-chain paths, shape ``(size, K)``."""
    if K < 1:
        raise ValueError("K must be >= 1")
    rng = as_generator(rng)
    out = np.empty((size, K), dtype=np.int64)
    y = np.ones(size, dtype=np.int64)
    out[:, 0] = y
    for k in range(1, K):
        y = h_chain_step(rng, y)
        out[:, k] = y
    return out


def sample_h_chain(K: int, rng) -> HChainPath:
    return HChainPath(h_chain_batch(rng, 1, K)[0])


def h_chain_marginal(k: int) -> np.ndarray:
    """Exact law of ``Y_up_k`` on ``{1, ..., k}`` from absorbed-walk powers."""
    from .exact import p0_power

    return np.array([float(j * p0_power(k - 1, 1, j)) for j in range(1, k + 1)])


def doob_walk_batch(rng, size: int, steps: int, start: int = 2) -> np.ndarray:
    """Simple walk conditioned to stay positive (up-probability ``(i+1)/(2i)``).

    Returns positions after ``0..steps`` steps, shape ``(size, steps+1)``.
    Two of its steps make one step of ``2 Y_up``.
    """
    rng = as_generator(rng)
    out = np.empty((size, steps + 1), dtype=np.int64)
    s = np.full(size, start, dtype=np.int64)
    out[:, 0] = s
    for k in range(1, steps + 1):
        s = s + np.where(rng.random(size) < (s + 1) / (2 * s), 1, -1)
        out[:, k] = s
    return out


def w_branching_batch(rng, size: int, K: int) -> tuple[np.ndarray, np.ndarray]:
    """``(W, Y)``: ``W[:, k-1] = sum_{j<=k} eps_j/(2 Y_j)``, shape ``(size, K)``."""
    rng = as_generator(rng)
    y = h_chain_batch(rng, size, K)
    eps = rng.standard_exponential((size, K))
    return np.cumsum(eps / (2 * y), axis=1), y


def sample_w_branching(K: int, rng) -> PointSample:
    """``W_1 < ... < W_K`` from the branching representation."""
    if K < 1:
        raise ValueError("K must be >= 1")
    w, _ = w_branching_batch(rng, 1, K)
    return PointSample(w[0])
