"""Squared Bessel paths and the Cox processes they drive.

BESQ transitions are sampled exactly as a Poisson mixture of gammas:
given ``Q(t) = q`` and a lag ``h``,

    K ~ Poisson(q / (2h)),   Q(t+h) ~ 2h * Gamma(delta/2 + K),

with ``Gamma(0)`` the point mass at 0.  This gives ``E Q(t+h) = q + delta h``
and ``Q_4(0, 1) = 2 Gamma(2)`` in law.

A Cox process with intensity ``theta * Q(t)`` has points ``T_k`` solving
``theta * I(T_k) = Gamma_k`` with ``I`` the trapezoid cumulative intensity
and ``Gamma_k`` a unit-rate Poisson stream; ``I`` is linear between grid
nodes, so the inversion is exact for the discretised intensity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from .points import BatchAccumulator, PointBatch, PointSample
from .rng import as_generator

DEFAULT_STEP = 1e-3
DEFAULT_VMAX = 8.0


def besq_step(rng, q: np.ndarray, delta: float, h: float) -> np.ndarray:
    """Exact BESQ_delta transition over a lag ``h`` from each state in ``q``."""
    k = rng.poisson(np.asarray(q) / (2 * h))
    shape = delta / 2 + k
    out = np.zeros(np.shape(q))
    pos = shape > 0
    out[pos] = 2 * h * rng.standard_gamma(shape[pos])
    return out


@dataclass(frozen=True)
class BesqPath:
    delta: float
    initial: float
    step: float
    values: np.ndarray  # Q(0), Q(h), ..., Q(n h)

    @property
    def times(self) -> np.ndarray:
        return self.step * np.arange(self.values.size)

    def cumulative(self) -> np.ndarray:
        """Trapezoid ``int_0^t Q`` at the grid nodes."""
        mids = 0.5 * (self.values[1:] + self.values[:-1]) * self.step
        return np.concatenate([[0.0], np.cumsum(mids)])


def besq_path(delta: float, x0: float, h: float = DEFAULT_STEP, v_max: float = DEFAULT_VMAX, rng=None) -> BesqPath:
    """A BESQ_delta path from ``x0`` on the grid ``0, h, ..., >= v_max``."""
    if delta < 0 or x0 < 0:
        raise ValueError("delta and x0 must be nonnegative")
    if h <= 0:
        raise ValueError("grid step must be positive")
    rng = as_generator(rng)
    n = int(math.ceil(v_max / h - 1e-9))
    vals = np.empty(n + 1)
    vals[0] = x0
    q = np.array([float(x0)])
    for i in range(1, n + 1):
        q = besq_step(rng, q, delta, h)
        vals[i] = q[0]
    return BesqPath(float(delta), float(x0), float(h), vals)


@dataclass(frozen=True)
class CoxSample:
    points: np.ndarray
    intensity: BesqPath | None = None

    def sample(self) -> PointSample:
        return PointSample(self.points)


def cox_points(path: BesqPath, theta: float, rng, v_max: float | None = None) -> CoxSample:
    """Points of the Cox process with intensity ``theta * Q`` on ``[0, v_max]``."""
    if theta <= 0:
        raise ValueError("theta must be positive")
    rng = as_generator(rng)
    cum = theta * path.cumulative()
    t = path.times
    top = cum[-1] if v_max is None else np.interp(v_max, t, cum)
    pts = []
    g = rng.standard_exponential()
    while g <= top:
        pts.append(g)
        g += rng.standard_exponential()
    pts = np.asarray(pts)
    # piecewise-linear inverse; flat stretches (I constant) carry no points
    idx = np.searchsorted(cum, pts, side="left")
    idx = np.clip(idx, 1, cum.size - 1)
    c0, c1 = cum[idx - 1], cum[idx]
    frac = (pts - c0) / np.where(c1 > c0, c1 - c0, 1.0)
    return CoxSample(t[idx - 1] + frac * path.step, path)


# --------------------------------------------------------------------------
# batched Cox sampling


def cox_batch(
    rng,
    initial: np.ndarray,
    delta: float,
    theta: float = 0.5,
    h: float = 0.01,
    v_max: float = DEFAULT_VMAX,
    n_low: int = 1,
    levels=(),
    until_points: int | None = None,
    record_state_at_first: bool = False,
) -> PointBatch:
    """Cox processes driven by ``theta * Q_delta(initial, .)``, many at once.

    Every replica inverts its own unit-rate stream against the trapezoid
    cumulative intensity, so the lowest points, the counts at ``levels``
    (which must lie on the grid) and ``total`` (points up to the horizon)
    all come from one realisation.  The horizon is ``v_max``, or with
    ``until_points=K`` the first grid time at which every replica has ``K``
    points.  ``delta = 0`` replicas leave the loop once absorbed.

    ``extra`` holds the state ``q_end`` at the horizon, ``integral`` (the
    trapezoid integral of Q up to it) and optionally ``q_first``, the
    linearly interpolated intensity path at the first point.
    """
    rng = as_generator(rng)
    q = np.array(initial, dtype=float)
    size = q.size
    levels = tuple(sorted(float(v) for v in levels))
    for v in levels:
        if abs(v / h - round(v / h)) > 1e-6:
            raise ValueError(f"level {v} is not on the grid of step {h}")
    acc = BatchAccumulator(size, n_low, 0, levels)
    nxt = rng.standard_exponential(size)  # next target of theta * I
    I = np.zeros(size)
    q_first = np.full(size, np.nan)
    lev_idx = 0
    n_steps = int(math.ceil(v_max / h - 1e-9)) if until_points is None else None
    active = np.arange(size)
    if delta == 0:
        active = active[q > 0]
    step = 0
    while active.size and (n_steps is None or step < n_steps):
        qa = q[active]
        qn = besq_step(rng, qa, delta, h)
        dI = theta * h * 0.5 * (qa + qn)
        I0 = I[active]
        I1 = I0 + dI
        t = step * h
        while True:
            cross = np.flatnonzero(nxt[active] <= I1)
            if not cross.size:
                break
            rows = active[cross]
            frac = (nxt[rows] - I0[cross]) / dI[cross]
            if record_state_at_first:
                first = acc.total[rows] == 0
                q_first[rows[first]] = (qa[cross] + frac * (qn[cross] - qa[cross]))[first]
            acc.add(rows, (t + frac * h)[:, None], np.ones((rows.size, 1), dtype=bool))
            nxt[rows] += rng.standard_exponential(rows.size)
        I[active] = I1
        q[active] = qn
        step += 1
        while lev_idx < len(levels) and step * h >= levels[lev_idx] - 1e-9:
            acc.counts[:, lev_idx] = acc.total
            lev_idx += 1
        keep = np.ones(active.size, dtype=bool)
        if delta == 0:
            keep &= qn > 0
        if until_points is not None:
            keep &= acc.total[active] < until_points
        active = active[keep]
    # remaining checkpoints lie past the last live path: counts are final
    for c in range(lev_idx, len(levels)):
        acc.counts[:, c] = acc.total
    acc.extra["q_end"] = q
    acc.extra["integral"] = I / theta
    if record_state_at_first:
        acc.extra["q_first"] = q_first
    return acc.result()


# --------------------------------------------------------------------------
# law of the remaining count of a BESQ_0-driven Cox process


def sample_tau(rng, size) -> np.ndarray:
    """First descending ladder times of the Laplace walk, by inversion.

    ``P(tau > m) = u_m = C(2m, m) / 4^m``; bounds
    ``1/sqrt(pi (m + 1/2)) < u_m < 1/sqrt(pi (m + 1/4))`` bracket the inverse
    to a window of width one.  Uniforms are floored at ``1e-9``.
    """
    rng = as_generator(rng)
    u = np.maximum(rng.random(size), 1e-9)
    lo = np.maximum(np.floor(1 / (math.pi * u * u) - 0.5), 0).astype(np.int64)
    hi = np.ceil(1 / (math.pi * u * u) - 0.25).astype(np.int64) + 1
    # tau = min{m : u_m < U}; u_lo >= U by the lower bound
    while True:
        mid = (lo + hi) // 2
        open_ = hi - lo > 1
        if not open_.any():
            break
        below = _log_u(mid) < np.log(u)
        hi = np.where(open_ & below, mid, hi)
        lo = np.where(open_ & ~below, mid, lo)
    return np.where(_log_u(lo) < np.log(u), lo, hi)


def _log_u(m):
    m = np.asarray(m, dtype=float)
    return special.gammaln(m + 0.5) - special.gammaln(m + 1) - 0.5 * math.log(math.pi)


def remaining_count(rng, q: np.ndarray) -> np.ndarray:
    """Number of future points of the Cox process driven by ``Q_0(q, .)/2``.

    Its generating function ``exp(-(q/2) sqrt(1 - z))`` is that of a sum of
    ``Poisson(q/2)`` independent copies of ``tau``.
    """
    rng = as_generator(rng)
    n = rng.poisson(np.asarray(q) / 2)
    out = np.zeros(n.size, dtype=np.int64)
    tot = int(n.sum())
    if tot:
        taus = sample_tau(rng, tot)
        owner = np.repeat(np.arange(n.size), n)
        np.add.at(out, owner, taus)
    return out


# --------------------------------------------------------------------------
# named samplers


def ndes_bessel_batch(rng, size: int, levels=(), h: float = 0.01, horizon: float | None = None,
                      n_low: int = 1) -> PointBatch:
    """Cox counts driven by ``Q_0(2 gamma_1, .)/2``.

    ``total`` is the exact total number of points: the points found up to
    the horizon plus a draw of the remaining count from the final state.
    """
    rng = as_generator(rng)
    x0 = 2 * rng.standard_exponential(size)
    top = max(levels) if levels else 1.0
    horizon = top if horizon is None else max(horizon, top)
    b = cox_batch(rng, x0, 0.0, 0.5, h, horizon, n_low=n_low, levels=levels)
    b.extra["horizon_count"] = b.total.copy()
    b.total = b.total + remaining_count(rng, b.extra["q_end"])
    return b


def nw_bessel_batch(rng, size: int, K: int = 6, levels=(), h: float = 0.01,
                    start: str = "gamma", record_state_at_first: bool = False) -> PointBatch:
    """Cox points driven by ``Q_4(2 gamma_2, .)/2`` (``start='gamma'``) or by
    ``Q_4(0, 1 + .)/2`` (``start='shift'``); runs until ``K`` points each."""
    rng = as_generator(rng)
    if start == "gamma":
        x0 = 2 * rng.standard_gamma(2.0, size)
    elif start == "shift":
        x0 = besq_step(rng, np.zeros(size), 4.0, 1.0)
    else:
        raise ValueError("start must be 'gamma' or 'shift'")
    return cox_batch(rng, x0, 4.0, 0.5, h, n_low=K, levels=levels, until_points=K,
                     record_state_at_first=record_state_at_first)


def simulate_ndes_bessel(rng, h: float = DEFAULT_STEP, v_max: float = DEFAULT_VMAX) -> CoxSample:
    rng = as_generator(rng)
    path = besq_path(0.0, 2 * rng.standard_exponential(), h, v_max, rng)
    return cox_points(path, 0.5, rng)


def simulate_nw_bessel(rng, h: float = DEFAULT_STEP, v_max: float = DEFAULT_VMAX) -> CoxSample:
    rng = as_generator(rng)
    path = besq_path(4.0, 2 * rng.standard_gamma(2.0), h, v_max, rng)
    return cox_points(path, 0.5, rng)


def w_via_differences_batch(rng, size: int, K: int, h: float = DEFAULT_STEP) -> tuple[np.ndarray, np.ndarray]:
    """``W_k = T_{k+1} - T_1`` from Cox points driven by ``Q_4(0, .)/2``.

    Returns ``(W, q_first)`` with ``W`` of shape ``(size, K)`` and
    ``q_first`` the intensity path at ``T_1``.
    """
    b = cox_batch(rng, np.zeros(size), 4.0, 0.5, h, n_low=K + 1, until_points=K + 1,
                  record_state_at_first=True)
    T = b.low
    return T[:, 1:] - T[:, :1], b.extra["q_first"]


def w_via_differences(K: int, rng, h: float = DEFAULT_STEP) -> PointSample:
    if K < 1:
        raise ValueError("K must be >= 1")
    w, _ = w_via_differences_batch(rng, 1, K, h)
    return PointSample(w[0])


# --------------------------------------------------------------------------
# Poisson clusters


def poisson_cluster_batch(rng, size: int, lam: float, v_max: float, n_low: int = 1) -> PointBatch:
    """Cluster centres at rate ``lam`` on ``(0, v_max]``, each carrying the
    point set ``{0, M_1, ..., M_nu}`` of an independent stopped walk (drawn
    from the marked birth-death process) shifted by the centre.

    ``total`` is the number of points in ``[0, v_max]``.
    """
    from .branching import marked_bd_batch

    if lam <= 0:
        raise ValueError("lambda must be positive")
    rng = as_generator(rng)
    n_centres = rng.poisson(lam * v_max, size)
    owner = np.repeat(np.arange(size), n_centres)
    centres = rng.uniform(0, v_max, owner.size)
    clusters = marked_bd_batch(rng, owner.size, level_cap=v_max - centres, n_low=n_low, n_high=0)
    acc = BatchAccumulator(size, n_low, 0)
    np.add.at(acc.total, owner, 1 + clusters.total)
    # candidate lowest points: each centre and its own lowest cluster points
    cand = np.concatenate([centres[:, None], centres[:, None] + clusters.low], axis=1)
    who = np.repeat(owner, cand.shape[1])
    val = cand.ravel()
    keep = np.isfinite(val)
    who, val = who[keep], val[keep]
    order = np.lexsort((val, who))
    who, val = who[order], val[order]
    start = np.searchsorted(who, np.arange(size))
    rank = np.arange(who.size) - start[who]
    sel = rank < n_low
    acc.low[who[sel], rank[sel]] = val[sel]
    return acc.result()


def poisson_cluster(lam: float, v_max: float, rng) -> CoxSample:
    """One sample of the Poisson cluster process on ``[0, v_max]``."""
    from .branching import simulate_marked_bd

    if lam <= 0:
        raise ValueError("lambda must be positive")
    rng = as_generator(rng)
    centres = rng.uniform(0, v_max, rng.poisson(lam * v_max))
    pts = [centres]
    for c in centres:
        pts.append(c + simulate_marked_bd(rng, level_cap=v_max - c).points)
    return CoxSample(np.sort(np.concatenate(pts)))
