"""Verification suites: every cross-check between constructions and closed forms.

Each suite takes a :class:`RunConfig` and returns a list of
:class:`~laplacewalk.stats.TestReport`.  All randomness comes from
block-keyed Philox streams (see :mod:`laplacewalk.rng`), so a suite's output
depends only on the seed and the configuration, never on the thread count.
"""

from __future__ import annotations

import itertools
import math
import time
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from . import bessel, branching, embed, exact, rng as rngmod, stats, walk
from .points import PointBatch

COUNT_CLASSES = 11  # counts 0..9 and ">= 10"


@dataclass
class RunConfig:
    """Everything a verification run depends on.

    ``replicas`` is the size of the large (10^6-level) checks; checks sized
    at 10^5 use ``replicas // 10``.  ``safety=None`` selects the exact BES3
    escape rule.
    """

    seed: int = 42
    replicas: int = 10**6
    grid_step: float = 1e-3
    v_max: float = 8.0
    level_cap: float = math.inf
    safety: float | None = None
    threads: int = 1
    retry: bool = False
    step_cap: int = 10**5
    timings: bool = False
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        for name in ("replicas", "grid_step", "v_max", "level_cap", "threads", "step_cap"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.safety is not None and self.safety < 10:
            raise ValueError("safety must be >= 10")

    @property
    def small(self) -> int:
        return max(self.replicas // 10, 1000)

    def derived(self, attempt: int) -> "RunConfig":
        """A copy with a fresh seed for a retry, sharing no cached samples."""
        return replace(self, seed=_mix(self.seed, attempt), _cache={})


def _mix(seed: int, attempt: int) -> int:
    ss = np.random.SeedSequence([seed & (2**64 - 1), 0x5EED, attempt])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def _blocks(cfg: RunConfig, key: str, fn: Callable, replicas: int):
    """Run ``fn(rng, n)`` over replica blocks, memoised per configuration."""
    ck = (key, replicas)
    if ck not in cfg._cache:
        parts = rngmod.run_blocks(fn, replicas, cfg.seed, key, cfg.threads)
        if isinstance(parts[0], PointBatch):
            out = PointBatch.concat(parts)
        elif isinstance(parts[0], tuple):
            out = tuple(np.concatenate(p) for p in zip(*parts))
        else:
            out = np.concatenate(parts)
        cfg._cache[ck] = out
    return cfg._cache[ck]


def _meta(cfg: RunConfig, reports, t0: float, replicas: int | None = None):
    elapsed = (time.perf_counter() - t0) * 1e3
    for r in reports:
        r.seed = cfg.seed
        if r.replicas is None and replicas is not None:
            r.replicas = replicas
        if cfg.timings:
            r.runtime_ms = elapsed
    return reports


# --------------------------------------------------------------------------
# samplers shared by several suites

NDES_LEVELS = (0.5, 1.0, 2.0)
MNU_LEVELS = (0.5, 1.0, 2.0, 4.0)


def stopped_samples(cfg: RunConfig) -> dict[str, PointBatch]:
    """The three samplers of the stopped-walk point process at full size."""
    cap = cfg.step_cap
    lc = cfg.level_cap
    return {
        "walk": _blocks(cfg, "stopped/walk", lambda g, n: walk.stopped_walk_batch(
            g, n, cap=cap, n_low=1, n_high=1, levels=NDES_LEVELS), cfg.replicas),
        "marked": _blocks(cfg, "stopped/marked", lambda g, n: branching.marked_bd_batch(
            g, n, level_cap=lc, point_cap=cap, levels=NDES_LEVELS), cfg.replicas),
        "geiger": _blocks(cfg, "stopped/geiger", lambda g, n: branching.geiger_batch(
            g, n, level_cap=lc, point_cap=cap, levels=NDES_LEVELS), cfg.replicas),
    }


def w_gap_samples(cfg: RunConfig, K: int = 6) -> dict[str, np.ndarray]:
    """Gap matrices ``D_1..D_K`` from the four representations of ``W``."""
    R = cfg.small

    def gaps(w):
        return np.diff(np.concatenate([np.zeros((w.shape[0], 1)), w], axis=1), axis=1)

    h = cfg.grid_step
    return {
        "branching": gaps(_blocks(cfg, "w/branching", lambda g, n: branching.w_branching_batch(g, n, K)[0], R)),
        "bessel": gaps(_blocks(cfg, "w/bessel", lambda g, n: bessel.w_via_differences_batch(g, n, K, h)[0], R)),
        "feller": gaps(_blocks(cfg, "w/feller", lambda g, n: walk.feller_w_batch(g, n, 4000, K), R)),
        "bes3": np.diff(_blocks(cfg, "w/bes3", lambda g, n: embed.mk_infty_batch(
            g, n, K, safety=cfg.safety), R), axis=1),
    }


# --------------------------------------------------------------------------
# suites


def suite_agreement(cfg: RunConfig):
    """Criterion 1: the two-representation identity, truncated at K = 400."""
    t0 = time.perf_counter()
    out = []
    for v, z in itertools.product((0.5, 1.0, 2.0), (-0.5, 0.5, 0.9)):
        a = exact.agreement_check(v, z, 400)
        out.append(stats.exact_check(a.lhs, a.rhs, 1e-9, name="agreement",
                                     params={"v": v, "z": z, "K": 400, "tailBound": a.tail_bound}))
    return _meta(cfg, out, t0)


def suite_series(cfg: RunConfig):
    """Criterion 2: series coefficients equal the transition-kernel sums."""
    t0 = time.perf_counter()
    out = []
    for v in (0.25, 1.0, 3.0):
        ser = exact.gap_tail_series(v, 29)
        for k in range(1, 31):
            out.append(stats.exact_check(float(ser[k - 1]), exact.tail_dk(k, v), 1e-10,
                                         name="gap_tail_series", params={"v": v, "k": k}))
    return _meta(cfg, out, t0)


def _nonempty_complete(b: PointBatch):
    return (b.total > 0) & ~b.truncated


def suite_stopped(cfg: RunConfig):
    """Criterion 3: three samplers of the stopped-walk levels agree."""
    t0 = time.perf_counter()
    s = stopped_samples(cfg)
    out = []
    for a, b in itertools.combinations(s, 2):
        A, B = s[a], s[b]
        ma, mb = _nonempty_complete(A), _nonempty_complete(B)
        pair = f"{a}_vs_{b}"
        out.append(stats.ks_two_sample(A.first[ma], B.first[mb], name="stopped_first_point",
                                       params={"pair": pair}))
        out.append(stats.ks_two_sample(A.last[ma], B.last[mb], name="stopped_last_point",
                                       params={"pair": pair, "truncated": [int(A.truncated.sum()), int(B.truncated.sum())]}))
        out.append(stats.chi2_two_sample(stats.count_classes(A.total, COUNT_CLASSES),
                                         stats.count_classes(B.total, COUNT_CLASSES),
                                         name="stopped_total_count", params={"pair": pair}))
    for name, b in s.items():
        out.append(stats.chi2_gof(stats.count_classes(b.total, COUNT_CLASSES),
                                  stats.pmf_classes(exact.nu_pmf_series(COUNT_CLASSES).to_float().coeffs,
                                                    COUNT_CLASSES),
                                  name="stopped_total_count_vs_exact", params={"sampler": name}))
    return _meta(cfg, out, t0, cfg.replicas)


def suite_max_level(cfg: RunConfig):
    """Criterion 4: ``P(M_nu > t) = 1/(2+t)`` for each sampler."""
    t0 = time.perf_counter()
    s = stopped_samples(cfg)
    out = []
    for name, b in s.items():
        for t in MNU_LEVELS:
            exceed = b.last > t
            unresolved = int((b.truncated & ~exceed).sum())
            out.append(stats.binomial_check(int(exceed.sum()), b.size, exact.max_mnu_tail(t),
                                            name="max_level_tail",
                                            params={"sampler": name, "t": t, "unresolved": unresolved}))
    return _meta(cfg, out, t0)


def suite_cox(cfg: RunConfig):
    """Criterion 5: BESQ_0-driven Cox counts against the pgf and the walk."""
    t0 = time.perf_counter()
    h = cfg.grid_step
    cox = _blocks(cfg, "cox/ndes", lambda g, n: bessel.ndes_bessel_batch(g, n, levels=NDES_LEVELS, h=h),
                  cfg.replicas)
    wk = stopped_samples(cfg)["walk"]
    out = []
    for v, z in itertools.product(NDES_LEVELS, (0.3, 0.7)):
        est, se = stats.empirical_pgf(cox.count_at(v), z)
        out.append(stats.sigma_check(est, exact.ndes_pgf(v, z), se, 4.0, name="cox_count_pgf",
                                     params={"v": v, "z": z, "gridStep": h}, replicas=cox.size))
    for v in NDES_LEVELS:
        out.append(stats.chi2_two_sample(stats.count_classes(cox.count_at(v), COUNT_CLASSES),
                                         stats.count_classes(wk.count_at(v), COUNT_CLASSES),
                                         name="cox_count_vs_walk", params={"v": v}))
    return _meta(cfg, out, t0, cfg.replicas)


def suite_w(cfg: RunConfig):
    """Criterion 6: four constructions of ``(W_k)`` agree; gap tails."""
    t0 = time.perf_counter()
    d = w_gap_samples(cfg)
    out = []
    for a, b in itertools.combinations(d, 2):
        for k in (1, 3, 5):
            out.append(stats.ks_two_sample(d[a][:, k - 1], d[b][:, k - 1], name="w_gap",
                                           params={"pair": f"{a}_vs_{b}", "k": k,
                                                   **({"fellerSteps": 4000} if "feller" in (a, b) else {})}))
    for name in ("branching", "bessel"):
        for k in range(1, 7):
            for v in (0.2, 1.0):
                hits = int((d[name][:, k - 1] > v).sum())
                out.append(stats.binomial_check(hits, d[name].shape[0], exact.tail_dk(k, v),
                                                name="w_gap_tail", params={"sampler": name, "k": k, "v": v}))
    return _meta(cfg, out, t0, cfg.small)


def suite_first_point_state(cfg: RunConfig):
    """Criterion 7: the intensity at the first Cox point is ``2 gamma_2``."""
    t0 = time.perf_counter()
    h = cfg.grid_step

    def run(g, n):
        b = bessel.cox_batch(g, np.zeros(n), 4.0, 0.5, h, n_low=1, until_points=1, record_state_at_first=True)
        return b.extra["q_first"]

    q = _blocks(cfg, "cox/first_state", run, cfg.small)
    from scipy import stats as sps

    out = [stats.ks_one_sample(q / 2, sps.gamma(2.0).cdf, name="first_point_state",
                               params={"gridStep": h})]
    return _meta(cfg, out, t0)


def suite_scaling(cfg: RunConfig):
    """Criterion 8: rescaled deep gaps and ``eps / (2 chi_3)`` follow the limit law."""
    t0 = time.perf_counter()
    k = 200
    y = _blocks(cfg, "scaling/hchain", lambda g, n: np.stack([
        branching.h_chain_batch(g, n, k)[:, -1], g.standard_exponential(n)], axis=1), cfg.small)
    dk = y[:, 1] / (2 * y[:, 0])
    direct = _blocks(cfg, "scaling/direct", lambda g, n: g.standard_exponential(n) / (
        2 * np.sqrt(g.chisquare(3, n))), cfg.small)
    out = [
        stats.ks_one_sample(math.sqrt(k / 2) * dk, exact.limit_cdf, name="scaled_gap_limit",
                            params={"k": k}),
        stats.ks_one_sample(direct, exact.limit_cdf, name="exp_over_chi3_limit"),
    ]
    return _meta(cfg, out, t0)


def suite_mellin(cfg: RunConfig):
    """Criterion 9: Mellin transform and expected gaps."""
    t0 = time.perf_counter()
    out = []
    for s in (-0.5, 0.0, 1.0, 2.0, 2.5):
        out.append(stats.exact_check(exact.limit_moment_quadrature(s), exact.mellin_limit(s), 1e-6,
                                     name="mellin_vs_quadrature", params={"s": s}))
    for k, n in ((1, 50), (3, 50), (10, 200)):
        g = _blocks(cfg, f"mellin/gaps_{n}", lambda gen, m, n=n: walk.walk_gaps_batch(gen, m, n, 10), cfg.small)
        out.append(stats.mean_check(g[:, k - 1], exact.expected_gap(k, n), 3.0, name="expected_gap",
                                    params={"k": k, "n": n}))
    return _meta(cfg, out, t0)


def suite_reversal(cfg: RunConfig):
    """Criterion 10: reversibility of spacings and the two-spacing display."""
    t0 = time.perf_counter()
    R = max(cfg.small // 10, 1000)
    d = _blocks(cfg, "reversal/nu3", lambda g, n: walk.spacings_given_nu(3, n, g), 2 * R)
    fwd, rev = d[0::2], d[1::2, ::-1]
    out = []
    for j in range(3):
        out.append(stats.ks_two_sample(fwd[:, j], rev[:, j], name="reversal_spacing",
                                       params={"nu": 3, "component": j + 1}))
    cf, cr = np.cumsum(fwd, axis=1), np.cumsum(rev, axis=1)
    for j in (1, 2):
        out.append(stats.ks_two_sample(cf[:, j], cr[:, j], name="reversal_partial_sum",
                                       params={"nu": 3, "terms": j + 1}))
    b = _blocks(cfg, "reversal/two_spacings", lambda g, n: walk.stopped_walk_batch(
        g, n, cap=cfg.step_cap, n_low=2, n_high=3), cfg.small)
    ok = (b.total >= 2) & ~b.truncated
    low, high = b.low[ok], b.high[ok]
    third = np.where(np.isfinite(high[:, 2]), high[:, 2], 0.0)
    top, next_top = high[:, 0] - high[:, 1], high[:, 1] - third
    bottom, next_bottom = low[:, 0], low[:, 1] - low[:, 0]

    def exp2(x):
        return 1 - np.exp(-2 * np.asarray(x))

    def mixture(x):
        x = np.asarray(x)
        return 1 - 2 / 3 * np.exp(-2 * x) - 1 / 3 * np.exp(-4 * x)

    out += [
        stats.ks_one_sample(top, exp2, name="last_spacing_given_nu_ge_2"),
        stats.ks_one_sample(next_top, mixture, name="second_last_spacing_given_nu_ge_2"),
        stats.ks_one_sample(bottom, exp2, name="first_spacing_given_nu_ge_2"),
        stats.ks_one_sample(next_bottom, mixture, name="second_spacing_given_nu_ge_2"),
    ]
    return _meta(cfg, out, t0)


def suite_branching_laws(cfg: RunConfig):
    """Criterion 11: first-death law and unit mean point rate per level."""
    t0 = time.perf_counter()
    fd = _blocks(cfg, "branching/first_death", lambda g, n: branching.geiger_batch(
        g, n, initial=1, n_low=0, n_high=0).extra["first_death"], cfg.replicas)
    out = [stats.ks_one_sample(fd, lambda t: 1 - exact.first_death_tail(t), name="first_death_law")]
    levels = (1.0, 2.0, 4.0)
    for name, sampler in (("marked", branching.marked_bd_batch), ("geiger", branching.geiger_batch)):
        b = _blocks(cfg, f"branching/rate_{name}", lambda g, n, f=sampler: f(
            g, n, level_cap=max(levels), n_low=0, n_high=0, levels=levels), cfg.replicas)
        for v in levels:
            out.append(stats.mean_check(b.count_at(v) / v, 1.0, 3.0, name="unit_point_rate",
                                        params={"sampler": name, "v": v}))
    return _meta(cfg, out, t0)


SUITES: dict[str, tuple[int, Callable]] = {
    "agreement": (1, suite_agreement),
    "series": (2, suite_series),
    "stopped": (3, suite_stopped),
    "max_level": (4, suite_max_level),
    "cox": (5, suite_cox),
    "w": (6, suite_w),
    "first_point_state": (7, suite_first_point_state),
    "scaling": (8, suite_scaling),
    "mellin": (9, suite_mellin),
    "reversal": (10, suite_reversal),
    "branching_laws": (11, suite_branching_laws),
}

# suites whose acceptance statement includes one seeded retry
RETRY_BY_DEFAULT = {"stopped", "w"}


def run_suite(name: str, cfg: RunConfig, retry: bool | None = None) -> list[stats.TestReport]:
    """Run one suite; with ``retry`` a failing check is rerun once on a
    derived seed and flagged only if it fails both times."""
    if name not in SUITES:
        raise KeyError(f"unknown suite {name!r}; choose from {', '.join(SUITES)} or 'all'")
    fn = SUITES[name][1]
    first = fn(cfg)
    if retry is None:
        retry = cfg.retry or name in RETRY_BY_DEFAULT
    if not retry or stats.all_passed(first):
        return first
    second = fn(cfg.derived(1))
    merged = []
    for a, b in zip(first, second):
        if a.passed:
            merged.append(a)
        else:
            b.params = dict(b.params, retried=True, firstAttempt=a.pvalue if a.pvalue is not None else a.abs_error)
            merged.append(b)
    return merged


def run_all(cfg: RunConfig) -> list[stats.TestReport]:
    out = []
    for name in SUITES:
        out += run_suite(name, cfg)
    return out
