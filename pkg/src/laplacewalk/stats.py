"""Goodness-of-fit helpers that turn samples into pass/fail reports."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import stats as sps

DEFAULT_THRESHOLD = 0.01


@dataclass
class TestReport:
    """One verification result.

    ``passed`` is ``pvalue >= threshold`` for statistical tests and
    ``abs_error <= threshold`` for deterministic or sigma-band checks.
    """

    __test__ = False  # keep pytest from collecting this class

    name: str
    statistic: float
    threshold: float
    passed: bool
    pvalue: float | None = None
    abs_error: float | None = None
    params: dict = field(default_factory=dict)
    replicas: int | None = None
    seed: int | None = None
    runtime_ms: float | None = None

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "params": _jsonable(self.params),
            "statistic": _num(self.statistic),
            "pvalue": _num(self.pvalue),
            "absError": _num(self.abs_error),
            "threshold": _num(self.threshold),
            "pass": bool(self.passed),
            "replicas": self.replicas,
            "seed": self.seed,
            "runtimeMs": _num(self.runtime_ms),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=False)

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        if self.pvalue is not None:
            detail = f"p={self.pvalue:.4g} (>= {self.threshold:g})"
        else:
            detail = f"err={self.abs_error:.3g} (<= {self.threshold:.3g})"
        return f"[{tag}] {self.name}: stat={self.statistic:.6g} {detail}"


def _num(x):
    if x is None:
        return None
    x = float(x)
    if math.isnan(x):
        return None
    return float(f"{x:.17g}")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        return "inf" if math.isinf(f) else _num(f)
    return obj


# --------------------------------------------------------------------------
# Kolmogorov-Smirnov


def ks_one_sample(
    samples,
    cdf: Callable,
    name: str = "ks_one_sample",
    threshold: float = DEFAULT_THRESHOLD,
    **meta,
) -> TestReport:
    """One-sample KS with the asymptotic Kolmogorov p-value."""
    x = np.sort(np.asarray(samples, dtype=float))
    if x.size < 100:
        raise ValueError(f"need at least 100 samples, got {x.size}")
    F = np.asarray(cdf(x), dtype=float)
    if np.any(np.diff(F) < -1e-12) or np.any((F < -1e-12) | (F > 1 + 1e-12)):
        raise ValueError("cdf is not a monotone probability on the sample range")
    res = sps.kstest(x, lambda t: np.asarray(cdf(t), dtype=float), method="asymp")
    return TestReport(
        name, res.statistic, threshold, bool(res.pvalue >= threshold),
        pvalue=res.pvalue, replicas=int(x.size), **meta,
    )


def ks_two_sample(
    a, b, name: str = "ks_two_sample", threshold: float = DEFAULT_THRESHOLD, **meta
) -> TestReport:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    res = sps.ks_2samp(a, b, method="asymp")
    return TestReport(
        name, res.statistic, threshold, bool(res.pvalue >= threshold),
        pvalue=res.pvalue, replicas=int(min(a.size, b.size)), **meta,
    )


# --------------------------------------------------------------------------
# chi-squared


def count_classes(values, n_classes: int) -> np.ndarray:
    """Counts of ``0 .. n_classes-1`` with the last class collecting the rest."""
    v = np.minimum(np.asarray(values, dtype=np.int64), n_classes - 1)
    return np.bincount(v, minlength=n_classes)


def pmf_classes(pmf: Sequence[float], n_classes: int) -> np.ndarray:
    """Probabilities for ``count_classes``: the first ``n_classes-1`` point
    masses and the residual tail."""
    p = np.array([float(x) for x in pmf[: n_classes - 1]])
    return np.append(p, max(0.0, 1.0 - p.sum()))


def _merge_small(expected: np.ndarray, *observed: np.ndarray, minimum: float = 5.0):
    """Merge adjacent classes (right to left) until every expected count is at
    least ``minimum``."""
    groups = []
    cur = []
    acc = 0.0
    for i in range(len(expected) - 1, -1, -1):
        cur.append(i)
        acc += expected[i]
        if acc >= minimum:
            groups.append(cur)
            cur, acc = [], 0.0
    if cur:
        if groups:
            groups[-1].extend(cur)
        else:
            groups.append(cur)
    groups = groups[::-1]
    e = np.array([expected[g].sum() for g in groups])
    obs = [np.array([o[g].sum() for g in groups]) for o in observed]
    return e, obs, len(groups) != len(expected)


def chi2_gof(
    counts, probs, name: str = "chi2_gof", threshold: float = DEFAULT_THRESHOLD, **meta
) -> TestReport:
    """Pearson chi-squared against a full probability vector."""
    counts = np.asarray(counts, dtype=float)
    probs = np.asarray(probs, dtype=float)
    if counts.shape != probs.shape:
        raise ValueError("counts and probs differ in length")
    if abs(probs.sum() - 1.0) > 1e-9:
        raise ValueError(f"probabilities sum to {probs.sum()}, not 1")
    n = counts.sum()
    e, (o,), merged = _merge_small(n * probs, counts)
    if e.size < 2:
        raise ValueError("fewer than two classes after merging")
    stat = float(((o - e) ** 2 / e).sum())
    p = float(sps.chi2.sf(stat, e.size - 1))
    params = dict(meta.pop("params", {}), classes=int(e.size), merged=merged)
    return TestReport(
        name, stat, threshold, p >= threshold, pvalue=p, replicas=int(n),
        params=params, **meta,
    )


def chi2_two_sample(
    counts_a, counts_b, name: str = "chi2_two_sample",
    threshold: float = DEFAULT_THRESHOLD, **meta,
) -> TestReport:
    """Homogeneity chi-squared for two vectors of class counts."""
    a = np.asarray(counts_a, dtype=float)
    b = np.asarray(counts_b, dtype=float)
    tot = a + b
    na, nb = a.sum(), b.sum()
    expected_min = tot * min(na, nb) / (na + nb)
    _, (ga, gb), merged = _merge_small(expected_min, a, b)
    table = np.vstack([ga, gb])
    table = table[:, table.sum(0) > 0]
    stat, p, dof, _ = sps.chi2_contingency(table, correction=False)
    params = dict(meta.pop("params", {}), classes=int(table.shape[1]), merged=merged)
    return TestReport(
        name, float(stat), threshold, bool(p >= threshold), pvalue=float(p),
        replicas=int(min(na, nb)), params=params, **meta,
    )


# --------------------------------------------------------------------------
# moments and bands


def empirical_pgf(counts, z: float) -> tuple[float, float]:
    """Mean of ``z^N`` and its standard error."""
    x = np.power(float(z), np.asarray(counts, dtype=float))
    return float(x.mean()), float(x.std(ddof=1) / math.sqrt(x.size))


def sigma_check(
    estimate: float, target: float, se: float, k: float = 3.0,
    name: str = "sigma_check", **meta,
) -> TestReport:
    """Pass when ``|estimate - target| <= k * se``."""
    err = abs(estimate - target)
    return TestReport(
        name, estimate, k * se, bool(err <= k * se), abs_error=err, **meta,
    )


def binomial_check(
    successes: int, n: int, p: float, k: float = 3.0, name: str = "binomial_check", **meta
) -> TestReport:
    """Empirical frequency within ``k`` binomial standard deviations of ``p``."""
    se = math.sqrt(p * (1 - p) / n)
    meta.setdefault("replicas", int(n))
    return sigma_check(successes / n, p, se, k, name=name, **meta)


def mean_check(samples, target: float, k: float = 3.0, name: str = "mean_check", **meta):
    x = np.asarray(samples, dtype=float)
    se = x.std(ddof=1) / math.sqrt(x.size)
    meta.setdefault("replicas", int(x.size))
    return sigma_check(float(x.mean()), target, float(se), k, name=name, **meta)


def exact_check(value: float, target: float, tol: float, name: str = "exact_check", **meta):
    err = abs(value - target)
    return TestReport(name, value, tol, bool(err <= tol), abs_error=err, **meta)


def anderson_darling_uniform(pvalues) -> float:
    """Anderson-Darling ``A^2`` of a sample against Uniform(0, 1)."""
    u = np.clip(np.sort(np.asarray(pvalues, dtype=float)), 1e-300, 1 - 1e-16)
    n = u.size
    i = np.arange(1, n + 1)
    return float(-n - np.mean((2 * i - 1) * (np.log(u) + np.log1p(-u[::-1]))))


# asymptotic 1% critical value of A^2 for a fully specified null
AD_CRITICAL_1PCT = 3.857


def all_passed(reports: Sequence[TestReport]) -> bool:
    return all(r.passed for r in reports)
