"""Closed-form laws for the order statistics of the symmetric Laplace walk.

All generating functions are evaluated either pointwise or expanded as
:class:`~laplacewalk.series.TruncatedSeries` in the counting variable ``z``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np
from scipy import integrate, interpolate, special

from .series import TruncatedSeries, cosh_vw, w_sinh_vw


# --------------------------------------------------------------------------
# binomials and the absorbed simple walk


def binom(n: int, k: int) -> int:
    """``C(n, k)`` as an exact integer, zero when ``k`` is out of range."""
    if k < 0 or k > n or n < 0:
        return 0
    return math.comb(n, k)


def p0_power(m: int, i: int, j: int) -> Fraction:
    """Entry ``(2i, 2j)`` of the ``2m``-step absorbed simple-walk kernel."""
    if m < 0 or j < 0:
        raise ValueError("need m >= 0 and j >= 0")
    if i <= 0:
        return Fraction(0)
    return Fraction(binom(2 * m, m - i + j) - binom(2 * m, m + i + j), 4**m)


@dataclass(frozen=True)
class AbsorbedKernel:
    """Simple symmetric walk on ``{0, ..., max_state}`` absorbed at 0.

    The top state is reflected back down so the matrix stays stochastic; any
    power ``P^n`` is exact for the unbounded chain on entries ``(a, b)`` with
    ``a + n < max_state``.
    """

    max_state: int
    entries: np.ndarray

    @classmethod
    def build(cls, max_state: int) -> "AbsorbedKernel":
        P = np.zeros((max_state + 1, max_state + 1))
        P[0, 0] = 1.0
        for i in range(1, max_state + 1):
            P[i, i - 1] = 0.5
            if i < max_state:
                P[i, i + 1] = 0.5
            else:
                P[i, i - 1] = 1.0
        return cls(max_state, P)

    def power(self, n: int) -> np.ndarray:
        return np.linalg.matrix_power(self.entries, n)

    def lazy(self) -> np.ndarray:
        """``(I + P_0) / 2``: the chain of excursion counts between levels."""
        return 0.5 * (np.eye(self.max_state + 1) + self.entries)


# --------------------------------------------------------------------------
# gaps D_k of the limiting order statistics


def tail_dk(k: int, v: float) -> float:
    """``P(D_k > v)`` as a mixture of exponentials with rates ``2i``."""
    if k < 1 or v < 0:
        raise ValueError("need k >= 1 and v >= 0")
    return math.fsum(
        i * float(p0_power(k - 1, 1, i)) * math.exp(-2 * i * v) for i in range(1, k + 1)
    )


def gap_tail_series(v: float, order: int) -> TruncatedSeries:
    """Coefficient ``k-1`` is ``P(D_k > v)``; from ``(w cosh v + sinh v)^-2``."""
    if v < 0:
        raise ValueError("v must be nonnegative")
    w = TruncatedSeries.sqrt_one_minus_z(order).to_float()
    return (w * math.cosh(v) + math.sinh(v)) ** -2


def gap_density_series(v: float, order: int) -> TruncatedSeries:
    """Coefficient of ``z^k`` is the density of ``D_k`` at ``v``."""
    if v <= 0:
        raise ValueError("v must be positive")
    w = TruncatedSeries.sqrt_one_minus_z(order).to_float()
    e = math.exp(-2 * v)
    up, um = w + 1.0, w - 1.0
    body = (up - um * e) / (up + um * e) ** 3
    return body.shift(1) * (8 * e)


# --------------------------------------------------------------------------
# scaling limit eps / (2 chi_3)


_ASYMPTOTIC_FROM = 6.0


def _limit_density_asymptotic(x):
    # 2 sqrt(2/pi) sum_m (-1)^m / (2^m m!) * (2m+3)! / (2x)^(2m+4)
    acc = np.zeros_like(x)
    for m in range(14):
        coef = (-1) ** m * math.factorial(2 * m + 3) / (2**m * math.factorial(m))
        acc += coef / (2.0 * x) ** (2 * m + 4)
    return 2.0 * math.sqrt(2.0 / math.pi) * acc


def limit_density(x):
    """Density of ``eps / (2 chi_3)``; vectorised over ``x > 0``.

    The closed form is evaluated with the scaled complementary error
    function; past ``x = 6`` its two terms cancel to many digits, so the
    asymptotic expansion in ``1/x`` takes over.
    """
    x = np.asarray(x, dtype=float)
    small = np.minimum(x, _ASYMPTOTIC_FROM)
    r2 = np.sqrt(2.0)
    closed = 4.0 * (
        np.sqrt(2.0 / np.pi) * (1.0 + 2.0 * small * small)
        - small * (4.0 * small * small + 3.0) * special.erfcx(r2 * small)
    )
    big = np.maximum(x, _ASYMPTOTIC_FROM)
    out = np.where(x < _ASYMPTOTIC_FROM, closed, _limit_density_asymptotic(big))
    return out if out.ndim else float(out)


def mellin_limit(s: float) -> float:
    """``E (eps / (2 chi_3))^s`` for ``-1 < s < 3``."""
    if not -1 < s < 3:
        raise ValueError(f"Mellin transform defined only for -1 < s < 3, got {s}")
    return (
        2 ** (-1.5 * s)
        * math.gamma(s + 1)
        * math.gamma(1.5 - s / 2)
        / math.gamma(1.5)
    )


LIMIT_QUAD_UPPER = 12.0


def limit_moment_quadrature(s: float, upper: float = LIMIT_QUAD_UPPER) -> float:
    """``int_0^inf x^s p(x) dx`` by adaptive Gauss-Kronrod.

    The bulk ``[0, upper]`` is split at the density's scale changes; the
    polynomial tail ``p(x) ~ 3 x^-4 / (2 sqrt(2 pi))`` is integrated on
    ``[upper, inf)`` after the substitution ``x = upper / t``.
    """
    f = lambda x: x**s * limit_density(x)
    edges = [0.0, 1e-6, 0.1, 1.0, 3.0, upper]
    body = math.fsum(
        integrate.quad(f, a, b, limit=200, epsabs=1e-13, epsrel=1e-13)[0]
        for a, b in zip(edges[:-1], edges[1:])
    )
    g = lambda t: f(upper / t) * upper / (t * t)
    tail = integrate.quad(g, 0.0, 1.0, limit=200, epsabs=1e-13, epsrel=1e-12)[0]
    return body + tail


@lru_cache(maxsize=4)
def _limit_cdf_table(upper: float = 60.0, n: int = 4000, nodes: int = 16):
    """Cumulative integral of the density on a geometric grid; each cell
    uses ``nodes``-point Gauss-Legendre (the density is smooth there)."""
    xs = np.concatenate([[0.0], np.geomspace(1e-5, upper, n)])
    t, w = special.roots_legendre(nodes)
    a, b = xs[:-1, None], xs[1:, None]
    pts = 0.5 * (a + b) + 0.5 * (b - a) * t[None, :]
    pieces = 0.5 * (b[:, 0] - a[:, 0]) * (limit_density(pts) @ w)
    F = np.concatenate([[0.0], np.cumsum(pieces)])
    return interpolate.CubicHermiteSpline(xs, F, limit_density(np.maximum(xs, 1e-300)))


def limit_cdf(x):
    """CDF of the scaling limit, from cumulative quadrature of its density."""
    x = np.asarray(x, dtype=float)
    spline = _limit_cdf_table()
    upper = spline.x[-1]
    c = 1.0 / (2.0 * math.sqrt(2.0 * math.pi))
    inside = np.clip(spline(np.clip(x, 0.0, upper)), 0.0, 1.0)
    tail = 1.0 - c / np.maximum(x, upper) ** 3
    out = np.where(x <= 0, 0.0, np.where(x <= upper, inside, tail))
    return out if out.ndim else float(out)


# --------------------------------------------------------------------------
# expected gaps


def central_binomial(m: int) -> float:
    """``u_m = C(2m, m) 2^(-2m)``, the return probability of the simple walk."""
    if m < 0:
        raise ValueError("m must be nonnegative")
    return math.comb(2 * m, m) / 4**m


def expected_gap(k: int, n: int | None = None) -> float:
    """``E D_{k,n} = u_k + u_{n-k+1}``; with ``n=None`` the limit ``u_k``."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if n is None:
        return central_binomial(k)
    if n < k:
        raise ValueError("need 1 <= k <= n")
    return central_binomial(k) + central_binomial(n - k + 1)


# --------------------------------------------------------------------------
# the stopped walk: N_des and friends


def _tanh_term(v: float, beta: float) -> float:
    """``beta * tanh(v beta)`` with the ``beta -> 0`` limit handled."""
    return beta * math.tanh(v * beta)


def ndes_pgf(v: float, z: float) -> float:
    """Probability generating function of ``N_des(v)``."""
    if v < 0 or not 0 <= z <= 1:
        raise ValueError("need v >= 0 and 0 <= z <= 1")
    if math.isinf(v):
        return 1.0 / (1.0 + math.sqrt(1 - z))
    return 1.0 / (1.0 + _tanh_term(v, math.sqrt(1.0 - z)))


def ndes_pmf_series(v: float, order: int) -> TruncatedSeries:
    """Law of ``N_des(v)``: ``cosh(vw) / (cosh(vw) + w sinh(vw))``."""
    if v < 0:
        raise ValueError("v must be nonnegative")
    if math.isinf(v):
        return nu_pmf_series(order)
    c = cosh_vw(v, order)
    return c / (c + w_sinh_vw(v, order))


def mk_tail(k: int, v: float) -> float:
    """``P(M_k > v)``, including the defective mass ``P(M_k = inf)``."""
    if k < 1:
        raise ValueError("k must be >= 1")
    pmf = ndes_pmf_series(v, k - 1)
    return math.fsum(float(c) for c in pmf)


def interval_pgf(u: float, v: float, z: float) -> float:
    """PGF of the number of visits to ``(u, v]`` before the walk goes negative."""
    if u < 0 or v < u:
        raise ValueError("need 0 <= u <= v")
    beta = math.sqrt(1.0 - z)
    if math.isinf(v):
        return (1 + u * beta) / (1 + (u + 1) * beta)
    t = _tanh_term(v - u, beta)
    return (1 + u * t) / (1 + (u + 1) * t)


def interval_pmf_series(u: float, v: float, order: int) -> TruncatedSeries:
    if u < 0 or v < u:
        raise ValueError("need 0 <= u <= v")
    if math.isinf(v):
        w = TruncatedSeries.sqrt_one_minus_z(order).to_float()
        return (w * u + 1.0) / (w * (u + 1.0) + 1.0)
    c = cosh_vw(v - u, order)
    s = w_sinh_vw(v - u, order)
    return (c + s * u) / (c + s * (u + 1.0))


def cluster_pgf(lam: float, v: float, z: float) -> float:
    """PGF of the Poisson-cluster count ``N_lambda(v)``."""
    if lam <= 0 or v < 0:
        raise ValueError("need lambda > 0 and v >= 0")
    beta = math.sqrt(1.0 - z)
    return (math.cosh(v * beta) + beta * math.sinh(v * beta)) ** (-lam)


def cluster_pmf_series(lam: float, v: float, order: int) -> TruncatedSeries:
    if lam <= 0 or v < 0:
        raise ValueError("need lambda > 0 and v >= 0")
    base = cosh_vw(v, order) + w_sinh_vw(v, order)
    if float(lam).is_integer():
        return base ** -int(lam)
    return base ** (-float(lam))


# --------------------------------------------------------------------------
# small laws


def max_mnu_tail(t: float) -> float:
    """``P(M_nu > t)``."""
    return 1.0 / (2.0 + t)


def tau_pgf(z: float) -> float:
    return 1.0 - math.sqrt(1.0 - z)


def nu_pgf(z: float) -> float:
    return 0.5 if z == 0 else (1.0 - math.sqrt(1.0 - z)) / z


def nu_cond_pgf(z: float) -> float:
    """``E(z^nu | nu >= 1)``."""
    if z == 0:
        return 0.0
    return 2.0 / z * (1.0 - math.sqrt(1.0 - z) - z / 2.0)


def first_death_tail(t: float) -> float:
    """Tail of the first death time of a critical binary branching process
    started from one individual."""
    return 1.0 - np.tanh(np.asarray(t, dtype=float))


def tau_pmf_series(order: int) -> TruncatedSeries:
    """Exact law of the first descending ladder time."""
    return 1 - TruncatedSeries.sqrt_one_minus_z(order)


def nu_pmf_series(order: int) -> TruncatedSeries:
    """Exact law of ``nu = tau - 1``."""
    t = tau_pmf_series(order + 1)
    return TruncatedSeries(t.coeffs[1:])


def survival_initial_pmf(n: int, t: float) -> float:
    """``P(Z(0) = n | Z(t) > 0)`` for geometric(1/2) initial population."""
    if n < 1:
        return 0.0
    return 2.0 ** (-n - 1) * (t + 2) * (1 - (t / (1 + t)) ** n)


# --------------------------------------------------------------------------
# the two-representation agreement


@dataclass(frozen=True)
class Agreement:
    error: float
    tail_bound: float
    lhs: float
    rhs: float


def binomial_row(n: int) -> list[int]:
    """``[C(n, 0), ..., C(n, n)]`` by the multiplicative recurrence."""
    row = [1]
    for j in range(n):
        row.append(row[-1] * (n - j) // (j + 1))
    return row


def agreement_lhs_coefficient(k: int, v: float) -> float:
    """Coefficient of ``z^(k-1)`` on the branching side, from exact integers."""
    n = 2 * k - 2
    row = binomial_row(n)
    scale = 4 ** (k - 1)
    terms = []
    for i in range(1, k + 1):
        hi = k + i
        d = row[k - 2 + i] - (row[hi] if hi <= n else 0)
        if d:
            # int / int rounds correctly even when both exceed the float range
            terms.append(i * (d / scale) * math.exp(-2 * i * v))
    return math.fsum(terms)


def agreement_check(v: float, z: float, K: int) -> Agreement:
    """Truncate the branching-side double sum at ``K`` and compare with
    ``(sqrt(1-z) cosh v + sinh v)^-2``."""
    if not (v > 0 and abs(z) < 1 and K >= 1):
        raise ValueError("need v > 0, |z| < 1, K >= 1")
    lhs = math.fsum(agreement_lhs_coefficient(k, v) * z ** (k - 1) for k in range(1, K + 1))
    rhs = (math.sqrt(1 - z) * math.cosh(v) + math.sinh(v)) ** -2
    return Agreement(abs(lhs - rhs), abs(z) ** K / (1 - abs(z)), lhs, rhs)
