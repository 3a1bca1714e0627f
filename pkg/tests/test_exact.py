import itertools
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate, special, stats as sps

from laplacewalk import exact


# ---------------------------------------------------------------- oracles


def brute_force_absorbed(m, i, j):
    """Enumerate all 2m-step +-1 paths from 2i, killed on reaching 0."""
    hits = 0
    for steps in itertools.product((-1, 1), repeat=2 * m):
        x = 2 * i
        for s in steps:
            x += s
            if x == 0:
                break
        else:
            hits += x == 2 * j
    return Fraction(hits, 4**m)


def chi3_pdf(r):
    return math.sqrt(2 / math.pi) * r * r * math.exp(-r * r / 2)


def ratio_density(x):
    """Density of eps / (2 chi_3) by conditioning on chi_3."""
    return integrate.quad(lambda r: 2 * r * math.exp(-2 * x * r) * chi3_pdf(r), 0, np.inf,
                          epsabs=1e-13, epsrel=1e-12)[0]


def closed_form_cdf(x):
    x = np.asarray(x, dtype=float)
    return 1 - ((1 + 4 * x**2) * special.erfcx(math.sqrt(2) * x) - 2 * x * math.sqrt(2 / math.pi))


# ---------------------------------------------------------------- absorbed walk


@pytest.mark.parametrize("m,i,j", [(0, 1, 1), (1, 1, 1), (2, 1, 2), (3, 2, 1), (4, 1, 3), (5, 2, 2)])
def test_p0_power_matches_path_enumeration(m, i, j):
    assert exact.p0_power(m, i, j) == brute_force_absorbed(m, i, j)


def test_p0_power_matches_matrix_power():
    P = exact.AbsorbedKernel.build(80).power(20)
    for i in range(1, 6):
        for j in range(1, 12):
            assert float(exact.p0_power(10, i, j)) == pytest.approx(P[2 * i, 2 * j], abs=1e-15)


def test_lazy_kernel_is_stochastic():
    L = exact.AbsorbedKernel.build(30).lazy()
    assert np.allclose(L.sum(axis=1), 1.0)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 12), st.integers(0, 12), st.integers(1, 6), st.integers(0, 10))
def test_p0_power_chapman_kolmogorov(a, b, i, j):
    lhs = exact.p0_power(a + b, i, j)
    rhs = sum(exact.p0_power(a, i, l) * exact.p0_power(b, l, j) for l in range(1, i + a + 1))
    assert lhs == rhs


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 30), st.integers(1, 10))
def test_identity_is_harmonic_for_absorbed_walk(m, i):
    assert sum(j * exact.p0_power(m, i, j) for j in range(1, i + m + 1)) == i


# ---------------------------------------------------------------- gaps D_k


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 40), st.floats(0, 5), st.floats(0, 5))
def test_gap_tail_is_a_decreasing_probability(k, v1, v2):
    lo, hi = sorted((v1, v2))
    a, b = exact.tail_dk(k, lo), exact.tail_dk(k, hi)
    assert 0 <= b <= a <= 1 + 1e-12


@pytest.mark.parametrize("k", [1, 2, 5, 30])
def test_gap_tail_starts_at_one(k):
    assert exact.tail_dk(k, 0.0) == pytest.approx(1.0, abs=1e-12)


def test_first_gaps_by_hand():
    # D_1 ~ Exp(2); D_2 mixes rates 2 and 4 with weights 1/2, 1/2
    for v in (0.1, 0.7, 2.0):
        assert exact.tail_dk(1, v) == pytest.approx(math.exp(-2 * v), rel=1e-14)
        assert exact.tail_dk(2, v) == pytest.approx(0.5 * math.exp(-2 * v) + 0.5 * math.exp(-4 * v), rel=1e-14)


@pytest.mark.parametrize("k", [1, 2, 3, 8, 25])
def test_mean_gap_is_central_binomial(k):
    mean = integrate.quad(lambda v: exact.tail_dk(k, v), 0, np.inf)[0]
    assert mean == pytest.approx(exact.central_binomial(k), rel=1e-9)


@pytest.mark.parametrize("v", [0.05, 0.5, 1.0, 2.5])
def test_gap_tail_series_coefficients(v):
    ser = exact.gap_tail_series(v, 40)
    for k in range(1, 42):
        assert float(ser[k - 1]) == pytest.approx(exact.tail_dk(k, v), abs=1e-13)


@pytest.mark.parametrize("v", [0.2, 1.0, 3.0])
def test_gap_density_series_is_minus_tail_derivative(v):
    ser = exact.gap_density_series(v, 15)
    assert float(ser[0]) == 0.0
    h = 1e-5
    for k in range(1, 16):
        fd = -(exact.tail_dk(k, v + h) - exact.tail_dk(k, v - h)) / (2 * h)
        assert float(ser[k]) == pytest.approx(fd, rel=1e-7, abs=1e-12)


def test_gap_domain_errors():
    with pytest.raises(ValueError):
        exact.tail_dk(0, 1.0)
    with pytest.raises(ValueError):
        exact.gap_tail_series(-1.0, 5)
    with pytest.raises(ValueError):
        exact.gap_density_series(0.0, 5)


# ---------------------------------------------------------------- limit law


@pytest.mark.parametrize("x", [1e-3, 0.05, 0.3, 1.0, 2.5, 5.9, 6.1, 10.0, 30.0])
def test_limit_density_matches_ratio_integral(x):
    assert float(exact.limit_density(x)) == pytest.approx(ratio_density(x), rel=1e-8)


def test_limit_density_at_zero_and_mass():
    assert float(exact.limit_density(1e-12)) == pytest.approx(4 * math.sqrt(2 / math.pi), rel=1e-9)
    mass = integrate.quad(lambda x: float(exact.limit_density(x)), 0, np.inf, limit=200)[0]
    assert mass == pytest.approx(1.0, abs=1e-9)


def test_limit_cdf_matches_closed_form():
    x = np.linspace(0, 20, 2001)
    assert np.allclose(exact.limit_cdf(x), closed_form_cdf(x), atol=1e-10)


def test_limit_cdf_matches_monte_carlo():
    g = np.random.default_rng(5)
    x = g.standard_exponential(200_000) / (2 * np.sqrt(g.chisquare(3, 200_000)))
    assert sps.kstest(x, exact.limit_cdf).pvalue > 1e-3


@pytest.mark.parametrize("s", [-0.9, -0.5, 0.0, 0.5, 1.0, 2.0, 2.9])
def test_mellin_matches_direct_integral(s):
    # E eps^s * 2^-s * E chi_3^-s, each factor in closed form
    chi = 2 ** (-s / 2) * special.gamma((3 - s) / 2) / special.gamma(1.5)
    assert exact.mellin_limit(s) == pytest.approx(special.gamma(s + 1) * 2.0**-s * chi, rel=1e-13)


def test_mellin_reference_values():
    assert exact.mellin_limit(0.0) == pytest.approx(1.0, rel=1e-15)
    # E eps / (2 chi_3) = E(1/chi_3)/2 = 1/sqrt(2 pi)
    assert exact.mellin_limit(1.0) == pytest.approx(1 / math.sqrt(2 * math.pi), rel=1e-14)
    with pytest.raises(ValueError):
        exact.mellin_limit(3.0)


@pytest.mark.parametrize("s", [-0.5, 1.0, 2.5])
def test_moment_quadrature_agrees_with_mellin(s):
    assert exact.limit_moment_quadrature(s) == pytest.approx(exact.mellin_limit(s), rel=1e-7)


# ---------------------------------------------------------------- expected gaps


def test_central_binomial_values():
    assert [exact.central_binomial(m) for m in range(4)] == [1.0, 0.5, 0.375, 0.3125]
    assert exact.central_binomial(400) * math.sqrt(math.pi * 400) == pytest.approx(1, abs=1e-3)


def test_expected_gap_finite_and_limit():
    assert exact.expected_gap(1, 1) == 1.0  # |eps - eps'| has mean 1
    assert exact.expected_gap(3, 50) == exact.central_binomial(3) + exact.central_binomial(48)
    assert exact.expected_gap(7) == exact.central_binomial(7)
    with pytest.raises(ValueError):
        exact.expected_gap(5, 4)


# ---------------------------------------------------------------- stopped walk laws


def test_nu_law_reference_values():
    pmf = exact.nu_pmf_series(6)
    assert list(pmf)[:3] == [Fraction(1, 2), Fraction(1, 8), Fraction(1, 16)]
    tau = exact.tau_pmf_series(6)
    assert tau[0] == 0 and tau[1] == Fraction(1, 2)


@pytest.mark.parametrize("z", [0.0, 0.3, 0.9])
def test_nu_pgfs_consistent(z):
    assert exact.nu_pgf(z) == pytest.approx(float(exact.nu_pmf_series(400)(z)), abs=1e-12)
    assert exact.nu_pgf(z) == pytest.approx(1 / (1 + math.sqrt(1 - z)), rel=1e-14)
    assert exact.nu_cond_pgf(z) == pytest.approx(2 * exact.nu_pgf(z) - 1, abs=1e-14)
    assert exact.tau_pgf(z) == pytest.approx(z * exact.nu_pgf(z), abs=1e-15)


@pytest.mark.parametrize("v", [0.3, 1.0, 2.0])
def test_mk_tail_reference_formulas(v):
    e = math.exp(-2 * v)
    assert exact.mk_tail(1, v) == pytest.approx(0.5 * (1 + e), rel=1e-12)
    # e^{-4v} enters with coefficient 1, which makes P(M_2 > 0) = 1
    assert exact.mk_tail(2, v) == pytest.approx((5 + 4 * (1 + v) * e - e * e) / 8, rel=1e-12)
    m3 = (22 + (15 + 20 * v + 8 * v * v) * e - (6 + 8 * v) * e * e + e**3) / 32
    assert exact.mk_tail(3, v) == pytest.approx(m3, rel=1e-12)


def test_mk_tail_limits():
    for k in range(1, 8):
        assert exact.mk_tail(k, 0.0) == pytest.approx(1.0)
        assert exact.mk_tail(k, math.inf) == pytest.approx(float(sum(exact.nu_pmf_series(k - 1))))
    assert exact.mk_tail(3, math.inf) == pytest.approx(22 / 32)


@pytest.mark.parametrize("v", [0.5, 1.0, 4.0, math.inf])
def test_ndes_series_sums_to_pgf(v):
    ser = exact.ndes_pmf_series(v, 60)
    for z in (0.0, 0.2, 0.5):
        assert float(ser(z)) == pytest.approx(exact.ndes_pgf(v, z), abs=1e-12)
    assert all(float(c) >= -1e-15 for c in ser)


def test_ndes_first_probability():
    for v in (0.5, 2.0):
        assert float(exact.ndes_pmf_series(v, 3)[0]) == pytest.approx(1 / (1 + math.tanh(v)), rel=1e-13)


@pytest.mark.parametrize("u,v", [(0.0, 1.0), (0.5, 2.0), (1.0, 1.3)])
def test_interval_reference_probabilities(u, v):
    t = math.tanh(v - u)
    ser = exact.interval_pmf_series(u, v, 4)
    assert float(ser[0]) == pytest.approx((1 + u * t) / (1 + (1 + u) * t), rel=1e-12)
    p1 = (t + (v - u) * (1 - t * t)) / (2 * (1 + (1 + u) * t) ** 2)
    assert float(ser[1]) == pytest.approx(p1, rel=1e-10)


@pytest.mark.parametrize("u,v", [(0.0, 1.0), (0.5, 2.0)])
def test_interval_mean_count(u, v):
    d = 1e-7
    mean = (1 - exact.interval_pgf(u, v, 1 - d)) / d
    assert mean == pytest.approx(v - u, rel=1e-4)


@pytest.mark.parametrize("u", [0.0, 0.5, 3.0])
def test_interval_to_infinity(u):
    ser = exact.interval_pmf_series(u, math.inf, 3)
    assert float(ser[0]) == pytest.approx((1 + u) / (2 + u))
    assert float(ser[1]) == pytest.approx(1 / (2 * (2 + u) ** 2))
    assert float(ser[2]) == pytest.approx((4 + 3 * u) / (8 * (2 + u) ** 3))


def test_interval_from_zero_is_ndes():
    for z in (0.1, 0.6):
        assert exact.interval_pgf(0.0, 1.5, z) == pytest.approx(exact.ndes_pgf(1.5, z), rel=1e-14)


@pytest.mark.parametrize("lam,v", [(1.0, 0.5), (2.0, 1.0), (0.5, 2.0)])
def test_cluster_series_sums_to_pgf(lam, v):
    ser = exact.cluster_pmf_series(lam, v, 80)
    for z in (0.0, 0.4):
        assert float(ser(z)) == pytest.approx(exact.cluster_pgf(lam, v, z), abs=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.floats(0.1, 3), st.floats(0.1, 3), st.floats(0.05, 3), st.floats(0, 1))
def test_cluster_superposition(l1, l2, v, z):
    lhs = exact.cluster_pgf(l1 + l2, v, z)
    assert lhs == pytest.approx(exact.cluster_pgf(l1, v, z) * exact.cluster_pgf(l2, v, z), rel=1e-12)


def test_max_level_and_first_death():
    assert exact.max_mnu_tail(1.0) == pytest.approx(1 / 3)
    t = np.array([0.0, 0.5, 2.0])
    assert np.allclose(exact.first_death_tail(t), 2 / (1 + np.exp(2 * t)))


@pytest.mark.parametrize("t", [0.0, 0.5, 3.0])
def test_survival_initial_pmf_normalised(t):
    total = math.fsum(exact.survival_initial_pmf(n, t) for n in range(1, 400))
    assert total == pytest.approx(1.0, abs=1e-12)
    assert exact.survival_initial_pmf(0, t) == 0.0


# ---------------------------------------------------------------- two representations


@pytest.mark.parametrize("k", [1, 2, 7, 50])
def test_agreement_coefficient_is_gap_tail(k):
    for v in (0.3, 1.5):
        assert exact.agreement_lhs_coefficient(k, v) == pytest.approx(exact.tail_dk(k, v), rel=1e-13, abs=1e-300)


@pytest.mark.parametrize("v,z", [(0.5, -0.5), (1.0, 0.5), (2.0, 0.9)])
def test_agreement_within_tail_bound(v, z):
    a = exact.agreement_check(v, z, 400)
    assert a.error <= 1e-9
    assert a.error <= a.tail_bound + 1e-14


def test_binomial_row():
    assert exact.binomial_row(6) == [math.comb(6, j) for j in range(7)]
    with pytest.raises(ValueError):
        exact.agreement_check(1.0, 1.0, 5)
