import math

import numpy as np
import pytest
from scipy import stats as sps

from laplacewalk import bessel, exact, stats


def rng(seed=0):
    return np.random.default_rng(seed)


def exp2_cdf(x):
    return 1 - np.exp(-2 * np.asarray(x))


def count_fit(counts, pmf):
    return stats.chi2_gof(stats.count_classes(counts, 11), stats.pmf_classes(pmf, 11))


# ---------------------------------------------------------------- BESQ transition


def test_besq4_from_zero_is_twice_gamma2():
    # calibration gate: Q_4(0, 1) / 2 ~ Gamma(2)
    q = bessel.besq_step(rng(1), np.zeros(50_000), 4.0, 1.0)
    r = stats.ks_one_sample(q / 2, sps.gamma(2.0).cdf)
    assert r.passed, r.line()


@pytest.mark.parametrize("delta,x,h", [(3.0, 2.0, 0.5), (0.0, 1.5, 0.3), (4.0, 0.7, 2.0)])
def test_besq_mean_and_variance(delta, x, h):
    q = bessel.besq_step(rng(2), np.full(200_000, x), delta, h)
    assert stats.mean_check(q, x + delta * h, 4.0).passed
    var = 4 * x * h + 2 * delta * h * h
    assert q.var() == pytest.approx(var, rel=0.03)


def test_besq0_absorption_probability():
    q, h = 1.2, 0.4
    out = bessel.besq_step(rng(3), np.full(100_000, q), 0.0, h)
    r = stats.binomial_check(int((out == 0).sum()), out.size, math.exp(-q / (2 * h)))
    assert r.passed, r.line()


@pytest.mark.parametrize("delta", [0.0, 4.0])
def test_grid_halving_preserves_the_law(delta):
    x0 = np.full(40_000, 1.0)
    one = bessel.besq_step(rng(4), x0, delta, 0.2)
    g = rng(5)
    two = bessel.besq_step(g, bessel.besq_step(g, x0, delta, 0.1), delta, 0.1)
    r = stats.ks_two_sample(one, two)
    assert r.passed, r.line()


def test_besq_path_grid_and_domain():
    p = bessel.besq_path(4.0, 1.0, 0.25, 2.0, rng(6))
    assert p.values.size == 9 and p.values[0] == 1.0
    assert np.allclose(p.times, np.arange(9) * 0.25)
    c = p.cumulative()
    assert c[0] == 0 and c[1] == pytest.approx(0.125 * (p.values[0] + p.values[1]))
    with pytest.raises(ValueError):
        bessel.besq_path(-1.0, 0.0)
    with pytest.raises(ValueError):
        bessel.besq_path(4.0, 0.0, h=0.0)


# ---------------------------------------------------------------- Cox inversion


def test_cox_points_under_constant_intensity_are_poisson():
    path = bessel.BesqPath(0.0, 2.0, 0.1, np.full(31, 2.0))
    theta = 0.5  # intensity 1 on [0, 3]
    g = rng(7)
    samples = [bessel.cox_points(path, theta, g).points for _ in range(4000)]
    counts = np.array([s.size for s in samples])
    assert stats.mean_check(counts, 3.0, 4.0).passed
    pts = np.concatenate(samples)
    assert np.all((pts >= 0) & (pts <= 3.0))
    assert sps.kstest(pts / 3.0, "uniform").pvalue > 1e-3
    with pytest.raises(ValueError):
        bessel.cox_points(path, 0.0, g)


def test_cox_batch_rejects_off_grid_levels():
    with pytest.raises(ValueError):
        bessel.cox_batch(rng(), np.ones(3), 4.0, h=0.01, levels=(0.333,))


def test_cox_batch_counts_are_snapshots_of_one_stream():
    b = bessel.cox_batch(rng(8), np.full(2000, 2.0), 4.0, h=0.01, v_max=2.0, n_low=3, levels=(0.5, 1.0, 2.0))
    c = b.counts
    assert np.all(np.diff(c, axis=1) >= 0)
    assert np.array_equal(c[:, -1], b.total)
    inside = (b.low <= 0.5).sum(axis=1)
    assert np.array_equal(np.minimum(c[:, 0], 3), inside)


# ---------------------------------------------------------------- remaining count


def test_sample_tau_law():
    t = bessel.sample_tau(rng(9), 100_000)
    assert t.min() >= 1
    pmf = list(exact.tau_pmf_series(11).to_float().coeffs[1:])
    r = stats.chi2_gof(stats.count_classes(t - 1, 11), stats.pmf_classes(pmf, 11))
    assert r.passed, r.line()


def test_sample_tau_far_tail():
    t = bessel.sample_tau(rng(10), 200_000)
    m = 5000
    r = stats.binomial_check(int((t > m).sum()), t.size, exact.central_binomial(m))
    assert r.passed, r.line()


@pytest.mark.parametrize("z", [0.3, 0.8])
def test_remaining_count_pgf(z):
    q = 3.0
    n = bessel.remaining_count(rng(11), np.full(100_000, q))
    est, se = stats.empirical_pgf(n, z)
    r = stats.sigma_check(est, math.exp(-q / 2 * math.sqrt(1 - z)), se, 4.0)
    assert r.passed, r.line()


# ---------------------------------------------------------------- named samplers


@pytest.fixture(scope="module")
def ndes():
    return bessel.ndes_bessel_batch(rng(12), 30_000, levels=(0.5, 1.0), h=0.01)


def test_ndes_bessel_total_is_nu(ndes):
    r = count_fit(ndes.total, exact.nu_pmf_series(11).to_float().coeffs)
    assert r.passed, r.line()
    assert np.all(ndes.total >= ndes.extra["horizon_count"])


@pytest.mark.parametrize("v", [0.5, 1.0])
def test_ndes_bessel_counts(ndes, v):
    r = count_fit(ndes.count_at(v), exact.ndes_pmf_series(v, 11).coeffs)
    assert r.passed, r.line()


def test_single_ndes_path_counts():
    g = rng(13)
    counts = [bessel.simulate_ndes_bessel(g, h=0.01, v_max=1.0).sample().count_le(1.0) for _ in range(3000)]
    r = count_fit(np.array(counts), exact.ndes_pmf_series(1.0, 11).coeffs)
    assert r.passed, r.line()


def test_nw_starts_agree_and_first_point_is_exp2():
    a = bessel.nw_bessel_batch(rng(14), 20_000, K=2, h=0.005, start="gamma")
    b = bessel.nw_bessel_batch(rng(15), 20_000, K=2, h=0.005, start="shift")
    assert stats.ks_two_sample(a.low[:, 0], b.low[:, 0]).passed
    assert sps.kstest(a.low[:, 0], exp2_cdf).pvalue > 1e-3
    with pytest.raises(ValueError):
        bessel.nw_bessel_batch(rng(), 10, start="other")


def test_differences_give_gap_laws_and_first_state():
    w, q1 = bessel.w_via_differences_batch(rng(16), 20_000, 3, h=0.005)
    assert np.all(np.diff(w, axis=1) >= 0)
    d = np.diff(np.concatenate([np.zeros((w.shape[0], 1)), w], axis=1), axis=1)
    for k in (1, 3):
        r = stats.binomial_check(int((d[:, k - 1] > 0.3).sum()), d.shape[0], exact.tail_dk(k, 0.3))
        assert r.passed, r.line()
    r = stats.ks_one_sample(q1 / 2, sps.gamma(2.0).cdf)
    assert r.passed, r.line()


def test_single_run_wrappers():
    p = bessel.w_via_differences(4, rng(17), h=0.01)
    assert len(p) == 4
    c = bessel.simulate_nw_bessel(rng(18), h=0.01, v_max=1.0)
    assert np.all(c.points <= 1.0)
    with pytest.raises(ValueError):
        bessel.w_via_differences(0, rng())


@pytest.mark.parametrize("lam,v", [(2.0, 1.0), (0.5, 2.0)])
def test_poisson_cluster_counts(lam, v):
    b = bessel.poisson_cluster_batch(rng(19), 30_000, lam, v, n_low=2)
    r = count_fit(b.total, exact.cluster_pmf_series(lam, v, 11).coeffs)
    assert r.passed, r.line()
    assert np.all(b.low[np.isfinite(b.low)] <= v)


def test_poisson_cluster_single_and_batch_agree():
    g = rng(20)
    single = np.array([len(bessel.poisson_cluster(1.0, 1.0, g).sample()) for _ in range(3000)])
    batch = bessel.poisson_cluster_batch(rng(21), 30_000, 1.0, 1.0).total
    r = stats.chi2_two_sample(stats.count_classes(single, 11), stats.count_classes(batch, 11))
    assert r.passed, r.line()
    with pytest.raises(ValueError):
        bessel.poisson_cluster(0.0, 1.0, g)
