import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from etaslin.catalog import EventCatalog, ObservationWindow
from etaslin.model import (EtasParams, LegacyEtasParams, LikelihoodEvaluator,
                           ParameterError, branching_ratio, compensator,
                           compensator_at_events, conditional_intensity,
                           convert_legacy, event_intensities,
                           exact_log_likelihood, exact_log_likelihood_legacy,
                           exp_kernel, log_omori_integral, magnitude_factor,
                           omori_integral, omori_kernel, segment_sums)

from conftest import random_catalog

mpmath.mp.dps = 40


def rel(a, b):
    return abs(a - b) / max(abs(b), 1e-300)


# brute-force oracles, written as plain loops over the history

def brute_intensity(t, times, mags, m0, p):
    total = p.mu
    for th, mh in zip(times, mags):
        if th < t:
            total += p.K * math.exp(p.alpha * (mh - m0)) * ((t - th) / p.c + 1) ** -p.p
    return total


def brute_loglik(cat, p):
    t1, t2, m0 = cat.window.t_start, cat.window.t_end, cat.window.m_cutoff
    ll = -p.mu * (t2 - t1)
    for th, mh in zip(cat.times, cat.magnitudes):
        ll += math.log(brute_intensity(th, cat.times, cat.magnitudes, m0, p))
        k = p.K * math.exp(p.alpha * (mh - m0))
        ll -= k * p.c / (p.p - 1) * (1 - ((t2 - th) / p.c + 1) ** (1 - p.p))
    return ll


# kernels

def test_omori_kernel_examples():
    assert omori_kernel(0.0, 0.1, 1.2) == 1.0
    assert omori_kernel(0.1, 0.1, 2.0) == pytest.approx(0.25, rel=1e-15)


def test_omori_kernel_vs_mpmath(rng):
    for _ in range(200):
        dt = rng.exponential(5.0)
        c = 10 ** rng.uniform(-4, 1)
        p = rng.uniform(1.0, 3.0)
        ref = (mpmath.mpf(dt) / mpmath.mpf(c) + 1) ** -mpmath.mpf(p)
        assert rel(omori_kernel(dt, c, p), float(ref)) < 1e-12


def test_omori_kernel_domain():
    with pytest.raises(ValueError):
        omori_kernel(-1e-3, 0.1, 1.2)
    with pytest.raises(ValueError):
        omori_kernel(1.0, 0.0, 1.2)


@given(st.floats(0, 1e3), st.floats(0, 1e3), st.floats(1e-4, 10),
       st.floats(1.0, 4.0))
def test_omori_kernel_monotone(a, b, c, p):
    lo, hi = sorted((a, b))
    va, vb = omori_kernel(lo, c, p), omori_kernel(hi, c, p)
    assert 0 < vb <= va <= 1


def test_exp_kernel_examples(rng):
    assert exp_kernel(0.0, 1.0, 2.0) == 2.0
    assert exp_kernel(700.0, 1.0, 1.0) < 1e-300
    for _ in range(100):
        dt, a, b = rng.exponential(3), rng.uniform(0, 5), rng.uniform(0, 5)
        ref = mpmath.mpf(b) * mpmath.exp(-mpmath.mpf(a) * mpmath.mpf(dt))
        assert rel(exp_kernel(dt, a, b), float(ref)) < 1e-12
    with pytest.raises(ValueError):
        exp_kernel(-1.0, 1.0, 1.0)


def test_magnitude_factor(rng):
    assert magnitude_factor(3.0, 1.5, 2.0, 3.0) == 1.5
    assert magnitude_factor(4.0, 1.0, math.log(2), 3.0) == pytest.approx(2.0, rel=1e-15)
    with pytest.raises(ValueError):
        magnitude_factor(2.9, 1.0, 1.0, 3.0)
    for _ in range(100):
        m0 = rng.uniform(0, 4)
        m, k, a = m0 + rng.exponential(1), rng.uniform(0, 5), rng.uniform(0, 3)
        ref = mpmath.mpf(k) * mpmath.exp(mpmath.mpf(a) * (mpmath.mpf(m) - mpmath.mpf(m0)))
        assert rel(magnitude_factor(m, k, a, m0), float(ref)) < 1e-12


# Omori integral

def test_omori_integral_infinite_bin():
    assert omori_integral(0.0, math.inf, 0.0, 0.5, 2.0) == pytest.approx(0.5, rel=1e-14)
    q, _ = integrate.quad(lambda x: omori_kernel(x, 0.5, 2.0), 0, np.inf,
                          epsabs=0, epsrel=1e-12)
    assert rel(0.5, q) < 1e-10


def test_omori_integral_zero_width():
    assert omori_integral(3.0, 3.0, 1.0, 0.2, 1.3) == 0.0


def test_omori_integral_divergent():
    with pytest.raises(ValueError, match="diverges"):
        omori_integral(0.0, math.inf, 0.0, 0.5, 1.0)
    with pytest.raises(ValueError):
        omori_integral(0.5, 0.4, 0.0, 0.5, 1.5)


def test_omori_integral_log_branch_at_p_one():
    c = 0.3
    expected = c * math.log((5.0 / c + 1) / (1.0 / c + 1))
    assert rel(omori_integral(1.0, 5.0, 0.0, c, 1.0), expected) < 1e-14
    # continuity across the branch
    near = omori_integral(1.0, 5.0, 0.0, c, 1.0 + 1e-10)
    assert rel(near, expected) < 1e-8


def test_omori_integral_vs_quadrature(rng):
    for _ in range(200):
        c = 10 ** rng.uniform(-3, 0.5)
        p = rng.uniform(1.0, 3.0)
        th = rng.uniform(0, 10)
        lo = th + rng.exponential(2) * rng.integers(0, 2)
        hi = lo + rng.exponential(5)
        val = omori_integral(lo, hi, th, c, p)
        pts = [x for x in (th + c, th + 10 * c) if lo < x < hi]
        q, _ = integrate.quad(lambda t: omori_kernel(t - th, c, p), lo, hi,
                              points=pts or None, epsabs=0, epsrel=1e-13,
                              limit=200)
        assert rel(val, q) < 1e-8


@given(st.floats(1e-3, 5), st.floats(1.0, 3.0), st.floats(0, 10),
       st.floats(0, 10), st.floats(0, 10))
def test_omori_integral_additive(c, p, a, b, d):
    x0, x1, x2 = sorted((a, b, d))
    whole = omori_integral(x0, x2, 0.0, c, p)
    parts = omori_integral(x0, x1, 0.0, c, p) + omori_integral(x1, x2, 0.0, c, p)
    assert parts == pytest.approx(whole, rel=1e-12, abs=1e-300)


def test_log_omori_integral_gradients(rng):
    h = 1e-6
    for _ in range(100):
        c = 10 ** rng.uniform(-2, 0)
        p = rng.uniform(1.05, 2.5)
        lo = rng.exponential(3) * rng.integers(0, 2)
        hi = lo + rng.exponential(3) if rng.random() < 0.8 else math.inf
        _, dc, dp = log_omori_integral(lo, hi, c, p, grad=True)
        fc = (log_omori_integral(lo, hi, c * (1 + h), p)
              - log_omori_integral(lo, hi, c * (1 - h), p)) / (2 * c * h)
        fp = (log_omori_integral(lo, hi, c, p + h)
              - log_omori_integral(lo, hi, c, p - h)) / (2 * h)
        assert abs(dc - fc) <= 1e-5 * abs(fc) + 1e-6
        assert abs(dp - fp) <= 1e-5 * abs(fp) + 1e-6


# intensity and compensator

def test_intensity_empty_history_and_k_zero(small_catalog):
    p = EtasParams(0.7, 0.0, 1.0, 0.1, 1.2)
    assert conditional_intensity(2.0, small_catalog, EtasParams(0.7, 1, 1, .1, 1.2)) == 0.7
    np.testing.assert_array_equal(
        conditional_intensity([2.0, 5.0, 11.5], small_catalog, p), 0.7)


def test_intensity_vs_brute_force(small_catalog, params):
    cat = small_catalog
    for t in (2.0, 2.5, 2.7, 3.0, 3.02, 5.0, 7.2, 11.999):
        ref = brute_intensity(t, cat.times, cat.magnitudes, 3.0, params)
        assert rel(conditional_intensity(t, cat, params), ref) < 1e-12


def test_intensity_left_continuous(small_catalog, params):
    # an event at exactly t does not count towards lambda(t)
    before = conditional_intensity(7.2, small_catalog, params)
    after = conditional_intensity(7.2 + 1e-12, small_catalog, params)
    assert after > before + 1.0
    np.testing.assert_allclose(event_intensities(small_catalog, params),
                               conditional_intensity(small_catalog.times,
                                                     small_catalog, params),
                               rtol=1e-13)


def test_compensator_examples(small_catalog):
    w = ObservationWindow(0.0, 20.0, 3.0)
    cat = EventCatalog([1.0, 4.0], [3.5, 4.0], w)
    assert compensator(10.0, cat, EtasParams(0.5, 0.0, 1.0, 0.1, 1.2)) == 5.0
    assert compensator(0.0, cat, EtasParams(0.5, 1.0, 1.0, 0.1, 1.2)) == 0.0


def test_compensator_vs_quadrature(small_catalog, params):
    cat = small_catalog
    brk = list(cat.times)
    for t in (3.0, 6.0, 9.5, 12.0):
        pts = [b for b in brk if b < t] + [b + params.c for b in brk if b + params.c < t]
        q, _ = integrate.quad(lambda s: conditional_intensity(s, cat, params),
                              2.0, t, points=pts, epsabs=0, epsrel=1e-12,
                              limit=500)
        assert rel(compensator(t, cat, params), q) < 1e-8


def test_compensator_increments_vs_quadrature(sim_catalog, params):
    cat = sim_catalog
    t1, t2 = 50.0, 51.0
    pts = [b for b in cat.times if t1 < b < t2]
    q, _ = integrate.quad(lambda s: conditional_intensity(s, cat, params),
                          t1, t2, points=pts or None, epsabs=0, epsrel=1e-12,
                          limit=500)
    diff = compensator(t2, cat, params) - compensator(t1, cat, params)
    assert rel(diff, q) < 1e-8


def test_compensator_at_events_matches_scalar(sim_catalog, params):
    vec = compensator_at_events(sim_catalog, params)
    ref = compensator(sim_catalog.times, sim_catalog, params)
    np.testing.assert_allclose(vec, ref, rtol=1e-12)
    assert np.all(np.diff(vec) > 0)


@given(st.floats(0.01, 2), st.floats(0, 2), st.floats(0, 2.5),
       st.floats(1e-3, 1), st.floats(1.01, 2.5))
@settings(max_examples=40, deadline=None)
def test_monotonicity(mu, K, alpha, c, p):
    params = EtasParams(mu, K, alpha, c, p)
    cat = EventCatalog([2.5, 3.0, 3.05, 7.2, 11.0], [4.1, 3.0, 3.6, 5.2, 3.3],
                       ObservationWindow(2.0, 12.0, 3.0))
    grid = np.linspace(2.0, 12.0, 97)
    comp = compensator(grid, cat, params)
    assert np.all(np.diff(comp) >= 0)
    assert np.all(conditional_intensity(grid, cat, params) >= mu)


# likelihood

def test_loglik_poisson_case(small_catalog):
    p = EtasParams(0.6, 0.0, 1.0, 0.1, 1.2)
    expected = -0.6 * 10.0 + 5 * math.log(0.6)
    assert rel(exact_log_likelihood(small_catalog, p), expected) < 1e-14


def test_loglik_empty_catalog():
    cat = EventCatalog([], [], ObservationWindow(0.0, 8.0, 3.0))
    assert exact_log_likelihood(cat, EtasParams(0.25, 1, 1, .1, 1.2)) == -2.0


def test_loglik_zero_mu_is_minus_inf(small_catalog):
    assert exact_log_likelihood(small_catalog, EtasParams(0.0, 1, 1, .1, 1.2)) == -math.inf


def test_loglik_vs_brute_force(rng):
    for _ in range(20):
        cat = random_catalog(int(rng.integers(2, 40)), rng, 1.0, 60.0)
        p = EtasParams(rng.uniform(0.05, 1), rng.uniform(0, 1),
                       rng.uniform(0, 2), 10 ** rng.uniform(-3, 0),
                       rng.uniform(1.05, 2.5))
        assert rel(exact_log_likelihood(cat, p), brute_loglik(cat, p)) < 1e-10


def test_likelihood_evaluator_matches(sim_catalog, rng):
    ev = LikelihoodEvaluator(sim_catalog, cache_size=2)
    for _ in range(30):
        p = EtasParams(rng.uniform(0.05, 1), rng.uniform(0, 1),
                       rng.choice([0.5, 1.5]), rng.choice([0.01, 0.1]),
                       rng.choice([1.1, 1.6]))
        assert rel(ev(p), exact_log_likelihood(sim_catalog, p)) < 1e-12


def test_segment_sums():
    n = 5
    tgt, src = np.tril_indices(n, -1)
    vals = np.arange(tgt.size, dtype=float) + 1
    expected = np.zeros(n)
    np.add.at(expected, tgt, vals)
    np.testing.assert_array_equal(segment_sums(vals, n), expected)
    np.testing.assert_array_equal(segment_sums(np.empty(0), 1), [0.0])


# parametrizations

def test_convert_legacy_examples():
    assert convert_legacy(LegacyEtasParams(0.1, 1.0, 1.0, 0.5, 2.0)).K == 2.0
    assert convert_legacy(LegacyEtasParams(0.1, 0.0, 1.0, 0.5, 2.0)).K == 0.0
    with pytest.raises(ParameterError):
        LegacyEtasParams(0.1, 1.0, 1.0, 0.5, 1.0)


def test_legacy_likelihood_invariance(rng):
    for _ in range(100):
        cat = random_catalog(int(rng.integers(5, 60)), rng, 0.0, 80.0)
        lp = LegacyEtasParams(rng.uniform(0.05, 1), rng.uniform(0, 1),
                              rng.uniform(0, 2), 10 ** rng.uniform(-3, 0),
                              rng.uniform(1.05, 3))
        a = exact_log_likelihood_legacy(cat, lp)
        b = exact_log_likelihood(cat, convert_legacy(lp))
        assert rel(b, a) < 1e-10


def test_param_validation():
    for bad in ((-1, 1, 1, 1, 1.2), (1, -1, 1, 1, 1.2), (1, 1, -1, 1, 1.2),
                (1, 1, 1, 0, 1.2), (1, 1, 1, 1, 0.9), (math.nan, 1, 1, 1, 1.2)):
        with pytest.raises(ParameterError):
            EtasParams(*bad)
    p = EtasParams(1, 2, 3, 4, 5)
    assert EtasParams.from_array(p.as_array()) == p
    assert list(p.as_dict()) == ["mu", "K", "alpha", "c", "p"]


def test_branching_ratio():
    p = EtasParams(0.1, 0.5, 1.0, 0.02, 1.2)
    beta = math.log(10)
    # offspring = K E[exp(alpha dm)] * integral of the kernel to infinity
    expected = 0.5 * beta / (beta - 1.0) * 0.02 / 0.2
    assert branching_ratio(p, beta) == pytest.approx(expected, rel=1e-14)
    assert branching_ratio(EtasParams(0.1, 0.5, 3.0, 0.02, 1.2), beta) == math.inf
