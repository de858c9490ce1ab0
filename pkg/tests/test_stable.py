import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from artifact.errors import ValidationError
from artifact.stable import (
    StableFamily,
    StableParams,
    extreme_stable_mgf,
    stable_cf,
    stable_convolve,
    stable_log_mgf,
    stable_log_mgf_grad,
    stable_sample,
)

import oracles

alphas = st.floats(0.3, 2.0).filter(lambda a: abs(a - 1) > 1e-3)
scales = st.floats(0.1, 5.0)
locs = st.floats(-10, 10)
skews = st.floats(-1, 1)


def test_cf_examples():
    assert stable_cf(StableParams(1.3, 2.0, 1.5, 0.4), 0.0) == 1.0
    assert stable_cf(StableParams(2.0, 0.0, 1.0, 0.0), 1.0) == pytest.approx(np.exp(-1), rel=1e-15)
    assert stable_cf(StableParams(1.0, 0.0, 1.0, 0.0), 2.0) == pytest.approx(np.exp(-2), rel=1e-15)


def test_param_validation():
    for bad in [(0.0, 0, 1, 0), (2.1, 0, 1, 0), (1.5, 0, 0, 0), (1.5, 0, 1, 1.5)]:
        with pytest.raises(ValidationError):
            StableParams(*bad)


def test_extreme_mgf_examples():
    assert extreme_stable_mgf(StableParams(1.7, 3.0, 2.0, -1.0), 0.0) == 1.0
    assert extreme_stable_mgf(StableParams(2.0, 0.0, 1.0, -1.0), 1.0) == pytest.approx(np.e, rel=1e-15)
    expected = np.exp(-1 / np.cos(0.9 * np.pi))
    assert extreme_stable_mgf(StableParams(1.8, 0.0, 1.0, -1.0), 1.0) == pytest.approx(expected, rel=1e-14)


def test_extreme_mgf_errors():
    with pytest.raises(ValidationError):
        extreme_stable_mgf(StableParams(1.8, 0.0, 1.0, 1.0), 1.0)
    with pytest.raises(ValidationError):
        extreme_stable_mgf(StableParams(1.0, 0.0, 1.0, -1.0), 1.0)
    with pytest.raises(ValidationError):
        extreme_stable_mgf(StableParams(1.8, 0.0, 1.0, -1.0), -1.0)


def test_convolve_examples():
    r = stable_convolve(StableParams(2, 0, 1, 0), StableParams(2, 0, 1, 0))
    assert (r.mu, r.beta) == (0, 0) and r.sigma == pytest.approx(np.sqrt(2), rel=1e-15)
    r = stable_convolve(StableParams(1.8, 1, 1, 1), StableParams(1.8, 2, 1, 1))
    assert r.mu == 3 and r.beta == 1 and r.sigma == pytest.approx(2 ** (1 / 1.8), rel=1e-15)
    r = stable_convolve(StableParams(1.5, 0, 1, 1), StableParams(1.5, 0, 1, -1))
    assert r.beta == 0 and r.sigma == pytest.approx(2 ** (1 / 1.5), rel=1e-15)
    with pytest.raises(ValidationError):
        stable_convolve(StableParams(1.5, 0, 1, 1), StableParams(1.6, 0, 1, 1))


@given(a=alphas, m1=locs, m2=locs, s1=scales, s2=scales, b1=skews, b2=skews)
def test_cf_convolution_consistency(a, m1, m2, s1, s2, b1, b2):
    p1, p2 = StableParams(a, m1, s1, b1), StableParams(a, m2, s2, b2)
    t = np.linspace(-3, 3, 13)
    lhs = stable_cf(stable_convolve(p1, p2), t)
    rhs = stable_cf(p1, t) * stable_cf(p2, t)
    assert np.allclose(lhs, rhs, rtol=1e-10, atol=1e-300)


@given(a=alphas, m=locs, s=scales, b=skews, t=st.floats(-5, 5))
def test_cf_modulus(a, m, s, b, t):
    assert abs(stable_cf(StableParams(a, m, s, b), t)) == pytest.approx(np.exp(-abs(s * t) ** a), rel=1e-12)


@given(m=locs, s=scales, u=st.floats(0, 3))
def test_alpha_two_mgf_is_normal(m, s, u):
    got = extreme_stable_mgf(StableParams(2.0, m, s, -1.0), u)
    assert got == pytest.approx(oracles.normal_mgf(u, m, 2 * s * s), rel=1e-12)


@given(a=st.floats(1.05, 1.99), m=locs, s=scales, u=st.floats(0.0, 2.0))
def test_log_mgf_grad(a, m, s, u):
    tau = -u
    v, dm, ds, dt = stable_log_mgf_grad(tau, a, m, s)
    assert v == pytest.approx(stable_log_mgf(tau, a, m, s), rel=1e-13, abs=1e-13)
    h = 1e-6
    f = lambda mm, ss, tt: stable_log_mgf(tt, a, mm, ss)
    assert dm == pytest.approx((f(m + h, s, tau) - f(m - h, s, tau)) / (2 * h), rel=1e-6, abs=1e-7)
    assert ds == pytest.approx((f(m, s + h, tau) - f(m, s - h, tau)) / (2 * h), rel=1e-6, abs=1e-7)
    if u > 1e-3:
        assert dt == pytest.approx((f(m, s, tau + h) - f(m, s, tau - h)) / (2 * h), rel=1e-6, abs=1e-7)


def test_sampler_alpha_two_is_normal(rng):
    x = stable_sample(StableParams(2.0, 0.0, 1.0, 0.0), rng, 10_000)
    assert stats.kstest(x, "norm", args=(0, np.sqrt(2))).pvalue > 0.01


def test_sampler_levy(rng):
    x = stable_sample(StableParams(0.5, 0.0, 1.0, 1.0), rng, 10_000)
    assert stats.kstest(x, lambda v: oracles.levy_cdf(v, 0.0, 1.0)).pvalue > 0.01


def test_sampler_tail_index(rng):
    x = stable_sample(StableParams(1.5, 0.0, 1.0, 1.0), rng, 100_000)
    assert 1.2 <= oracles.hill_estimator(x, 0.01) <= 1.8


@pytest.mark.parametrize("prm", [StableParams(1.8, 1.0, 0.5, 1.0), StableParams(1.2, -1.0, 1.0, -0.3),
                                 StableParams(1.0, 0.5, 1.0, 0.5)])
def test_sampler_matches_cf(prm, rng):
    n = 100_000
    x = stable_sample(prm, rng, n)
    t = np.linspace(-2, 2, 17)
    emp = np.exp(1j * np.outer(t, x)).mean(axis=1)
    assert np.max(np.abs(emp - stable_cf(prm, t))) < 4 / np.sqrt(n)


def test_sum_of_draws_matches_convolution(rng):
    p1, p2 = StableParams(1.6, 0.5, 1.0, 1.0), StableParams(1.6, -0.2, 0.7, 0.2)
    n = 10_000
    a = stable_sample(p1, rng, n) + stable_sample(p2, rng, n)
    b = stable_sample(stable_convolve(p1, p2), rng, n)
    assert stats.ks_2samp(a, b).pvalue > 0.01


def test_family():
    fam = StableFamily(1.8)
    assert fam.has_mean
    fam.require_mean()
    with pytest.raises(ValidationError):
        StableFamily(0.9).require_mean()
    with pytest.raises(ValidationError):
        StableFamily(1.0)
    assert fam.to_dict() == {"name": "stable", "alpha": 1.8}
