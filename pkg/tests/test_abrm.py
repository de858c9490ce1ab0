import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from artifact.abrm import (
    AbrmSpec,
    ParameterLayout,
    abrm_outstanding_mean,
    abrm_sample_cell,
    cell_log_mgf_grad,
    cell_log_transform,
    family_from_dict,
    joint_log_mgf,
    joint_mgf,
    simulate_abrm,
    stable_abrm_marginal,
    tweedie_abrm_marginal,
    tweedie_loadings,
)
from artifact.dispersion import TweedieFamily, TweedieParams, tweedie_mgf
from artifact.errors import ValidationError
from artifact.stable import StableFamily, StableParams, extreme_stable_mgf, stable_cf, stable_convolve
from artifact.triangle import DevelopmentPattern, Triangle, standard_mask

import oracles


def neg(prm):
    """Law of ``-X``: the left-skewed form that has an MGF for positive arguments."""
    return StableParams(prm.alpha, -prm.mu, prm.sigma, -prm.beta)


def two_line(family, systematic=(1.0, 1.0), n=4):
    a = DevelopmentPattern(np.full(n, 5.0), np.linspace(1, 0.4, n), 0.2)
    b = DevelopmentPattern(np.full(n, 4.0), np.linspace(1, 0.55, n), 0.3)
    return AbrmSpec(family, [a, b], systematic)


def one_cell(family, m=5.0, g=0.2, systematic=(1.0, 1.0)):
    return AbrmSpec(family, [DevelopmentPattern([m], [1.0], g)], systematic)


# ------------------------------------------------------------------- marginals


def test_tweedie_marginal_gamma_example():
    # Y ~ Gamma(shape 5, scale 1); b = 1; Z ~ Gamma(shape 1, scale 1); the sum has shape 6
    m = tweedie_abrm_marginal(one_cell(TweedieFamily(2)), 0, 0, 0)
    assert m.mu == pytest.approx(6.0, rel=1e-15)
    assert m.sigma2 == pytest.approx(1 / 6, rel=1e-14)
    tau = np.linspace(-2, 0.9, 7)
    assert np.allclose(tweedie_mgf(m, tau), oracles.gamma_mgf(tau, 5.0, 0.2) * oracles.gamma_mgf(tau, 1.0, 1.0), rtol=1e-12)


def test_tweedie_marginal_vanishing_shock():
    for p in (0.0, 1.0, 1.5, 2.0):
        m = tweedie_abrm_marginal(one_cell(TweedieFamily(p), systematic=(1.0, 1e12)), 0, 0, 0)
        assert m.mu == pytest.approx(5.0, rel=1e-10)
        assert m.sigma2 == pytest.approx(0.2, rel=1e-10)


def test_tweedie_marginal_without_shock():
    m = tweedie_abrm_marginal(one_cell(TweedieFamily(1.5), systematic=None), 0, 0, 0)
    assert (m.mu, m.sigma2) == (5.0, 0.2)


@given(p=st.sampled_from([0.0, 1.0, 1.2, 1.5, 2.0]), m=st.floats(0.5, 20), g=st.floats(0.05, 2),
       a=st.floats(0.1, 5), b=st.floats(0.1, 5), u=st.floats(0.0, 1.0))
def test_tweedie_marginal_matches_factorized_mgf(p, m, g, a, b, u):
    spec = one_cell(TweedieFamily(p), m, g, (a, b))
    marg = tweedie_abrm_marginal(spec, 0, 0, 0)
    tau = -u / np.sqrt(marg.variance)
    bl = spec.loadings[0, 0, 0]
    direct = tweedie_mgf(TweedieParams(p, m, g), tau) * tweedie_mgf(TweedieParams(p, a, b), bl * tau)
    assert tweedie_mgf(marg, tau) == pytest.approx(direct, rel=1e-10)


def test_marginal_family_mismatch():
    with pytest.raises(ValidationError):
        tweedie_abrm_marginal(one_cell(StableFamily(1.8)), 0, 0, 0)
    with pytest.raises(ValidationError):
        stable_abrm_marginal(one_cell(TweedieFamily(2)), 0, 0, 0)
    with pytest.raises(ValidationError):
        tweedie_abrm_marginal(one_cell(TweedieFamily(2)), 1, 0, 0)


def test_stable_marginal_examples():
    s = stable_abrm_marginal(one_cell(StableFamily(1.8), systematic=(0.3, 1e-300)), 0, 0, 0)
    assert s.mu == pytest.approx(5.3) and s.sigma == pytest.approx(0.2, rel=1e-12) and s.beta == 1.0
    s = stable_abrm_marginal(one_cell(StableFamily(2.0), g=1.0, systematic=(0.0, 1.0)), 0, 0, 0)
    ref = stable_convolve(StableParams(2.0, 5.0, 1.0, 1.0), StableParams(2.0, 0.0, 1.0, 1.0))
    assert s.sigma == pytest.approx(np.sqrt(2), rel=1e-15) and s.sigma == pytest.approx(ref.sigma, rel=1e-15)


# ------------------------------------------------------------------ joint MGF


@pytest.mark.parametrize("fam", [TweedieFamily(1.0), TweedieFamily(1.32), TweedieFamily(2.0), StableFamily(1.8)])
def test_joint_mgf_at_zero(fam):
    assert joint_mgf(two_line(fam), 1, 2, [0.0, 0.0]) == 1.0


def test_joint_mgf_without_shock_is_product():
    spec = two_line(TweedieFamily(1.5), None)
    tau = np.array([-0.3, -0.1])
    ref = 1.0
    for k in range(2):
        ref *= tweedie_mgf(TweedieParams(1.5, spec.lines[k].means()[1, 2], spec.lines[k].gamma), tau[k])
    assert joint_mgf(spec, 1, 2, tau) == pytest.approx(ref, rel=1e-12)
    assert np.all(spec.loadings == 0)


def test_stable_joint_mgf_closure():
    line = DevelopmentPattern([1.0], [1.0], 1.0)
    spec = AbrmSpec(StableFamily(1.8), [line, line], (1.0, 1.0))
    tau = -0.7
    # X1 + X2 = Y1 + Y2 + 2 Z; the sum is stable with the convolved parameters
    y = stable_convolve(StableParams(1.8, 1.0, 1.0, 1.0), StableParams(1.8, 1.0, 1.0, 1.0))
    z2 = StableParams(1.8, 2.0, 2.0, 1.0)
    total = stable_convolve(y, z2)
    lhs = joint_log_mgf(spec, 0, 0, [tau, tau])
    assert lhs == pytest.approx(np.log(extreme_stable_mgf(neg(total), -tau)), rel=1e-10)


@pytest.mark.parametrize("fam", [TweedieFamily(0.0), TweedieFamily(1.2), TweedieFamily(2.0), StableFamily(1.5)])
def test_joint_mgf_factorization(fam):
    spec = two_line(fam, (1.0, 1.5))
    for k in range(2):
        tau = np.zeros(2)
        tau[k] = -0.25
        if spec.is_tweedie:
            marg = tweedie_abrm_marginal(spec, 2, 1, k)
            ref = tweedie_mgf(marg, -0.25)
        else:
            marg = stable_abrm_marginal(spec, 2, 1, k)
            ref = extreme_stable_mgf(neg(marg), 0.25)
        assert joint_mgf(spec, 2, 1, tau) == pytest.approx(ref, rel=1e-12)


def test_joint_mgf_domain_errors():
    with pytest.raises(ValidationError, match="line 2"):
        joint_mgf(two_line(TweedieFamily(2)), 0, 0, [0.0, 10.0])
    with pytest.raises(ValidationError, match="shock"):
        joint_mgf(two_line(TweedieFamily(2), (1.0, 1.0)), 0, 0, [0.6, 0.6])
    with pytest.raises(ValidationError):
        joint_mgf(two_line(StableFamily(1.8)), 0, 0, [0.1, -0.1])
    with pytest.raises(ValidationError):
        joint_mgf(two_line(StableFamily(1.8)), 0, 0, [-0.1])


@given(p=st.sampled_from([1.0, 1.32, 2.0]), z1=st.floats(-1, 0), z2=st.floats(-1, 0),
       a=st.floats(0.2, 3), b=st.floats(0.2, 3))
def test_cell_grad_matches_differences(p, z1, z2, a, b):
    fam = TweedieFamily(p)
    loc = np.array([5.0, 3.0, 0.2, 0.4, a, b])
    z = np.array([z1, z2])
    v, g = cell_log_mgf_grad(fam, z, loc, 2, True)
    assert v == pytest.approx(cell_log_transform(fam, z, loc, 2, True), rel=1e-12, abs=1e-14)
    for q in range(loc.size):
        h = 1e-6 * loc[q]
        up, dn = loc.copy(), loc.copy()
        up[q] += h
        dn[q] -= h
        num = (cell_log_transform(fam, z, up, 2, True) - cell_log_transform(fam, z, dn, 2, True)) / (2 * h)
        assert g[q] == pytest.approx(num, rel=1e-5, abs=1e-8)


def test_stable_cell_grad():
    fam = StableFamily(1.8)
    loc = np.array([5.0, 3.0, 0.2, 0.4, 0.1, 0.3])
    z = np.array([-0.4, -0.2])
    _, g = cell_log_mgf_grad(fam, z, loc, 2, True)
    for q in range(loc.size):
        h = 1e-6
        up, dn = loc.copy(), loc.copy()
        up[q] += h
        dn[q] -= h
        num = (cell_log_transform(fam, z, up, 2, True) - cell_log_transform(fam, z, dn, 2, True)) / (2 * h)
        assert g[q] == pytest.approx(num, rel=1e-6, abs=1e-9)


# ------------------------------------------------------------------- loadings


def test_loadings_identity():
    spec = two_line(TweedieFamily(1.32), (2.0, 0.5))
    for k, ln in enumerate(spec.lines):
        ref = (2.0 / ln.means()) ** (1 - 1.32) * ln.gamma / 0.5
        assert np.array_equal(spec.loadings[k], ref)
    assert np.array_equal(two_line(StableFamily(1.8)).loadings, np.ones((2, 4, 4)))
    with pytest.raises(ValidationError):
        AbrmSpec(spec.family, spec.lines, spec.systematic, loadings=spec.loadings * 1.01)
    AbrmSpec(spec.family, spec.lines, spec.systematic, loadings=spec.loadings.copy())


def test_loadings_function():
    assert tweedie_loadings(2.0, 5.0, 0.2, 1.0, 1.0) == pytest.approx(1.0, rel=1e-15)
    assert tweedie_loadings(1.0, 5.0, 0.2, 1.0, 0.5) == pytest.approx(0.4, rel=1e-15)


def test_spec_validation():
    a = DevelopmentPattern([1.0, 1.0], [1.0, 1.0], 0.1)
    with pytest.raises(ValidationError):
        AbrmSpec(TweedieFamily(2), [])
    with pytest.raises(ValidationError):
        AbrmSpec(TweedieFamily(2), [a, DevelopmentPattern([1.0], [1.0], 0.1)])
    with pytest.raises(ValidationError):
        AbrmSpec(TweedieFamily(2), [a], (-1.0, 1.0))
    with pytest.raises(ValidationError):
        AbrmSpec(StableFamily(1.8), [a], (1.0, 0.0))
    with pytest.raises(ValidationError):
        AbrmSpec("gamma", [a])
    with pytest.raises(ValidationError):
        family_from_dict({"name": "lognormal"})


# -------------------------------------------------------------------- sampling


@pytest.mark.parametrize("p", [1.0, 1.32, 2.0])
def test_sampler_matches_tweedie_marginal(p, rng):
    spec = two_line(TweedieFamily(p), (1.0, 0.5))
    n = 100_000
    x = abrm_sample_cell(spec, 1, 2, rng, n)
    for k in range(2):
        marg = tweedie_abrm_marginal(spec, 1, 2, k)
        xs = x[:, k]
        assert abs(xs.mean() - marg.mu) < 4 * np.sqrt(marg.variance / n)
        m4 = np.mean((xs - xs.mean()) ** 4)
        assert abs(xs.var(ddof=1) - marg.variance) < 4 * np.sqrt((m4 - xs.var() ** 2) / n)


def test_sampler_matches_stable_marginal_cf(rng):
    spec = two_line(StableFamily(1.8), (0.1, 0.1))
    n = 100_000
    x = abrm_sample_cell(spec, 0, 1, rng, n)
    t = np.linspace(-2, 2, 9)
    for k in range(2):
        emp = np.exp(1j * np.outer(t, x[:, k])).mean(axis=1)
        assert np.max(np.abs(emp - stable_cf(stable_abrm_marginal(spec, 0, 1, k), t))) < 4 / np.sqrt(n)


def test_no_shock_components_independent(rng):
    x = abrm_sample_cell(two_line(TweedieFamily(2), None), 0, 0, rng, 10_000)
    assert abs(np.corrcoef(x.T)[0, 1]) < 4 / np.sqrt(10_000)


def test_stable_shock_positive_dependence(rng):
    line = DevelopmentPattern([1.0], [1.0], 1.0)
    x = abrm_sample_cell(AbrmSpec(StableFamily(1.8), [line, line], (1.0, 1.0)), 0, 0, rng, 10_000)
    # correlation is not defined for alpha < 2; use ranks
    r = np.argsort(np.argsort(x, axis=0), axis=0)
    assert np.corrcoef(r.T)[0, 1] > 4 / np.sqrt(10_000)


def test_simulate_abrm_shapes_and_means(rng):
    spec = two_line(TweedieFamily(1.5), (1.0, 1.0))
    n = 4000
    acc = np.zeros((2, 4, 4))
    for _ in range(n):
        tris, full = simulate_abrm(spec, rng, return_full=True)
        acc += full
    assert all(t.is_standard for t in tris)
    for k in range(2):
        m = spec.marginal_means(k)
        v = np.array([[tweedie_abrm_marginal(spec, i, j, k).variance for j in range(4)] for i in range(4)])
        assert np.all(np.abs(acc[k] / n - m) < 4 * np.sqrt(v / n))


def test_simulate_abrm_seeded():
    spec = two_line(StableFamily(1.8), (0.1, 0.1))
    a = simulate_abrm(spec, np.random.default_rng(1))
    b = simulate_abrm(spec, np.random.default_rng(1))
    assert a[0] == b[0] and a[1] == b[1]


# ------------------------------------------------------------------ outstanding


def test_outstanding_includes_shock_mean():
    spec = two_line(TweedieFamily(2), (1.0, 1.0))
    tri = Triangle(np.where(standard_mask(4), 1.0, np.nan))
    out = abrm_outstanding_mean(spec, tri)
    for k in range(2):
        ref = sum(tweedie_abrm_marginal(spec, i, j, k).mu for i in range(4) for j in range(4) if i + j > 3)
        assert out[k].sum() == pytest.approx(ref, rel=1e-12)
    assert out[0, 0] == 0


def test_outstanding_refuses_meanless_stable():
    spec = AbrmSpec(StableFamily(0.8), [DevelopmentPattern([1.0, 1.0], [1.0, 1.0], 0.1)], (0.0, 1.0))
    with pytest.raises(ValidationError):
        abrm_outstanding_mean(spec, Triangle([[1.0, 1.0], [1.0, np.nan]]))


# ---------------------------------------------------------------- serialization


@pytest.mark.parametrize("fam", [TweedieFamily(1.32), StableFamily(1.8)])
def test_json_round_trip(fam, tmp_path):
    spec = two_line(fam, (0.1, 0.2))
    spec.save(tmp_path / "s.json")
    back = AbrmSpec.load(tmp_path / "s.json")
    assert back.to_dict() == spec.to_dict()
    assert json.loads(json.dumps(spec.to_dict())) == spec.to_dict()


def test_json_errors(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{")
    with pytest.raises(ValidationError):
        AbrmSpec.load(bad)
    with pytest.raises(ValidationError):
        AbrmSpec.from_dict({"family": {"name": "tweedie", "p": 2}})
    with pytest.raises(ValidationError):
        AbrmSpec.from_dict([1, 2])


# ---------------------------------------------------------------------- layout


@pytest.mark.parametrize("fam", [TweedieFamily(1.32), TweedieFamily(2.0), StableFamily(1.8)])
@pytest.mark.parametrize("pin", ["nu", "eta"])
def test_layout_round_trip(fam, pin):
    spec = two_line(fam, (1.3, 1.0) if fam.to_dict().get("p") != 2.0 else (1.0, 0.7))
    lay = ParameterLayout(fam, 2, 4, 4, shock=True, pin=pin)
    theta = lay.pack(spec)
    assert theta.size == lay.size == len(lay.names())
    back = lay.unpack(theta)
    for k in range(2):
        assert np.allclose(back.marginal_means(k), spec.marginal_means(k), rtol=1e-12)
        assert np.allclose(back.lines[k].means(), spec.lines[k].means(), rtol=1e-12)
    assert np.allclose(lay.pack(back), theta, rtol=1e-12, atol=1e-14)


def test_tweedie_shock_rescaling_leaves_law_unchanged():
    p, c = 1.32, 2.5
    a = two_line(TweedieFamily(p), (1.0, 1.0))
    b = two_line(TweedieFamily(p), (c, c ** (2 - p)))
    tau = np.array([-0.2, -0.3])
    assert joint_mgf(a, 2, 2, tau) == pytest.approx(joint_mgf(b, 2, 2, tau), rel=1e-12)


def test_layout_local_jacobian():
    fam = TweedieFamily(1.32)
    lay = ParameterLayout(fam, 2, 4, 4, shock=True)
    theta = lay.pack(two_line(fam, (1.3, 1.0)))
    ci, cj = np.nonzero(standard_mask(4))
    loc, jac = lay.local(theta, ci, cj)
    spec = lay.unpack(theta)
    assert np.allclose(loc[:, 0], spec.lines[0].means()[ci, cj], rtol=1e-13)
    h = 1e-6
    for q in range(lay.size):
        up, dn = theta.copy(), theta.copy()
        up[q] += h
        dn[q] -= h
        num = (lay.local(up, ci, cj)[0] - lay.local(dn, ci, cj)[0]) / (2 * h)
        assert np.allclose(jac[:, :, q], num, rtol=1e-6, atol=1e-8)


def test_layout_errors():
    lay = ParameterLayout(TweedieFamily(2), 1, 3, 3, shock=True)
    with pytest.raises(ValidationError):
        lay.unpack(np.zeros(3))
    with pytest.raises(ValidationError):
        lay.pack(AbrmSpec(TweedieFamily(2), [DevelopmentPattern([1.0] * 3, [1.0] * 3, 0.1)]))
    with pytest.raises(ValidationError):
        ParameterLayout(TweedieFamily(2), 1, 3, 3, pin="gamma")
