import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, stats

from serolatent.latent import (
    BetaMixture,
    ConditionalGaussian,
    ModelParams,
    SingleBeta,
    TwoPoint,
    ZeroMassPlusBeta,
    cond_mean,
    cond_var,
    latent_density,
    latent_mean,
    latent_sample,
    log_likelihood,
    marginal_density,
    simulate,
)
from serolatent.simstudy import builtin_scenarios


def npdf(y, m, s):
    return np.exp(-0.5 * ((y - m) / s) ** 2) / (s * math.sqrt(2 * math.pi))


def gmm_closed_form(y, cond, pi):
    return (1 - pi) * npdf(y, cond.mu0, cond.sigma0) + pi * npdf(y, cond.mu1, cond.sigma1)


def adaptive_density(y, cond, spec):
    """Oracle: adaptive quadrature of the continuous part plus atoms."""
    atom0, atom1, comps = spec.parts()
    out = atom0 * npdf(y, cond.mu0, cond.sigma0) + atom1 * npdf(y, cond.mu1, cond.sigma1)
    for w, a, b in comps:
        # algebraic weight absorbs endpoint singularities of U-shaped kernels
        f = lambda t: npdf(y, cond.mu0 + (cond.mu1 - cond.mu0) * t,
                           math.sqrt((1 - t) * cond.sigma0**2 + t * cond.sigma1**2))
        v, _ = integrate.quad(f, 0, 1, weight="alg", wvar=(a - 1, b - 1),
                              epsabs=0, epsrel=1e-12, limit=200)
        out += w * v / math.exp(math.lgamma(a) + math.lgamma(b) - math.lgamma(a + b))
    return out


# -- conditional Gaussian ---------------------------------------------------


def test_cond_mean_examples():
    assert cond_mean(ConditionalGaussian(-4, 4, 1, 1), 0.0) == -4
    assert cond_mean(ConditionalGaussian(-3, 1, 1, 1), 0.5) == -1
    assert cond_mean(ConditionalGaussian(-3.5, 1.5, 1, 1), 1.0) == 1.5


def test_cond_var_examples():
    c = ConditionalGaussian(-3, 1, 0.8, 0.3)
    assert cond_var(c, 1.0) == pytest.approx(0.09, abs=1e-15)
    assert cond_var(c, 0.5) == pytest.approx(0.365, abs=1e-15)
    eq = ConditionalGaussian(-3, 1, 1.0, 1.0)
    assert np.all(cond_var(eq, np.linspace(0, 1, 7)) == 1.0)


@pytest.mark.parametrize("t", [-0.1, 1.5, np.nan])
def test_cond_domain(t):
    c = ConditionalGaussian(-3, 1, 0.8, 0.3)
    with pytest.raises(ValueError):
        cond_mean(c, t)
    with pytest.raises(ValueError):
        cond_var(c, t)


@pytest.mark.parametrize("args", [(1, 0, 1, 1), (0, 0, 1, 1), (0, 1, 0, 1), (0, 1, 1, 1e-5), (np.nan, 1, 1, 1)])
def test_cond_invalid(args):
    with pytest.raises(ValueError):
        ConditionalGaussian(*args)


# -- latent laws ------------------------------------------------------------


def test_latent_density_examples():
    assert latent_density(SingleBeta(1, 1), 0.3) == pytest.approx(1.0, abs=1e-14)
    assert latent_density(ZeroMassPlusBeta(1.0, 1.0), 0.5) == pytest.approx(1.0, abs=1e-14)
    assert latent_density(SingleBeta(2, 2), 0.5) == pytest.approx(1.5, abs=1e-14)
    assert latent_density(TwoPoint(0.4), 0.5) == 0.0
    # the Beta(2,2) density integrates to one on a fine grid
    t = np.linspace(1e-9, 1 - 1e-9, 100001)
    assert np.trapezoid(latent_density(SingleBeta(2, 2), t), t) == pytest.approx(1.0, abs=1e-8)


def test_zero_mass_density_formula():
    t = np.linspace(0.05, 0.95, 10)
    np.testing.assert_allclose(latent_density(ZeroMassPlusBeta(0.6, 1.5), t), 0.6 * 1.5 * t**0.5)


@pytest.mark.parametrize("t", [0.0, 1.0, -0.2])
def test_latent_density_domain(t):
    with pytest.raises(ValueError):
        latent_density(SingleBeta(2, 2), t)


def test_latent_mean_examples(rng):
    assert latent_mean(SingleBeta(3, 0.5)) == pytest.approx(0.857, abs=5e-4)
    assert latent_mean(TwoPoint(0.5)) == 0.5
    z = ZeroMassPlusBeta(0.6, 1.5)
    assert latent_mean(z) == pytest.approx(0.36, abs=1e-15)
    assert latent_sample(z, rng, 10**6).mean() == pytest.approx(0.36, abs=1e-3)
    mix = BetaMixture(((0.3, 0.5, 2.0), (0.7, 3.0, 0.5)), ordered=True)
    assert latent_mean(mix) == pytest.approx(0.3 * 0.2 + 0.7 * 3 / 3.5)


def test_latent_sample_examples(rng):
    assert np.all(latent_sample(TwoPoint(0.0), rng, 1000) == 0.0)
    assert np.all(latent_sample(TwoPoint(1.0), rng, 1000) == 1.0)
    assert latent_sample(SingleBeta(0.5, 3.0), rng, 10**5).mean() == pytest.approx(0.143, abs=0.01)
    x = latent_sample(ZeroMassPlusBeta(0.25, 2.0), rng, 10**5)
    assert np.mean(x == 0.0) == pytest.approx(0.75, abs=0.01)


@pytest.mark.parametrize("spec", [
    lambda: TwoPoint(1.2),
    lambda: SingleBeta(0, 1),
    lambda: SingleBeta(1, np.inf),
    lambda: BetaMixture(((0.5, 1, 1), (0.6, 1, 1))),
    lambda: BetaMixture(((1.0, 1, 1),)),
    lambda: BetaMixture(((0.5, 2.0, 2.0), (0.5, 3.0, 0.5)), ordered=True),
    lambda: ZeroMassPlusBeta(-0.1, 1),
])
def test_invalid_latent(spec):
    with pytest.raises(ValueError):
        spec()


def test_large_alpha_drives_mean_to_one():
    means = [latent_mean(SingleBeta(a, 0.5)) for a in (1, 10, 100, 1000)]
    assert np.all(np.diff(means) > 0) and means[-1] > 0.999


# -- marginal density -------------------------------------------------------


def test_two_point_is_gmm(it_cond):
    y = it_cond.mu0
    expect = 0.7 * npdf(0, 0, it_cond.sigma0) + 0.3 * npdf(y, it_cond.mu1, it_cond.sigma1)
    got = marginal_density(ModelParams(it_cond, TwoPoint(0.3)), y)
    assert isinstance(got, float)
    assert got == pytest.approx(expect, rel=1e-14)


def test_zero_mass_pi_zero_is_gaussian(it_cond):
    y = np.linspace(-6, 3, 25)
    got = marginal_density(ModelParams(it_cond, ZeroMassPlusBeta(0.0, 2.0)), y)
    np.testing.assert_allclose(got, npdf(y, -3.0, 0.8), rtol=1e-14)


def test_single_beta_against_monte_carlo(it_cond):
    rng = np.random.default_rng(11)
    t = rng.beta(2, 2, 10**7)
    oracle = npdf(-1.0, it_cond.mu0 + 4 * t, np.sqrt((1 - t) * 0.64 + t * 0.09)).mean()
    got = marginal_density(ModelParams(it_cond, SingleBeta(2, 2)), -1.0)
    assert abs(got - oracle) < 1e-4


@pytest.mark.parametrize("spec", [
    SingleBeta(0.5, 0.5),
    SingleBeta(3.0, 0.5),
    SingleBeta(0.3, 4.0),
    BetaMixture(((0.4, 0.5, 3.0), (0.6, 4.0, 0.7)), ordered=True),
    BetaMixture(((0.2, 0.5, 0.5), (0.3, 2.0, 2.0), (0.5, 5.0, 1.0))),
    ZeroMassPlusBeta(0.4, 1.5),
])
def test_marginal_against_adaptive_quadrature(bm_cond, spec):
    y = np.linspace(-6, 3, 13)
    got = marginal_density(ModelParams(bm_cond, spec), y)
    expect = [adaptive_density(v, bm_cond, spec) for v in y]
    np.testing.assert_allclose(got, expect, rtol=1e-9)


def test_log_likelihood_two_point_closed_form(it_cond):
    y = np.array([-3.1, -0.4, 1.2])
    expect = np.log(gmm_closed_form(y, it_cond, 0.35)).sum()
    assert log_likelihood(ModelParams(it_cond, TwoPoint(0.35)), y) == pytest.approx(expect, rel=1e-14)


def test_log_likelihood_density_one_point():
    # N(0, s^2) with s = 1/sqrt(2 pi) has density 1 at its mean
    s = 1 / math.sqrt(2 * math.pi)
    cond = ConditionalGaussian(0.0, 1.0, s, s)
    assert log_likelihood(ModelParams(cond, TwoPoint(0.0)), [0.0]) == pytest.approx(0.0, abs=1e-15)


def test_log_likelihood_against_adaptive(it_cond):
    params = ModelParams(it_cond, SingleBeta(2, 2))
    y = simulate(params, 50, np.random.default_rng(5))
    expect = sum(math.log(adaptive_density(v, it_cond, params.latent)) for v in y)
    assert log_likelihood(params, y) == pytest.approx(expect, abs=1e-6)


def test_log_likelihood_floor(it_cond):
    params = ModelParams(it_cond, TwoPoint(0.5))
    assert log_likelihood(params, [0.0, 1e4]) == -math.inf


def test_log_likelihood_empty(it_cond):
    with pytest.raises(ValueError):
        log_likelihood(ModelParams(it_cond, TwoPoint(0.5)), [])


# -- simulation -------------------------------------------------------------


def test_simulate_deterministic(it_cond):
    p = ModelParams(it_cond, SingleBeta(2, 2))
    np.testing.assert_array_equal(simulate(p, 100, 3), simulate(p, 100, 3))


def test_simulate_means(it_cond):
    n = 10**5
    y = simulate(ModelParams(it_cond, TwoPoint(0.0)), n, 1)
    assert abs(y.mean() + 3.0) < 3 * 0.8 / math.sqrt(n)
    bm, ht = builtin_scenarios()[0], builtin_scenarios()[1]
    assert simulate(bm.params, n, 2).mean() == pytest.approx(-1.0, abs=0.03)
    assert simulate(ht.params, n, 3).mean() == pytest.approx(-3 + 4 * 3 / 3.5, abs=0.02)


@pytest.mark.parametrize("scenario", builtin_scenarios(), ids=lambda s: s.name)
def test_simulated_cdf_matches_density(scenario):
    c = scenario.cond
    grid = np.linspace(c.mu0 - 10 * c.sigma0, c.mu1 + 10 * c.sigma1, 200001)
    dens = marginal_density(scenario.params, grid)
    cdf = integrate.cumulative_trapezoid(dens, grid, initial=0.0)
    cdf /= cdf[-1]
    y = simulate(scenario.params, 10**5, np.random.default_rng(17))
    res = stats.kstest(y, lambda v: np.interp(v, grid, cdf))
    assert res.pvalue > 0.01


# -- properties -------------------------------------------------------------

cond_strategy = st.builds(
    lambda m0, gap, s0, s1: ConditionalGaussian(m0, m0 + gap, s0, s1),
    st.floats(-5, 0), st.floats(0.5, 6), st.floats(0.1, 1.5), st.floats(0.1, 1.5),
)
shape = st.floats(0.3, 5.0)
latent_strategy = st.one_of(
    st.builds(TwoPoint, st.floats(0, 1)),
    st.builds(SingleBeta, shape, shape),
    st.builds(ZeroMassPlusBeta, st.floats(0, 1), shape),
    st.builds(lambda w, a1, b1, a2, b2: BetaMixture(((w, a1, b1), (1 - w, a2, b2))),
              st.floats(0, 1), shape, shape, shape, shape),
)


@settings(max_examples=60, deadline=None)
@given(cond=cond_strategy, latent=latent_strategy)
def test_normalized_and_bounded(cond, latent):
    p = ModelParams(cond, latent)
    # both boundary Gaussians need 8 sd of room, whichever is wider
    lo = min(cond.mu0 - 8 * cond.sigma0, cond.mu1 - 8 * cond.sigma1)
    hi = max(cond.mu0 + 8 * cond.sigma0, cond.mu1 + 8 * cond.sigma1)
    grid = np.linspace(lo, hi, 10**4)
    dens = marginal_density(p, grid)
    assert np.trapezoid(dens, grid) == pytest.approx(1.0, abs=1e-4)
    coarse = np.linspace(grid[0], grid[-1], 10**3)
    bound = 1 / (math.sqrt(2 * math.pi) * min(cond.sigma0, cond.sigma1))
    assert marginal_density(p, coarse).max() <= bound + 1e-12


@settings(max_examples=40, deadline=None)
@given(cond=cond_strategy, pi=st.floats(0, 1), seed=st.integers(0, 2**32 - 1))
def test_gmm_collapse(cond, pi, seed):
    y = np.random.default_rng(seed).uniform(cond.mu0 - 3, cond.mu1 + 3, 100)
    got = marginal_density(ModelParams(cond, TwoPoint(pi)), y)
    np.testing.assert_allclose(got, gmm_closed_form(y, cond, pi), rtol=1e-12, atol=1e-300)
