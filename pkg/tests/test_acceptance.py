"""Acceptance criteria 1-11, each printing one PASS/FAIL line.

Seeds are fixed up front; tolerances are the stated ones. The long criteria
(simulation study, bootstrap coverage) dominate the runtime of the suite.
"""

import math
import time

import numpy as np
import pytest

from serolatent.age import Ama1Joint, CatalyticMixture, ama1_mu_tau_minus, catalytic_pi, simulate_at_ages
from serolatent.estimation import fit, sturges_bins
from serolatent.inference import CASE_STUDY_GROUPS, compare_models, parametric_bootstrap, validate_envelopes
from serolatent.latent import (
    ConditionalGaussian,
    ModelParams,
    SingleBeta,
    TwoPoint,
    marginal_density,
    simulate,
)
from serolatent.simstudy import PARAM_NAMES, builtin_scenarios, get_scenario, run_study

SQRT2PI = math.sqrt(2 * math.pi)


@pytest.fixture
def report(capsys):
    def emit(number, title, ok, detail=""):
        with capsys.disabled():
            print(f"\n[criterion {number:2d}] {'PASS' if ok else 'FAIL'}  {title}  {detail}")
        assert ok, f"criterion {number} failed: {detail}"

    return emit


def npdf(y, m, s):
    return np.exp(-0.5 * ((y - m) / s) ** 2) / (s * SQRT2PI)


# -- 1 ----------------------------------------------------------------------


def test_criterion_01_gmm_special_case(report):
    rng = np.random.default_rng(101)
    start = time.perf_counter()
    worst = 0.0
    for _ in range(5):
        mu0 = rng.uniform(-5, 0)
        cond = ConditionalGaussian(mu0, mu0 + rng.uniform(0.5, 6), rng.uniform(0.1, 1.5), rng.uniform(0.1, 1.5))
        pi = rng.uniform()
        y = rng.uniform(cond.mu0 - 3 * cond.sigma0, cond.mu1 + 3 * cond.sigma1, 100)
        expect = (1 - pi) * npdf(y, cond.mu0, cond.sigma0) + pi * npdf(y, cond.mu1, cond.sigma1)
        got = marginal_density(ModelParams(cond, TwoPoint(pi)), y)
        worst = max(worst, float(np.max(np.abs(got - expect) / expect)))
    elapsed = time.perf_counter() - start
    report(1, "TwoPoint marginal equals two-Gaussian closed form",
           worst <= 1e-12 and elapsed < 1.0, f"max rel err {worst:.2e}, {elapsed:.3f}s")


# -- 2 ----------------------------------------------------------------------


def _mc_density(cond, latent, y, rng, draws=10**7, chunk=10**6):
    """Monte Carlo mean of the conditional density over latent draws, with its SE."""
    total = np.zeros_like(y)
    total_sq = np.zeros_like(y)
    for _ in range(draws // chunk):
        t = rng.beta(latent.alpha, latent.beta, chunk)
        m = cond.mu0 + (cond.mu1 - cond.mu0) * t
        s = np.sqrt((1 - t) * cond.sigma0**2 + t * cond.sigma1**2)
        for j, v in enumerate(y):
            g = npdf(v, m, s)
            total[j] += g.sum()
            total_sq[j] += (g * g).sum()
    mean = total / draws
    var = total_sq / draws - mean**2
    return mean, np.sqrt(var / draws)


def test_criterion_02_quadrature_against_monte_carlo(report):
    rng = np.random.default_rng(202)
    start = time.perf_counter()
    misses, worst = 0, 0.0
    for k in range(20):
        mu0 = rng.uniform(-4.0, -2.0)
        cond = ConditionalGaussian(mu0, rng.uniform(0.5, 2.0), rng.uniform(0.4, 1.0), rng.uniform(0.15, 0.5))
        if k < 8:  # U-shaped latents
            latent = SingleBeta(rng.uniform(0.3, 0.95), rng.uniform(0.3, 0.95))
        else:
            latent = SingleBeta(rng.uniform(0.3, 5.0), rng.uniform(0.3, 5.0))
        y = np.linspace(cond.mu0 - 2 * cond.sigma0, cond.mu1 + 2 * cond.sigma1, 10)
        mc, se = _mc_density(cond, latent, y, rng)
        got = marginal_density(ModelParams(cond, latent), y)
        z = np.abs(got - mc) / se
        misses += int(np.sum(z > 3))
        worst = max(worst, float(z.max()))
    elapsed = time.perf_counter() - start
    report(2, "Gauss-Jacobi marginal within 3 MC SE of 1e7-draw oracle (20 sets x 10 points)",
           misses == 0 and elapsed < 300, f"points beyond 3 SE: {misses}/200, max |z| {worst:.2f}, {elapsed:.0f}s")


# -- 3 ----------------------------------------------------------------------


def test_criterion_03_normalization_and_bound(report):
    start = time.perf_counter()
    worst_mass, worst_ratio = 0.0, 0.0
    for s in builtin_scenarios():
        c = s.cond
        lo = min(c.mu0 - 8 * c.sigma0, c.mu1 - 8 * c.sigma1)
        hi = max(c.mu0 + 8 * c.sigma0, c.mu1 + 8 * c.sigma1)
        grid = np.linspace(lo, hi, 20001)
        dens = marginal_density(s.params, grid)
        worst_mass = max(worst_mass, abs(np.trapezoid(dens, grid) - 1.0))
        bound = 1 / (SQRT2PI * min(c.sigma0, c.sigma1))
        worst_ratio = max(worst_ratio, float(dens.max() / bound))
    elapsed = time.perf_counter() - start
    report(3, "density integrates to 1 and respects 1/(sqrt(2 pi) min sigma) on all scenarios",
           worst_mass <= 1e-4 and worst_ratio <= 1.0 and elapsed < 60,
           f"max |mass-1| {worst_mass:.1e}, max density/bound {worst_ratio:.3f}, {elapsed:.2f}s")


# -- 4 ----------------------------------------------------------------------


def test_criterion_04_sturges(report):
    got = (sturges_bins(100), sturges_bins(5000))
    report(4, "Sturges bins for n=100 and n=5000", got == (8, 14), f"got {got}")


# -- 5 ----------------------------------------------------------------------


def test_criterion_05_catalytic_anchor(report):
    p5, p468 = catalytic_pi(0.148, 5.0), catalytic_pi(0.148, 4.68)
    # same quantity through the age-mixture model
    via_model = float(CatalyticMixture(0.148, 0.5, 3.0, 3.0, 0.5).weight_at(5.0))
    ok = abs(p5 - 0.523) <= 0.001 and abs(p468 - 0.500) <= 0.002 and via_model == pytest.approx(p5, abs=1e-15)
    report(5, "catalytic probability at ages 5 and 4.68 with lam=0.148", ok,
           f"pi(5)={p5:.4f}, pi(4.68)={p468:.4f}")


# -- 6 ----------------------------------------------------------------------


def test_criterion_06_ama1_continuity(report):
    m = Ama1Joint(tau=20.842, lam=0.148, alpha2=1.498, phi=4.544, eta1=-0.138)
    left = ama1_mu_tau_minus(m)
    right = m.latent_at(m.tau).mean()
    just_below = m.latent_at(m.tau * (1 - 1e-14)).mean()
    gap = max(abs(left - right), abs(just_below - right))
    # hand arithmetic: mean below tau is pi(tau) * alpha2 / (alpha2 + 1)
    pi_tau = 1 - math.exp(-0.148 * 20.842)
    mu = pi_tau * 1.498 / 2.498
    eta0_hand = math.log(mu / (1 - mu)) + 0.138 * math.log(20.842)
    ok = gap <= 1e-10 and abs(m.eta0 - 0.710) <= 0.005 and abs(m.eta0 - eta0_hand) <= 1e-12
    report(6, "AMA1 latent mean continuous at tau, derived eta0", ok,
           f"jump {gap:.1e}, eta0={m.eta0:.4f} (hand {eta0_hand:.4f})")


# -- 7 and 8 ----------------------------------------------------------------

STUDY_REPLICATES = 100


@pytest.fixture(scope="module")
def study():
    bm, others = get_scenario("BM"), [get_scenario(n) for n in ("HT", "IT", "LT")]
    a = run_study([bm], sizes=(100, 5000), replicates=STUDY_REPLICATES, seed=7)
    b = run_study(others, sizes=(5000,), replicates=STUDY_REPLICATES, seed=7)
    a.cells.update(b.cells)
    return a


def test_criterion_07_simulation_study(study, report):
    mle = study["BM", 5000, "mle"].median_bias
    l2 = study["BM", 5000, "l2"].median_bias
    lt = {m: study["LT", 5000, m].median_bias[PARAM_NAMES.index("beta")] for m in ("mle", "l2")}
    # median absolute error per parameter, compared between the two sizes
    trend = {m: study["BM", 5000, m].mae <= study["BM", 100, m].mae for m in ("mle", "l2")}
    checks = {
        "BM mle |bias|<=0.01": bool(np.all(np.abs(mle) <= 0.01)),
        "BM l2 sigma1 bias in [0.02,0.12]": 0.02 <= l2[3] <= 0.12,
        "LT |beta bias|>0.8": all(abs(v) > 0.8 for v in lt.values()),
        "BM median |error| shrinks 100->5000": all(bool(np.all(v)) for v in trend.values()),
    }
    failures = {m: study[s, n, m].failures for (s, n, m) in study.cells}
    detail = (
        f"BM mle bias {np.round(mle, 4).tolist()}; BM l2 sigma1 {l2[3]:.4f}; "
        f"LT beta bias {({k: round(float(v), 3) for k, v in lt.items()})}; "
        f"trend {({k: v.tolist() for k, v in trend.items()})}; "
        f"failed checks {[k for k, v in checks.items() if not v]}; "
        f"fit failures {sum(failures.values())}"
    )
    report(7, f"simulation study ({STUDY_REPLICATES} replicates)", all(checks.values()), detail)


def test_criterion_08_speed(study, report):
    ratios = {s.name: study.mean_time(s.name, 5000, "mle") / study.mean_time(s.name, 5000, "l2")
              for s in builtin_scenarios()}
    report(8, "mean L2 fit time <= 1/10 of MLE at n=5000, every scenario",
           all(r >= 10 for r in ratios.values()),
           "mle/l2 time ratios " + ", ".join(f"{k} {v:.1f}x" for k, v in ratios.items()))


# -- 9 ----------------------------------------------------------------------


def test_criterion_09_envelopes(report):
    rng = np.random.default_rng(909)
    ama1 = Ama1Joint(tau=20.842, lam=0.148, alpha2=1.498, phi=4.544, eta1=-0.138)
    cond = ConditionalGaussian(-3.194, 0.747, 0.745, 0.091)
    ages = rng.integers(1, 100, 4000).astype(float)
    y = simulate_at_ages(cond, ama1, ages, rng)
    aged = validate_envelopes((cond, ama1), y, ages, CASE_STUDY_GROUPS, R=500, seed=1)

    bm = get_scenario("BM")
    y_bm = simulate(bm.params, 2000, np.random.default_rng(910))
    plain = validate_envelopes(bm.params, y_bm, R=500, seed=2)
    c = bm.cond
    swapped = ModelParams(ConditionalGaussian(c.mu0, c.mu1, c.sigma1, c.sigma0), bm.latent)
    wrong = validate_envelopes(swapped, y_bm, R=500, seed=2)

    inside = (aged.inside_fraction(), plain.inside_fraction())
    flagged = wrong.max_outside_fraction()
    report(9, "self-consistent data inside range band; swapped-sigma fit flagged",
           min(inside) >= 0.95 and flagged >= 0.20,
           f"inside fractions AMA1 {inside[0]:.3f}, BM {inside[1]:.3f}; mis-specified outside {flagged:.2f}")


# -- 10 ---------------------------------------------------------------------


def test_criterion_10_bootstrap_coverage(report):
    bm = get_scenario("BM")
    mu0, mu1 = bm.cond.mu0, bm.cond.mu1
    covered = np.zeros(2, dtype=int)
    outer = 100
    start = time.perf_counter()
    for r in range(outer):
        y = simulate(bm.params, 1000, np.random.default_rng(10_000 + r))
        res = fit(y, "beta", "mle")
        summary = parametric_bootstrap(res, B=200, seed=100_000 * (r + 1))
        lo0, hi0 = summary.interval("mu0")
        lo1, hi1 = summary.interval("mu1")
        covered += [lo0 <= mu0 <= hi0, lo1 <= mu1 <= hi1]
    elapsed = time.perf_counter() - start
    report(10, "95% bootstrap intervals cover mu0 and mu1 (BM, n=1000, B=200, 100 reps)",
           bool(np.all(covered >= 85)), f"covered mu0 {covered[0]}/100, mu1 {covered[1]}/100, {elapsed / 60:.0f} min")


# -- 11 ---------------------------------------------------------------------


def test_criterion_11_model_comparison_sign(report):
    cond = get_scenario("IT").cond
    beta_wins, two_point_small = 0, 0
    values = []
    for seed in range(20):
        yb = simulate(ModelParams(cond, SingleBeta(2.0, 2.0)), 5000, np.random.default_rng(1100 + seed))
        yt = simulate(ModelParams(cond, TwoPoint(0.5)), 5000, np.random.default_rng(1200 + seed))
        db = compare_models(yb, methods=("mle",))[0].delta_bic
        dt = compare_models(yt, methods=("mle",))[0].delta_bic
        beta_wins += db > 0
        two_point_small += abs(dt) < 10
        values.append((db, dt))
    report(11, "Delta BIC sign: Beta(2,2) latent preferred; two-point latent near zero",
           beta_wins >= 18 and two_point_small >= 15,
           f"Beta data dBIC>0 in {beta_wins}/20; two-point |dBIC|<10 in {two_point_small}/20; "
           f"median dBIC {np.median([v[0] for v in values]):.1f} / {np.median([v[1] for v in values]):.1f}")
