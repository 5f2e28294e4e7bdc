import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from randcusp.experiments import COMPACT_REGION
from randcusp.hyperbolic import Region
from randcusp.kernel import dim_cusp_space
from randcusp.sampler import make_grid
from randcusp.stats import (
    analytic_lp_expectation,
    concentration_fit,
    ensemble_stats,
    growth_fit,
    integrate_rdiag_power,
    lp_norm,
    lp_norms,
    moment_factor,
    sphere_tail_estimate,
    sphere_tail_law,
    sphere_tail_oracle,
)
from randcusp.validation import rdiag_integral_cubature

AREA = 0.5 * (1 / 1.3 - 1 / 2.0)


def test_lp_norm_constant_field():
    g = make_grid(COMPACT_REGION, 60)
    for p in (1, 2, 4, 8):
        rep = lp_norm(np.ones(len(g)), g, p)
        assert rep.value == pytest.approx(AREA ** (1 / p), rel=1e-12)
        assert rep.quadrature_error < 1e-12
    assert lp_norm(np.full(len(g), -3.0), g, math.inf).value == 3.0


def test_lp_norm_errors():
    g = make_grid(COMPACT_REGION, 60)
    with pytest.raises(ValueError):
        lp_norm(np.ones(3), g, 2)
    with pytest.raises(ValueError):
        lp_norm(np.ones(len(g)), g, 0.5)


@settings(max_examples=30)
@given(st.integers(0, 10**6))
def test_lp_norm_monotone_in_p(seed):
    g = make_grid(COMPACT_REGION, 60)
    v = np.random.default_rng(seed).normal(size=len(g)) + 0j
    w = g.weights / g.weights.sum()
    norms = [float(lp_norms(v[None, :], w, p)[0]) for p in (1, 2, 3, 4, 8, math.inf)]
    assert all(a <= b * (1 + 1e-12) for a, b in zip(norms, norms[1:]))


def test_lp_norms_matches_single():
    g = make_grid(COMPACT_REGION, 60)
    V = np.random.default_rng(1).normal(size=(3, len(g)))
    for p in (2, 5):
        assert lp_norms(V, g.weights, p)[1] == pytest.approx(lp_norm(V[1], g, p).value)


def test_moment_factor_p2():
    for N in (1, 2, 5, 40):
        assert moment_factor(N, 2) == pytest.approx(1.0, rel=1e-12)
        assert moment_factor(N, 2, "paper") == pytest.approx(2 * N / (2 * N - 1), rel=1e-12)
    with pytest.raises(ValueError):
        moment_factor(3, 2, "other")


def test_moment_factor_matches_sphere():
    # E |a_1|^p for a uniform point on the unit sphere in C^N, by Monte Carlo
    rng = np.random.default_rng(0)
    N, p = 3, 4
    g = rng.standard_normal((200_000, 2 * N))
    a = (g[:, 0] ** 2 + g[:, 1] ** 2) / (g * g).sum(axis=1)
    m = a ** (p / 2) * N ** (p / 2)
    se = m.std() / math.sqrt(m.size)
    assert abs(m.mean() - moment_factor(N, p)) < 5 * se
    assert abs(m.mean() - moment_factor(N, p, "paper")) > 20 * se


def test_analytic_p2_identity():
    k = 120
    a = analytic_lp_expectation(k, 2, COMPACT_REGION)
    assert a == pytest.approx(math.sqrt(rdiag_integral_cubature(k)), rel=1e-6)
    paper = analytic_lp_expectation(k, 2, COMPACT_REGION, "paper")
    N = dim_cusp_space(k)
    assert paper == pytest.approx(a * math.sqrt(2 * N / (2 * N - 1)), rel=1e-12)


def test_analytic_p_log_k_scale():
    ratios = []
    for k in (60, 120, 480):
        p = math.log(k)
        a = analytic_lp_expectation(k, p, COMPACT_REGION)
        ratios.append(a / (math.sqrt(3 * p / (2 * math.pi * math.e)) * AREA ** (1 / p)))
    assert all(0.5 < r < 2 for r in ratios)


def test_integrate_rdiag_converges():
    I, err, n = integrate_rdiag_power(60, 1.0, COMPACT_REGION)
    assert err <= 1e-10 * I
    fd = Region.fundamental(3.0)
    J, errJ, _ = integrate_rdiag_power(60, 1.0, fd, rtol=1e-8)
    assert errJ <= 1e-8 * J
    with pytest.raises(ValueError):
        integrate_rdiag_power(60, 1.0, Region.bulk(0.3, 3.0))


def test_sphere_tail_laws():
    assert sphere_tail_law(2, 0.6) == pytest.approx(0.64)
    assert sphere_tail_law(3, 0.6) == pytest.approx(0.4096)
    assert sphere_tail_law(2, 0.6, "paper") == pytest.approx(0.8)
    assert sphere_tail_law(3, 0.6, "paper") == pytest.approx(0.512)
    assert sphere_tail_oracle(3, 1e-4, 20_000) == pytest.approx(1.0, abs=1e-6)
    assert sphere_tail_oracle(3, 1 - 1e-6, 20_000) == 0.0
    with pytest.raises(ValueError):
        sphere_tail_estimate(1, 0.5, 10)


def test_sphere_tail_adjudication_small():
    p, se = sphere_tail_estimate(2, 0.6, 100_000, seed=4)
    assert abs(p - sphere_tail_law(2, 0.6)) < 5 * se
    assert abs(p - sphere_tail_law(2, 0.6, "paper")) > 20 * se


def test_ensemble_stats_examples():
    s = ensemble_stats([1.0, 2.0, 3.0], n_boot=50)
    assert (s.mean, s.median) == (2.0, 2.0)
    assert s.minimum <= s.median <= s.maximum
    c = ensemble_stats([5.0] * 10, n_boot=50)
    assert c.stderr == 0.0
    assert ensemble_stats([1.0, 2.0, 3.0, 10.0], n_boot=10).median == 2.5
    with pytest.raises(ValueError):
        ensemble_stats([1.0])


def test_ensemble_tail_grid():
    v = np.random.default_rng(0).normal(size=4000)
    s = ensemble_stats(v, n_boot=20)
    r = [p[0] for p in s.tail_pairs]
    assert len(r) == 12
    assert np.all(np.diff(np.log(r)) > 0)
    assert s.tail_pairs[0][1] == pytest.approx(0.4, abs=0.01)


@pytest.mark.parametrize("sigma", [0.5, 1.0, 2.0])
def test_concentration_synthetic_gaussian(sigma):
    v = np.random.default_rng(7).normal(3.0, sigma, 20_000)
    fit = concentration_fit(ensemble_stats(v, n_boot=10))
    target = 1 / (2 * sigma ** 2)
    assert fit.c_hat_corrected == pytest.approx(target, rel=0.15)
    assert fit.linearity_r2 > 0.99
    assert fit.c_lower > 0
    c_hat, r2 = fit
    assert c_hat > 0 and r2 == fit.linearity_r2


def test_concentration_heavy_tail_flagged():
    rng = np.random.default_rng(7)
    for v in (rng.standard_cauchy(5000), rng.standard_t(2, 5000)):
        assert concentration_fit(ensemble_stats(v, n_boot=10)).linearity_r2 < 0.9


def test_concentration_degenerate():
    with pytest.raises(ValueError, match="insufficient"):
        concentration_fit(ensemble_stats([1.0] * 100, n_boot=10))


def test_growth_fit_examples():
    ks = [60, 120, 240, 480]
    exact = growth_fit([(k, 2 * math.sqrt(math.log(k))) for k in ks], "sqrt-log")
    assert exact.ratios == pytest.approx([2, 2, 2, 2])
    assert exact.spread == pytest.approx(1)
    div = growth_fit([(k, k ** 0.25) for k in ks], "sqrt-log")
    assert div.monotone_increasing
    ratios, lo, hi = div
    assert hi > lo
    with pytest.raises(ValueError):
        growth_fit([(60, 1.0), (120, 1.0)], "sqrt-log")
    with pytest.raises(ValueError):
        growth_fit([(60, 1.0)] * 3, "log")
