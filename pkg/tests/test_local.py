import math

import numpy as np
import pytest
import sympy as sp
from scipy import stats

from hybridshrink import (
    ExperimentSummary,
    HyperParams,
    InvalidInputError,
    Method,
    gibbs_posterior_summary,
    gibbs_sample,
    global_shrinkage_estimate,
    hybrid_shrinkage_estimate,
    lambda_posterior_mode,
)
from hybridshrink.local import (
    full_posterior_arrays,
    gibbs_sweep,
    lambda_log_posterior,
    lambda_log_posterior_grad,
    lambda_mode_arrays,
)

import oracles


def test_log_posterior_difference_symbolic():
    lam, s2, tau, a, b = sp.symbols("lam s2 tau a b", positive=True)
    expr = -sp.log(s2 + lam * tau) / 2 - (a / 2 + 1) * sp.log(lam) - b / (2 * lam)
    vals = {s2: 1, tau: 1, a: 2, b: 2}
    delta = float((expr.subs(lam, 2) - expr.subs(lam, 1)).subs(vals))
    e, hp = ExperimentSummary("x", 0.0, 1.0), HyperParams(0.0, 1.0, 2.0, 2.0)
    got = lambda_log_posterior(2.0, e, hp) - lambda_log_posterior(1.0, e, hp)
    assert abs(got - delta) < 1e-14
    # -1/2 log(3/2) - 2 log 2 + 1/2
    assert abs(delta - (-0.5 * math.log(1.5) - 2 * math.log(2) + 0.5)) < 1e-14


def test_log_posterior_limits():
    e, hp = ExperimentSummary("x", 1.0, 1.0), HyperParams(0.0, 1.0, 3.0, 3.0)
    assert lambda_log_posterior(1e-10, e, hp) < -1e9
    assert lambda_log_posterior(1e30, e, hp) < lambda_log_posterior(1e10, e, hp) < lambda_log_posterior(1.0, e, hp)
    with pytest.raises(InvalidInputError):
        lambda_log_posterior(0.0, e, hp)


def test_log_posterior_gradient_matches_finite_difference():
    e, hp = ExperimentSummary("x", 2.5, 0.8), HyperParams(0.3, 1.2, 3.0, 5.0)
    for lam in (0.1, 1.0, 4.0):
        h = 1e-6 * lam
        fd = (lambda_log_posterior(lam + h, e, hp) - lambda_log_posterior(lam - h, e, hp)) / (2 * h)
        assert lambda_log_posterior_grad(lam, e, hp) == pytest.approx(fd, rel=1e-6)


def test_mode_at_prior_mean_matches_grid():
    e, hp = ExperimentSummary("x", 0.0, 1.0), HyperParams(0.0, 1.0, 2.0, 2.0)
    lp = lambda_posterior_mode(e, hp)
    assert lp.converged
    assert abs(lp.mode - oracles.grid_mode(0.0, 1.0, 0.0, 1.0, 2.0, 2.0)) < 1e-5
    assert abs(lambda_log_posterior_grad(lp.mode, e, hp)) < 1e-6


def test_mode_grows_with_b():
    e = ExperimentSummary("x", 0.5, 1.0)
    m2 = lambda_posterior_mode(e, HyperParams(0.0, 1.0, 3.0, 2.0)).mode
    m200 = lambda_posterior_mode(e, HyperParams(0.0, 1.0, 3.0, 200.0)).mode
    assert m200 > m2


def test_mode_nondecreasing_in_deviation():
    hp = HyperParams(0.0, 1.0, 3.0, 3.0)
    modes = [lambda_posterior_mode(ExperimentSummary("x", d, 1.0), hp).mode for d in (0, 2, 5, 10)]
    for d, m in zip((0, 2, 5, 10), modes):
        assert abs(m - oracles.grid_mode(d, 1.0, 0.0, 1.0, 3.0, 3.0)) < 1e-5 * max(1.0, m)
    assert all(x <= y for x, y in zip(modes, modes[1:]))


def test_mode_finds_global_peak_when_bimodal():
    # local max near 0.6, global one near 1.5e3
    e, hp = ExperimentSummary("x", 10.0, 1.0), HyperParams(0.0, 0.01, 3.0, 3.0)
    lp = lambda_posterior_mode(e, hp)
    ref = oracles.grid_mode(10.0, 1.0, 0.0, 0.01, 3.0, 3.0)
    assert lp.mode > 100
    assert abs(lp.mode - ref) / ref < 1e-5


def test_mode_arrays_vectorised_match_scalar():
    th = np.array([0.0, 1.0, 3.0, -4.0])
    modes, _, _, conv = lambda_mode_arrays(th, 1.0, 0.0, 1.0, 3.0, 3.0)
    assert conv.all()
    for t, m in zip(th, modes):
        assert m == lambda_posterior_mode(ExperimentSummary("x", t, 1.0), HyperParams(0.0, 1.0)).mode


def test_hybrid_degenerate_prior_limit():
    e, hp = ExperimentSummary("x", 2.0, 1.0), HyperParams(0.0, 1.0, 1e6, 1e6)
    h, g = hybrid_shrinkage_estimate(e, hp), global_shrinkage_estimate(e, hp)
    assert abs(h.mean - g.mean) < 1e-3


def test_hybrid_fixed_point():
    h = hybrid_shrinkage_estimate(ExperimentSummary("x", 1.7, 0.4), HyperParams(1.7, 0.3))
    assert h.mean == 1.7
    assert h.method is Method.HYBRID and h.lambda_used > 0


def test_hybrid_pipeline_matches_grid_plugin():
    e, hp = ExperimentSummary("x", 4.0, 1.0), HyperParams(0.0, 1.0, 3.0, 3.0)
    lam = oracles.grid_mode(4.0, 1.0, 0.0, 1.0, 3.0, 3.0)
    ref_mean, _ = oracles.eq1(4.0, 1.0, 0.0, 1.0, lam)
    assert abs(hybrid_shrinkage_estimate(e, hp).mean - ref_mean) < 1e-4


def test_lambda_update_conditional_mode():
    # theta = m0, a = b = 1  ->  IG(1, 0.5), mode 0.25
    hp = HyperParams(0.0, 1.0, 1.0, 1.0)
    rng = np.random.default_rng(3)
    n = 100_000
    theta = np.zeros(n)
    scale = (hp.b + (theta - hp.m0) ** 2 / hp.tau) / 2
    lam = scale / rng.standard_gamma((hp.a + 1) / 2, size=n)
    grid = np.linspace(0.05, 1.0, 400)
    kde = stats.gaussian_kde(np.log(lam))
    # mode on lambda scale: maximise density_u(log x) / x
    dens = kde(np.log(grid)) / grid
    assert abs(grid[np.argmax(dens)] - 0.25) < 0.02
    # scale-shape check of the same update against scipy's invgamma
    ks = stats.kstest(lam, stats.invgamma(1.0, scale=0.5).cdf)
    assert ks.pvalue > 0.001


def test_gibbs_sweep_uses_conjugate_lambda_update():
    hp = HyperParams(0.0, 2.0, 3.0, 3.0)
    n = 50_000
    rng = np.random.default_rng(5)
    th, lam = gibbs_sweep(np.zeros(n), np.ones(n), np.full(n, 1.0), np.full(n, 1.0), hp, rng)
    assert th.shape == lam.shape == (n,)
    assert np.all(lam > 0)
    # theta | lambda=1 is N(2/3, 2/3)
    assert stats.kstest(th, stats.norm(2 / 3, math.sqrt(2 / 3)).cdf).pvalue > 0.001


def test_gibbs_trace_shapes_and_reproducible():
    e, hp = ExperimentSummary("x", 2.0, 1.0), HyperParams(0.0, 1.0)
    t1 = gibbs_sample(e, hp, n_burn=10, n_keep=50, seed=9, thin=2)
    t2 = gibbs_sample(e, hp, n_burn=10, n_keep=50, seed=9, thin=2)
    assert t1.theta_draws.size == t1.lambda_draws.size == 50
    assert np.all(t1.lambda_draws > 0)
    assert np.array_equal(t1.theta_draws, t2.theta_draws)
    assert np.array_equal(t1.lambda_draws, t2.lambda_draws)
    with pytest.raises(InvalidInputError):
        gibbs_sample(e, hp, n_keep=0)


def test_gibbs_mean_matches_quadrature():
    e, hp = ExperimentSummary("x", 2.0, 1.0), HyperParams(0.0, 1.0, 3.0, 3.0)
    tr = gibbs_sample(e, hp, n_burn=1000, n_keep=20_000, seed=1)
    ref = oracles.posterior_mean_1d(2.0, 1.0, 0.0, 1.0, 3.0, 3.0)
    ref2d, _ = oracles.posterior_moments_2d(2.0, 1.0, 0.0, 1.0, 3.0, 3.0)
    assert abs(ref - ref2d) < 1e-6
    assert abs(tr.theta_draws.mean() - ref) < 3 * oracles.batch_means_se(tr.theta_draws)


def test_gibbs_symmetric_case():
    e, hp = ExperimentSummary("x", 0.5, 1.0), HyperParams(0.5, 1.0)
    tr = gibbs_sample(e, hp, n_keep=20_000, seed=2)
    assert abs(tr.theta_draws.mean() - 0.5) < 3 * oracles.batch_means_se(tr.theta_draws)


@pytest.mark.xfail(strict=True, reason="mode plug-in ignores lambda uncertainty; gap 0.37 at |z| = 2 under a = b = 3")
def test_plugin_close_to_full_posterior_default_prior():
    hp = HyperParams(0.0, 1.0, 3.0, 3.0)
    for th in (-2.0, -1.0, 0.5, 2.0):
        e = ExperimentSummary("x", th, 1.0)
        tr = gibbs_sample(e, hp, n_keep=8000, seed=4)
        assert abs(tr.theta_draws.mean() - hybrid_shrinkage_estimate(e, hp).mean) <= 0.1


def test_plugin_close_to_full_posterior_concentrated_prior():
    hp = HyperParams(0.0, 1.0, 30.0, 30.0)
    for th in (-2.0, -1.0, 0.5, 2.0):
        e = ExperimentSummary("x", th, 1.0)
        tr = gibbs_sample(e, hp, n_keep=8000, seed=4)
        assert abs(tr.theta_draws.mean() - hybrid_shrinkage_estimate(e, hp).mean) <= 0.1


def test_gibbs_summary_interval():
    e, hp = ExperimentSummary("x", 2.0, 1.0), HyperParams(0.0, 1.0)
    s = gibbs_posterior_summary(gibbs_sample(e, hp, n_keep=4000, seed=0), 0.9, "x")
    assert s.interval_low < s.mean < s.interval_high
    assert s.experiment_id == "x"


def test_full_posterior_arrays_agree_with_quadrature():
    hp = HyperParams(0.0, 1.0, 3.0, 3.0)
    th = np.array([-1.0, 0.0, 2.0, 4.0])
    mean, var, lo, hi = full_posterior_arrays(th, 1.0, hp, n_keep=20_000, seed=0)
    for i, t in enumerate(th):
        m, v = oracles.posterior_moments_2d(t, 1.0, 0.0, 1.0, 3.0, 3.0)
        assert abs(mean[i] - m) < 0.04
        assert abs(var[i] - v) < 0.05
        assert lo[i] < mean[i] < hi[i]


def test_gibbs_sweep_leaves_posterior_invariant():
    # draw from the quadrature posterior of lambda, then theta | lambda, apply one sweep
    th_hat, s2, m0, tau, a, b = 1.5, 1.0, 0.0, 1.0, 3.0, 3.0
    hp = HyperParams(m0, tau, a, b)
    u = np.linspace(-12, 14, 20001)
    lp = oracles.log_post_lambda(np.exp(u), th_hat, s2, m0, tau, a, b) + u
    w = np.exp(lp - lp.max())
    cdf = np.cumsum(w) / w.sum()
    rng = np.random.default_rng(11)
    n = 10_000
    lam0 = np.exp(np.interp(rng.random(n), cdf, u))
    m, v = oracles.eq1(th_hat, s2, m0, tau, lam0)
    theta0 = m + np.sqrt(v) * rng.standard_normal(n)
    theta1, lam1 = gibbs_sweep(theta0, lam0, np.full(n, th_hat), np.full(n, 1.0), hp, rng)
    assert stats.ks_2samp(theta0, theta1).pvalue > 0.001
    assert stats.ks_2samp(lam0, lam1).pvalue > 0.001
