"""Local shrinkage factor inference.

Integrating ``theta_i`` out of the hierarchy leaves a one-dimensional
posterior for ``lambda_i``::

    log p(lambda | theta_hat) = -1/2 log(s2 + lambda tau)
                                - (theta_hat - m0)**2 / (2 (s2 + lambda tau))
                                - (a/2 + 1) log(lambda) - b / (2 lambda) + const

The hybrid estimator plugs the mode of this density into the conditional
normal posterior.  :func:`gibbs_sample` instead samples ``(theta, lambda)``
jointly, which is the full-posterior reference for the plug-in.

The mode search works on ``u = log(lambda)``.  The density is not always
unimodal (a far outlier under a small ``tau`` can produce a second peak at
large ``lambda``), so a coarse scan over ``[1e-8, 1e8]`` picks the highest
cell before golden-section refinement.  The scan is widened upwards to cover
the likelihood's own peak, and grows geometrically when the best cell still
sits on its edge.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError
from .model import (
    ExperimentSummary,
    HyperParams,
    Method,
    _check_shrinkable,
    conditional_posterior,
    posterior_moments,
)
from .rng import check_seed, make_rng

LOG_LAMBDA_LO = math.log(1e-8)
LOG_LAMBDA_HI = math.log(1e8)
SCAN_POINTS = 161
DEFAULT_TOL = 1e-8
MAX_ITER = 200
# exp(700) is close to the float64 ceiling
_LOG_LAMBDA_LIMIT = 700.0
_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class LambdaPosterior:
    mode: float
    log_density_at_mode: float
    iterations: int
    converged: bool


@dataclass(frozen=True)
class GibbsTrace:
    theta_draws: np.ndarray
    lambda_draws: np.ndarray
    n_burn: int
    n_keep: int
    thin: int
    seed: int


def _log_post_u(u, d2, s2, tau, a, b):
    lam = np.exp(u)
    v = s2 + lam * tau
    return -0.5 * np.log(v) - d2 / (2.0 * v) - (a / 2.0 + 1.0) * u - b / (2.0 * lam)


def lambda_log_posterior(lam: float, exp: ExperimentSummary, hp: HyperParams) -> float:
    """Unnormalised log posterior density of the local factor (in lambda, not log lambda)."""
    if not lam > 0:
        raise InvalidInputError(f"lambda must be positive, got {lam}")
    _check_shrinkable(exp)
    v = exp.sigma_hat**2 + lam * hp.tau
    d2 = (exp.theta_hat - hp.m0) ** 2
    return (
        -0.5 * math.log(v)
        - d2 / (2.0 * v)
        - (hp.a / 2.0 + 1.0) * math.log(lam)
        - hp.b / (2.0 * lam)
    )


def lambda_log_posterior_grad(lam: float, exp: ExperimentSummary, hp: HyperParams) -> float:
    """d/dlambda of :func:`lambda_log_posterior`."""
    v = exp.sigma_hat**2 + lam * hp.tau
    d2 = (exp.theta_hat - hp.m0) ** 2
    return (
        hp.tau * (-0.5 / v + d2 / (2.0 * v * v))
        - (hp.a / 2.0 + 1.0) / lam
        + hp.b / (2.0 * lam * lam)
    )


def _expand(f_args, lo, hi, top, at_lo, at_hi, iterations):
    """Push brackets whose best scan point sits on an edge outwards."""
    d2, s2, tau, a, b = f_args
    ok = ~(at_lo | at_hi)
    for i in np.flatnonzero(~ok):
        args = (d2[i], s2[i], tau[i], a[i], b[i])
        left, right = LOG_LAMBDA_LO, float(top[i])
        upward = bool(at_hi[i])
        found = False
        while iterations[i] < MAX_ITER:
            iterations[i] += 1
            width = right - left
            if upward:
                if right >= _LOG_LAMBDA_LIMIT:
                    break
                left, right = right, min(right + width, _LOG_LAMBDA_LIMIT)
            else:
                if left <= -_LOG_LAMBDA_LIMIT:
                    break
                left, right = max(left - width, -_LOG_LAMBDA_LIMIT), left
            # include the previous edge so an interior peak just past it is caught
            step = (right - left) / (SCAN_POINTS - 1)
            grid = np.linspace(left - step, right + step, SCAN_POINTS + 2)
            fv = _log_post_u(grid, *args)
            k = int(np.argmax(fv))
            if (upward and k < grid.size - 1) or (not upward and k > 0):
                lo[i], hi[i] = grid[max(k - 1, 0)], grid[min(k + 1, grid.size - 1)]
                found = True
                break
        if not found:
            edge = right if upward else left
            lo[i] = hi[i] = edge
        ok[i] = found
    return ok


def lambda_mode_arrays(theta_hat, sigma_hat, m0, tau, a, b, tol=DEFAULT_TOL):
    """Vectorised posterior mode of the local factor.

    Returns ``(mode, log_density, iterations, converged)`` arrays, one entry
    per experiment.  Non-convergence is flagged, never raised.
    """
    arrs = np.broadcast_arrays(
        *(np.asarray(x, dtype=float) for x in (theta_hat, sigma_hat, m0, tau, a, b))
    )
    shape = arrs[0].shape
    th, sg, m, t, aa, bb = (x.ravel() for x in arrs)
    if np.any(~(sg > 0)):
        raise InvalidInputError("sigma_hat must be positive for shrinkage estimation")
    if np.any(~(t > 0)) or np.any(~(aa > 0)) or np.any(~(bb > 0)):
        raise InvalidInputError("tau, a and b must be positive")
    if not tol > 0:
        raise InvalidInputError("tol must be positive")
    d2 = (th - m) ** 2
    s2 = sg**2
    args = (d2, s2, t, aa, bb)
    col = lambda x: x[:, None]  # noqa: E731

    # the likelihood term alone peaks at lambda = (d2 - s2) / tau; keep that inside the scan
    with np.errstate(divide="ignore"):
        data_peak = np.log(np.maximum(d2 - s2, 0.0) / t) + math.log(10.0)
    top = np.clip(np.fmax(data_peak, LOG_LAMBDA_HI), LOG_LAMBDA_HI, _LOG_LAMBDA_LIMIT)
    frac = np.linspace(0.0, 1.0, SCAN_POINTS)
    grid = LOG_LAMBDA_LO + (top - LOG_LAMBDA_LO)[:, None] * frac[None, :]
    fgrid = _log_post_u(grid, *(col(x) for x in args))
    k = np.argmax(fgrid, axis=1)
    rows = np.arange(th.size)
    lo = grid[rows, np.maximum(k - 1, 0)]
    hi = grid[rows, np.minimum(k + 1, SCAN_POINTS - 1)]
    iterations = np.zeros(th.size, dtype=int)
    ok = _expand(args, lo, hi, top, k == 0, k == SCAN_POINTS - 1, iterations)

    x1 = hi - _INVPHI * (hi - lo)
    x2 = lo + _INVPHI * (hi - lo)
    f1 = _log_post_u(x1, *args)
    f2 = _log_post_u(x2, *args)
    for _ in range(MAX_ITER):
        active = ((hi - lo) > tol) & (iterations < MAX_ITER)
        if not active.any():
            break
        iterations += active
        right = f1 < f2
        # peak in [x1, hi] when right, else in [lo, x2]
        new_lo = np.where(active & right, x1, lo)
        new_hi = np.where(active & ~right, x2, hi)
        xn = np.where(right, new_lo + _INVPHI * (new_hi - new_lo), new_hi - _INVPHI * (new_hi - new_lo))
        fn = _log_post_u(xn, *args)
        x1_next = np.where(right, x2, xn)
        f1_next = np.where(right, f2, fn)
        x2_next = np.where(right, xn, x1)
        f2_next = np.where(right, fn, f1)
        lo, hi = new_lo, new_hi
        x1 = np.where(active, x1_next, x1)
        f1 = np.where(active, f1_next, f1)
        x2 = np.where(active, x2_next, x2)
        f2 = np.where(active, f2_next, f2)

    best_u = np.where(f1 >= f2, x1, x2)
    best_f = np.maximum(f1, f2)
    converged = ok & ((hi - lo) <= tol)
    return (
        np.exp(best_u).reshape(shape),
        best_f.reshape(shape),
        iterations.reshape(shape),
        converged.reshape(shape),
    )


def lambda_posterior_mode(
    exp: ExperimentSummary, hp: HyperParams, tol: float = DEFAULT_TOL
) -> LambdaPosterior:
    _check_shrinkable(exp)
    mode, logd, it, conv = lambda_mode_arrays(
        exp.theta_hat, exp.sigma_hat, hp.m0, hp.tau, hp.a, hp.b, tol
    )
    # report the density on the lambda scale, matching lambda_log_posterior
    return LambdaPosterior(
        mode=float(mode),
        log_density_at_mode=lambda_log_posterior(float(mode), exp, hp),
        iterations=int(it),
        converged=bool(conv),
    )


def hybrid_shrinkage_estimate(
    exp: ExperimentSummary, hp: HyperParams, level: float = 0.90, tol: float = DEFAULT_TOL
):
    lp = lambda_posterior_mode(exp, hp, tol)
    return conditional_posterior(
        exp, hp, lp.mode, level, method=Method.HYBRID, converged=lp.converged
    )


def gibbs_sweep(theta, lam, theta_hat, sigma_hat, hp: HyperParams, rng: np.random.Generator):
    """One vectorised sweep: theta | lambda, then lambda | theta.

    The incoming ``theta`` is discarded by the first step; it is accepted so
    that the call reads as a transition on the pair.
    """
    lam = np.asarray(lam, dtype=float)
    mean, var = posterior_moments(theta_hat, sigma_hat, hp.m0, hp.tau, lam)
    new_theta = mean + np.sqrt(var) * rng.standard_normal(lam.shape)
    scale = (hp.b + (new_theta - hp.m0) ** 2 / hp.tau) / 2.0
    new_lam = scale / rng.standard_gamma((hp.a + 1.0) / 2.0, size=lam.shape)
    return new_theta, new_lam


def gibbs_sample(
    exp: ExperimentSummary,
    hp: HyperParams,
    n_burn: int = 1000,
    n_keep: int = 4000,
    seed: int = 0,
    thin: int = 1,
) -> GibbsTrace:
    """Two-block Gibbs sampler over ``(theta_i, lambda_i)``.

    Starts from the global-shrinkage point (lambda = 1, theta at its
    conditional mean).  The lambda update is conjugate:
    ``InverseGamma((a + 1)/2, (b + (theta - m0)**2 / tau) / 2)``.
    """
    if n_burn < 0 or n_keep < 1 or thin < 1:
        raise InvalidInputError("need n_burn >= 0, n_keep >= 1, thin >= 1")
    _check_shrinkable(exp)
    seed = check_seed(seed)
    rng = make_rng(seed)
    total = n_burn + n_keep * thin
    z = rng.standard_normal(total)
    g = rng.standard_gamma((hp.a + 1.0) / 2.0, size=total)

    th_hat, s2, m0, tau, b = exp.theta_hat, exp.sigma_hat**2, hp.m0, hp.tau, hp.b
    thetas = np.empty(n_keep)
    lams = np.empty(n_keep)
    lam = 1.0
    kept = 0
    for t in range(total):
        pv = lam * tau
        mean = m0 + pv / (s2 + pv) * (th_hat - m0)
        sd = math.sqrt(1.0 / (1.0 / s2 + 1.0 / pv))
        theta = mean + sd * z[t]
        lam = (b + (theta - m0) ** 2 / tau) / 2.0 / g[t]
        if t >= n_burn and (t - n_burn) % thin == 0:
            thetas[kept] = theta
            lams[kept] = lam
            kept += 1
    return GibbsTrace(thetas, lams, n_burn, n_keep, thin, seed)


def gibbs_posterior_summary(trace: GibbsTrace, level: float = 0.90, experiment_id=None):
    """Full-posterior summary from a trace, with an equal-tailed quantile interval."""
    from .model import PosteriorSummary, check_level

    check_level(level)
    lo, hi = np.quantile(trace.theta_draws, [(1 - level) / 2, (1 + level) / 2])
    return PosteriorSummary(
        mean=float(trace.theta_draws.mean()),
        variance=float(trace.theta_draws.var(ddof=1)),
        interval_low=float(lo),
        interval_high=float(hi),
        level=level,
        method=Method.HYBRID,
        lambda_used=None,
        experiment_id=experiment_id,
    )


def full_posterior_arrays(
    theta_hat,
    sigma_hat,
    hp: HyperParams,
    level: float = 0.90,
    n_burn: int = 1000,
    n_keep: int = 4000,
    seed: int = 0,
    chunk: int = 2000,
):
    """Posterior mean, variance and equal-tailed interval by Gibbs sampling.

    Runs one chain per experiment, vectorised across experiments and
    processed ``chunk`` experiments at a time to bound memory.  Chunk ``j``
    uses RNG stream ``(seed, j)``.
    """
    th = np.atleast_1d(np.asarray(theta_hat, dtype=float))
    sg = np.broadcast_to(np.asarray(sigma_hat, dtype=float), th.shape)
    if np.any(~(sg > 0)):
        raise InvalidInputError("sigma_hat must be positive")
    q = [(1 - level) / 2, (1 + level) / 2]
    mean, var, low, high = (np.empty(th.size) for _ in range(4))
    for j, start in enumerate(range(0, th.size, chunk)):
        sl = slice(start, min(start + chunk, th.size))
        rng = make_rng(check_seed(seed), j)
        cur_t, cur_l = th[sl].copy(), np.ones(th[sl].size)
        draws = np.empty((n_keep, cur_t.size))
        for it in range(n_burn + n_keep):
            cur_t, cur_l = gibbs_sweep(cur_t, cur_l, th[sl], sg[sl], hp, rng)
            if it >= n_burn:
                draws[it - n_burn] = cur_t
        mean[sl] = draws.mean(axis=0)
        var[sl] = draws.var(axis=0, ddof=1)
        low[sl], high[sl] = np.quantile(draws, q, axis=0)
    return mean, var, low, high
