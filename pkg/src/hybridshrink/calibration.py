"""Empirical-Bayes fitting of ``m0`` and ``tau``; ``a`` and ``b`` stay user-set.

Fit on the *pre-selection* population whenever it is available.  A prior
fitted to launched experiments only already carries the selection effect.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.special import gammaln, logsumexp

from .errors import InvalidInputError
from .model import ExperimentSummary, HyperParams

TAU_MIN = 1e-12
DEFAULT_A = 3.0
DEFAULT_B = 3.0
GL_NODES = 64
PANELS = 4
_SCAN = 200
_DROP = 40.0  # nats below the peak still integrated
_GL_X, _GL_W = np.polynomial.legendre.leggauss(GL_NODES)
_HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)


class CalibrationMethod(str, Enum):
    METHOD_OF_MOMENTS = "moments"
    MARGINAL_MLE = "mle"


@dataclass(frozen=True)
class CalibrationReport:
    hyperparams: HyperParams
    n_experiments_used: int
    log_marginal_likelihood: float
    method: CalibrationMethod
    tau_floored: bool = False
    iterations: int = 0


def _arrays(corpus: Sequence[ExperimentSummary]):
    corpus = list(corpus)
    if len(corpus) < 2:
        raise InvalidInputError("calibration needs at least two experiments")
    th = np.array([e.theta_hat for e in corpus], dtype=float)
    sg = np.array([e.sigma_hat for e in corpus], dtype=float)
    bad = np.flatnonzero(~(sg > 0))
    if bad.size:
        raise InvalidInputError(f"experiment {corpus[bad[0]].id!r}: sigma_hat must be positive")
    return corpus, th, sg


def _log_integrand(u, th, s2, m0, tau, a, b):
    """log[N(th; m0, s2 + e^u tau) * IG(e^u; a/2, b/2) * e^u] on the log-lambda scale."""
    lam = np.exp(u)
    v = s2 + lam * tau
    alpha, beta = a / 2.0, b / 2.0
    log_ig = alpha * np.log(beta) - gammaln(alpha) - (alpha + 1.0) * u - beta / lam
    return -_HALF_LOG_2PI - 0.5 * np.log(v) - (th - m0) ** 2 / (2.0 * v) + log_ig + u


def _support(lo, hi, args):
    """Shrink per-row ``[lo, hi]`` to the cells where the integrand is within ``_DROP`` of its peak."""
    frac = np.linspace(0.0, 1.0, _SCAN)
    grid = lo[:, None] + (hi - lo)[:, None] * frac[None, :]
    h = _log_integrand(grid, *(x[:, None] for x in args))
    live = h > h.max(axis=1, keepdims=True) - _DROP
    first = np.argmax(live, axis=1)
    last = _SCAN - 1 - np.argmax(live[:, ::-1], axis=1)
    rows = np.arange(grid.shape[0])
    return grid[rows, np.maximum(first - 1, 0)], grid[rows, np.minimum(last + 1, _SCAN - 1)]


def log_marginal_terms(th, sg, m0, tau, a, b) -> np.ndarray:
    """Per-experiment ``log integral N(th; m0, s2 + lambda tau) IG(lambda; a/2, b/2) dlambda``.

    Composite 64-node Gauss-Legendre (``PANELS`` panels) in ``log lambda``
    over the integrand's support.  The support is located by two rounds of
    grid zooming inside ``[1e-8, 1e8]``, extended to cover the likelihood
    peak and the prior mode when they fall outside.
    """
    th = np.asarray(th, dtype=float)
    s2 = np.asarray(sg, dtype=float) ** 2
    n = th.size
    args = tuple(np.broadcast_to(np.asarray(x, dtype=float), (n,)) for x in (th, s2, m0, tau, a, b))
    _, s2b, _, taub, ab, bb = args
    d2 = (args[0] - args[2]) ** 2
    with np.errstate(divide="ignore"):
        peak = np.log(np.maximum(d2 - s2b, 0.0) / taub) + math.log(10.0)
    prior_mode = np.log(bb / (ab + 2.0))
    lo = np.minimum(math.log(1e-8), prior_mode - 25.0)
    hi = np.clip(np.fmax(peak, math.log(1e8)), math.log(1e8), 700.0)
    hi = np.maximum(hi, prior_mode + 25.0)
    lo, hi = _support(lo, hi, args)
    lo, hi = _support(lo, hi, args)
    # composite rule: PANELS equal panels, 64 Gauss-Legendre nodes each
    half = (hi - lo) / (2.0 * PANELS)
    centres = lo[:, None] + half[:, None] * (2.0 * np.arange(PANELS) + 1.0)[None, :]
    nodes = (centres[:, :, None] + half[:, None, None] * _GL_X[None, None, :]).reshape(n, -1)
    h = _log_integrand(nodes, *(x[:, None] for x in args))
    out = logsumexp(h, axis=1, b=np.tile(_GL_W, PANELS)[None, :]) + np.log(half)
    if not np.all(np.isfinite(out)):
        bad = int(np.flatnonzero(~np.isfinite(out))[0])
        raise InvalidInputError(f"marginal likelihood is not finite for experiment index {bad}")
    return out


def log_marginal_likelihood(corpus: Sequence[ExperimentSummary], hp: HyperParams) -> float:
    _, th, sg = _arrays(corpus)
    terms = log_marginal_terms(th, sg, hp.m0, hp.tau, hp.a, hp.b)
    return float(math.fsum(terms))


def _check_ab(a: float, b: float) -> None:
    if not (a > 0 and b > 0):
        raise InvalidInputError("a and b must be positive")


def _moments(th, sg, scale):
    w = 1.0 / sg**2
    m0 = float(np.sum(w * th) / np.sum(w))
    var = float(np.sum((th - m0) ** 2) / (th.size - 1))
    tau = (var - float(np.mean(sg**2))) / scale
    return m0, tau


def fit_method_of_moments(
    corpus: Sequence[ExperimentSummary], a: float = DEFAULT_A, b: float = DEFAULT_B
) -> CalibrationReport:
    """Moment matching with ``E[lambda] = b / (a - 2)``.

    ``m0`` is the precision-weighted mean; ``tau`` solves
    ``var(theta_hat) = mean(sigma_hat**2) + tau * b / (a - 2)`` and is floored
    at ``TAU_MIN`` (with ``tau_floored`` set) when the excess variance is
    not positive.
    """
    _check_ab(a, b)
    if not a > 2:
        raise InvalidInputError("method of moments needs a > 2 so that E[lambda] is finite")
    corpus, th, sg = _arrays(corpus)
    m0, tau = _moments(th, sg, b / (a - 2.0))
    floored = not tau > TAU_MIN
    if floored:
        warnings.warn("no excess between-experiment variance; tau set to its floor", stacklevel=2)
        tau = TAU_MIN
    hp = HyperParams(m0, tau, a, b)
    return CalibrationReport(
        hp, len(corpus), log_marginal_likelihood(corpus, hp), CalibrationMethod.METHOD_OF_MOMENTS, floored
    )


def fit_marginal_mle(
    corpus: Sequence[ExperimentSummary],
    a: float = DEFAULT_A,
    b: float = DEFAULT_B,
    tol: float = 1e-8,
    max_rounds: int = 100,
) -> CalibrationReport:
    """Maximise the marginal likelihood over ``(m0, tau)`` by coordinate ascent.

    Starts from the moment fit (or its ``a <= 2`` analogue), so the result
    never scores below it.  Each round maximises over ``m0`` and then over
    ``log tau`` with bounded Brent searches; iteration stops once both move
    by less than ``tol``.
    """
    _check_ab(a, b)
    if not tol > 0:
        raise InvalidInputError("tol must be positive")
    corpus, th, sg = _arrays(corpus)
    scale = b / (a - 2.0) if a > 2 else 1.0
    m0, tau = _moments(th, sg, scale)
    tau = max(tau, TAU_MIN)

    def loglik(m, t):
        return math.fsum(log_marginal_terms(th, sg, m, t, a, b))

    best = loglik(m0, tau)
    spread = float(np.ptp(th)) + float(np.max(sg))
    log_tau_hi = math.log(max(10.0 * (float(np.var(th)) + spread**2), 1.0))
    rounds = 0
    for rounds in range(1, max_rounds + 1):
        res = minimize_scalar(
            lambda m: -loglik(m, tau),
            bounds=(m0 - spread, m0 + spread),
            method="bounded",
            options={"xatol": tol * max(1.0, spread)},
        )
        new_m0 = float(res.x) if -res.fun > best else m0
        best = max(best, -res.fun)
        res = minimize_scalar(
            lambda lt: -loglik(new_m0, math.exp(lt)),
            bounds=(math.log(TAU_MIN), log_tau_hi),
            method="bounded",
            options={"xatol": tol},
        )
        new_tau = math.exp(float(res.x)) if -res.fun > best else tau
        best = max(best, -res.fun)
        done = abs(new_m0 - m0) < tol * max(1.0, spread) and abs(math.log(new_tau / tau)) < tol
        m0, tau = new_m0, new_tau
        if done:
            break
    hp = HyperParams(m0, tau, a, b)
    return CalibrationReport(
        hp, len(corpus), loglik(m0, tau), CalibrationMethod.MARGINAL_MLE, tau <= TAU_MIN * 1.001, rounds
    )
