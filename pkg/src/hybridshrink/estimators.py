"""Dispatch over the three estimators, for single experiments and arrays."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .errors import InvalidInputError
from .local import DEFAULT_TOL, hybrid_shrinkage_estimate, lambda_mode_arrays
from .model import (
    ExperimentSummary,
    HyperParams,
    Method,
    PosteriorSummary,
    face_value_posterior,
    global_shrinkage_estimate,
    interval_multiplier,
    posterior_moments,
)


@dataclass(frozen=True)
class EstimateBatch:
    method: Method
    level: float
    mean: np.ndarray
    variance: np.ndarray
    low: np.ndarray
    high: np.ndarray
    lambda_used: np.ndarray  # NaN for face value
    converged: np.ndarray

    def covers(self, target) -> np.ndarray:
        return (self.low <= target) & (target <= self.high)


def estimate_arrays(
    method: Method | str,
    theta_hat,
    sigma_hat,
    hp: HyperParams | None,
    level: float = 0.90,
    tol: float = DEFAULT_TOL,
) -> EstimateBatch:
    method = Method.parse(method)
    th = np.asarray(theta_hat, dtype=float)
    sg = np.broadcast_to(np.asarray(sigma_hat, dtype=float), th.shape)
    if np.any(~(sg > 0)):
        raise InvalidInputError("sigma_hat must be positive")
    z = interval_multiplier(level)
    if method is Method.FACE_VALUE:
        mean, var = th.copy(), sg**2
        lam = np.full(th.shape, np.nan)
        conv = np.ones(th.shape, dtype=bool)
    else:
        if hp is None:
            raise InvalidInputError(f"{method.value} estimation needs hyperparameters")
        if method is Method.GLOBAL:
            lam = np.ones(th.shape)
            conv = np.ones(th.shape, dtype=bool)
        else:
            lam, _, _, conv = lambda_mode_arrays(th, sg, hp.m0, hp.tau, hp.a, hp.b, tol)
        mean, var = posterior_moments(th, sg, hp.m0, hp.tau, lam)
    half = z * np.sqrt(var)
    return EstimateBatch(method, level, mean, var, mean - half, mean + half, lam, conv)


def estimate(
    exp: ExperimentSummary,
    hp: HyperParams | None,
    method: Method | str,
    level: float = 0.90,
) -> PosteriorSummary:
    method = Method.parse(method)
    if method is Method.FACE_VALUE:
        return face_value_posterior(exp, level)
    if hp is None:
        raise InvalidInputError(f"{method.value} estimation needs hyperparameters")
    if method is Method.GLOBAL:
        return global_shrinkage_estimate(exp, hp, level)
    return hybrid_shrinkage_estimate(exp, hp, level)


def estimate_corpus(
    corpus: Iterable[ExperimentSummary],
    hp: HyperParams | None,
    method: Method | str,
    level: float = 0.90,
) -> list[PosteriorSummary]:
    corpus = list(corpus)
    if not corpus:
        return []
    batch = estimate_arrays(
        method,
        [e.theta_hat for e in corpus],
        [e.sigma_hat for e in corpus],
        hp,
        level,
    )
    out = []
    for i, e in enumerate(corpus):
        lam = float(batch.lambda_used[i])
        out.append(
            PosteriorSummary(
                mean=float(batch.mean[i]),
                variance=float(batch.variance[i]),
                interval_low=float(batch.low[i]),
                interval_high=float(batch.high[i]),
                level=level,
                method=batch.method,
                lambda_used=None if np.isnan(lam) else lam,
                converged=bool(batch.converged[i]),
                experiment_id=e.id,
            )
        )
    return out
