"""Domain types and the closed-form estimators.

The shrinkage model is the three-level hierarchy::

    theta_hat_i | theta_i      ~ N(theta_i, sigma_hat_i**2)
    theta_i | lambda_i         ~ N(m0, lambda_i * tau)
    lambda_i                   ~ InverseGamma(a / 2, b / 2)     (shape, scale)

Conditional on ``lambda_i`` the posterior of ``theta_i`` is normal; see
:func:`posterior_moments`.  Fixing ``lambda_i = 1`` gives global shrinkage.
All estimates live on the scale of ``theta_hat`` (a ratio, 1.0 = no effect);
transforming to a log scale first is left to the caller.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np
from scipy.special import ndtri

from .errors import InvalidInputError, SingularDenominatorError


class Method(str, Enum):
    FACE_VALUE = "face-value"
    GLOBAL = "global"
    HYBRID = "hybrid"

    @classmethod
    def parse(cls, value: "str | Method") -> "Method":
        if isinstance(value, Method):
            return value
        key = str(value).strip().lower().replace("_", "-")
        aliases = {
            "facevalue": "face-value",
            "globalshrinkage": "global",
            "global-shrinkage": "global",
            "hybridshrinkage": "hybrid",
            "hybrid-shrinkage": "hybrid",
        }
        key = aliases.get(key.replace(" ", ""), key)
        try:
            return cls(key)
        except ValueError:
            raise InvalidInputError(f"unknown estimator method {value!r}") from None


ALL_METHODS = (Method.FACE_VALUE, Method.GLOBAL, Method.HYBRID)


@dataclass(frozen=True)
class ExperimentSummary:
    """One experiment's point estimate and standard error.

    ``sigma_hat`` may be exactly zero (e.g. a Face Value estimate from
    constant arms); the shrinkage estimators reject that case.
    """

    id: str
    theta_hat: float
    sigma_hat: float
    selected: bool = True
    replication_theta_hat: float | None = None
    replication_sigma_hat: float | None = None

    def __post_init__(self):
        if not math.isfinite(self.theta_hat):
            raise InvalidInputError(f"experiment {self.id!r}: theta_hat must be finite")
        if not (math.isfinite(self.sigma_hat) and self.sigma_hat >= 0):
            raise InvalidInputError(
                f"experiment {self.id!r}: sigma_hat must be finite and non-negative, "
                f"got {self.sigma_hat}"
            )
        if self.replication_theta_hat is not None and not math.isfinite(
            self.replication_theta_hat
        ):
            raise InvalidInputError(
                f"experiment {self.id!r}: replication_theta_hat must be finite"
            )
        if self.replication_sigma_hat is not None and not (
            self.replication_sigma_hat > 0 and math.isfinite(self.replication_sigma_hat)
        ):
            raise InvalidInputError(
                f"experiment {self.id!r}: replication_sigma_hat must be positive"
            )

    @property
    def has_replication(self) -> bool:
        return self.replication_theta_hat is not None


@dataclass(frozen=True)
class UnitLevelData:
    outcomes: Sequence[float]
    assignments: Sequence[int]

    def __post_init__(self):
        if len(self.outcomes) == 0 or len(self.outcomes) != len(self.assignments):
            raise InvalidInputError(
                "outcomes and assignments must be nonempty and of equal length"
            )
        if any(z not in (0, 1) for z in self.assignments):
            raise InvalidInputError("assignments must be 0 or 1")
        if not all(math.isfinite(y) for y in self.outcomes):
            raise InvalidInputError("outcomes must be finite")


@dataclass(frozen=True)
class HyperParams:
    """Prior settings shared across a corpus.

    ``a`` and ``b`` are the raw inputs; the hyperprior on the local factor is
    InverseGamma(shape=a/2, scale=b/2).
    """

    m0: float
    tau: float
    a: float = 3.0
    b: float = 3.0

    def __post_init__(self):
        if not math.isfinite(self.m0):
            raise InvalidInputError("m0 must be finite")
        for name in ("tau", "a", "b"):
            v = getattr(self, name)
            if not (v > 0 and math.isfinite(v)):
                raise InvalidInputError(f"{name} must be positive and finite, got {v}")


@dataclass(frozen=True)
class PosteriorSummary:
    mean: float
    variance: float
    interval_low: float
    interval_high: float
    level: float
    method: Method
    lambda_used: float | None = None
    converged: bool = True
    experiment_id: str | None = None

    @property
    def sd(self) -> float:
        return math.sqrt(self.variance)

    def contains(self, value: float) -> bool:
        return self.interval_low <= value <= self.interval_high


def normal_quantile(p):
    """Inverse standard-normal CDF (``scipy.special.ndtri``, Cephes rational approximations)."""
    return ndtri(p)


def interval_multiplier(level: float) -> float:
    check_level(level)
    return float(normal_quantile((1.0 + level) / 2.0))


def check_level(level: float) -> None:
    if not 0.0 < level < 1.0:
        raise InvalidInputError(f"level must lie in (0, 1), got {level}")


def face_value_estimate(data: UnitLevelData, id: str = "experiment") -> ExperimentSummary:
    """Ratio of arm means with a delta-method standard error.

    The arms are treated as independent samples:
    ``se**2 = var(t_mean) / c_mean**2 + t_mean**2 * var(c_mean) / c_mean**4``
    with ``var(mean) = s**2 / n`` from within-arm sample variances.
    """
    y = np.asarray(data.outcomes, dtype=float)
    z = np.asarray(data.assignments, dtype=int)
    treated, control = y[z == 1], y[z == 0]
    if treated.size == 0 or control.size == 0:
        raise InvalidInputError("both arms need at least one unit")
    if treated.size < 2 or control.size < 2:
        raise InvalidInputError("each arm needs at least two units for a variance estimate")
    t_mean, c_mean = treated.mean(), control.mean()
    if c_mean == 0:
        raise SingularDenominatorError("control-arm mean is zero; ratio is undefined")
    var_t = treated.var(ddof=1) / treated.size
    var_c = control.var(ddof=1) / control.size
    se2 = var_t / c_mean**2 + t_mean**2 * var_c / c_mean**4
    return ExperimentSummary(id=id, theta_hat=float(t_mean / c_mean), sigma_hat=math.sqrt(se2))


def posterior_moments(theta_hat, sigma_hat, m0, tau, lam):
    """Normal posterior of theta given lambda; broadcasts over arrays.

    Returns ``(mean, variance)`` where the mean is the convex combination
    ``s2/(s2 + lam*tau) * m0 + lam*tau/(s2 + lam*tau) * theta_hat``, written
    as ``m0 + w * (theta_hat - m0)`` so that ``theta_hat == m0`` maps to
    ``m0`` exactly, and clipped to ``[min(m0, theta_hat), max(m0, theta_hat)]``
    against rounding.
    """
    s2 = np.square(sigma_hat)
    prior_var = np.multiply(lam, tau)
    w = prior_var / (s2 + prior_var)
    mean = m0 + w * np.subtract(theta_hat, m0)
    mean = np.clip(mean, np.minimum(m0, theta_hat), np.maximum(m0, theta_hat))
    variance = 1.0 / (1.0 / s2 + 1.0 / prior_var)
    return mean, variance


def _check_shrinkable(exp: ExperimentSummary) -> None:
    if not exp.sigma_hat > 0:
        raise InvalidInputError(
            f"experiment {exp.id!r}: sigma_hat must be positive for shrinkage estimation"
        )


def conditional_posterior(
    exp: ExperimentSummary,
    hp: HyperParams,
    lam: float,
    level: float = 0.90,
    method: Method = Method.HYBRID,
    converged: bool = True,
) -> PosteriorSummary:
    """Posterior of the true effect at a fixed local shrinkage factor ``lam``."""
    if not (lam > 0 and math.isfinite(lam)):
        raise InvalidInputError(f"lambda must be positive and finite, got {lam}")
    _check_shrinkable(exp)
    z = interval_multiplier(level)
    mean, var = posterior_moments(exp.theta_hat, exp.sigma_hat, hp.m0, hp.tau, lam)
    mean, var = float(mean), float(var)
    half = z * math.sqrt(var)
    return PosteriorSummary(
        mean=mean,
        variance=var,
        interval_low=mean - half,
        interval_high=mean + half,
        level=level,
        method=method,
        lambda_used=float(lam),
        converged=converged,
        experiment_id=exp.id,
    )


def global_shrinkage_estimate(
    exp: ExperimentSummary, hp: HyperParams, level: float = 0.90
) -> PosteriorSummary:
    return conditional_posterior(exp, hp, 1.0, level, method=Method.GLOBAL)


def face_value_posterior(exp: ExperimentSummary, level: float = 0.90) -> PosteriorSummary:
    """The unadjusted estimate with its naive ``theta_hat +/- z * sigma_hat`` interval."""
    _check_shrinkable(exp)
    z = interval_multiplier(level)
    half = z * exp.sigma_hat
    return PosteriorSummary(
        mean=exp.theta_hat,
        variance=exp.sigma_hat**2,
        interval_low=exp.theta_hat - half,
        interval_high=exp.theta_hat + half,
        level=level,
        method=Method.FACE_VALUE,
        experiment_id=exp.id,
    )
