"""Posterior predictive checks and replication-study evaluation.

A replicated estimate is drawn by sampling ``theta`` from the posterior and
then ``theta_rep ~ N(theta, sigma_hat**2)``.  The tail area
``P(T(rep) >= T(obs))`` plays the role of a p-value; ties count toward the
tail.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Mapping, Sequence

import numpy as np

from .errors import InvalidInputError
from .model import ExperimentSummary, Method, PosteriorSummary, normal_quantile
from .rng import check_seed, make_rng


class Statistic(str, Enum):
    IDENTITY = "identity"
    ABS_DEVIATION = "abs-deviation"


class CoverageTarget(str, Enum):
    POINT = "point"
    INTERVAL_OVERLAP = "interval-overlap"


@dataclass(frozen=True)
class PredictiveCheckResult:
    statistic_name: str
    observed: float
    replicated: np.ndarray
    tail_area: float


@dataclass(frozen=True)
class ReplicationEvaluation:
    mae: float
    coverage: float
    n_pairs: int
    method: Method | None


def posterior_predictive_draws(
    exp: ExperimentSummary,
    posterior: PosteriorSummary,
    n: int,
    seed: int = 0,
    stream: tuple[int, ...] = (),
) -> np.ndarray:
    if n < 1:
        raise InvalidInputError("n must be at least 1")
    if not exp.sigma_hat > 0:
        raise InvalidInputError("sigma_hat must be positive")
    rng = make_rng(check_seed(seed), *stream)
    theta = posterior.mean + math.sqrt(posterior.variance) * rng.standard_normal(n)
    return theta + exp.sigma_hat * rng.standard_normal(n)


def _statistic(statistic, prior_mean):
    if callable(statistic) and not isinstance(statistic, (str, Statistic)):
        return getattr(statistic, "__name__", "custom"), statistic
    stat = Statistic(statistic)
    if stat is Statistic.IDENTITY:
        return stat.value, lambda x: x
    if prior_mean is None:
        raise InvalidInputError("abs-deviation statistic needs prior_mean")
    return stat.value, lambda x: np.abs(np.asarray(x) - prior_mean)


def tail_area_check(
    exp: ExperimentSummary,
    posterior: PosteriorSummary,
    statistic: Statistic | str | Callable = Statistic.IDENTITY,
    n: int = 4000,
    seed: int = 0,
    prior_mean: float | None = None,
    stream: tuple[int, ...] = (),
) -> PredictiveCheckResult:
    """Tail area of the observed statistic within its posterior predictive distribution.

    ``statistic`` may be a :class:`Statistic` or any vectorised callable.
    ``abs-deviation`` computes ``|x - prior_mean|``.
    """
    if n < 100:
        raise InvalidInputError("use at least 100 predictive draws")
    name, fn = _statistic(statistic, prior_mean)
    reps = np.asarray(fn(posterior_predictive_draws(exp, posterior, n, seed, stream)), dtype=float)
    observed = float(fn(np.array([exp.theta_hat]))[0])
    return PredictiveCheckResult(name, observed, reps, float(np.mean(reps >= observed)))


def _align(corpus, estimates):
    if isinstance(estimates, Mapping):
        by_id = dict(estimates)
    else:
        estimates = list(estimates)
        if all(e.experiment_id is not None for e in estimates):
            by_id = {e.experiment_id: e for e in estimates}
        elif len(estimates) == len(corpus):
            by_id = {c.id: e for c, e in zip(corpus, estimates)}
        else:
            raise InvalidInputError("estimates carry no ids and do not match the corpus length")
    pairs = []
    for c in corpus:
        if c.has_replication and c.id in by_id:
            pairs.append((c, by_id[c.id]))
    return pairs


def replication_evaluation(
    corpus: Sequence[ExperimentSummary],
    estimates: Sequence[PosteriorSummary] | Mapping[str, PosteriorSummary],
    coverage_target: CoverageTarget | str = CoverageTarget.POINT,
) -> ReplicationEvaluation:
    """MAE and interval coverage against paired replication estimates.

    Estimates are matched to experiments by id (positionally when they carry
    none); experiments without a replication are skipped.  By default an
    interval covers when it contains the replication point estimate; with
    ``interval-overlap`` it must overlap the replication's own interval at
    the same level.
    """
    target = CoverageTarget(coverage_target)
    pairs = _align(list(corpus), estimates)
    if not pairs:
        raise InvalidInputError("no experiment has both an estimate and a replication")
    err = np.array([abs(e.mean - c.replication_theta_hat) for c, e in pairs])
    if target is CoverageTarget.POINT:
        hit = [e.contains(c.replication_theta_hat) for c, e in pairs]
    else:
        hit = []
        for c, e in pairs:
            if c.replication_sigma_hat is None:
                raise InvalidInputError(f"experiment {c.id!r} has no replication_sigma_hat")
            half = float(normal_quantile((1 + e.level) / 2)) * c.replication_sigma_hat
            hit.append(
                e.interval_low <= c.replication_theta_hat + half
                and c.replication_theta_hat - half <= e.interval_high
            )
    methods = {e.method for _, e in pairs}
    return ReplicationEvaluation(
        mae=float(err.mean()),
        coverage=float(np.mean(hit)),
        n_pairs=len(pairs),
        method=methods.pop() if len(methods) == 1 else None,
    )


def split_corpus(
    corpus: Sequence[ExperimentSummary], seed: int = 0
) -> tuple[list[ExperimentSummary], list[ExperimentSummary]]:
    """Random half split (the first half gets the extra item when odd)."""
    corpus = list(corpus)
    perm = make_rng(check_seed(seed)).permutation(len(corpus))
    cut = (len(corpus) + 1) // 2
    return [corpus[i] for i in perm[:cut]], [corpus[i] for i in perm[cut:]]
