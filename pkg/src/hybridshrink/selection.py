"""Selection rules and the two sampling regimes.

*Joint sampling* draws ``(theta, theta_hat)`` together from prior times
likelihood and keeps the pairs that pass the rule.  Conditioning on
selection then leaves the ordinary posterior unchanged, so unadjusted
Bayesian intervals stay calibrated.

*Fixed-parameter sampling* holds ``theta`` constant and redraws only the
data.  Selection then shifts ``theta_hat`` upwards (the winner's curse)
and no prior-based posterior corrects for it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Iterator

import numpy as np

from .errors import InfeasibleSelectionError, InvalidInputError
from .model import HyperParams
from .rng import check_seed, inverse_gamma, make_rng

DRAW_CAP = 10**9
MIN_ACCEPTANCE = 1e-6
_MIN_BATCH = 4096
_MAX_BATCH = 1 << 21


class RuleKind(str, Enum):
    Z_THRESHOLD = "z"
    RAW_THRESHOLD = "raw"
    NONE = "none"


class Direction(str, Enum):
    GREATER = "greater"
    TWO_SIDED = "two-sided"


class Regime(str, Enum):
    JOINT = "joint"
    FIXED = "fixed"


@dataclass(frozen=True)
class SelectionRule:
    kind: RuleKind = RuleKind.Z_THRESHOLD
    threshold: float = 1.645
    null_value: float = 1.0
    direction: Direction = Direction.GREATER

    def __post_init__(self):
        object.__setattr__(self, "kind", RuleKind(self.kind))
        object.__setattr__(self, "direction", Direction(self.direction))
        if self.kind is RuleKind.Z_THRESHOLD and not self.threshold > 0:
            raise InvalidInputError("a z-threshold rule needs threshold > 0")

    @classmethod
    def none(cls) -> "SelectionRule":
        return cls(kind=RuleKind.NONE)

    def passes(self, theta_hat, sigma_hat):
        """Vectorised selection mask."""
        theta_hat = np.asarray(theta_hat, dtype=float)
        if self.kind is RuleKind.NONE:
            return np.ones(theta_hat.shape, dtype=bool)
        if self.kind is RuleKind.Z_THRESHOLD:
            stat = (theta_hat - self.null_value) / sigma_hat
        elif self.direction is Direction.GREATER:
            stat = theta_hat
        else:
            stat = theta_hat - self.null_value
        if self.direction is Direction.TWO_SIDED:
            stat = np.abs(stat)
        return stat > self.threshold


def is_selected(theta_hat: float, sigma_hat: float, rule: SelectionRule) -> bool:
    if not sigma_hat > 0:
        raise InvalidInputError("sigma_hat must be positive")
    return bool(rule.passes(theta_hat, sigma_hat))


@dataclass(frozen=True)
class SigmaModel:
    """Per-draw standard errors: a constant, or a weighted discrete set."""

    values: tuple[float, ...] = (1.0,)
    weights: tuple[float, ...] | None = None

    def __post_init__(self):
        vals = tuple(float(v) for v in self.values)
        if not vals or any(not (v > 0 and math.isfinite(v)) for v in vals):
            raise InvalidInputError("sigma values must be positive and finite")
        object.__setattr__(self, "values", vals)
        if self.weights is not None:
            w = np.asarray(self.weights, dtype=float)
            if w.shape != (len(vals),) or np.any(w < 0) or w.sum() <= 0:
                raise InvalidInputError("sigma weights must be nonnegative, one per value")
            object.__setattr__(self, "weights", tuple(float(x) for x in w / w.sum()))

    @classmethod
    def constant(cls, sigma: float = 1.0) -> "SigmaModel":
        return cls((sigma,))

    def draw(self, rng: np.random.Generator, size: int) -> np.ndarray:
        if len(self.values) == 1:
            return np.full(size, self.values[0])
        return rng.choice(np.asarray(self.values), size=size, p=self.weights)


@dataclass(frozen=True)
class RegimeDraw:
    theta: float
    theta_hat: float
    sigma_hat: float
    regime: Regime


@dataclass(frozen=True)
class RegimeSample:
    """Selected draws from one regime, stored column-wise.

    Iterating yields :class:`RegimeDraw` records.
    """

    theta: np.ndarray
    theta_hat: np.ndarray
    sigma_hat: np.ndarray
    regime: Regime
    acceptance_rate: float
    n_drawn: int
    extra: dict = field(default_factory=dict, compare=False)

    def __len__(self) -> int:
        return self.theta.size

    def __getitem__(self, i: int) -> RegimeDraw:
        return RegimeDraw(
            float(self.theta[i]), float(self.theta_hat[i]), float(self.sigma_hat[i]), self.regime
        )

    def __iter__(self) -> Iterator[RegimeDraw]:
        return (self[i] for i in range(len(self)))


Proposal = Callable[[np.random.Generator, int], dict]


def draw_selected(
    propose: Proposal,
    accept: Callable[[dict], np.ndarray],
    n: int,
    rng: np.random.Generator,
    draw_cap: int = DRAW_CAP,
) -> tuple[dict, float, int]:
    """Draw proposal batches until ``n`` rows pass ``accept``.

    Returns the first ``n`` accepted rows (in draw order), the acceptance
    rate over everything drawn, and the number of candidates drawn.  Batch
    sizes depend only on previously drawn values, so results are a pure
    function of the generator state.
    """
    if n < 1:
        raise InvalidInputError("n must be at least 1")
    chunks: list[dict] = []
    kept = drawn = 0
    while kept < n:
        if drawn >= draw_cap:
            rate = kept / drawn
            raise InfeasibleSelectionError(
                f"only {kept} of {n} candidates selected after {drawn} draws "
                f"(acceptance rate {rate:.3g})"
            )
        if kept == 0:
            size = max(_MIN_BATCH, 2 * n) if drawn == 0 else 4 * drawn
        else:
            size = int(1.1 * (n - kept) * drawn / kept) + 1
        size = int(min(max(size, _MIN_BATCH), _MAX_BATCH, draw_cap - drawn))
        batch = propose(rng, size)
        mask = accept(batch)
        drawn += size
        hits = int(mask.sum())
        if hits:
            chunks.append({k: v[mask] for k, v in batch.items()})
            kept += hits
    out = {k: np.concatenate([c[k] for c in chunks])[:n] for k in chunks[0]}
    rate = kept / drawn
    if rate < MIN_ACCEPTANCE:
        raise InfeasibleSelectionError(f"acceptance rate {rate:.3g} is below {MIN_ACCEPTANCE}")
    return out, rate, drawn


def sample_selected_joint(
    n: int,
    hp: HyperParams,
    sigma_gen: SigmaModel,
    rule: SelectionRule,
    seed: int,
    *,
    lambda_fixed: float | None = None,
    stream: tuple[int, ...] = (),
    draw_cap: int = DRAW_CAP,
) -> RegimeSample:
    """Joint-regime draws: ``theta`` from the hierarchy, then ``theta_hat`` given ``theta``.

    ``lambda_fixed`` replaces the InverseGamma local factor by a constant
    (``1.0`` reproduces the global-shrinkage prior ``N(m0, tau)``).
    """
    rng = make_rng(check_seed(seed), *stream)

    def propose(g: np.random.Generator, size: int) -> dict:
        sig = sigma_gen.draw(g, size)
        if lambda_fixed is None:
            lam = inverse_gamma(g, hp.a / 2.0, hp.b / 2.0, size)
        else:
            lam = np.full(size, float(lambda_fixed))
        theta = hp.m0 + np.sqrt(lam * hp.tau) * g.standard_normal(size)
        theta_hat = theta + sig * g.standard_normal(size)
        return {"theta": theta, "theta_hat": theta_hat, "sigma_hat": sig, "lambda": lam}

    rows, rate, drawn = draw_selected(
        propose, lambda d: rule.passes(d["theta_hat"], d["sigma_hat"]), n, rng, draw_cap
    )
    return RegimeSample(
        rows["theta"], rows["theta_hat"], rows["sigma_hat"], Regime.JOINT, rate, drawn,
        extra={"lambda": rows["lambda"]},
    )


def sample_selected_fixed(
    theta: float,
    n: int,
    sigma_gen: SigmaModel,
    rule: SelectionRule,
    seed: int,
    *,
    stream: tuple[int, ...] = (),
    draw_cap: int = DRAW_CAP,
) -> RegimeSample:
    """Fixed-parameter draws: ``theta`` held constant, ``theta_hat`` resampled."""
    rng = make_rng(check_seed(seed), *stream)
    theta = float(theta)

    def propose(g: np.random.Generator, size: int) -> dict:
        sig = sigma_gen.draw(g, size)
        return {"theta_hat": theta + sig * g.standard_normal(size), "sigma_hat": sig}

    rows, rate, drawn = draw_selected(
        propose, lambda d: rule.passes(d["theta_hat"], d["sigma_hat"]), n, rng, draw_cap
    )
    return RegimeSample(
        np.full(n, theta), rows["theta_hat"], rows["sigma_hat"], Regime.FIXED, rate, drawn
    )
