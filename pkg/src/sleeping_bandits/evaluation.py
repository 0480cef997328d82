"""Hindsight comparator, regret trajectories, and concentration audits.

The regret comparator is the best policy in hindsight over maps from awake
sets to awake arms.  Because the total comparator loss decomposes per set,
the optimal policy picks, for each set, the awake arm with the smallest
full-horizon cumulative loss; it is evaluated lazily per queried set and
never materializes all ``2**K`` entries.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import MAX_ENUM_ARMS, check_weights, mask_indices
from .environments import (
    ExplicitAvailabilityModel,
    IndependentAvailabilityModel,
)
from .estimators import (
    AvailabilityEstimate,
    exact_barq,
    mc_barq,
    empirical_barq,
)
from .algorithms import RunTrace


@dataclass
class HindsightPolicy:
    """Awake-argmin policy for fixed cumulative losses (lowest index on ties)."""

    cumulative_losses: np.ndarray
    _cache: dict[int, int] = field(default_factory=dict, repr=False)

    def pick(self, mask: int) -> int:
        arm = self._cache.get(mask)
        if arm is None:
            awake = mask_indices(mask, self.cumulative_losses.size)
            if awake.size == 0:
                raise ValueError("empty availability set")
            arm = int(awake[int(np.argmin(self.cumulative_losses[awake]))])
            self._cache[mask] = arm
        return arm


def best_policy(loss_matrix: np.ndarray) -> HindsightPolicy:
    """Best policy in hindsight for a full oblivious loss matrix."""
    loss_matrix = np.asarray(loss_matrix, dtype=np.float64)
    if loss_matrix.ndim != 2 or loss_matrix.shape[0] < 1:
        raise ValueError("loss matrix must be (T, K) with T >= 1")
    return HindsightPolicy(cumulative_losses=loss_matrix.sum(axis=0))


@dataclass(frozen=True)
class RegretTrajectory:
    """Per-round learner and comparator losses with the regret prefix sum."""

    learner_losses: np.ndarray
    comparator_losses: np.ndarray
    cumulative_regret: np.ndarray


def regret_trajectory(trace: RunTrace, policy: HindsightPolicy) -> RegretTrajectory:
    """Empirical regret against the hindsight policy on the realized awake sets."""
    if policy.cumulative_losses.size != trace.num_arms:
        raise ValueError("policy arm count does not match the trace")
    if trace.loss_matrix.shape != (trace.horizon, trace.num_arms):
        raise ValueError("trace loss matrix shape does not match its horizon")
    comparator = np.empty(trace.horizon)
    for t in range(trace.horizon):
        comparator[t] = trace.loss_matrix[t, policy.pick(int(trace.masks[t]))]
    cumulative = np.cumsum(trace.learner_losses - comparator)
    return RegretTrajectory(
        learner_losses=trace.learner_losses.copy(),
        comparator_losses=comparator,
        cumulative_regret=cumulative,
    )


def aggregate(trajectories: list[RegretTrajectory]) -> tuple[np.ndarray, np.ndarray]:
    """Per-round mean and sample standard deviation of cumulative regret."""
    if not trajectories:
        raise ValueError("need at least one trajectory")
    lengths = {traj.cumulative_regret.size for traj in trajectories}
    if len(lengths) != 1:
        raise ValueError(f"trajectories have mismatched lengths: {sorted(lengths)}")
    stacked = np.stack([traj.cumulative_regret for traj in trajectories])
    mean = stacked.mean(axis=0)
    std = stacked.std(axis=0, ddof=1) if stacked.shape[0] > 1 else np.zeros(mean.size)
    return mean, std


# ---------------------------------------------------------------------------
# True play probabilities and concentration audits


def exact_qstar(
    p: np.ndarray,
    model: IndependentAvailabilityModel | ExplicitAvailabilityModel,
) -> np.ndarray:
    """True expected redistribution under a known availability model.

    Enumerates the model's subsets exactly (empty set contributes zero);
    this is the quantity the estimators are audited against.
    """
    p = check_weights(p)
    if isinstance(model, IndependentAvailabilityModel):
        if p.size > MAX_ENUM_ARMS:
            raise ValueError("exact mode exceeds enumeration cap; use MonteCarlo")
        return exact_barq(p, model.a).values
    if isinstance(model, ExplicitAvailabilityModel):
        if model.num_arms > MAX_ENUM_ARMS:
            raise ValueError("exact mode exceeds enumeration cap")
        values = np.zeros(p.size)
        for mask, prob in zip(model.masks, model.probs):
            awake = mask_indices(int(mask), p.size)
            awake_mass = float(p[awake].sum())
            if awake_mass > 0.0:
                values[awake] += prob * p[awake] / awake_mass
            else:
                values[awake] += prob / awake.size
        return values
    raise TypeError(
        "true play probabilities need an independent or explicit subset model"
    )


LEMMA_INDEPENDENT_EXACT = "L1"
LEMMA_INDEPENDENT_MC = "L6"
LEMMA_GENERAL = "L9"


@dataclass(frozen=True)
class AuditConfig:
    """One concentration audit: estimator setting, scale, and trial count."""

    availability: IndependentAvailabilityModel | ExplicitAvailabilityModel
    t: int
    delta: float
    trials: int
    p: np.ndarray | None = None

    def __post_init__(self) -> None:
        if self.t < 1:
            raise ValueError(f"t must be >= 1, got {self.t}")
        if not 0.0 < self.delta < 1.0:
            raise ValueError(f"delta must be in (0, 1), got {self.delta}")
        if self.trials < 1:
            raise ValueError(f"trial count must be >= 1, got {self.trials}")


@dataclass(frozen=True)
class AuditReport:
    """Outcome of a concentration audit."""

    lemma: str
    num_arms: int
    t: int
    delta: float
    trials: int
    bound: float
    violations: int
    max_deviation: float
    mean_deviation: float

    @property
    def violation_fraction(self) -> float:
        return self.violations / self.trials

    @property
    def passed(self) -> bool:
        return self.violation_fraction <= self.delta


def audit_bound(lemma: str, num_arms: int, t: int, delta: float) -> float:
    """The audited concentration bound (unclipped, as stated)."""
    k = num_arms
    if lemma == LEMMA_INDEPENDENT_EXACT:
        lg = math.log(k / delta)
        return 2.0 * k * math.sqrt(2.0 * lg / t) + 8.0 * k * lg / (3.0 * t)
    if lemma == LEMMA_INDEPENDENT_MC:
        lg = math.log(2.0 * k / delta)
        return 4.0 * k * math.sqrt(lg / t) + 8.0 * k * lg / (3.0 * t)
    if lemma == LEMMA_GENERAL:
        lg = math.log(2.0**k / delta)
        return math.sqrt(2.0 ** (k + 1) / t * lg) + 2.0 ** (k + 1) / (3.0 * t) * lg
    raise ValueError(f"unknown lemma {lemma!r}; expected L1, L6 or L9")


def concentration_audit(
    lemma: str,
    config: AuditConfig,
    rng: np.random.Generator,
) -> AuditReport:
    """Monte-Carlo check that estimator deviations respect a stated bound.

    Each trial draws a fresh length-``t`` availability history exactly as the
    concentration statement assumes -- in particular, the independent model
    draws raw per-arm Bernoullis *without* the empty-set rejection the game
    environments apply, since the statements put no mass condition on the
    history.  The audit passes when the fraction of trials whose worst-arm
    deviation exceeds the bound is at most ``delta``.
    """
    model = config.availability
    num_arms = model.num_arms
    p = (
        np.full(num_arms, 1.0 / num_arms)
        if config.p is None
        else check_weights(config.p)
    )
    if p.size != num_arms:
        raise ValueError("fixed weight vector does not match the model's arm count")
    independent = isinstance(model, IndependentAvailabilityModel)
    if lemma in (LEMMA_INDEPENDENT_EXACT, LEMMA_INDEPENDENT_MC) and not independent:
        raise ValueError(f"lemma {lemma} audits the independent-availability setting")
    if lemma == LEMMA_GENERAL and independent:
        raise ValueError("lemma L9 audits the general-availability setting")

    qstar = exact_qstar(p, model)
    bound = audit_bound(lemma, num_arms, config.t, config.delta)
    deviations = np.empty(config.trials)
    for trial in range(config.trials):
        if independent:
            history = rng.random((config.t, num_arms)) < model.a
            ahat = history.mean(axis=0)
            if lemma == LEMMA_INDEPENDENT_EXACT:
                estimate = exact_barq(p, ahat).values
            else:
                estimate = mc_barq(p, ahat, config.t, rng).values
        else:
            est = AvailabilityEstimate(num_arms)
            cum = np.cumsum(model.probs)
            draws = np.searchsorted(cum, rng.random(config.t) * cum[-1], side="right")
            for idx in np.minimum(draws, model.masks.size - 1):
                est.update(int(model.masks[idx]))
            estimate = empirical_barq(p, est).values
        deviations[trial] = float(np.max(np.abs(qstar - estimate)))

    return AuditReport(
        lemma=lemma,
        num_arms=num_arms,
        t=config.t,
        delta=config.delta,
        trials=config.trials,
        bound=bound,
        violations=int(np.sum(deviations > bound)),
        max_deviation=float(deviations.max()),
        mean_deviation=float(deviations.mean()),
    )
