"""Sleeping-bandit learners as single-round state machines.

Every learner follows the same round contract: observe the awake set, choose
an awake arm, observe only the played arm's loss, update.  Three exponential
-weights variants differ only in how they estimate the probability of play
(exact enumeration, Monte-Carlo resampling, or the observed-subset average);
two reference baselines (uniform play and a follow-the-leader rule on raw
observed losses) anchor the qualitative regret orderings.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .core import (
    LambdaRule,
    MAX_ARMS,
    MAX_ENUM_ARMS,
    ScheduleParams,
    check_mask,
    default_params,
    exp3_update,
    mask_indices,
    mask_members,
    redistribute,
    sample_categorical,
)
from .environments import Environment, RejectionCounter, gen_availability, gen_losses
from .estimators import (
    AvailabilityEstimate,
    PlayProbabilities,
    empirical_barq,
    exact_barq,
    loss_estimate,
    mc_barq,
)
from .seeding import SeedParts, stream_rng


class Variant(str, Enum):
    """Learner identifiers used in configs and result files."""

    EXP3_EXACT = "exp3_exact"
    EXP3_MC = "exp3_mc"
    EXP3G = "exp3g"
    UNIFORM = "uniform"
    FTL = "ftl"

    @property
    def lambda_rule(self) -> LambdaRule | None:
        return _RULES[self]

    @property
    def is_exp3(self) -> bool:
        return _RULES[self] is not None


_RULES = {
    Variant.EXP3_EXACT: LambdaRule.EXACT,
    Variant.EXP3_MC: LambdaRule.MONTE_CARLO,
    Variant.EXP3G: LambdaRule.GENERAL,
    Variant.UNIFORM: None,
    Variant.FTL: None,
}


@dataclass
class LearnerState:
    """Mutable per-run learner state; exactly one run owns it."""

    variant: Variant
    num_arms: int
    horizon: int
    weights: np.ndarray
    availability: AvailabilityEstimate
    schedule: ScheduleParams | None
    t: int = 1
    ftl_losses: np.ndarray | None = None
    mc_max_samples: int | None = None


@dataclass(frozen=True)
class RoundOutcome:
    """Everything one update step produced, for tracing and tests."""

    chosen: int
    play_dist: np.ndarray
    est_loss: np.ndarray | None
    lam: float | None
    play_prob: PlayProbabilities | None


def learner_init(
    variant: Variant | str,
    num_arms: int,
    horizon: int,
    mc_max_samples: int | None = None,
) -> LearnerState:
    """Uniform initial weights, empty availability estimate, theorem defaults."""
    variant = Variant(variant)
    if num_arms < 2:
        raise ValueError("need at least 2 arms (a single arm needs no learner)")
    if num_arms > MAX_ARMS:
        raise ValueError(f"arm count must be at most {MAX_ARMS}, got {num_arms}")
    if variant is Variant.EXP3_EXACT and num_arms > MAX_ENUM_ARMS:
        raise ValueError(
            f"exact mode exceeds enumeration cap ({MAX_ENUM_ARMS} arms); use MonteCarlo"
        )
    if horizon < 1:
        raise ValueError(f"horizon must be >= 1, got {horizon}")
    if mc_max_samples is not None and mc_max_samples < 1:
        raise ValueError("mc_max_samples must be >= 1 when set")
    rule = variant.lambda_rule
    schedule = default_params(rule, num_arms, horizon) if rule is not None else None
    return LearnerState(
        variant=variant,
        num_arms=num_arms,
        horizon=horizon,
        weights=np.full(num_arms, 1.0 / num_arms),
        availability=AvailabilityEstimate(num_arms),
        schedule=schedule,
        ftl_losses=np.zeros(num_arms) if variant is Variant.FTL else None,
        mc_max_samples=mc_max_samples if variant is Variant.EXP3_MC else None,
    )


def _play_distribution(state: LearnerState, mask: int) -> np.ndarray:
    if state.variant.is_exp3:
        return redistribute(state.weights, mask)
    members = mask_members(mask, state.num_arms)
    if state.variant is Variant.UNIFORM:
        return members / float(members.sum())
    # FTL: awake arm with the smallest accumulated observed loss, lowest index on ties.
    awake = mask_indices(mask, state.num_arms)
    leader = awake[int(np.argmin(state.ftl_losses[awake]))]
    out = np.zeros(state.num_arms)
    out[leader] = 1.0
    return out


def learner_choose(
    state: LearnerState, mask: int, rng: np.random.Generator
) -> tuple[int, np.ndarray]:
    """Draw the arm to play from the variant's awake-set distribution."""
    check_mask(mask, state.num_arms)
    play_dist = _play_distribution(state, mask)
    return sample_categorical(play_dist, rng), play_dist


def learner_update(
    state: LearnerState,
    mask: int,
    played: int,
    loss_observed: float,
    rng: np.random.Generator | None = None,
) -> RoundOutcome:
    """Advance one round given the observed loss of the played arm.

    The availability estimate absorbs this round's set *before* the play
    probabilities are computed, matching the update order of the learners'
    listings.  Only the Monte-Carlo variant consumes ``rng`` (fresh
    resampling draws); it must be a stream separate from the environment's.
    """
    check_mask(mask, state.num_arms)
    if not (mask >> played) & 1:
        raise ValueError(f"played arm {played} is not in the awake set")
    if not 0.0 <= loss_observed <= 1.0:
        raise ValueError(f"observed loss must be in [0, 1], got {loss_observed}")

    play_dist = _play_distribution(state, mask)

    if not state.variant.is_exp3:
        if state.variant is Variant.FTL:
            state.ftl_losses[played] += loss_observed
        est = np.zeros(state.num_arms)
        est[played] = loss_observed
        state.t += 1
        return RoundOutcome(
            chosen=played,
            play_dist=play_dist,
            est_loss=est if state.variant is Variant.FTL else None,
            lam=None,
            play_prob=None,
        )

    state.availability.update(mask)
    if state.variant is Variant.EXP3_EXACT:
        qbar = exact_barq(state.weights, state.availability.ahat)
    elif state.variant is Variant.EXP3_MC:
        if rng is None:
            raise ValueError("the Monte-Carlo variant needs an rng for resampling")
        n = state.availability.rounds_seen
        if state.mc_max_samples is not None:
            n = min(n, state.mc_max_samples)
        qbar = mc_barq(state.weights, state.availability.ahat, n, rng)
    else:
        qbar = empirical_barq(state.weights, state.availability)

    lam = state.schedule.lambda_at(state.t)
    lhat = loss_estimate(loss_observed, played, qbar, lam)
    state.weights = exp3_update(state.weights, lhat, state.schedule.eta)
    state.t += 1
    return RoundOutcome(
        chosen=played, play_dist=play_dist, est_loss=lhat, lam=lam, play_prob=qbar
    )


# ---------------------------------------------------------------------------
# Episode runner


@dataclass
class RunTrace:
    """Per-round record of one seeded run.

    The harness keeps the full loss matrix (the adversary is oblivious, so it
    exists up front) even though the learner only ever saw the played arm's
    loss; regret evaluation needs it.
    """

    variant: Variant
    num_arms: int
    horizon: int
    masks: np.ndarray
    chosen: np.ndarray
    learner_losses: np.ndarray
    lambdas: np.ndarray
    loss_matrix: np.ndarray
    empty_redraws: int = 0


def run_episode(
    variant: Variant | str,
    env: Environment,
    horizon: int,
    seed: SeedParts,
    algorithm_label: str | None = None,
    mc_max_samples: int | None = None,
) -> RunTrace:
    """Play ``horizon`` rounds of one learner against one environment.

    Stream derivation: losses and availability draws depend only on ``seed``
    (so different learners on the same seed face identical environments);
    the learner's sampling and Monte-Carlo resampling streams additionally
    mix in the algorithm label.  Exact and Monte-Carlo modes consume
    randomness differently, so their traces are not comparable draw-for-draw
    even on the same seed.
    """
    variant = Variant(variant)
    label = algorithm_label if algorithm_label is not None else variant.value
    loss_rng = stream_rng(seed, "losses")
    avail_rng = stream_rng(seed, "availability")
    learner_rng = stream_rng(seed, "learner", label)
    mc_rng = stream_rng(seed, "mc", label)

    loss_matrix = gen_losses(env.losses, horizon, env.num_arms, loss_rng)
    masks = np.zeros(horizon, dtype=np.int64)
    chosen = np.zeros(horizon, dtype=np.int64)
    learner_losses = np.zeros(horizon)
    lambdas = np.full(horizon, np.nan)
    counter = RejectionCounter()

    if horizon == 0:
        return RunTrace(
            variant, env.num_arms, 0, masks, chosen, learner_losses, lambdas,
            loss_matrix, 0,
        )

    state = learner_init(variant, env.num_arms, horizon, mc_max_samples=mc_max_samples)
    for t in range(1, horizon + 1):
        mask = gen_availability(env.availability, avail_rng, counter)
        arm, _ = learner_choose(state, mask, learner_rng)
        loss = float(loss_matrix[t - 1, arm])
        outcome = learner_update(state, mask, arm, loss, rng=mc_rng)
        masks[t - 1] = mask
        chosen[t - 1] = arm
        learner_losses[t - 1] = loss
        if outcome.lam is not None:
            lambdas[t - 1] = outcome.lam

    return RunTrace(
        variant=variant,
        num_arms=env.num_arms,
        horizon=horizon,
        masks=masks,
        chosen=chosen,
        learner_losses=learner_losses,
        lambdas=lambdas,
        loss_matrix=loss_matrix,
        empty_redraws=counter.count,
    )
