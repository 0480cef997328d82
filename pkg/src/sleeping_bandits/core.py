"""Probability-vector primitives shared by all learners.

Weight vectors are plain numpy arrays on the probability simplex; availability
sets are integer bitmasks (bit ``i`` set means arm ``i`` is awake, arms are
0-indexed, ``K <= 63``).  All operations are pure functions of their inputs
plus an explicit ``numpy.random.Generator`` where sampling is involved.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

#: Tolerance for simplex membership checks; weights are renormalized after
#: every update so drift over long horizons stays below this.
SIMPLEX_TOL = 1e-9

#: Bitmask width cap for availability sets.
MAX_ARMS = 63

#: Cap for exact subset enumeration (2**20 terms).
MAX_ENUM_ARMS = 20


class LambdaRule(str, Enum):
    """Which loss-estimate scale schedule a learner runs under."""

    EXACT = "exact"
    MONTE_CARLO = "mc"
    GENERAL = "general"


# ---------------------------------------------------------------------------
# Bitmask helpers


def full_mask(num_arms: int) -> int:
    return (1 << num_arms) - 1


def mask_members(mask: int, num_arms: int) -> np.ndarray:
    """Boolean membership vector of an availability mask."""
    return (mask >> np.arange(num_arms)) & 1 == 1


def mask_from_members(members: np.ndarray) -> int:
    mask = 0
    for i in np.flatnonzero(members):
        mask |= 1 << int(i)
    return mask


def mask_indices(mask: int, num_arms: int) -> np.ndarray:
    return np.flatnonzero(mask_members(mask, num_arms))


def mask_size(mask: int) -> int:
    return int(mask).bit_count()


def check_mask(mask: int, num_arms: int) -> None:
    if num_arms < 1 or num_arms > MAX_ARMS:
        raise ValueError(f"arm count must be in [1, {MAX_ARMS}], got {num_arms}")
    if mask == 0:
        raise ValueError("empty availability set")
    if mask < 0 or mask >= (1 << num_arms):
        raise ValueError(f"mask {mask} has bits outside the {num_arms}-arm range")


def check_weights(p: np.ndarray) -> np.ndarray:
    """Validate a simplex point; returns it as a float64 array."""
    p = np.asarray(p, dtype=np.float64)
    if p.ndim != 1 or p.size < 1:
        raise ValueError("weight vector must be 1-dimensional and nonempty")
    if not np.all(np.isfinite(p)) or np.any(p < 0):
        raise ValueError("weight vector entries must be finite and nonnegative")
    if abs(float(p.sum()) - 1.0) > SIMPLEX_TOL:
        raise ValueError(f"weight vector sums to {p.sum()!r}, not 1")
    return p


# ---------------------------------------------------------------------------
# Simplex operations


def redistribute(p: np.ndarray, mask: int) -> np.ndarray:
    """Restrict ``p`` to the awake set and renormalize.

    Output is ``p(i) / sum_{j in mask} p(j)`` on the set bits and zero
    elsewhere.  If the awake mass underflowed to exactly zero, returns the
    uniform distribution over the set (exponential weights never produce
    exact zeros analytically, so this only triggers on float underflow).
    """
    p = check_weights(p)
    check_mask(mask, p.size)
    members = mask_members(mask, p.size)
    awake_mass = float(p[members].sum())
    if awake_mass > 0.0:
        q = np.where(members, p, 0.0) / awake_mass
    else:
        q = members / float(members.sum())
    return q


def exp3_update(p: np.ndarray, lhat: np.ndarray, eta: float) -> np.ndarray:
    """Multiplicative-weights update ``p(i) * exp(-eta * lhat(i))``, renormalized.

    Computed in log space with max-subtraction: cumulative estimated losses
    can reach hundreds, so naive exponentiation would overflow.
    """
    p = check_weights(p)
    lhat = np.asarray(lhat, dtype=np.float64)
    if lhat.shape != p.shape:
        raise ValueError(f"loss estimate shape {lhat.shape} != weight shape {p.shape}")
    if not np.all(np.isfinite(lhat)):
        raise ValueError("loss estimates must be finite")
    if np.any(lhat < 0):
        raise ValueError("loss estimates must be nonnegative")
    if eta <= 0:
        raise ValueError(f"learning rate must be positive, got {eta}")
    with np.errstate(divide="ignore"):
        logw = np.log(p) - eta * lhat
    logw -= logw.max()
    w = np.exp(logw)
    return w / w.sum()


def sample_categorical(q: np.ndarray, rng: np.random.Generator) -> int:
    """Draw an index with probability ``q(i)``; deterministic given rng state."""
    q = check_weights(q)
    cum = np.cumsum(q)
    u = rng.random() * cum[-1]
    idx = int(np.searchsorted(cum, u, side="right"))
    return min(idx, q.size - 1)


# ---------------------------------------------------------------------------
# Parameter schedules


def lambda_schedule(rule: LambdaRule, t: int, num_arms: int, delta: float) -> float:
    """Per-round scale parameter, clipped to at most 1.

    The clip applies to every rule: all regret analyses assume the scale is
    at most 1, and the clip is harmless where the raw value is smaller.
    """
    if t < 1:
        raise ValueError(f"round index must be >= 1, got {t}")
    rule = LambdaRule(rule)
    k = num_arms
    if rule is LambdaRule.EXACT:
        lg = math.log(k / delta)
        lam = 2.0 * k * math.sqrt(2.0 * lg / t) + 8.0 * k * lg / (3.0 * t)
    elif rule is LambdaRule.MONTE_CARLO:
        lg = math.log(2.0 * k / delta)
        lam = 4.0 * k * math.sqrt(lg / t) + 8.0 * k * lg / (3.0 * t)
    else:
        lg = math.log(2.0**k / delta)
        lam = math.sqrt(2.0 ** (k + 1) / t * lg) + 2.0 ** (k + 1) * lg / (3.0 * t)
    return min(lam, 1.0)


@dataclass(frozen=True)
class ScheduleParams:
    """Learning rate, confidence parameter, and scale rule for one learner."""

    horizon: int
    num_arms: int
    eta: float
    delta: float
    rule: LambdaRule

    def __post_init__(self) -> None:
        if self.horizon < 1:
            raise ValueError(f"horizon must be >= 1, got {self.horizon}")
        if self.eta <= 0:
            raise ValueError(f"eta must be positive, got {self.eta}")
        if not 0.0 < self.delta < 1.0:
            raise ValueError(f"delta must be in (0, 1), got {self.delta}")

    def lambda_at(self, t: int) -> float:
        return lambda_schedule(self.rule, t, self.num_arms, self.delta)


def default_params(rule: LambdaRule, num_arms: int, horizon: int) -> ScheduleParams:
    """Theorem-prescribed ``eta`` and ``delta`` for a rule.

    ``eta = sqrt(log(K) / (K T))`` for every rule; ``delta`` is ``K/T**2``,
    ``2K/T**2`` or ``2**K/T**2`` for the exact, Monte-Carlo and general rules
    respectively.
    """
    rule = LambdaRule(rule)
    if num_arms < 2:
        raise ValueError("need at least 2 arms (a single arm needs no learner)")
    if horizon < 1:
        raise ValueError(f"horizon must be >= 1, got {horizon}")
    eta = math.sqrt(math.log(num_arms) / (num_arms * horizon))
    if rule is LambdaRule.EXACT:
        delta = num_arms / horizon**2
    elif rule is LambdaRule.MONTE_CARLO:
        delta = 2.0 * num_arms / horizon**2
    else:
        delta = 2.0**num_arms / horizon**2
    if not 0.0 < delta < 1.0:
        raise ValueError(
            f"delta={delta} falls outside (0, 1) for rule={rule.value}, "
            f"K={num_arms}, T={horizon}; increase the horizon"
        )
    return ScheduleParams(horizon=horizon, num_arms=num_arms, eta=eta, delta=delta, rule=rule)
