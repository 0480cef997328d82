"""Probability-of-play estimators and the clipped importance-weighted loss estimate.

Three estimates of the probability that the learner plays arm ``i`` this
round, all built from redistributions of the current weight vector:

* ``exact_barq``   -- full product-Bernoulli sum over all ``2**K`` subsets of
  the empirical per-arm availabilities (independent-availability model).
* ``mc_barq``      -- Monte-Carlo average of redistributions over fresh
  independent draws from the same product-Bernoulli distribution.
* ``empirical_barq`` -- average of redistributions over the observed subset
  history (general-availability model).

The empty set carries redistributed mass zero by convention, so estimates sum
to ``1 - P(empty set)`` rather than 1.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .core import (
    MAX_ARMS,
    MAX_ENUM_ARMS,
    check_mask,
    check_weights,
    mask_members,
)

VARIANT_EXACT = "exact"
VARIANT_MONTE_CARLO = "mc"
VARIANT_GENERAL = "general"


@dataclass(frozen=True)
class PlayProbabilities:
    """Estimated per-arm play probabilities plus the estimator that produced them."""

    values: np.ndarray
    variant: str

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=np.float64)
        object.__setattr__(self, "values", values)
        if np.any(values < -1e-12) or np.any(values > 1.0 + 1e-12):
            raise ValueError("play probabilities must lie in [0, 1]")


class AvailabilityEstimate:
    """Running per-arm availability counts and the multiset of observed sets.

    Per-arm frequencies back the exact and Monte-Carlo estimators; the
    distinct-subset table (masks, counts, membership matrix) backs the
    general-model estimator.  One estimate belongs to exactly one run.
    """

    def __init__(self, num_arms: int):
        if num_arms < 1 or num_arms > MAX_ARMS:
            raise ValueError(f"arm count must be in [1, {MAX_ARMS}], got {num_arms}")
        self.num_arms = num_arms
        self.counts = np.zeros(num_arms, dtype=np.int64)
        self.rounds_seen = 0
        self._mask_row: dict[int, int] = {}
        self._n_distinct = 0
        cap = 16
        self._masks = np.zeros(cap, dtype=np.int64)
        self._subset_counts = np.zeros(cap, dtype=np.int64)
        self._members = np.zeros((cap, num_arms), dtype=bool)

    def _grow(self) -> None:
        cap = 2 * self._masks.size
        self._masks = np.resize(self._masks, cap)
        self._subset_counts = np.resize(self._subset_counts, cap)
        members = np.zeros((cap, self.num_arms), dtype=bool)
        members[: self._n_distinct] = self._members[: self._n_distinct]
        self._members = members

    def update(self, mask: int) -> "AvailabilityEstimate":
        """Record one observed availability set (the current round's set included)."""
        check_mask(mask, self.num_arms)
        members = mask_members(mask, self.num_arms)
        self.counts[members] += 1
        self.rounds_seen += 1
        row = self._mask_row.get(mask)
        if row is None:
            if self._n_distinct == self._masks.size:
                self._grow()
            row = self._n_distinct
            self._mask_row[mask] = row
            self._masks[row] = mask
            self._members[row] = members
            self._subset_counts[row] = 0
            self._n_distinct += 1
        self._subset_counts[row] += 1
        return self

    @property
    def ahat(self) -> np.ndarray:
        """Empirical per-arm availability frequencies."""
        if self.rounds_seen == 0:
            return np.zeros(self.num_arms)
        return self.counts / self.rounds_seen

    def subset_history(self) -> Counter:
        """Observed availability sets with multiplicities."""
        n = self._n_distinct
        return Counter(
            {int(m): int(c) for m, c in zip(self._masks[:n], self._subset_counts[:n])}
        )

    def distinct_subsets(self) -> tuple[np.ndarray, np.ndarray]:
        """(membership matrix, counts) over distinct observed sets."""
        n = self._n_distinct
        return self._members[:n], self._subset_counts[:n]


def update_availability(est: AvailabilityEstimate, mask: int) -> AvailabilityEstimate:
    return est.update(mask)


@lru_cache(maxsize=2)
def _subset_table(num_arms: int) -> tuple[np.ndarray, np.ndarray]:
    """Membership matrix and set sizes for all 2**K subsets, in mask order."""
    masks = np.arange(1 << num_arms, dtype=np.int64)
    members = ((masks[:, None] >> np.arange(num_arms)) & 1).astype(bool)
    return members, members.sum(axis=1)


def _check_ahat(ahat: np.ndarray, num_arms: int | None = None) -> np.ndarray:
    ahat = np.asarray(ahat, dtype=np.float64)
    if ahat.ndim != 1:
        raise ValueError("availability frequencies must be a 1-d array")
    if np.any(ahat < 0) or np.any(ahat > 1):
        raise ValueError("availability frequencies must lie in [0, 1]")
    if num_arms is not None and ahat.size != num_arms:
        raise ValueError(f"expected {num_arms} availability frequencies, got {ahat.size}")
    return ahat


def product_subset_prob(ahat: np.ndarray, mask: int) -> float:
    """Product-Bernoulli probability of one subset under per-arm frequencies."""
    ahat = _check_ahat(ahat)
    if mask < 0 or mask >= (1 << ahat.size):
        raise ValueError(f"mask {mask} has bits outside the {ahat.size}-arm range")
    members = mask_members(mask, ahat.size)
    return float(np.prod(np.where(members, ahat, 1.0 - ahat)))


def exact_barq(p: np.ndarray, ahat: np.ndarray) -> PlayProbabilities:
    """Play probabilities by full subset enumeration under product-Bernoulli ``ahat``.

    Per-arm sums over the ``2**K`` subsets accumulate in extended precision;
    at the enumeration cap the sum has a million tiny terms.
    """
    p = check_weights(p)
    k = p.size
    if k > MAX_ENUM_ARMS:
        raise ValueError("exact mode exceeds enumeration cap; use MonteCarlo")
    ahat = _check_ahat(ahat, k)
    members, sizes = _subset_table(k)
    prob = np.ones(1 << k)
    den = np.zeros(1 << k)
    for i in range(k):
        col = members[:, i]
        prob *= np.where(col, ahat[i], 1.0 - ahat[i])
        den += np.where(col, p[i], 0.0)
    w = np.zeros_like(prob)
    np.divide(prob, den, out=w, where=den > 0.0)
    wl = w.astype(np.longdouble)
    values = np.empty(k)
    for i in range(k):
        values[i] = float(p[i] * np.sum(wl, where=members[:, i], dtype=np.longdouble))
    # Nonempty sets whose awake mass underflowed redistribute uniformly.
    zero_mass = (den == 0.0) & (sizes > 0)
    if zero_mass.any():
        values += members[zero_mass].T.astype(np.float64) @ (
            prob[zero_mass] / sizes[zero_mass]
        )
    return PlayProbabilities(values, VARIANT_EXACT)


def mc_barq(
    p: np.ndarray,
    ahat: np.ndarray,
    n_samples: int,
    rng: np.random.Generator,
) -> PlayProbabilities:
    """Monte-Carlo play probabilities from fresh product-Bernoulli draws.

    Each of the ``n_samples`` subsets is drawn independently from the
    product-Bernoulli distribution of ``ahat`` -- observed history sets must
    not be reused, since that would break the independence the concentration
    argument needs.  Empty draws contribute the zero vector.
    """
    p = check_weights(p)
    k = p.size
    ahat = _check_ahat(ahat, k)
    if n_samples < 1:
        raise ValueError(f"need at least one sample, got {n_samples}")
    draws = (rng.random((n_samples, k)) < ahat).astype(np.float64)
    den = draws @ p
    good = den > 0.0
    inv = np.zeros(n_samples)
    inv[good] = 1.0 / den[good]
    values = p * (draws.T @ inv) / n_samples
    zero_mass = ~good & (draws.sum(axis=1) > 0)
    if zero_mass.any():
        sizes = draws[zero_mass].sum(axis=1)
        values += (draws[zero_mass].T @ (1.0 / sizes)) / n_samples
    return PlayProbabilities(values, VARIANT_MONTE_CARLO)


def empirical_barq(p: np.ndarray, est: AvailabilityEstimate) -> PlayProbabilities:
    """Play probabilities averaged over the observed subset history.

    Equals the expectation of the redistribution under the empirical subset
    distribution; iterates distinct subsets weighted by their counts.
    """
    p = check_weights(p)
    if p.size != est.num_arms:
        raise ValueError(f"weight vector has {p.size} arms, estimate has {est.num_arms}")
    if est.rounds_seen < 1:
        raise ValueError("empty availability history")
    members, counts = est.distinct_subsets()
    m = members.astype(np.float64)
    den = m @ p
    t = est.rounds_seen
    good = den > 0.0
    w = np.zeros(den.size)
    w[good] = counts[good] / (t * den[good])
    values = p * (m.T @ w)
    if not good.all():
        sizes = m[~good].sum(axis=1)
        values += m[~good].T @ (counts[~good] / (t * sizes))
    return PlayProbabilities(values, VARIANT_GENERAL)


def loss_estimate(
    loss_observed: float,
    played: int,
    q: PlayProbabilities,
    lam: float,
) -> np.ndarray:
    """Clipped importance-weighted loss estimate.

    Zero everywhere except the played arm, where the observed loss is divided
    by the estimated play probability plus the scale ``lam``; estimates are
    therefore bounded by ``1/lam``.
    """
    if not 0.0 < lam <= 1.0:
        raise ValueError(f"scale parameter must be in (0, 1], got {lam}")
    if not 0.0 <= loss_observed <= 1.0:
        raise ValueError(f"observed loss must be in [0, 1], got {loss_observed}")
    values = q.values
    if played < 0 or played >= values.size:
        raise ValueError(f"played arm {played} out of range")
    out = np.zeros(values.size)
    out[played] = loss_observed / (values[played] + lam)
    return out


__all__ = [
    "AvailabilityEstimate",
    "PlayProbabilities",
    "VARIANT_EXACT",
    "VARIANT_GENERAL",
    "VARIANT_MONTE_CARLO",
    "empirical_barq",
    "exact_barq",
    "loss_estimate",
    "mc_barq",
    "product_subset_prob",
    "update_availability",
]
