"""Oblivious loss generators and stochastic availability generators.

Loss sequences are always generated in full before any play, so the adversary
is oblivious to both the learner's actions and the realized availability
sets.  Availability generators never emit an empty set: empty draws are
rejected and redrawn, with the redraw count reported to the caller so runs
can record how much the effective distribution was conditioned.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .core import check_mask, full_mask, mask_from_members

#: Consecutive empty redraws after which a model is declared pathological.
MAX_EMPTY_REDRAWS = 10**6


@dataclass
class RejectionCounter:
    """Mutable tally of empty-set redraws across a run."""

    count: int = 0


# ---------------------------------------------------------------------------
# Availability models


@dataclass(frozen=True)
class IndependentAvailabilityModel:
    """Each arm awake independently with fixed per-arm probability."""

    a: np.ndarray

    def __post_init__(self) -> None:
        a = np.asarray(self.a, dtype=np.float64)
        object.__setattr__(self, "a", a)
        if a.ndim != 1 or a.size < 1:
            raise ValueError("availability probabilities must be a nonempty 1-d array")
        if np.any(a <= 0.0) or np.any(a > 1.0):
            raise ValueError("availability probabilities must lie in (0, 1]")

    @property
    def num_arms(self) -> int:
        return self.a.size


@dataclass(frozen=True)
class CorrelatedAvailabilityModel:
    """Awake set = positive coordinates of a Gaussian draw.

    A vector is sampled from N(mean, covariance) via the Cholesky factor and
    an arm is awake iff its coordinate is positive.  Non-positive-definite
    covariances are an error: silently regularizing would change the
    environment.
    """

    mean: np.ndarray
    covariance: np.ndarray
    cholesky: np.ndarray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        mean = np.asarray(self.mean, dtype=np.float64)
        cov = np.asarray(self.covariance, dtype=np.float64)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "covariance", cov)
        k = mean.size
        if cov.shape != (k, k):
            raise ValueError(f"covariance shape {cov.shape} does not match {k} arms")
        if not np.allclose(cov, cov.T, atol=1e-9, rtol=0.0):
            raise ValueError("covariance must be symmetric within 1e-9")
        try:
            chol = np.linalg.cholesky(cov)
        except np.linalg.LinAlgError as exc:
            raise ValueError("covariance is not positive definite") from exc
        object.__setattr__(self, "cholesky", chol)

    @property
    def num_arms(self) -> int:
        return self.mean.size


@dataclass(frozen=True)
class ExplicitAvailabilityModel:
    """General model given as an explicit distribution over nonempty subsets."""

    masks: np.ndarray
    probs: np.ndarray
    arms: int | None = None

    def __post_init__(self) -> None:
        masks = np.asarray(self.masks, dtype=np.int64)
        probs = np.asarray(self.probs, dtype=np.float64)
        object.__setattr__(self, "masks", masks)
        object.__setattr__(self, "probs", probs)
        if masks.ndim != 1 or masks.size != probs.size or masks.size == 0:
            raise ValueError("masks and probs must be matching nonempty 1-d arrays")
        if np.any(masks <= 0):
            raise ValueError("subset masks must be nonempty (positive integers)")
        if np.any(probs < 0) or abs(float(probs.sum()) - 1.0) > 1e-9:
            raise ValueError("subset probabilities must be nonnegative and sum to 1")
        inferred = int(masks.max()).bit_length()
        if self.arms is None:
            object.__setattr__(self, "arms", inferred)
        elif self.arms < inferred:
            raise ValueError(f"masks use {inferred} arms but only {self.arms} declared")

    @property
    def num_arms(self) -> int:
        return self.arms

    @classmethod
    def uniform_nonempty(cls, num_arms: int) -> "ExplicitAvailabilityModel":
        """Uniform distribution over all 2**K - 1 nonempty subsets."""
        n = (1 << num_arms) - 1
        masks = np.arange(1, n + 1, dtype=np.int64)
        return cls(masks=masks, probs=np.full(n, 1.0 / n), arms=num_arms)


AvailabilityModel = (
    IndependentAvailabilityModel | CorrelatedAvailabilityModel | ExplicitAvailabilityModel
)


def block_covariance(num_arms: int, block_size: int, rho: float) -> np.ndarray:
    """Block-diagonal covariance: unit diagonal, ``rho`` within blocks.

    Blocks of ``block_size`` consecutive arms; a final smaller block covers
    any remainder.  Positive definite for ``0 <= rho < 1``.
    """
    if not 0.0 <= rho < 1.0:
        raise ValueError(f"within-block correlation must be in [0, 1), got {rho}")
    if block_size < 1:
        raise ValueError(f"block size must be >= 1, got {block_size}")
    cov = np.eye(num_arms)
    for start in range(0, num_arms, block_size):
        stop = min(start + block_size, num_arms)
        cov[start:stop, start:stop] = rho
    np.fill_diagonal(cov, 1.0)
    return cov


def gen_availability(
    model: AvailabilityModel,
    rng: np.random.Generator,
    counter: RejectionCounter | None = None,
) -> int:
    """Draw one nonempty availability mask, rejecting empty draws."""
    for _ in range(MAX_EMPTY_REDRAWS + 1):
        if isinstance(model, IndependentAvailabilityModel):
            members = rng.random(model.num_arms) < model.a
            mask = mask_from_members(members)
        elif isinstance(model, CorrelatedAvailabilityModel):
            v = model.mean + model.cholesky @ rng.standard_normal(model.num_arms)
            mask = mask_from_members(v > 0.0)
        elif isinstance(model, ExplicitAvailabilityModel):
            cum = np.cumsum(model.probs)
            u = rng.random() * cum[-1]
            idx = min(int(np.searchsorted(cum, u, side="right")), model.masks.size - 1)
            return int(model.masks[idx])
        else:
            raise TypeError(f"unknown availability model: {type(model).__name__}")
        if mask != 0:
            return mask
        if counter is not None:
            counter.count += 1
    raise RuntimeError(
        f"availability model produced {MAX_EMPTY_REDRAWS} consecutive empty draws"
    )


# ---------------------------------------------------------------------------
# Loss models


@dataclass(frozen=True)
class SwitchingLossModel:
    """Bernoulli losses where the identity of the best arm rotates.

    The best arm changes every ``tau`` rounds, cycling through the first
    ``n_rotating`` arms (all arms when ``n_rotating`` is 0 or exceeds the arm
    count).  The best arm's losses are Bernoulli(``mu_best``); every other
    arm gets Bernoulli(``mu_other``).
    """

    tau: int
    mu_best: float = 0.2
    mu_other: float = 0.8
    n_rotating: int = 2

    def __post_init__(self) -> None:
        if self.tau < 1:
            raise ValueError(f"switch period must be >= 1, got {self.tau}")
        if not 0.0 <= self.mu_best <= 1.0 or not 0.0 <= self.mu_other <= 1.0:
            raise ValueError("loss means must lie in [0, 1]")
        if self.mu_best >= self.mu_other:
            raise ValueError("mu_best must be strictly below mu_other")
        if self.n_rotating < 0:
            raise ValueError("n_rotating must be >= 0 (0 means all arms)")

    def best_arm(self, t: int, num_arms: int) -> int:
        """0-indexed best arm at 1-indexed round ``t``."""
        cycle = num_arms if self.n_rotating == 0 else min(self.n_rotating, num_arms)
        return ((t - 1) // self.tau) % cycle


@dataclass(frozen=True)
class MarkovLossModel:
    """Per-arm truncated Gaussian random walks on [0, 1].

    Walks start uniformly on [0, 1]; each step adds N(0, p_std**2) and clamps
    (not reflects) at the boundaries.
    """

    p_std: float

    def __post_init__(self) -> None:
        if self.p_std < 0:
            raise ValueError(f"increment std must be >= 0, got {self.p_std}")


LossModel = SwitchingLossModel | MarkovLossModel


def gen_losses(
    model: LossModel,
    horizon: int,
    num_arms: int,
    rng: np.random.Generator,
) -> np.ndarray:
    """Generate the full (T, K) loss matrix up front (oblivious adversary)."""
    if horizon < 0:
        raise ValueError(f"horizon must be >= 0, got {horizon}")
    if horizon == 0:
        return np.zeros((0, num_arms))
    if isinstance(model, SwitchingLossModel):
        best = np.array([model.best_arm(t, num_arms) for t in range(1, horizon + 1)])
        means = np.full((horizon, num_arms), model.mu_other)
        means[np.arange(horizon), best] = model.mu_best
        return (rng.random((horizon, num_arms)) < means).astype(np.float64)
    if isinstance(model, MarkovLossModel):
        losses = np.empty((horizon, num_arms))
        state = rng.random(num_arms)
        losses[0] = state
        if horizon > 1:
            steps = rng.standard_normal((horizon - 1, num_arms)) * model.p_std
            for t in range(1, horizon):
                state = np.clip(state + steps[t - 1], 0.0, 1.0)
                losses[t] = state
        return losses
    raise TypeError(f"unknown loss model: {type(model).__name__}")


# ---------------------------------------------------------------------------
# Environment bundle and CSV replay format


@dataclass(frozen=True)
class Environment:
    """One benchmark environment: arm count, availability model, loss model."""

    num_arms: int
    availability: AvailabilityModel
    losses: LossModel

    def __post_init__(self) -> None:
        model_arms = self.availability.num_arms
        if model_arms != self.num_arms:
            raise ValueError(
                f"availability model covers {model_arms} arms, environment has {self.num_arms}"
            )


def dump_environment_csv(path, loss_matrix: np.ndarray, masks: np.ndarray) -> None:
    """Write a realized environment stream for cross-implementation replay.

    One row per round: round index, availability bitmask (bit ``i-1`` of the
    mask corresponds to the ``loss_i`` column), then per-arm losses.
    """
    loss_matrix = np.asarray(loss_matrix, dtype=np.float64)
    masks = np.asarray(masks, dtype=np.int64)
    horizon, num_arms = loss_matrix.shape
    if masks.shape != (horizon,):
        raise ValueError("availability stream length does not match the loss matrix")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["t", "mask"] + [f"loss_{i}" for i in range(1, num_arms + 1)])
        for t in range(horizon):
            writer.writerow(
                [t + 1, int(masks[t])] + [repr(float(x)) for x in loss_matrix[t]]
            )


def load_environment_csv(path) -> tuple[np.ndarray, np.ndarray]:
    """Read back a stream written by :func:`dump_environment_csv`."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if len(header) < 3 or header[:2] != ["t", "mask"]:
            raise ValueError(f"unexpected environment CSV header: {header}")
        num_arms = len(header) - 2
        losses: list[list[float]] = []
        masks: list[int] = []
        for row in reader:
            masks.append(int(row[1]))
            losses.append([float(x) for x in row[2:]])
    loss_matrix = np.asarray(losses, dtype=np.float64)
    mask_arr = np.asarray(masks, dtype=np.int64)
    for mask in mask_arr:
        check_mask(int(mask), num_arms)
    return loss_matrix, mask_arr


def full_availability(num_arms: int) -> ExplicitAvailabilityModel:
    """Degenerate model where every arm is always awake."""
    return ExplicitAvailabilityModel(
        masks=np.array([full_mask(num_arms)]), probs=np.array([1.0])
    )
