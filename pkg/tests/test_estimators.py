import numpy as np
import pytest

from sleeping_bandits.core import full_mask, mask_members, redistribute
from sleeping_bandits.estimators import (
    AvailabilityEstimate,
    PlayProbabilities,
    empirical_barq,
    exact_barq,
    loss_estimate,
    mc_barq,
    product_subset_prob,
)
from sleeping_bandits.seeding import stream_rng


def simplex(values):
    arr = np.asarray(values, dtype=np.float64)
    return arr / arr.sum()


class TestAvailabilityEstimate:
    def test_single_observation(self):
        est = AvailabilityEstimate(3)
        est.update(0b011)
        np.testing.assert_allclose(est.ahat, [1.0, 1.0, 0.0])

    def test_two_observations(self):
        est = AvailabilityEstimate(3)
        est.update(0b001)
        est.update(0b011)
        np.testing.assert_allclose(est.ahat, [1.0, 0.5, 0.0])
        assert est.subset_history() == {0b001: 1, 0b011: 1}

    def test_counts_never_exceed_rounds(self):
        rng = stream_rng(5)
        est = AvailabilityEstimate(4)
        for _ in range(200):
            est.update(int(rng.integers(1, 16)))
        assert est.rounds_seen == 200
        assert np.all(est.counts <= 200)
        assert sum(est.subset_history().values()) == 200

    def test_frequencies_converge(self):
        rng = stream_rng(6)
        a = np.array([0.7, 0.3])
        est = AvailabilityEstimate(2)
        n = 10**4
        for _ in range(n):
            members = rng.random(2) < a
            if not members.any():
                members[0] = True  # estimator needs nonempty sets
            est.update(int(members[0]) | (int(members[1]) << 1))
        # arm 1 is untouched by the patch-up, binomial 3-sigma band
        assert abs(est.ahat[1] - 0.3) < 0.02


class TestProductSubsetProb:
    def test_symmetric(self):
        assert product_subset_prob(np.array([0.5, 0.5]), 0b01) == pytest.approx(0.25)

    def test_deterministic(self):
        ahat = np.array([1.0, 1.0])
        assert product_subset_prob(ahat, 0b11) == pytest.approx(1.0)
        for mask in (0b00, 0b01, 0b10):
            assert product_subset_prob(ahat, mask) == pytest.approx(0.0)

    def test_hand_product(self):
        assert product_subset_prob(np.array([0.7, 0.3]), 0b01) == pytest.approx(0.49)

    def test_sums_to_one_over_all_subsets(self):
        ahat = stream_rng(7).random(5)
        total = sum(product_subset_prob(ahat, m) for m in range(1 << 5))
        assert total == pytest.approx(1.0, abs=1e-12)


class TestExactBarq:
    def test_always_available(self):
        q = exact_barq(np.array([0.5, 0.5]), np.array([1.0, 1.0]))
        np.testing.assert_allclose(q.values, [0.5, 0.5])
        assert q.variant == "exact"

    def test_two_set_hand_enumeration(self):
        q = exact_barq(np.array([0.5, 0.5]), np.array([1.0, 0.5]))
        np.testing.assert_allclose(q.values, [0.75, 0.25])

    def test_total_mass_is_one_minus_empty(self):
        p = simplex([1, 2, 3])
        q = exact_barq(p, np.full(3, 0.5))
        assert q.values.sum() == pytest.approx(1 - 0.125, abs=1e-12)

    def test_enumeration_identity_random_instances(self):
        rng = stream_rng(8)
        for _ in range(25):
            k = int(rng.integers(1, 9))
            p = simplex(rng.random(k) + 1e-9)
            ahat = rng.random(k)
            q = exact_barq(p, ahat)
            empty = product_subset_prob(ahat, 0)
            assert q.values.sum() == pytest.approx(1.0 - empty, abs=1e-12)

    def test_matches_direct_enumeration(self):
        rng = stream_rng(9)
        k = 4
        p = simplex(rng.random(k) + 1e-9)
        ahat = rng.random(k)
        expected = np.zeros(k)
        for mask in range(1, 1 << k):
            expected += product_subset_prob(ahat, mask) * redistribute(p, mask)
        np.testing.assert_allclose(exact_barq(p, ahat).values, expected, atol=1e-12)

    def test_enumeration_cap(self):
        p = np.full(21, 1 / 21)
        with pytest.raises(ValueError, match="enumeration cap"):
            exact_barq(p, np.full(21, 0.5))


class TestMcBarq:
    def test_deterministic_availability(self):
        p = simplex([1, 3])
        q = mc_barq(p, np.array([1.0, 1.0]), 50, stream_rng(10))
        np.testing.assert_allclose(q.values, redistribute(p, 0b11))

    def test_close_to_exact_oracle(self):
        p = np.array([0.5, 0.5])
        q = mc_barq(p, np.array([1.0, 0.5]), 10**5, stream_rng(11))
        np.testing.assert_allclose(q.values, [0.75, 0.25], atol=0.005)

    def test_single_sample_is_one_redistribution(self):
        p = simplex([1, 2, 4])
        ahat = np.array([0.6, 0.5, 0.4])
        rng = stream_rng(12)
        draw_rng = stream_rng(12)  # same stream: predict the single draw
        members = draw_rng.random(3) < ahat
        q = mc_barq(p, ahat, 1, rng)
        if members.any():
            mask = int(members[0]) | (int(members[1]) << 1) | (int(members[2]) << 2)
            np.testing.assert_allclose(q.values, redistribute(p, mask))
        else:
            np.testing.assert_allclose(q.values, np.zeros(3))

    def test_unbiased_for_exact(self):
        rng = stream_rng(13)
        p = simplex([2, 1, 1])
        ahat = np.array([0.8, 0.5, 0.3])
        exact = exact_barq(p, ahat).values
        m = 10**4
        total = np.zeros(3)
        for _ in range(m):
            total += mc_barq(p, ahat, 1, rng).values
        band = 4 * np.sqrt(0.25 / m)
        assert np.all(np.abs(total / m - exact) <= band)


class TestEmpiricalBarq:
    def test_two_set_history(self):
        est = AvailabilityEstimate(2)
        est.update(0b01)
        est.update(0b11)
        q = empirical_barq(np.array([0.5, 0.5]), est)
        np.testing.assert_allclose(q.values, [0.75, 0.25])
        assert q.variant == "general"

    def test_full_history_is_identity(self):
        est = AvailabilityEstimate(3)
        for _ in range(10):
            est.update(full_mask(3))
        p = simplex([1, 2, 3])
        np.testing.assert_allclose(empirical_barq(p, est).values, p)

    def test_singleton_history(self):
        est = AvailabilityEstimate(4)
        est.update(0b0001)
        np.testing.assert_allclose(
            empirical_barq(simplex([1, 1, 1, 1]), est).values, [1, 0, 0, 0]
        )

    def test_empty_history_rejected(self):
        with pytest.raises(ValueError, match="empty"):
            empirical_barq(np.array([0.5, 0.5]), AvailabilityEstimate(2))

    def test_converges_to_set_average(self):
        # History drawn iid from an explicit subset distribution: the average
        # must approach the true expected redistribution.
        rng = stream_rng(14)
        k = 3
        masks = np.arange(1, 1 << k)
        probs = simplex(rng.random(masks.size) + 0.1)
        p = simplex([5, 2, 1])
        truth = np.zeros(k)
        for mask, prob in zip(masks, probs):
            truth += prob * redistribute(p, int(mask))
        est = AvailabilityEstimate(k)
        t = 10**4
        cum = np.cumsum(probs)
        for u in rng.random(t):
            est.update(int(masks[np.searchsorted(cum, u * cum[-1], side="right")]))
        band = 4 * np.sqrt(1.0 / (2 * t))
        assert np.all(np.abs(empirical_barq(p, est).values - truth) <= band)

    def test_matches_counter_weighted_average(self):
        rng = stream_rng(15)
        k = 4
        p = simplex(rng.random(k) + 1e-6)
        est = AvailabilityEstimate(k)
        history = [int(rng.integers(1, 1 << k)) for _ in range(100)]
        for mask in history:
            est.update(mask)
        expected = np.zeros(k)
        for mask in history:
            expected += redistribute(p, mask) / len(history)
        np.testing.assert_allclose(empirical_barq(p, est).values, expected, atol=1e-12)


class TestLossEstimate:
    def test_hand_example(self):
        q = PlayProbabilities(np.array([0.7, 0.3]), "exact")
        out = loss_estimate(0.6, 1, q, 0.1)
        np.testing.assert_allclose(out, [0.0, 1.5])

    def test_zero_loss(self):
        q = PlayProbabilities(np.array([0.5, 0.5]), "exact")
        np.testing.assert_allclose(loss_estimate(0.0, 0, q, 0.2), [0.0, 0.0])

    def test_bound_attained_at_zero_probability(self):
        q = PlayProbabilities(np.array([0.0, 1.0]), "mc")
        out = loss_estimate(1.0, 0, q, 0.5)
        assert out[0] == pytest.approx(2.0)  # equals 1/lambda

    def test_at_most_one_nonzero(self):
        rng = stream_rng(16)
        for _ in range(50):
            k = int(rng.integers(2, 10))
            q = PlayProbabilities(simplex(rng.random(k) + 1e-9), "exact")
            lam = float(rng.uniform(0.05, 1.0))
            out = loss_estimate(float(rng.random()), int(rng.integers(k)), q, lam)
            assert np.count_nonzero(out) <= 1
            assert out.max() <= 1.0 / lam + 1e-12

    def test_invalid_scale_rejected(self):
        q = PlayProbabilities(np.array([1.0]), "exact")
        with pytest.raises(ValueError, match="scale"):
            loss_estimate(0.5, 0, q, 0.0)
        with pytest.raises(ValueError, match="scale"):
            loss_estimate(0.5, 0, q, 1.5)
