import math

import numpy as np
import pytest

from epsnoise.detectors import (
    WConfig,
    detect_median,
    detect_ml_genie,
    detect_mlbnr_genie,
    detect_mls,
    detect_w,
    w_weights,
)
from epsnoise.model import (
    BACKGROUND,
    IMPULSE,
    ChannelRealization,
    NoiseSpec,
    ReceivedSlot,
    SignalSystem,
    SlotObservation,
    SymbolPair,
    alamouti2x2,
    alamouti_predict,
    sample_channel,
    sample_noise,
    transmit_slot,
)

ALAMOUTI = alamouti2x2()


def make_slot(obs, states=(BACKGROUND,) * 4):
    return ReceivedSlot(obs[0], obs[1], obs[2], obs[3], tuple(states))


def noisy_slot(rng, spec, truth=None, ch=None):
    truth = truth or ALAMOUTI.candidates[rng.integers(0, 4)]
    ch = ch or sample_channel(rng)
    return transmit_slot(truth, ch, spec, rng), ch, truth


def fixed_residual_system(*candidate_predictions):
    """Two-plus-candidate system with constant predictions; observing zeros
    makes each candidate's residual magnitudes equal its prediction."""
    preds = tuple(np.asarray(p, dtype=float) for p in candidate_predictions)

    def predict(candidate, ch):
        return preds[candidate]

    return SignalSystem(
        name="fixture",
        candidates=tuple(range(len(preds))),
        bits=tuple((i,) for i in range(len(preds))),
        predict=predict,
        draw_channel=lambda rng: None,
        complex_noise=False,
        observation_len=len(preds[0]),
    )


class TestDetectMls:
    def test_zero_noise_recovers_truth_exhaustively(self):
        rng = np.random.default_rng(20)
        for _ in range(100):
            ch = sample_channel(rng)
            for i, truth in enumerate(ALAMOUTI.candidates):
                slot = make_slot(alamouti_predict(truth, ch))
                decision = detect_mls(slot, ch, ALAMOUTI)
                assert decision.index == i
                assert decision.metric == 0.0

    def test_all_zero_channel_tie_breaks_to_first(self):
        ch = ChannelRealization(0.0, 0.0, 0.0, 0.0)
        slot = make_slot(np.array([0.3 + 0.1j, -0.2j, 0.5, 1.0]))
        assert detect_mls(slot, ch, ALAMOUTI).index == 0

    def test_against_brute_force_reimplementation(self):
        rng = np.random.default_rng(21)
        spec = NoiseSpec(0.1, 0.2, 2.0)
        for _ in range(1000):
            slot, ch, _ = noisy_slot(rng, spec)
            obs = slot.observations
            best_metric, best_index = math.inf, -1
            for k, pair in enumerate(ALAMOUTI.candidates):
                x11 = pair.s1 * ch.h11 - pair.s2 * ch.h21
                x21 = pair.s1 * ch.h12 - pair.s2 * ch.h22
                x12 = pair.s2 * ch.h11 + pair.s1 * ch.h21
                x22 = pair.s2 * ch.h12 + pair.s1 * ch.h22
                m = (abs(obs[0] - x11) ** 2 + abs(obs[1] - x21) ** 2
                     + abs(obs[2] - x12) ** 2 + abs(obs[3] - x22) ** 2)
                if m < best_metric:
                    best_metric, best_index = m, k
            assert detect_mls(slot, ch, ALAMOUTI).index == best_index


class TestDetectMedian:
    def test_zero_noise_recovers_truth(self):
        rng = np.random.default_rng(22)
        ch = sample_channel(rng)
        truth = ALAMOUTI.candidates[2]
        slot = make_slot(alamouti_predict(truth, ch))
        assert detect_median(slot, ch, ALAMOUTI).index == 2

    def test_even_count_median_definition(self):
        sys = fixed_residual_system([1.0, 2.0, 3.0, 100.0], [2.6, 2.6, 2.6, 2.6])
        slot = SlotObservation((0.0, 0.0, 0.0, 0.0))
        decision = detect_median(slot, None, sys)
        # median {1,2,3,100} = 2.5 < 2.6, so the outlier-carrying candidate wins
        assert decision.index == 0
        assert decision.metric == 2.5

    def test_outlier_rejection_where_mls_flips(self):
        sys = fixed_residual_system([0.1, 0.1, 0.1, 50.0], [1.0, 1.0, 1.0, 1.0])
        slot = SlotObservation((0.0, 0.0, 0.0, 0.0))
        assert detect_median(slot, None, sys).index == 0
        assert detect_mls(slot, None, sys).index == 1


class TestWWeights:
    def test_all_equal_magnitudes_converge_immediately(self):
        weights, m, iterations = w_weights([0.7, 0.7, 0.7, 0.7], WConfig())
        assert np.array_equal(weights, np.ones(4))
        assert m == 0.7
        assert iterations == 1

    def test_all_zero_magnitudes(self):
        weights, m, iterations = w_weights([0.0, 0.0, 0.0], WConfig())
        assert np.array_equal(weights, np.ones(3))
        assert m == 0.0 and iterations == 1

    def test_single_outlier_first_iteration_hand_values(self):
        # magnitudes {1,1,1,100}, p2 = 1: M = 25.75, midrange = 50.5,
        # u_small = -24.75/50.5, u_big = 74.25/50.5 > 1 -> weight 0
        cfg = WConfig(p2=1.0, max_iterations=1)
        weights, m, iterations = w_weights([1.0, 1.0, 1.0, 100.0], cfg)
        u_small = (1.0 - 25.75) / 50.5
        w_small = (1.0 - u_small ** 2) ** 2
        assert weights[3] == 0.0
        assert np.allclose(weights[:3], w_small, rtol=1e-14)
        assert math.isclose(m, 1.0, rel_tol=1e-14)
        assert iterations == 1

    def test_single_outlier_converged_rejects_it(self):
        weights, m, _ = w_weights([1.0, 1.0, 1.0, 100.0], WConfig(p2=1.0))
        assert weights[3] == 0.0
        assert all(w > 0 for w in weights[:3])
        assert math.isclose(m, 1.0, rel_tol=1e-12)

    def test_all_rejected_falls_back_to_uniform(self):
        weights, m, _ = w_weights([1.0, 2.0, 3.0, 4.0], WConfig(p2=0.001))
        assert np.array_equal(weights, np.ones(4))
        assert m == 2.5

    def test_paper_literal_convention_upweights_outliers(self):
        # One verbatim iteration of the inverted condition: weights only
        # where |u| > 1, i.e. on the outlier (further iterations oscillate,
        # which is why this convention exists only for comparison).
        weights, m, _ = w_weights(
            [1.0, 1.0, 1.0, 100.0],
            WConfig(p2=1.0, max_iterations=1, biweight_convention="paper_literal"),
        )
        assert np.all(weights[:3] == 0.0)
        u_big = (100.0 - 25.75) / 50.5
        assert math.isclose(weights[3], (1.0 - u_big ** 2) ** 2, rel_tol=1e-14)
        assert math.isclose(m, 100.0, rel_tol=1e-12)

    def test_empty_input_rejected(self):
        with pytest.raises(ValueError):
            w_weights([], WConfig())

    def test_validation(self):
        with pytest.raises(ValueError):
            WConfig(p2=0.0)
        with pytest.raises(ValueError):
            WConfig(max_iterations=0)
        with pytest.raises(ValueError):
            WConfig(biweight_convention="huber")


class TestDetectW:
    def test_zero_noise_recovers_truth(self):
        rng = np.random.default_rng(23)
        ch = sample_channel(rng)
        slot = make_slot(alamouti_predict(ALAMOUTI.candidates[1], ch))
        assert detect_w(slot, ch, ALAMOUTI).index == 1

    def test_recovers_truth_where_single_impulse_flips_mls(self):
        rng = np.random.default_rng(24)
        spec = NoiseSpec(0.0, 1e-4, 1e-4)
        flips_found = 0
        for _ in range(50):
            truth = ALAMOUTI.candidates[rng.integers(0, 4)]
            ch = sample_channel(rng)
            base = np.array([sample_noise(spec, rng).value for _ in range(4)])
            impulse = complex(rng.standard_normal(), rng.standard_normal())
            for scale in (4.0, 8.0, 16.0, 32.0, 64.0, 128.0):
                noise = base.copy()
                noise[3] += scale * impulse
                slot = make_slot(alamouti_predict(truth, ch) + noise)
                if detect_mls(slot, ch, ALAMOUTI).candidate != truth:
                    flips_found += 1
                    assert detect_w(slot, ch, ALAMOUTI).candidate == truth
                    break
        assert flips_found >= 20  # the construction does produce MLS failures

    def test_converges_within_budget_on_random_slots(self):
        rng = np.random.default_rng(25)
        spec = NoiseSpec(0.1, 0.05, 5.0)
        cfg = WConfig()
        for _ in range(1000):
            slot, ch, _ = noisy_slot(rng, spec)
            for candidate in ALAMOUTI.candidates:
                mags = np.abs(slot.observations - alamouti_predict(candidate, ch))
                _, _, iterations = w_weights(mags, cfg)
                assert iterations <= cfg.max_iterations

    def test_equal_spread_reduces_to_mean_rule(self):
        sys = fixed_residual_system([0.4, 0.4, 0.4], [0.3, 0.3, 0.3], [0.9, 0.9, 0.9])
        slot = SlotObservation((0.0, 0.0, 0.0))
        decision = detect_w(slot, None, sys)
        assert decision.index == 1
        assert math.isclose(decision.metric, 0.3, rel_tol=1e-14)


class TestGenieDetectors:
    def test_all_background_labels_match_mls(self):
        rng = np.random.default_rng(26)
        spec = NoiseSpec(0.0, 0.3, 3.0)
        for _ in range(200):
            slot, ch, _ = noisy_slot(rng, spec)
            assert detect_ml_genie(slot, ch, ALAMOUTI, spec).index == detect_mls(slot, ch, ALAMOUTI).index
            assert detect_mlbnr_genie(slot, ch, ALAMOUTI).index == detect_mls(slot, ch, ALAMOUTI).index

    def test_equal_variances_match_mls_under_impulses(self):
        rng = np.random.default_rng(27)
        spec = NoiseSpec(0.5, 0.4, 0.4)
        for _ in range(200):
            slot, ch, _ = noisy_slot(rng, spec)
            assert detect_ml_genie(slot, ch, ALAMOUTI, spec).index == detect_mls(slot, ch, ALAMOUTI).index

    def test_huge_impulse_variance_limit_matches_mlbnr(self):
        rng = np.random.default_rng(28)
        spec = NoiseSpec(0.4, 1.0, 1e8)
        for _ in range(1000):
            slot, ch, _ = noisy_slot(rng, spec)
            if all(s == IMPULSE for s in slot.states):
                continue  # mlbnr falls back to plain least squares here
            assert (detect_ml_genie(slot, ch, ALAMOUTI, spec).index
                    == detect_mlbnr_genie(slot, ch, ALAMOUTI).index)

    def test_hand_computed_weighted_metric(self):
        spec = NoiseSpec(0.25, 0.5, 8.0)
        ch = ChannelRealization(1.0, 0.5 - 0.5j, -0.25j, 0.75)
        truth = SymbolPair(1, -1)
        obs = alamouti_predict(truth, ch) + np.array([0.1, -0.2j, 0.3 + 0.1j, 0.05])
        slot = make_slot(obs, (BACKGROUND, IMPULSE, BACKGROUND, BACKGROUND))
        decision = detect_ml_genie(slot, ch, ALAMOUTI, spec)
        res = obs - alamouti_predict(decision.candidate, ch)
        expected = (abs(res[0]) ** 2 / 0.5 + abs(res[1]) ** 2 / 8.0
                    + abs(res[2]) ** 2 / 0.5 + abs(res[3]) ** 2 / 0.5)
        assert math.isclose(decision.metric, expected, rel_tol=1e-12)
        assert decision.candidate == truth

    def test_mlbnr_ignores_arbitrary_impulse_scaling(self):
        rng = np.random.default_rng(29)
        spec = NoiseSpec(0.5, 0.2, 20.0)
        checked = 0
        for _ in range(300):
            slot, ch, _ = noisy_slot(rng, spec)
            impulse_mask = np.array([s == IMPULSE for s in slot.states])
            if not impulse_mask.any() or impulse_mask.all():
                continue
            scaled = slot.observations.copy()
            scaled[impulse_mask] *= 1e6
            scaled_slot = ReceivedSlot(scaled[0], scaled[1], scaled[2], scaled[3], slot.states)
            assert (detect_mlbnr_genie(slot, ch, ALAMOUTI).index
                    == detect_mlbnr_genie(scaled_slot, ch, ALAMOUTI).index)
            checked += 1
        assert checked > 50

    def test_all_impulse_labels_fall_back_to_mls(self):
        rng = np.random.default_rng(30)
        spec = NoiseSpec(1.0, 0.3, 3.0)
        slot, ch, _ = noisy_slot(rng, spec)
        assert all(s == IMPULSE for s in slot.states)
        assert detect_mlbnr_genie(slot, ch, ALAMOUTI).index == detect_mls(slot, ch, ALAMOUTI).index

    def test_missing_labels_rejected(self):
        slot = SlotObservation((0.1, 0.2, 0.3), states=None)
        sys = fixed_residual_system([1.0, 1.0, 1.0], [-1.0, -1.0, -1.0])
        with pytest.raises(ValueError, match="labels"):
            detect_mlbnr_genie(slot, None, sys)
        with pytest.raises(ValueError, match="labels"):
            detect_ml_genie(slot, None, sys, NoiseSpec(0.1, 1.0, 2.0))


class TestScalingInvariance:
    @pytest.mark.parametrize("scale", [0.01, 3.7, 250.0])
    def test_argmin_unchanged_by_joint_positive_scaling(self, scale):
        rng = np.random.default_rng(31)
        spec = NoiseSpec(0.2, 0.3, 6.0)
        wcfg = WConfig()
        for _ in range(100):
            slot, ch, _ = noisy_slot(rng, spec)
            scaled_slot = ReceivedSlot(*(scale * slot.observations), slot.states)
            scaled_ch = ChannelRealization(scale * ch.h11, scale * ch.h12,
                                           scale * ch.h21, scale * ch.h22)
            assert detect_mls(slot, ch, ALAMOUTI).index == detect_mls(scaled_slot, scaled_ch, ALAMOUTI).index
            assert detect_median(slot, ch, ALAMOUTI).index == detect_median(scaled_slot, scaled_ch, ALAMOUTI).index
            assert (detect_w(slot, ch, ALAMOUTI, wcfg).index
                    == detect_w(scaled_slot, scaled_ch, ALAMOUTI, wcfg).index)
            assert (detect_ml_genie(slot, ch, ALAMOUTI, spec).index
                    == detect_ml_genie(scaled_slot, scaled_ch, ALAMOUTI, spec).index)
            assert (detect_mlbnr_genie(slot, ch, ALAMOUTI).index
                    == detect_mlbnr_genie(scaled_slot, scaled_ch, ALAMOUTI).index)
