import math

import numpy as np
import pytest

from epsnoise.model import (
    BACKGROUND,
    IMPULSE,
    ChannelRealization,
    NoiseSpec,
    SymbolPair,
    alamouti2x2,
    alamouti_predict,
    get_system,
    repcode3,
    residuals,
    sample_channel,
    sample_noise,
    sample_noise_real,
    solve_noise_powers,
    transmit_slot,
)


class _ZeroNoise:
    """Degenerate noise stub for exact structural checks."""

    epsilon = 0.0
    sigma1_sq = 0.0
    sigma2_sq = 0.0
    tail = "gaussian"


class TestNoiseSpec:
    def test_gamma_below_one_rejected(self):
        with pytest.raises(ValueError, match="sigma2_sq >= sigma1_sq"):
            NoiseSpec(0.1, 1.0, 0.5)

    def test_epsilon_range(self):
        with pytest.raises(ValueError):
            NoiseSpec(-0.1, 1.0, 1.0)
        with pytest.raises(ValueError):
            NoiseSpec(1.1, 1.0, 1.0)

    def test_unknown_tail(self):
        with pytest.raises(ValueError):
            NoiseSpec(0.1, 1.0, 2.0, tail="cauchy")

    def test_pure_laplace_normalises_mixture_fields(self):
        spec = NoiseSpec(0.3, 2.0, 50.0, tail="pure_laplace")
        assert spec.epsilon == 0.0
        assert spec.sigma2_sq == spec.sigma1_sq == 2.0

    def test_gamma_property(self):
        assert NoiseSpec(0.1, 0.5, 5.0).gamma == 10.0


class TestSolveNoisePowers:
    def test_zero_db_background(self):
        spec = solve_noise_powers(0.0, 0.0, 1.0, "background")
        assert math.isclose(spec.sigma1_sq, 0.5, rel_tol=1e-15)

    def test_gamma_one_degenerate(self):
        for mode in ("background", "total"):
            spec = solve_noise_powers(7.0, 0.3, 1.0, mode)
            assert spec.sigma2_sq == spec.sigma1_sq

    def test_total_mode_solves_mixture_power(self):
        spec = solve_noise_powers(0.0, 0.1, 10.0, "total")
        assert math.isclose(spec.sigma1_sq, 1.0 / 3.8, rel_tol=1e-14)
        total = 2.0 * ((1.0 - spec.epsilon) * spec.sigma1_sq + spec.epsilon * spec.sigma2_sq)
        assert math.isclose(total, 1.0, rel_tol=1e-14)

    def test_gamma_below_one_rejected(self):
        with pytest.raises(ValueError, match="gamma"):
            solve_noise_powers(0.0, 0.1, 0.5)

    def test_unknown_mode(self):
        with pytest.raises(ValueError):
            solve_noise_powers(0.0, 0.1, 10.0, "peak")


class TestSampleNoise:
    def test_epsilon_zero_always_background(self):
        rng = np.random.default_rng(1)
        spec = NoiseSpec(0.0, 1.0, 1.0)
        assert all(sample_noise(spec, rng).state == BACKGROUND for _ in range(1000))

    def test_mixture_second_moment(self):
        rng = np.random.default_rng(2)
        spec = NoiseSpec(0.1, 1.0, 10.0)
        n = 300_000
        values = np.empty(n, dtype=complex)
        impulses = 0
        for i in range(n):
            s = sample_noise(spec, rng)
            values[i] = s.value
            impulses += s.state == IMPULSE
        target = (1.0 - spec.epsilon) * spec.sigma1_sq + spec.epsilon * spec.sigma2_sq
        assert abs(values.real.var() - target) / target < 0.02
        assert abs(values.imag.var() - target) / target < 0.02
        # impulse fraction within 3 binomial standard deviations of epsilon
        sd = math.sqrt(spec.epsilon * (1.0 - spec.epsilon) / n)
        assert abs(impulses / n - spec.epsilon) <= 3.0 * sd

    def test_laplace_impulse_conditional_variance(self):
        rng = np.random.default_rng(3)
        spec = NoiseSpec(0.5, 1.0, 10.0, tail="laplace")
        re = []
        for _ in range(400_000):
            s = sample_noise(spec, rng)
            if s.state == IMPULSE:
                re.append(s.value.real)
        re = np.asarray(re)
        assert abs(re.var() - spec.sigma2_sq) / spec.sigma2_sq < 0.02

    def test_pure_laplace_total_variance(self):
        rng = np.random.default_rng(4)
        spec = NoiseSpec(0.0, 2.0, 2.0, tail="pure_laplace")
        vals = np.array([sample_noise(spec, rng).value for _ in range(200_000)])
        assert abs(vals.real.var() - 2.0) / 2.0 < 0.02
        assert all(sample_noise(spec, rng).state == BACKGROUND for _ in range(100))

    def test_real_sampler_is_real(self):
        rng = np.random.default_rng(5)
        s = sample_noise_real(NoiseSpec(0.5, 1.0, 4.0), rng)
        assert s.value.imag == 0.0


class TestSampleChannel:
    def test_statistics(self):
        rng = np.random.default_rng(6)
        n = 250_000
        gains = np.empty((n, 4), dtype=complex)
        for i in range(n):
            gains[i] = sample_channel(rng).gains
        pooled = gains.ravel()
        assert abs(np.mean(np.abs(pooled) ** 2) - 1.0) < 0.01
        assert abs(pooled.real.var() - 0.5) / 0.5 < 0.01
        # distinct gains of a slot are uncorrelated
        for a in range(4):
            for b in range(a + 1, 4):
                corr = np.corrcoef(gains[:, a].real, gains[:, b].real)[0, 1]
                assert abs(corr) < 0.01


class TestTransmitSlot:
    def test_degenerate_channel_cancels(self):
        ch = ChannelRealization(1.0, 0.0, 1.0, 0.0)
        slot = transmit_slot(SymbolPair(1, 1), ch, _ZeroNoise(), np.random.default_rng(7))
        assert slot.r11 == 0.0

    def test_zero_noise_structure(self):
        rng = np.random.default_rng(8)
        ch = sample_channel(rng)
        slot = transmit_slot(SymbolPair(1, -1), ch, _ZeroNoise(), rng)
        assert slot.r12 == -ch.h11 + ch.h21

    def test_residuals_reproduce_injected_noise(self):
        # The slot stores the rounded sums x + noise, so reproduction is exact
        # up to the final rounding of that addition (<= 1 ulp of the slot scale).
        spec = NoiseSpec(0.2, 0.3, 3.0)
        ch = sample_channel(np.random.default_rng(9))
        pair = SymbolPair(-1, 1)
        slot = transmit_slot(pair, ch, spec, np.random.default_rng(10))
        twin = np.random.default_rng(10)
        expected = np.array([sample_noise(spec, twin).value for _ in range(4)])
        tol = 4.0 * np.finfo(float).eps * np.max(np.abs(slot.observations))
        assert np.max(np.abs(residuals(slot, ch, pair) - expected)) <= tol

    def test_wrong_candidate_residual_magnitudes(self):
        ch = sample_channel(np.random.default_rng(11))
        truth = SymbolPair(1, 1)
        slot = transmit_slot(truth, ch, _ZeroNoise(), np.random.default_rng(12))
        res = residuals(slot, ch, SymbolPair(-1, 1))  # s1 differs, e1 = 2
        expected = 2.0 * np.abs(np.array([ch.h11, ch.h12, ch.h21, ch.h22]))
        assert np.allclose(np.abs(res), expected, rtol=1e-12)


class TestSignalSystems:
    def test_alamouti_candidates_and_bits(self):
        sys = alamouti2x2()
        assert len(sys.candidates) == 4
        assert sys.observation_len == 4
        assert sys.bits[0] == (1, 1) and sys.candidates[0] == SymbolPair(1, 1)

    def test_alamouti_predict_matches_module_function(self):
        rng = np.random.default_rng(13)
        ch = sample_channel(rng)
        pair = SymbolPair(-1, -1)
        assert np.array_equal(alamouti2x2().predict(pair, ch), alamouti_predict(pair, ch))

    def test_repcode_predicts_codewords_exactly(self):
        sys = repcode3()
        assert np.array_equal(sys.predict(sys.candidates[0], None), np.array([1.0, 1.0, 1.0]))
        assert np.array_equal(sys.predict(sys.candidates[1], None), np.array([-1.0, -1.0, -1.0]))
        assert sys.bits == ((1,), (0,))

    def test_symbol_pair_validation(self):
        with pytest.raises(ValueError):
            SymbolPair(2, 1)

    def test_get_system(self):
        assert get_system("alamouti2x2").name == "alamouti2x2"
        assert get_system("repcode3").complex_noise is False
        with pytest.raises(ValueError):
            get_system("mimo4x4")
