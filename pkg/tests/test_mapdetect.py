"""Viterbi MAP detection against exhaustive enumeration and edge cases."""

import numpy as np
import pytest

from lumeneq import (ChannelConfig, NOISELESS, bit_error_rate,
                     exhaustive_map_oracle, led_response,
                     map_sequence_detector, simulate_link)
from lumeneq.rng import derive_seed


class TestNoiseless:
    def test_recovers_bits_exactly_with_isi(self):
        cfg = ChannelConfig(snr_db=NOISELESS, seed=3)
        real = simulate_link(cfg, 300)
        decoded = map_sequence_detector(real.received, cfg, real.noise_sigma)
        assert np.array_equal(decoded, real.bits)

    def test_recovers_bits_without_isi(self):
        cfg = ChannelConfig(snr_db=NOISELESS, multipath_gain=0.0, seed=4)
        real = simulate_link(cfg, 100)
        decoded = map_sequence_detector(real.received, cfg, real.noise_sigma)
        assert np.array_equal(decoded, real.bits)


class TestReducesToThreshold:
    def test_memoryless_uniform_prior_is_midpoint_ml(self):
        # no echo, uninformative prior: per-sample nearest-level decision,
        # whose boundary is the midpoint of the two LED levels, i.e. 0.5
        cfg = ChannelConfig(snr_db=10.0, multipath_gain=0.0, flip_prob=0.5,
                            seed=0)
        rng = np.random.default_rng(11)
        y = rng.uniform(-0.2, 1.2, size=64)
        decoded = map_sequence_detector(y, cfg, noise_sigma=0.3)
        levels = led_response(np.array([0.0, 1.0]))
        midpoint = float(levels.mean())
        assert midpoint == pytest.approx(0.5, abs=1e-12)
        assert np.array_equal(decoded, (y >= midpoint).astype(np.int8))


class TestAgainstExhaustive:
    @pytest.mark.parametrize("delay", [0, 1, 2, 3])
    def test_matches_brute_force(self, delay):
        for snr in (0.0, 10.0, 20.0):
            for k in range(12):
                seed = derive_seed(99, "map-test", delay, int(snr), k)
                cfg = ChannelConfig(snr_db=snr, multipath_delay=delay,
                                    seed=seed)
                real = simulate_link(cfg, 11)
                viterbi = map_sequence_detector(real.received, cfg,
                                                real.noise_sigma)
                brute = exhaustive_map_oracle(real.received, cfg,
                                              real.noise_sigma)
                assert np.array_equal(viterbi, brute), (delay, snr, k)

    def test_matches_under_nondefault_channel(self):
        for k in range(10):
            cfg = ChannelConfig(snr_db=6.0, multipath_delay=1,
                                multipath_gain=0.45, flip_prob=0.35,
                                responsivity=1.7,
                                seed=derive_seed(5, "map-alt", k))
            real = simulate_link(cfg, 10)
            assert np.array_equal(
                map_sequence_detector(real.received, cfg, real.noise_sigma),
                exhaustive_map_oracle(real.received, cfg, real.noise_sigma))

    def test_matches_when_sequence_shorter_than_memory(self):
        cfg = ChannelConfig(snr_db=8.0, multipath_delay=4, seed=12)
        real = simulate_link(cfg, 3)
        assert np.array_equal(
            map_sequence_detector(real.received, cfg, real.noise_sigma),
            exhaustive_map_oracle(real.received, cfg, real.noise_sigma))


class TestDegeneratePriors:
    def test_frozen_source_decodes_constant(self):
        cfg = ChannelConfig(snr_db=0.0, flip_prob=0.0, seed=8)
        real = simulate_link(cfg, 12)
        decoded = map_sequence_detector(real.received, cfg, real.noise_sigma)
        assert len(np.unique(decoded)) == 1
        brute = exhaustive_map_oracle(real.received, cfg, real.noise_sigma)
        assert np.array_equal(decoded, brute)

    def test_single_bit_picks_closer_level(self):
        cfg = ChannelConfig(snr_db=10.0, multipath_gain=0.0, flip_prob=0.5,
                            seed=0)
        for value, expected in ((0.1, 0), (0.9, 1)):
            decoded = map_sequence_detector(np.array([value]), cfg, 0.2)
            assert decoded.tolist() == [expected]


class TestImprovesOnHardDecision:
    def test_map_beats_threshold_at_moderate_snr(self):
        from lumeneq import hard_decision
        cfg = ChannelConfig(snr_db=8.0, seed=21)
        real = simulate_link(cfg, 20000)
        map_ber = bit_error_rate(
            real.bits, map_sequence_detector(real.received, cfg,
                                             real.noise_sigma))
        hard_ber = bit_error_rate(real.bits, hard_decision(real.received))
        assert map_ber < hard_ber

    def test_alignment_offset_is_compensated(self):
        cfg = ChannelConfig(snr_db=20.0, alignment_offset=2, seed=33)
        real = simulate_link(cfg, 4000)
        decoded = map_sequence_detector(real.received, cfg, real.noise_sigma)
        assert bit_error_rate(real.bits, decoded) < 0.01


class TestRefusals:
    def test_exhaustive_refuses_large_instances(self):
        cfg = ChannelConfig(seed=0)
        with pytest.raises(ValueError):
            exhaustive_map_oracle(np.zeros(15), cfg, 0.1)

    def test_viterbi_refuses_huge_state_spaces(self):
        cfg = ChannelConfig(multipath_delay=25, seed=0)
        with pytest.raises(ValueError):
            map_sequence_detector(np.zeros(100), cfg, 0.1)

    def test_empty_signal_rejected(self):
        cfg = ChannelConfig(seed=0)
        with pytest.raises(ValueError):
            map_sequence_detector(np.array([]), cfg, 0.1)
