"""Channel simulation: bit source, LED, multipath, noise calibration."""

import math

import numpy as np
import pytest

from lumeneq import (ChannelConfig, NOISELESS, add_awgn, apply_multipath,
                     generate_markov_bits, hard_decision, led_response,
                     measured_snr_db, ook_modulate, simulate_link)
from lumeneq.channel import export_link_csv, shift_for_alignment


def led_level(x, steepness=5.0, midpoint=0.5):
    # independent scalar reference for the sigmoid transfer
    return 1.0 / (1.0 + math.exp(-steepness * (x - midpoint)))


class TestMarkovBits:
    def test_zero_flip_prob_is_constant(self):
        bits = generate_markov_bits(5, 0.0, seed=123)
        assert np.all(bits == bits[0])

    def test_unit_flip_prob_alternates(self):
        bits = generate_markov_bits(5, 1.0, seed=123)
        assert np.all(bits[1:] != bits[:-1])

    def test_flip_frequency_matches_transition_probability(self):
        bits = generate_markov_bits(50000, 0.2, seed=7)
        flips = np.mean(bits[1:] != bits[:-1])
        assert 0.19 <= flips <= 0.21

    def test_marginal_is_symmetric(self):
        bits = generate_markov_bits(50000, 0.2, seed=11)
        assert 0.47 <= bits.mean() <= 0.53

    def test_two_step_flip_identity(self):
        # P(b[n] != b[n-2]) = 2p(1-p) = 0.32 for p = 0.2
        bits = generate_markov_bits(50000, 0.2, seed=5)
        two_step = np.mean(bits[2:] != bits[:-2])
        assert abs(two_step - 0.32) <= 0.015

    def test_deterministic_given_seed(self):
        a = generate_markov_bits(1000, 0.2, seed=99)
        b = generate_markov_bits(1000, 0.2, seed=99)
        assert np.array_equal(a, b)
        c = generate_markov_bits(1000, 0.2, seed=100)
        assert not np.array_equal(a, c)

    def test_rejects_empty_and_bad_probability(self):
        with pytest.raises(ValueError):
            generate_markov_bits(0, 0.2, seed=0)
        with pytest.raises(ValueError):
            generate_markov_bits(10, 1.5, seed=0)
        with pytest.raises(ValueError):
            generate_markov_bits(10, -0.1, seed=0)


class TestOokModulate:
    def test_definitional_mapping(self):
        out = ook_modulate(np.array([0, 1, 1, 0]))
        assert out.tolist() == [0.0, 1.0, 1.0, 0.0]

    def test_all_zeros_and_ones(self):
        assert ook_modulate(np.zeros(4, dtype=int)).tolist() == [0.0] * 4
        assert ook_modulate(np.ones(4, dtype=int)).tolist() == [1.0] * 4

    def test_rejects_empty(self):
        with pytest.raises(ValueError):
            ook_modulate(np.array([]))


class TestLedResponse:
    def test_midpoint_maps_to_half(self):
        assert led_response(np.array([0.5]))[0] == pytest.approx(0.5)

    def test_on_level(self):
        assert led_response(np.array([1.0]))[0] == pytest.approx(
            led_level(1.0), abs=1e-12)
        assert led_response(np.array([1.0]))[0] == pytest.approx(0.92414, abs=1e-5)

    def test_off_level_and_symmetry(self):
        lo = led_response(np.array([0.0]))[0]
        hi = led_response(np.array([1.0]))[0]
        assert lo == pytest.approx(led_level(0.0), abs=1e-12)
        assert lo == pytest.approx(0.07586, abs=1e-5)
        assert lo + hi == pytest.approx(1.0, abs=1e-12)

    def test_rejects_non_finite(self):
        with pytest.raises(ValueError):
            led_response(np.array([np.nan]))


class TestMultipath:
    def test_impulse_response(self):
        out = apply_multipath(np.array([1.0, 0.0, 0.0, 0.0]), delay=2, gain=0.3)
        assert out.tolist() == [1.0, 0.0, 0.3, 0.0]

    def test_zero_gain_is_identity(self):
        x = np.array([0.3, 0.7, 0.1])
        assert np.array_equal(apply_multipath(x, delay=2, gain=0.0), x)

    def test_zero_delay_scales(self):
        x = np.array([0.5, 1.0])
        assert np.allclose(apply_multipath(x, delay=0, gain=0.3), 1.3 * x)

    def test_long_delay_warns_but_passes_signal(self):
        x = np.array([1.0, 2.0])
        with pytest.warns(UserWarning):
            out = apply_multipath(x, delay=5, gain=0.3)
        assert np.array_equal(out, x)

    def test_rejects_bad_gain(self):
        with pytest.raises(ValueError):
            apply_multipath(np.array([1.0]), delay=0, gain=1.0)


class TestAwgn:
    def test_unit_power_at_zero_db(self):
        _, sigma = add_awgn(np.ones(4), snr_db=0.0, seed=1)
        assert sigma == pytest.approx(1.0)

    def test_half_power_at_ten_db(self):
        signal = np.array([1.0, 0.0, 1.0, 0.0])   # mean power 0.5
        _, sigma = add_awgn(signal, snr_db=10.0, seed=1)
        assert sigma**2 == pytest.approx(0.05)

    def test_noiseless_flag(self):
        x = np.array([0.3, 0.9])
        out, sigma = add_awgn(x, snr_db=NOISELESS, seed=1)
        assert sigma == 0.0
        assert np.array_equal(out, x)

    def test_zero_power_is_an_error(self):
        with pytest.raises(ValueError):
            add_awgn(np.zeros(8), snr_db=10.0, seed=1)

    def test_deterministic_given_seed(self):
        x = np.linspace(0.1, 1.0, 50)
        a, _ = add_awgn(x, 5.0, seed=3)
        b, _ = add_awgn(x, 5.0, seed=3)
        assert np.array_equal(a, b)


class TestSimulateLink:
    def test_noiseless_clean_channel_tracks_bits(self):
        cfg = ChannelConfig(snr_db=NOISELESS, multipath_gain=0.0, seed=21)
        real = simulate_link(cfg, 500)
        lo, hi = led_level(0.0), led_level(1.0)
        expected = np.where(real.bits == 1, hi, lo)
        assert np.allclose(real.received, expected, atol=1e-12)

    def test_deterministic(self):
        cfg = ChannelConfig(snr_db=8.0, seed=77)
        a = simulate_link(cfg, 2000)
        b = simulate_link(cfg, 2000)
        assert np.array_equal(a.received, b.received)
        assert np.array_equal(a.bits, b.bits)
        assert a.noise_sigma == b.noise_sigma

    def test_measured_snr_calibration(self):
        cfg = ChannelConfig(snr_db=10.0, seed=42)
        real = simulate_link(cfg, 50000)
        assert abs(measured_snr_db(real) - 10.0) <= 0.1

    def test_lengths_and_sigma_invariant(self):
        cfg = ChannelConfig(snr_db=6.0, seed=5)
        real = simulate_link(cfg, 3000)
        assert len(real.bits) == len(real.clean_signal) == len(real.received) == 3000
        expected_sigma = math.sqrt(
            np.mean(real.clean_signal**2) / 10 ** (cfg.snr_db / 10))
        assert real.noise_sigma == pytest.approx(expected_sigma, rel=1e-12)

    def test_led_output_bounded(self):
        cfg = ChannelConfig(snr_db=NOISELESS, multipath_gain=0.0, seed=3)
        real = simulate_link(cfg, 1000)
        assert np.all(real.clean_signal > 0.0)
        assert np.all(real.clean_signal < 1.0)

    def test_alignment_offset_shifts_received(self):
        base = ChannelConfig(snr_db=15.0, seed=9)
        shifted = base.replace(alignment_offset=2)
        a = simulate_link(base, 400)
        b = simulate_link(shifted, 400)
        assert np.array_equal(b.received[:-2], a.received[2:])
        assert np.all(b.received[-2:] == 0.0)

    def test_misalignment_gives_two_step_error_floor(self):
        cfg = ChannelConfig(snr_db=20.0, alignment_offset=2, seed=31)
        real = simulate_link(cfg, 20000)
        ber = np.mean(hard_decision(real.received) != real.bits)
        assert 0.28 <= ber <= 0.36


class TestHardDecision:
    def test_threshold_boundary_decides_one(self):
        out = hard_decision(np.array([0.1, 0.9, 0.5]), threshold=0.5)
        assert out.tolist() == [0, 1, 1]

    def test_noiseless_link_recovers_bits_exactly(self):
        cfg = ChannelConfig(snr_db=NOISELESS, multipath_gain=0.0, seed=13)
        real = simulate_link(cfg, 2000)
        assert np.array_equal(hard_decision(real.received), real.bits)

    def test_all_below_threshold(self):
        assert hard_decision(np.array([0.1, 0.2]), 0.5).tolist() == [0, 0]


class TestShiftForAlignment:
    def test_round_trip_away_from_edges(self):
        x = np.arange(10.0)
        fwd = shift_for_alignment(x, 3)
        back = shift_for_alignment(fwd, -3)
        assert np.array_equal(back[3:], x[3:])

    def test_zero_offset_copies(self):
        x = np.arange(4.0)
        out = shift_for_alignment(x, 0)
        assert np.array_equal(out, x) and out is not x


class TestLinkCsv:
    def test_export_format_and_determinism(self, tmp_path):
        cfg = ChannelConfig(snr_db=12.0, seed=4)
        real = simulate_link(cfg, 50)
        path = tmp_path / "link.csv"
        export_link_csv(real, path)
        lines = path.read_text().splitlines()
        assert lines[0] == "index,bit,clean,received"
        assert len(lines) == 51
        for i, line in enumerate(lines[1:]):
            idx, bit, clean, received = line.split(",")
            assert int(idx) == i
            assert int(bit) == real.bits[i]
            assert float(clean) == pytest.approx(real.clean_signal[i], rel=1e-8)
            assert float(received) == pytest.approx(real.received[i], rel=1e-8)
        first = path.read_bytes()
        export_link_csv(real, path)
        assert path.read_bytes() == first
