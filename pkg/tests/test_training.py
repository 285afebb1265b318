"""Training loop semantics on small real runs."""

import numpy as np
import pytest

from lumeneq import (ChannelConfig, NOISELESS, TrainConfig, contiguous_split,
                     make_windows, simulate_link, standardize, train_equalizer)
from lumeneq.errors import ContractViolation, TrainingDiverged
from lumeneq.model import Architecture, init_model

SMALL_ARCH = Architecture(window_length=8, conv_filters=(4, 8),
                          lstm_units=(4, 3), dense_units=8)


def small_sets(snr_db=NOISELESS, n_bits=1500, seed=5, gain=0.0):
    cfg = ChannelConfig(snr_db=snr_db, multipath_gain=gain, seed=seed)
    ds = make_windows(simulate_link(cfg, n_bits), 8)
    train, val = contiguous_split(ds, 0.8)
    train = standardize(train)
    val = standardize(val, (train.norm_mean, train.norm_std))
    return train, val


def small_config(**overrides):
    base = dict(learning_rate=3e-3, batch_size=32, max_epochs=6,
                early_stop_patience=3, lr_patience=2, seed=1)
    base.update(overrides)
    return TrainConfig(**base)


class TestTrainEqualizer:
    def test_learns_separable_data(self):
        train, val = small_sets()
        model = init_model(2, SMALL_ARCH)
        model, history = train_equalizer(model, train, val, small_config())
        assert history.val_accuracy[-1] > 0.95
        assert history.n_epochs() >= 1

    def test_restore_best_reproduces_best_validation_loss(self):
        from lumeneq.training import evaluate_loss_and_metrics
        train, val = small_sets(snr_db=4.0)
        model = init_model(3, SMALL_ARCH)
        model, history = train_equalizer(model, train, val, small_config())
        best = min(history.val_loss)
        assert history.val_loss[history.best_epoch] == best
        re_loss, *_ = evaluate_loss_and_metrics(model, val)
        assert re_loss == pytest.approx(best, rel=1e-6)
        assert all(best <= v for v in history.val_loss)

    def test_learning_rate_non_increasing(self):
        train, val = small_sets(snr_db=0.0)
        model = init_model(4, SMALL_ARCH)
        _, history = train_equalizer(model, train, val,
                                     small_config(max_epochs=10))
        lrs = history.learning_rate
        assert all(a >= b for a, b in zip(lrs, lrs[1:]))
        assert all(lr >= 1e-6 for lr in lrs)

    def test_deterministic_trajectory(self):
        train, val = small_sets(snr_db=6.0)
        hist = []
        for _ in range(2):
            model = init_model(5, SMALL_ARCH)
            _, h = train_equalizer(model, train, val,
                                   small_config(max_epochs=3))
            hist.append((tuple(h.train_loss), tuple(h.val_loss)))
        assert hist[0] == hist[1]

    def test_early_stop_bounds_epochs(self):
        train, val = small_sets(snr_db=0.0)
        model = init_model(6, SMALL_ARCH)
        _, history = train_equalizer(
            model, train, val,
            small_config(max_epochs=50, early_stop_patience=2, learning_rate=1e-5))
        assert history.n_epochs() <= 50
        if history.n_epochs() < 50:
            assert history.best_epoch <= history.n_epochs() - 1

    def test_divergence_raises_with_history(self, monkeypatch):
        train, val = small_sets()
        model = init_model(7, SMALL_ARCH)
        calls = {"n": 0}
        original = type(model).loss

        def poisoned(self, probs, labels):
            calls["n"] += 1
            if calls["n"] > 3:
                return float("nan")
            return original(self, probs, labels)

        monkeypatch.setattr(type(model), "loss", poisoned)
        with pytest.raises(TrainingDiverged) as excinfo:
            train_equalizer(model, train, val, small_config())
        assert excinfo.value.history is not None

    def test_unstandardized_inputs_rejected(self):
        cfg = ChannelConfig(snr_db=10.0, seed=9)
        ds = make_windows(simulate_link(cfg, 800), 8)
        train, val = contiguous_split(ds, 0.8)
        model = init_model(8, SMALL_ARCH)
        with pytest.raises(ContractViolation):
            train_equalizer(model, train, val, small_config())

    def test_mismatched_normalization_rejected(self):
        train, val = small_sets()
        val = standardize(val)    # wrong: its own stats
        model = init_model(9, SMALL_ARCH)
        with pytest.raises(ContractViolation):
            train_equalizer(model, train, val, small_config())
