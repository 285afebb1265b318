"""Scikit-learn style front end for the neural equalizer."""

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.exceptions import NotFittedError

from . import serialize
from .data import WindowDataset, contiguous_split, standardize
from .model import Architecture, init_model
from .training import TrainConfig, predict_bits, train_equalizer
from .validation import check_bits, check_windows


class NeuralEqualizer(BaseEstimator, ClassifierMixin):
    """Binary classifier mapping received-sample windows to center bits.

    ``fit`` expects X rows to be consecutive stride-1 windows of one
    received stream (the natural output of the windowing step); the
    train/validation split is taken contiguously with a guard gap of one
    window length so the two sides never share samples.  Hyperparameter
    defaults follow the reference training regimen.
    """

    def __init__(self, window_length=64, conv_filters=(64, 128),
                 kernel_sizes=(5, 3), lstm_units=(64, 32), dense_units=32,
                 dropout_rates=(0.3, 0.3, 0.2), l2=0.01,
                 learning_rate=1e-4, batch_size=128, max_epochs=100,
                 early_stop_patience=10, lr_factor=0.5, lr_patience=3,
                 min_lr=1e-6, split_ratio=0.8, seed=0):
        self.window_length = window_length
        self.conv_filters = conv_filters
        self.kernel_sizes = kernel_sizes
        self.lstm_units = lstm_units
        self.dense_units = dense_units
        self.dropout_rates = dropout_rates
        self.l2 = l2
        self.learning_rate = learning_rate
        self.batch_size = batch_size
        self.max_epochs = max_epochs
        self.early_stop_patience = early_stop_patience
        self.lr_factor = lr_factor
        self.lr_patience = lr_patience
        self.min_lr = min_lr
        self.split_ratio = split_ratio
        self.seed = seed

    def _architecture(self):
        return Architecture(
            window_length=self.window_length,
            conv_filters=tuple(self.conv_filters),
            kernel_sizes=tuple(self.kernel_sizes),
            lstm_units=tuple(self.lstm_units),
            dense_units=self.dense_units,
            dropout_rates=tuple(self.dropout_rates),
            l2=self.l2,
        )

    def _train_config(self):
        return TrainConfig(
            learning_rate=self.learning_rate, batch_size=self.batch_size,
            max_epochs=self.max_epochs,
            early_stop_patience=self.early_stop_patience,
            lr_factor=self.lr_factor, lr_patience=self.lr_patience,
            min_lr=self.min_lr, split_ratio=self.split_ratio, seed=self.seed)

    def fit(self, X, y, dataset=None):
        """Train on windows X and center bits y.

        When the caller already has a provenance-carrying
        :class:`WindowDataset` it can be passed instead (X and y are then
        ignored), preserving exact bit-index bookkeeping for the split.
        """
        if dataset is None:
            X = check_windows(X, self.window_length)
            y = check_bits(y, n_expected=len(X))
            dataset = WindowDataset(
                inputs=X, targets=y,
                centers=np.arange(len(X)) + self.window_length // 2,
                center_offset=self.window_length // 2,
                source_fingerprint="user-supplied", source_seed=self.seed)
        elif dataset.window_length != self.window_length:
            raise ValueError(
                f"dataset windows have length {dataset.window_length}, "
                f"estimator expects {self.window_length}")
        train_raw, val_raw = contiguous_split(dataset, self.split_ratio)
        train_set = standardize(train_raw)
        stats = (train_set.norm_mean, train_set.norm_std)
        val_set = standardize(val_raw, stats)
        model = init_model(self.seed, self._architecture())
        model, history = train_equalizer(model, train_set, val_set,
                                         self._train_config())
        self.model_ = model
        self.history_ = history
        self.norm_mean_, self.norm_std_ = stats
        self.classes_ = np.array([0, 1], dtype=np.int8)
        return self

    def _check_fitted(self):
        if not hasattr(self, "model_"):
            raise NotFittedError(
                "this NeuralEqualizer instance is not fitted yet")

    def _standardized(self, X):
        X = check_windows(X, self.window_length)
        return (X - np.float32(self.norm_mean_)) / np.float32(self.norm_std_)

    def decision_function(self, X):
        """Probability of bit 1 for each window."""
        self._check_fitted()
        return self.model_.predict_proba(self._standardized(X))

    def predict_proba(self, X):
        p1 = self.decision_function(X)
        return np.column_stack([1.0 - p1, p1])

    def predict(self, X, threshold=0.5):
        self._check_fitted()
        _, bits = predict_bits(self.model_, self._standardized(X),
                               threshold=threshold)
        return bits

    def save(self, path, channel_fingerprint="unspecified"):
        """Persist the fitted model to the versioned binary container."""
        self._check_fitted()
        serialize.save_model(self.model_, self.norm_mean_, self.norm_std_,
                             channel_fingerprint, self.seed, path)

    @classmethod
    def load(cls, path):
        """Rebuild a fitted estimator from :meth:`save` output."""
        model, fields = serialize.load_model(path)
        arch = model.arch
        est = cls(window_length=arch.window_length,
                  conv_filters=arch.conv_filters,
                  kernel_sizes=arch.kernel_sizes,
                  lstm_units=arch.lstm_units,
                  dense_units=arch.dense_units,
                  dropout_rates=arch.dropout_rates,
                  l2=arch.l2,
                  seed=int(fields.get("train.seed", 0)))
        est.model_ = model
        est.norm_mean_ = fields["norm.mean"]
        est.norm_std_ = fields["norm.std"]
        est.classes_ = np.array([0, 1], dtype=np.int8)
        est.history_ = None
        return est
