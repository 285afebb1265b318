"""BER and confusion-matrix metrics."""

import math

import numpy as np
import pytest

from lumeneq import MetricSet, bit_error_rate, classification_metrics


class TestBitErrorRate:
    def test_identical_sequences(self):
        assert bit_error_rate(np.array([0, 1, 1]), np.array([0, 1, 1])) == 0.0

    def test_complementary_sequences(self):
        assert bit_error_rate(np.array([0, 1]), np.array([1, 0])) == 1.0

    def test_one_of_four(self):
        assert bit_error_rate(np.array([0, 1, 1, 0]),
                              np.array([0, 1, 0, 0])) == 0.25

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            bit_error_rate(np.array([0, 1]), np.array([0]))

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            bit_error_rate(np.array([]), np.array([]))


class TestClassificationMetrics:
    def test_perfect_predictions(self):
        labels = np.array([0, 1, 1, 0])
        probs = np.array([0.1, 0.9, 0.8, 0.2])
        assert classification_metrics(probs, labels) == (1.0, 1.0, 1.0)

    def test_all_negative_predictions(self):
        labels = np.array([0, 1, 0])
        probs = np.array([0.1, 0.2, 0.3])
        accuracy, precision, recall = classification_metrics(probs, labels)
        assert recall == 0.0
        assert precision == 1.0          # zero-denominator convention
        assert accuracy == pytest.approx(2 / 3)

    def test_enumerated_confusion_matrix(self):
        probs = np.array([0.9, 0.2, 0.6, 0.4])
        labels = np.array([1, 0, 0, 1])
        # TP=1 (0.9), FP=1 (0.6), TN=1 (0.2), FN=1 (0.4)
        accuracy, precision, recall = classification_metrics(probs, labels)
        assert (accuracy, precision, recall) == (0.5, 0.5, 0.5)

    def test_no_positives_at_all(self):
        accuracy, precision, recall = classification_metrics(
            np.array([0.1, 0.2]), np.array([0, 0]))
        assert (accuracy, precision, recall) == (1.0, 1.0, 1.0)

    def test_threshold_boundary_counts_positive(self):
        accuracy, _, recall = classification_metrics(
            np.array([0.5]), np.array([1]))
        assert accuracy == 1.0 and recall == 1.0

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            classification_metrics(np.array([0.5]), np.array([1, 0]))


class TestMetricSet:
    def test_stderr_is_binomial(self):
        m = MetricSet.from_rates(ber_pre=0.1, ber_post=0.04, ber_map=0.02,
                                 accuracy=0.96, precision=0.95, recall=0.97,
                                 n_bits=10000)
        assert m.stderr_ber == pytest.approx(math.sqrt(0.04 * 0.96 / 10000))

    def test_accuracy_complements_post_ber(self):
        m = MetricSet.from_rates(ber_pre=0.2, ber_post=0.25, ber_map=0.1,
                                 accuracy=0.75, precision=0.7, recall=0.8,
                                 n_bits=4)
        assert m.accuracy + m.ber_post == 1.0
