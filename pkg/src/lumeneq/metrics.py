"""Bit-level and classification metrics."""

import math
from dataclasses import dataclass

import numpy as np


def bit_error_rate(truth, estimate):
    """Fraction of mismatched bits between two equal-length sequences."""
    truth = np.asarray(truth)
    estimate = np.asarray(estimate)
    if truth.shape != estimate.shape or truth.ndim != 1:
        raise ValueError(
            f"sequences must be 1-D and equal length, got {truth.shape} vs {estimate.shape}")
    if len(truth) == 0:
        raise ValueError("cannot compute BER of empty sequences")
    return float(np.mean(truth != estimate))


def classification_metrics(probs, labels, threshold=0.5):
    """(accuracy, precision, recall) with bit 1 as the positive class.

    Precision and recall define to 1.0 when their denominator is zero
    (no positive claims / no positives to find).
    """
    probs = np.asarray(probs)
    labels = np.asarray(labels)
    if probs.shape != labels.shape:
        raise ValueError(f"{probs.shape} probabilities vs {labels.shape} labels")
    predicted = probs >= threshold
    actual = labels == 1
    tp = int(np.sum(predicted & actual))
    fp = int(np.sum(predicted & ~actual))
    fn = int(np.sum(~predicted & actual))
    accuracy = float(np.mean(predicted == actual))
    precision = tp / (tp + fp) if (tp + fp) > 0 else 1.0
    recall = tp / (tp + fn) if (tp + fn) > 0 else 1.0
    return accuracy, precision, recall


@dataclass
class MetricSet:
    """Per-SNR detector comparison over one shared evaluation bit set."""

    ber_pre: float
    ber_post: float
    ber_map: float
    accuracy: float
    precision: float
    recall: float
    n_bits: int
    stderr_ber: float

    @classmethod
    def from_rates(cls, ber_pre, ber_post, ber_map, accuracy, precision,
                   recall, n_bits):
        stderr = math.sqrt(ber_post * (1.0 - ber_post) / n_bits) if n_bits else 0.0
        return cls(ber_pre=ber_pre, ber_post=ber_post, ber_map=ber_map,
                   accuracy=accuracy, precision=precision, recall=recall,
                   n_bits=n_bits, stderr_ber=stderr)
