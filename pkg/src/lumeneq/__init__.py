"""Simulated OOK visible-light link with a from-scratch CNN-BiLSTM equalizer.

The package covers the whole loop: correlated bit source, nonlinear LED +
multipath + AWGN channel, sliding-window supervision, network training,
MAP sequence-detection baseline, and the BER-vs-SNR sweep report.
"""

from .channel import (ChannelConfig, LinkRealization, NOISELESS, add_awgn,
                      apply_multipath, generate_markov_bits, hard_decision,
                      led_response, measured_snr_db, ook_modulate,
                      simulate_link)
from .data import (WindowDataset, compute_norm_stats, contiguous_split,
                   make_windows, standardize)
from .estimator import NeuralEqualizer
from .gradcheck import gradcheck_model
from .mapdetect import exhaustive_map_oracle, map_sequence_detector
from .metrics import MetricSet, bit_error_rate, classification_metrics
from .model import Architecture, EqualizerNet, FULL_ARCH, TINY_ARCH, init_model
from .optim import Adam, PlateauPolicy
from .sweep import (SweepReport, SweepRow, evaluate_detectors, export_report,
                    run_snr_sweep)
from .training import TrainConfig, TrainHistory, predict_bits, train_equalizer

__version__ = "0.1.0"

__all__ = [
    "Adam", "Architecture", "ChannelConfig", "EqualizerNet", "FULL_ARCH",
    "LinkRealization", "MetricSet", "NOISELESS", "NeuralEqualizer",
    "PlateauPolicy", "SweepReport", "SweepRow", "TINY_ARCH", "TrainConfig",
    "TrainHistory", "WindowDataset", "add_awgn", "apply_multipath",
    "bit_error_rate", "classification_metrics", "compute_norm_stats",
    "contiguous_split", "evaluate_detectors", "exhaustive_map_oracle",
    "export_report", "generate_markov_bits", "gradcheck_model",
    "hard_decision", "init_model", "led_response", "make_windows",
    "map_sequence_detector", "measured_snr_db", "ook_modulate",
    "predict_bits", "run_snr_sweep", "simulate_link", "standardize",
    "train_equalizer",
]
