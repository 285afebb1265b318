"""BER-vs-SNR comparison: hard decision, neural equalizer, MAP oracle.

Each sweep point trains its own equalizer on a fresh realization and
measures every detector on a second realization with a distinct seed.
The first and last window-half bits, which the equalizer cannot predict,
are excluded from every detector so all BERs share one bit set.
"""

import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .channel import hard_decision, simulate_link
from .data import WindowDataset, contiguous_split, make_windows, standardize
from .errors import LumeneqError
from .estimator import NeuralEqualizer
from .mapdetect import map_sequence_detector
from .metrics import MetricSet, bit_error_rate, classification_metrics
from .rng import derive_seed

DEFAULT_SNR_LIST = tuple(range(0, 21, 2))


@dataclass
class SweepRow:
    snr_db: float
    metrics: Optional[MetricSet]
    train_seconds: float = 0.0
    epochs: int = 0
    error: Optional[str] = None


@dataclass
class SweepReport:
    rows: list
    channel_template: object
    train_config: object
    n_bits: int
    master_seed: int
    mixed_snr: bool = False

    def metrics_for(self, snr_db):
        for row in self.rows:
            if row.snr_db == snr_db:
                return row.metrics
        raise KeyError(f"no sweep row at {snr_db} dB")


def _point_seeds(master_seed, index):
    return {
        "train_stream": derive_seed(master_seed, "sweep-train-stream", index),
        "test_stream": derive_seed(master_seed, "sweep-test-stream", index),
        "train_run": derive_seed(master_seed, "sweep-train-run", index),
    }


def _build_estimator(train_cfg, window_length, run_seed):
    return NeuralEqualizer(
        window_length=window_length,
        learning_rate=train_cfg.learning_rate,
        batch_size=train_cfg.batch_size,
        max_epochs=train_cfg.max_epochs,
        early_stop_patience=train_cfg.early_stop_patience,
        lr_factor=train_cfg.lr_factor,
        lr_patience=train_cfg.lr_patience,
        min_lr=train_cfg.min_lr,
        split_ratio=train_cfg.split_ratio,
        seed=run_seed,
    )


def evaluate_detectors(estimator, test_real, window_length=64):
    """MetricSet comparing the three detectors on one test realization."""
    windows = make_windows(test_real, window_length)
    truth = windows.targets
    centers = windows.centers
    pre_bits = hard_decision(test_real.received)[centers]
    probs = estimator.decision_function(windows.inputs)
    post_bits = (probs >= 0.5).astype(np.int8)
    map_bits = map_sequence_detector(test_real.received, test_real.config,
                                     test_real.noise_sigma)[centers]
    accuracy, precision, recall = classification_metrics(probs, truth)
    return MetricSet.from_rates(
        ber_pre=bit_error_rate(truth, pre_bits),
        ber_post=bit_error_rate(truth, post_bits),
        ber_map=bit_error_rate(truth, map_bits),
        accuracy=accuracy, precision=precision, recall=recall,
        n_bits=len(truth))


def run_sweep_point(channel_template, train_cfg, snr_db, index, n_bits,
                    window_length=64):
    """Train and evaluate one SNR point; failures land in the row."""
    seeds = _point_seeds(channel_template.seed, index)
    config = channel_template.replace(snr_db=float(snr_db))
    started = time.perf_counter()
    try:
        train_real = simulate_link(config.replace(seed=seeds["train_stream"]), n_bits)
        dataset = make_windows(train_real, window_length)
        estimator = _build_estimator(train_cfg, window_length, seeds["train_run"])
        estimator.fit(None, None, dataset=dataset)
        test_real = simulate_link(config.replace(seed=seeds["test_stream"]), n_bits)
        metrics = evaluate_detectors(estimator, test_real, window_length)
        return SweepRow(snr_db=float(snr_db), metrics=metrics,
                        train_seconds=time.perf_counter() - started,
                        epochs=estimator.history_.n_epochs())
    except (LumeneqError, ValueError) as exc:
        return SweepRow(snr_db=float(snr_db), metrics=None,
                        train_seconds=time.perf_counter() - started,
                        error=f"{type(exc).__name__}: {exc}")


def _pooled_datasets(channel_template, snr_list, n_bits, window_length):
    """Per-SNR contiguous splits, concatenated: one model for all SNRs."""
    trains, vals = [], []
    for index, snr in enumerate(snr_list):
        seeds = _point_seeds(channel_template.seed, index)
        config = channel_template.replace(snr_db=float(snr),
                                          seed=seeds["train_stream"])
        dataset = make_windows(simulate_link(config, n_bits), window_length)
        tr, va = contiguous_split(dataset, 0.8)
        trains.append(tr)
        vals.append(va)

    def concat(parts):
        return WindowDataset(
            inputs=np.concatenate([p.inputs for p in parts]),
            targets=np.concatenate([p.targets for p in parts]),
            centers=np.arange(sum(len(p) for p in parts)),
            center_offset=window_length // 2,
            source_fingerprint="pooled", source_seed=channel_template.seed)

    return concat(trains), concat(vals)


def run_snr_sweep(channel_template, train_cfg, snr_list=DEFAULT_SNR_LIST,
                  n_bits=50000, window_length=64, parallel=1,
                  mixed_snr=False):
    """Full comparison across SNR points.

    Point results depend only on (master seed, point index), so the
    parallel schedule cannot change them.
    """
    snr_list = list(snr_list)
    if len(snr_list) == 0:
        raise ValueError("snr_list must not be empty")
    if sorted(snr_list) != snr_list or len(set(snr_list)) != len(snr_list):
        raise ValueError("snr_list must be strictly increasing")
    master = channel_template.seed

    if mixed_snr:
        rows = _run_mixed(channel_template, train_cfg, snr_list, n_bits,
                          window_length)
    elif parallel > 1:
        with ProcessPoolExecutor(max_workers=parallel) as pool:
            futures = [
                pool.submit(run_sweep_point, channel_template, train_cfg,
                            snr, i, n_bits, window_length)
                for i, snr in enumerate(snr_list)
            ]
            rows = [f.result() for f in futures]
    else:
        rows = [
            run_sweep_point(channel_template, train_cfg, snr, i, n_bits,
                            window_length)
            for i, snr in enumerate(snr_list)
        ]
    return SweepReport(rows=rows, channel_template=channel_template,
                       train_config=train_cfg, n_bits=n_bits,
                       master_seed=master, mixed_snr=mixed_snr)


def _run_mixed(channel_template, train_cfg, snr_list, n_bits, window_length):
    train_set, val_set = _pooled_datasets(channel_template, snr_list, n_bits,
                                          window_length)
    run_seed = derive_seed(channel_template.seed, "sweep-mixed-run")
    estimator = _build_estimator(train_cfg, window_length, run_seed)
    started = time.perf_counter()
    try:
        train_pooled = standardize(train_set)
        stats = (train_pooled.norm_mean, train_pooled.norm_std)
        val_pooled = standardize(val_set, stats)
        from .model import init_model
        from .training import train_equalizer
        model = init_model(run_seed, estimator._architecture())
        model, history = train_equalizer(model, train_pooled, val_pooled,
                                         estimator._train_config())
        estimator.model_ = model
        estimator.history_ = history
        estimator.norm_mean_, estimator.norm_std_ = stats
        estimator.classes_ = np.array([0, 1], dtype=np.int8)
    except (LumeneqError, ValueError) as exc:
        message = f"{type(exc).__name__}: {exc}"
        return [SweepRow(snr_db=float(s), metrics=None, error=message)
                for s in snr_list]
    train_seconds = time.perf_counter() - started
    rows = []
    for index, snr in enumerate(snr_list):
        seeds = _point_seeds(channel_template.seed, index)
        config = channel_template.replace(snr_db=float(snr),
                                          seed=seeds["test_stream"])
        test_real = simulate_link(config, n_bits)
        metrics = evaluate_detectors(estimator, test_real, window_length)
        rows.append(SweepRow(snr_db=float(snr), metrics=metrics,
                             train_seconds=train_seconds,
                             epochs=estimator.history_.n_epochs()))
    return rows


CSV_HEADER = "snr_db,ber_pre,ber_post,ber_map,accuracy,precision,recall,n_bits,stderr_ber"


def _format_row(row):
    if row.metrics is None:
        rates = ["nan"] * 6 + ["0", "nan"]
    else:
        m = row.metrics
        rates = [f"{m.ber_pre:.9g}", f"{m.ber_post:.9g}", f"{m.ber_map:.9g}",
                 f"{m.accuracy:.9g}", f"{m.precision:.9g}", f"{m.recall:.9g}",
                 str(m.n_bits), f"{m.stderr_ber:.9g}"]
    return f"{row.snr_db:.9g}," + ",".join(rates)


def report_csv_text(report):
    lines = [CSV_HEADER]
    lines.extend(_format_row(row) for row in report.rows)
    return "\n".join(lines) + "\n"


def report_structured_text(report):
    """CSV table preceded by the config snapshot and seeds."""
    lines = ["# snr sweep report"]
    lines.append(report.channel_template.canonical_text().rstrip("\n"))
    lines.append(report.train_config.canonical_text().rstrip("\n"))
    lines.append(f"run.master_seed = {report.master_seed}")
    lines.append(f"run.n_bits = {report.n_bits}")
    lines.append(f"run.mixed_snr = {report.mixed_snr}")
    for row in report.rows:
        if row.error:
            lines.append(f"# point {row.snr_db:g} dB failed: {row.error}")
    lines.append("")
    lines.append(report_csv_text(report).rstrip("\n"))
    return "\n".join(lines) + "\n"


def export_report(report, path, fmt="csv"):
    """Write the report; identical reports export byte-identically."""
    if fmt == "csv":
        text = report_csv_text(report)
    elif fmt in ("text", "structured-text"):
        text = report_structured_text(report)
    else:
        raise ValueError(f"unknown report format {fmt!r}")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    return path
