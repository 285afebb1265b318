"""Command-line interface: simulate, train, evaluate, sweep, gradcheck,
oracle-check.

Exit codes: 0 success, 1 validation/config error, 2 runtime failure,
3 acceptance-threshold failure (gradcheck / oracle-check).
"""

import argparse
import os
import sys
import traceback
from dataclasses import dataclass

import numpy as np

from .channel import ChannelConfig, export_link_csv, simulate_link
from .data import make_windows
from .errors import LumeneqError
from .estimator import NeuralEqualizer
from .gradcheck import gradcheck_model
from .mapdetect import exhaustive_map_oracle, map_sequence_detector
from .model import FULL_ARCH, TINY_ARCH
from .rng import derive_seed, stream
from .sweep import (DEFAULT_SNR_LIST, evaluate_detectors, export_report,
                    run_snr_sweep)
from .training import TrainConfig

GRADCHECK_TOLERANCE = 1e-4

CHANNEL_KEYS = {
    "channel.snr_db": float,
    "channel.multipath_delay": int,
    "channel.multipath_gain": float,
    "channel.led_steepness": float,
    "channel.led_midpoint": float,
    "channel.flip_prob": float,
    "channel.responsivity": float,
    "channel.alignment_offset": int,
}
TRAIN_KEYS = {
    "train.learning_rate": float,
    "train.batch_size": int,
    "train.max_epochs": int,
    "train.early_stop_patience": int,
    "train.lr_factor": float,
    "train.lr_patience": int,
    "train.min_lr": float,
    "train.split_ratio": float,
}
RUN_KEYS = {
    "run.seed": int,
    "run.bits": int,
    "run.profile": str,
    "run.snr_list": str,
    "run.parallel": int,
    "run.mixed_snr": lambda v: v.lower() in ("1", "true", "yes"),
}
ALL_KEYS = {**CHANNEL_KEYS, **TRAIN_KEYS, **RUN_KEYS}

PROFILES = {
    "full": {"run.bits": 50000, "train.max_epochs": 100},
    "desk": {"run.bits": 20000, "train.max_epochs": 30},
    "gradcheck-tiny": {"run.bits": 2000, "train.max_epochs": 10},
}


@dataclass
class RunConfig:
    """Fully resolved settings for one invocation."""

    values: dict

    def channel(self, seed=None):
        v = self.values
        return ChannelConfig(
            snr_db=v["channel.snr_db"],
            multipath_delay=v["channel.multipath_delay"],
            multipath_gain=v["channel.multipath_gain"],
            led_steepness=v["channel.led_steepness"],
            led_midpoint=v["channel.led_midpoint"],
            flip_prob=v["channel.flip_prob"],
            responsivity=v["channel.responsivity"],
            alignment_offset=v["channel.alignment_offset"],
            seed=self.seed if seed is None else seed,
        )

    def train(self):
        v = self.values
        return TrainConfig(
            learning_rate=v["train.learning_rate"],
            batch_size=v["train.batch_size"],
            max_epochs=v["train.max_epochs"],
            early_stop_patience=v["train.early_stop_patience"],
            lr_factor=v["train.lr_factor"],
            lr_patience=v["train.lr_patience"],
            min_lr=v["train.min_lr"],
            split_ratio=v["train.split_ratio"],
            seed=self.seed,
        )

    @property
    def seed(self):
        return self.values["run.seed"]

    @property
    def bits(self):
        return self.values["run.bits"]

    @property
    def arch(self):
        return TINY_ARCH if self.values["run.profile"] == "gradcheck-tiny" else FULL_ARCH

    def snr_list(self):
        text = self.values["run.snr_list"]
        return [float(s) for s in text.split(",") if s.strip() != ""]

    def canonical_text(self):
        lines = [f"{key} = {self.values[key]}" for key in sorted(self.values)]
        return "\n".join(lines) + "\n"


def default_values():
    return {
        "channel.snr_db": 10.0,
        "channel.multipath_delay": 2,
        "channel.multipath_gain": 0.3,
        "channel.led_steepness": 5.0,
        "channel.led_midpoint": 0.5,
        "channel.flip_prob": 0.2,
        "channel.responsivity": 1.0,
        "channel.alignment_offset": 0,
        "train.learning_rate": 1e-4,
        "train.batch_size": 128,
        "train.max_epochs": 100,
        "train.early_stop_patience": 10,
        "train.lr_factor": 0.5,
        "train.lr_patience": 3,
        "train.min_lr": 1e-6,
        "train.split_ratio": 0.8,
        "run.seed": 0,
        "run.bits": 50000,
        "run.profile": "full",
        "run.snr_list": ",".join(str(s) for s in DEFAULT_SNR_LIST),
        "run.parallel": 1,
        "run.mixed_snr": False,
    }


def parse_config_file(path):
    values = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected 'key = value', got {line!r}")
            key, _, value = line.partition("=")
            key = key.strip()
            if key not in ALL_KEYS:
                raise ValueError(f"{path}:{lineno}: unknown config key {key!r}")
            values[key] = ALL_KEYS[key](value.strip())
    return values


FLAG_TO_KEY = {
    "snr_db": "channel.snr_db",
    "bits": "run.bits",
    "flip_prob": "channel.flip_prob",
    "multipath_delay": "channel.multipath_delay",
    "multipath_gain": "channel.multipath_gain",
    "alignment_offset": "channel.alignment_offset",
    "seed": "run.seed",
    "parallel": "run.parallel",
    "snr_list": "run.snr_list",
}


def resolve_config(args):
    """defaults < config file < environment seed < explicit flags."""
    values = default_values()
    if getattr(args, "config", None):
        values.update(parse_config_file(args.config))
    env_seed = os.environ.get("LUMENEQ_SEED")
    if env_seed is not None and getattr(args, "seed", None) is None \
            and "run.seed" not in _file_keys(args):
        values["run.seed"] = int(env_seed)
    profile = getattr(args, "profile", None)
    if profile:
        values["run.profile"] = profile
    values.update(PROFILES.get(values["run.profile"], {}))
    if profile or "run.profile" in _file_keys(args):
        pass  # profile bits/epochs may still be overridden by explicit flags below
    for flag, key in FLAG_TO_KEY.items():
        value = getattr(args, flag, None)
        if value is not None:
            values[key] = ALL_KEYS[key](str(value))
    if getattr(args, "mixed_snr", False):
        values["run.mixed_snr"] = True
    return RunConfig(values=values)


def _file_keys(args):
    if getattr(args, "config", None):
        try:
            return parse_config_file(args.config).keys()
        except (OSError, ValueError):
            return ()
    return ()


def write_sidecar(out_path, run_config):
    side = f"{out_path}.meta.txt"
    with open(side, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(run_config.canonical_text())
    return side


def build_parser():
    parser = argparse.ArgumentParser(
        prog="lumeneq",
        description="Simulated OOK visible-light link with a neural equalizer.")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, needs_out=False):
        p.add_argument("--seed", type=int, default=None,
                       help="master seed (default 0; env LUMENEQ_SEED as fallback)")
        p.add_argument("--config", default=None,
                       help="config file with flat dotted keys, e.g. channel.snr_db = 10")
        p.add_argument("--profile", choices=sorted(PROFILES),
                       default=None, help="full: 50000 bits / 100 epochs; "
                       "desk: 20000 bits / 30 epochs; gradcheck-tiny: toy model")
        if needs_out:
            p.add_argument("--out", required=True, help="output file path")

    def add_channel(p):
        p.add_argument("--snr-db", dest="snr_db", type=float, default=None,
                       help="signal-to-noise ratio in dB (default 10)")
        p.add_argument("--bits", type=int, default=None,
                       help="stream length in bits (default 50000)")
        p.add_argument("--flip-prob", dest="flip_prob", type=float, default=None,
                       help="bit-source transition probability (default 0.2)")
        p.add_argument("--multipath-delay", dest="multipath_delay", type=int,
                       default=None, help="echo delay in samples (default 2)")
        p.add_argument("--multipath-gain", dest="multipath_gain", type=float,
                       default=None, help="echo attenuation (default 0.3)")
        p.add_argument("--alignment-offset", dest="alignment_offset", type=int,
                       default=None,
                       help="misalign the decision instant by this many samples (default 0)")

    p = sub.add_parser("simulate", help="emit one link realization as CSV")
    add_common(p, needs_out=True)
    add_channel(p)

    p = sub.add_parser("train", help="train one equalizer at one SNR point")
    add_common(p, needs_out=True)
    add_channel(p)

    p = sub.add_parser("evaluate",
                       help="evaluate a saved model on a fresh test stream")
    add_common(p)
    add_channel(p)
    p.add_argument("--model", required=True, help="model file from `train`")

    p = sub.add_parser("sweep", help="train and evaluate across an SNR range")
    add_common(p, needs_out=True)
    add_channel(p)
    p.add_argument("--snr-list", dest="snr_list", default=None,
                   help="comma-separated SNR points (default 0,2,...,20)")
    p.add_argument("--parallel", type=int, default=None,
                   help="concurrent sweep points (default 1)")
    p.add_argument("--mixed-snr", dest="mixed_snr", action="store_true",
                   help="train one model on all SNR points pooled")
    p.add_argument("--format", choices=("csv", "structured-text"), default="csv",
                   help="report format (default csv)")

    p = sub.add_parser("gradcheck",
                       help="finite-difference check of the analytic gradients")
    add_common(p)
    p.add_argument("--step", type=float, default=1e-5,
                   help="finite-difference step (default 1e-5)")
    p.add_argument("--coords", type=int, default=200,
                   help="minimum sampled coordinates (default 200)")

    p = sub.add_parser("oracle-check",
                       help="Viterbi detector vs exhaustive enumeration")
    add_common(p)
    add_channel(p)
    p.add_argument("--instances", type=int, default=100,
                   help="instances per SNR point (default 100)")
    p.add_argument("--oracle-bits", dest="oracle_bits", type=int, default=10,
                   help="bits per instance, <= 14 (default 10)")
    return parser


def cmd_simulate(args):
    cfg = resolve_config(args)
    realization = simulate_link(cfg.channel(), cfg.bits)
    export_link_csv(realization, args.out)
    write_sidecar(args.out, cfg)
    print(f"wrote {cfg.bits} samples to {args.out} "
          f"(sigma={realization.noise_sigma:.6g})")
    return 0


def cmd_train(args):
    cfg = resolve_config(args)
    channel = cfg.channel(seed=derive_seed(cfg.seed, "train-stream"))
    realization = simulate_link(channel, cfg.bits)
    dataset = make_windows(realization, cfg.arch.window_length)
    estimator = NeuralEqualizer(
        window_length=cfg.arch.window_length,
        conv_filters=cfg.arch.conv_filters,
        kernel_sizes=cfg.arch.kernel_sizes,
        lstm_units=cfg.arch.lstm_units,
        dense_units=cfg.arch.dense_units,
        dropout_rates=cfg.arch.dropout_rates,
        l2=cfg.arch.l2,
        learning_rate=cfg.train().learning_rate,
        batch_size=cfg.train().batch_size,
        max_epochs=cfg.train().max_epochs,
        early_stop_patience=cfg.train().early_stop_patience,
        lr_factor=cfg.train().lr_factor,
        lr_patience=cfg.train().lr_patience,
        min_lr=cfg.train().min_lr,
        split_ratio=cfg.train().split_ratio,
        seed=cfg.seed,
    )
    estimator.fit(None, None, dataset=dataset)
    estimator.save(args.out, channel_fingerprint=cfg.channel().fingerprint())
    history = estimator.history_
    hist_path = f"{args.out}.history.csv"
    with open(hist_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("epoch,train_loss,val_loss,val_accuracy,val_precision,"
                 "val_recall,learning_rate\n")
        for e in range(history.n_epochs()):
            fh.write(f"{e},{history.train_loss[e]:.9g},{history.val_loss[e]:.9g},"
                     f"{history.val_accuracy[e]:.9g},{history.val_precision[e]:.9g},"
                     f"{history.val_recall[e]:.9g},{history.learning_rate[e]:.9g}\n")
    write_sidecar(args.out, cfg)
    print(f"trained {history.n_epochs()} epochs "
          f"(best epoch {history.best_epoch}, "
          f"val loss {min(history.val_loss):.6g}); model at {args.out}")
    return 0


def cmd_evaluate(args):
    cfg = resolve_config(args)
    estimator = NeuralEqualizer.load(args.model)
    expected = cfg.channel().fingerprint()
    stored = None
    from .serialize import load_model
    _, fields = load_model(args.model)
    stored = fields.get("channel.fingerprint")
    if stored not in (None, "unspecified") and stored != expected:
        print(f"warning: model was trained on channel {stored}, "
              f"evaluating on {expected}", file=sys.stderr)
    test_channel = cfg.channel(seed=derive_seed(cfg.seed, "test-stream"))
    test_real = simulate_link(test_channel, cfg.bits)
    metrics = evaluate_detectors(estimator, test_real,
                                 estimator.window_length)
    print(f"snr_db={cfg.values['channel.snr_db']:g} n_bits={metrics.n_bits}")
    print(f"ber_pre={metrics.ber_pre:.9g}")
    print(f"ber_post={metrics.ber_post:.9g}")
    print(f"ber_map={metrics.ber_map:.9g}")
    print(f"accuracy={metrics.accuracy:.9g} precision={metrics.precision:.9g} "
          f"recall={metrics.recall:.9g}")
    return 0


def cmd_sweep(args):
    cfg = resolve_config(args)
    report = run_snr_sweep(
        cfg.channel(), cfg.train(), snr_list=cfg.snr_list(),
        n_bits=cfg.bits, window_length=cfg.arch.window_length,
        parallel=cfg.values["run.parallel"],
        mixed_snr=cfg.values["run.mixed_snr"])
    export_report(report, args.out, fmt=args.format)
    write_sidecar(args.out, cfg)
    failures = [row for row in report.rows if row.error]
    for row in failures:
        print(f"point {row.snr_db:g} dB failed: {row.error}", file=sys.stderr)
    print(f"wrote {len(report.rows)}-point report to {args.out}")
    return 2 if len(failures) == len(report.rows) else 0


def cmd_gradcheck(args):
    report = gradcheck_model(h=args.step, n_coordinates=args.coords,
                             seed=0 if args.seed is None else args.seed)
    print(f"max relative error {report.max_rel_error:.3e} over "
          f"{report.n_coordinates} coordinates (worst: {report.worst_tensor})")
    if not report.passed(GRADCHECK_TOLERANCE):
        print(f"FAIL: tolerance {GRADCHECK_TOLERANCE:g}", file=sys.stderr)
        return 3
    return 0


def cmd_oracle_check(args):
    cfg = resolve_config(args)
    n = args.oracle_bits
    mismatches = 0
    total = 0
    for snr_db in (0.0, 10.0, 20.0):
        for k in range(args.instances):
            seed = derive_seed(cfg.seed, "oracle-check", int(snr_db), k)
            config = cfg.channel(seed=seed).replace(snr_db=snr_db)
            realization = simulate_link(config, n)
            viterbi = map_sequence_detector(realization.received, config,
                                            realization.noise_sigma)
            brute = exhaustive_map_oracle(realization.received, config,
                                          realization.noise_sigma)
            total += 1
            if not np.array_equal(viterbi, brute):
                mismatches += 1
    print(f"{total - mismatches}/{total} instances agree "
          f"(n={n}, snr 0/10/20 dB)")
    if mismatches:
        print(f"FAIL: {mismatches} disagreements", file=sys.stderr)
        return 3
    return 0


COMMANDS = {
    "simulate": cmd_simulate,
    "train": cmd_train,
    "evaluate": cmd_evaluate,
    "sweep": cmd_sweep,
    "gradcheck": cmd_gradcheck,
    "oracle-check": cmd_oracle_check,
}


def dispatch(argv):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 1
    try:
        return COMMANDS[args.command](args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except LumeneqError as exc:
        print(f"runtime failure: {exc}", file=sys.stderr)
        traceback.print_exc(file=sys.stderr)
        return 2


def main():
    sys.exit(dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()
