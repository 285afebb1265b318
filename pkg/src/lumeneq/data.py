"""Sliding-window supervision: received samples in, center bits out."""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np


@dataclass
class WindowDataset:
    """Windows of received samples paired with their center bits.

    ``centers`` records the bit index each window predicts; window k covers
    bit indices [centers[k] - center, centers[k] + length - center - 1], so
    overlap between two datasets is decidable from provenance alone.
    """

    inputs: np.ndarray            # (n, length, 1)
    targets: np.ndarray           # (n,)
    centers: np.ndarray           # (n,) bit index of each window's target
    center_offset: int            # position of the target bit inside a window
    source_fingerprint: str       # channel-config hash of the realization
    source_seed: int
    norm_mean: Optional[float] = None
    norm_std: Optional[float] = None

    def __post_init__(self):
        if len(self.inputs) != len(self.targets) or len(self.inputs) != len(self.centers):
            raise ValueError("inputs, targets and centers must have equal length")
        if self.norm_std is not None and self.norm_std <= 0:
            raise ValueError("norm_std must be positive")

    def __len__(self):
        return len(self.inputs)

    @property
    def window_length(self):
        return self.inputs.shape[1]

    def bit_range(self):
        """(first, last) bit index covered by any window, inclusive."""
        length = self.window_length
        first = int(self.centers.min()) - self.center_offset
        last = int(self.centers.max()) - self.center_offset + length - 1
        return first, last


def make_windows(realization, length=64, center=None):
    """Cut stride-1 sliding windows; window at n targets bits[n].

    The window covers received[n - center .. n + length - center - 1], so
    the target bit's own sample sits at the window's center position.
    """
    if center is None:
        center = length // 2
    if not 0 <= center < length:
        raise ValueError("center must lie inside the window")
    n = len(realization)
    if n <= length:
        raise ValueError(
            f"realization of {n} bits is too short for {length}-sample windows")
    received = np.asarray(realization.received, dtype=np.float32)
    # centers range over [center, n - (length - center)): the first and last
    # `center`-ish bits have no full window and are excluded from supervision
    centers = np.arange(center, n - (length - center))
    starts = centers - center
    windows = np.lib.stride_tricks.sliding_window_view(received, length)[starts]
    targets = np.asarray(realization.bits, dtype=np.int8)[centers]
    return WindowDataset(
        inputs=np.ascontiguousarray(windows, dtype=np.float32)[:, :, None],
        targets=targets,
        centers=centers,
        center_offset=center,
        source_fingerprint=realization.config.fingerprint(),
        source_seed=realization.config.seed,
    )


def contiguous_split(dataset, ratio=0.8):
    """Split on a bit-index boundary so train/validation never overlap.

    Windows fully inside the first ``ratio`` of bit indices train; windows
    fully inside the remainder validate; windows straddling the boundary
    (at most length-1 of them) are discarded.
    """
    if not 0.0 < ratio < 1.0:
        raise ValueError("split ratio must lie in (0, 1)")
    if len(dataset) == 0:
        raise ValueError("cannot split an empty dataset")
    length = dataset.window_length
    c = dataset.center_offset
    first_bit = int(dataset.centers.min()) - c
    last_bit = int(dataset.centers.max()) - c + length - 1
    n_bits = last_bit - first_bit + 1
    boundary = first_bit + int(np.floor(ratio * n_bits))
    lo = dataset.centers - c                  # first bit index of each window
    hi = lo + length - 1                      # last bit index of each window
    train_mask = hi < boundary
    val_mask = lo >= boundary
    if not train_mask.any() or not val_mask.any():
        raise ValueError(
            f"split ratio {ratio} leaves an empty side for {len(dataset)} windows")
    return _subset(dataset, train_mask), _subset(dataset, val_mask)


def _subset(dataset, mask):
    return WindowDataset(
        inputs=dataset.inputs[mask],
        targets=dataset.targets[mask],
        centers=dataset.centers[mask],
        center_offset=dataset.center_offset,
        source_fingerprint=dataset.source_fingerprint,
        source_seed=dataset.source_seed,
        norm_mean=dataset.norm_mean,
        norm_std=dataset.norm_std,
    )


def compute_norm_stats(dataset):
    """Scalar mean/std over every sample of a (training) dataset."""
    mean = float(np.mean(dataset.inputs, dtype=np.float64))
    std = float(np.std(dataset.inputs, dtype=np.float64))
    if std <= 0.0:
        raise ValueError("dataset is constant; standardization is degenerate")
    return mean, std


def standardize(dataset, stats=None):
    """Return a standardized copy.

    ``stats`` must be the training split's (mean, std) when standardizing
    anything other than the training split itself; passing None computes
    the stats from ``dataset`` (training use only).
    """
    if stats is None:
        stats = compute_norm_stats(dataset)
    mean, std = stats
    if std <= 0.0:
        raise ValueError("norm_std must be positive")
    out = _subset(dataset, slice(None))
    out.inputs = ((dataset.inputs - np.float32(mean)) / np.float32(std)).astype(np.float32)
    out.norm_mean = float(mean)
    out.norm_std = float(std)
    return out
