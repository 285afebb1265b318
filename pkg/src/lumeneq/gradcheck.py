"""Finite-difference verification of the analytic gradients.

Runs the network in 64-bit precision with dropout inactive and batch
normalization frozen on its running statistics, then compares central
differences of the loss against the backward pass on a sampled set of
coordinates covering every parameter tensor.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ContractViolation
from .layers import BatchNorm, Conv1D, Dense, Dropout, MaxPool1D
from .model import PROB_CLIP, TINY_ARCH, EqualizerNet
from .rng import stream


@dataclass
class GradCheckReport:
    max_rel_error: float
    n_coordinates: int
    worst_tensor: str

    def passed(self, tolerance=1e-4):
        return self.max_rel_error < tolerance


def relative_error(analytic, numeric):
    return abs(analytic - numeric) / max(abs(analytic), abs(numeric), 1e-12)


def central_difference(loss_fn, tensor, index, h):
    """(L(x+h) - L(x-h)) / 2h for one coordinate of one tensor."""
    original = tensor.flat[index]
    tensor.flat[index] = original + h
    plus = loss_fn()
    tensor.flat[index] = original - h
    minus = loss_fn()
    tensor.flat[index] = original
    return (plus - minus) / (2.0 * h)


def _kink_margin(model, probs):
    """Distance of the forward pass to its nearest non-smooth point.

    Finite differences are only trustworthy when no ReLU flips sign, no
    pooling argmax switches and no probability crosses the loss clip while
    a parameter moves by +-h.  Pooling windows whose entries are exactly
    equal stay equal under small perturbations (their sources are jointly
    ReLU-clamped), so only strictly positive gaps are constraining.
    """
    margin = np.inf
    for layer in model.layers:
        if isinstance(layer, Conv1D):
            _, pre, _ = layer._cache
            margin = min(margin, float(np.abs(pre).min()))
        elif isinstance(layer, Dense) and layer.activation == "relu":
            _, pre, _ = layer._cache
            margin = min(margin, float(np.abs(pre).min()))
        elif isinstance(layer, MaxPool1D):
            x, _, shape = layer._cache
            b, t, c = shape
            t_out = t // layer.pool
            windows = x[:, :t_out * layer.pool, :].reshape(b, t_out, layer.pool, c)
            top2 = np.sort(windows, axis=2)[:, :, -2:, :]
            gaps = top2[:, :, 1, :] - top2[:, :, 0, :]
            positive = gaps[gaps > 0]
            if positive.size:
                margin = min(margin, float(positive.min()))
    clip_gap = min(float(probs.min()) - PROB_CLIP, (1.0 - PROB_CLIP) - float(probs.max()))
    return min(margin, clip_gap)


def _warm_running_stats(model, rng, batch_size, n_batches=3):
    """Populate batch-norm running statistics so the frozen mode is non-trivial."""
    length = model.arch.window_length
    drop_rng = stream(0, "gradcheck-warmup")
    for _ in range(n_batches):
        x = rng.normal(0.0, 1.0, size=(max(batch_size, 2), length, 1))
        model.forward(x.astype(model.dtype), train=True, rng=drop_rng)


def _sample_coordinates(params, analytic, target, rng, gradient_floor):
    """At least two coordinates per tensor, the rest proportional to size.

    Coordinates whose analytic gradient sits below ``gradient_floor`` are
    excluded: central differences bottom out at eps*|loss|/2h, so a
    relative comparison is meaningless for gradients near zero.  A tensor
    with no eligible coordinate is skipped (its layer kind is still
    covered through sibling tensors).
    """
    total = sum(p.size for _, p in params)
    picks = []
    for name, p in params:
        eligible = np.flatnonzero(np.abs(analytic[name].reshape(-1)) > gradient_floor)
        if eligible.size == 0:
            continue
        k = min(eligible.size, 2 + int(round(target * p.size / total)))
        idx = rng.choice(eligible, size=k, replace=False)
        picks.extend((name, int(i)) for i in idx)
    return picks


def gradcheck_model(arch=TINY_ARCH, batch_size=4, n_coordinates=200,
                    h=1e-5, seed=0, max_resamples=25, kink_margin=3e-4,
                    gradient_floor=3e-7):
    """Check every layer kind's gradients on a small 64-bit model."""
    model = EqualizerNet(arch, dtype=np.float64)
    model.init_params(stream(seed, "init"))
    warm_rng = stream(seed, "gradcheck-stats")
    _warm_running_stats(model, warm_rng, batch_size)

    data_rng = stream(seed, "gradcheck-data")
    length = arch.window_length
    x = labels = None
    for _ in range(max_resamples):
        candidate = data_rng.normal(0.0, 1.0, size=(batch_size, length, 1))
        cand_labels = data_rng.integers(0, 2, size=batch_size).astype(np.int8)
        probs = model.forward(candidate, train=False)
        if _kink_margin(model, probs) > kink_margin:
            x, labels = candidate, cand_labels
            break
    if x is None:
        raise ContractViolation(
            "could not find an input batch clear of ReLU/pool/clip kinks")

    probs_a = model.forward(x, train=False)
    probs_b = model.forward(x, train=False)
    if not np.array_equal(probs_a, probs_b):
        raise ContractViolation("forward pass is not deterministic in infer mode")
    model.backward(probs_b, labels)
    analytic = {name: g.copy() for name, g in model.grads()}

    def loss_fn():
        return model.loss(model.forward(x, train=False), labels)

    params = model.params()
    picks = _sample_coordinates(params, analytic, n_coordinates,
                                stream(seed, "gradcheck-pick"), gradient_floor)
    by_name = dict(params)
    worst = 0.0
    worst_tensor = ""
    for name, index in picks:
        numeric = central_difference(loss_fn, by_name[name], index, h)
        err = relative_error(float(analytic[name].flat[index]), numeric)
        if err > worst:
            worst = err
            worst_tensor = name
    return GradCheckReport(max_rel_error=worst, n_coordinates=len(picks),
                           worst_tensor=worst_tensor)
