"""Equalizer network: sliding-window samples in, center-bit probability out.

Stack: Conv1D -> BN -> MaxPool -> Dropout -> Conv1D -> BN -> MaxPool ->
Dropout -> BiLSTM (sequences) -> BiLSTM (final state) -> Dense ReLU ->
Dropout -> Dense sigmoid.
"""

import hashlib
from dataclasses import dataclass, field

import numpy as np

from .errors import ContractViolation
from .layers import BatchNorm, BiLSTM, Conv1D, Dense, Dropout, MaxPool1D

PROB_CLIP = 1e-7


@dataclass(frozen=True)
class Architecture:
    """Hyperparameters that fix every tensor shape in the network."""

    window_length: int = 64
    conv_filters: tuple = (64, 128)
    kernel_sizes: tuple = (5, 3)
    lstm_units: tuple = (64, 32)
    dense_units: int = 32
    dropout_rates: tuple = (0.3, 0.3, 0.2)
    l2: float = 0.01

    def __post_init__(self):
        if self.window_length < 4:
            raise ValueError("window_length must be at least 4 (two pooling stages)")
        if len(self.conv_filters) != 2 or len(self.kernel_sizes) != 2:
            raise ValueError("exactly two convolution stages are supported")
        if len(self.lstm_units) != 2:
            raise ValueError("exactly two recurrent stages are supported")
        if len(self.dropout_rates) != 3:
            raise ValueError("three dropout rates expected (post-pool x2, post-dense)")

    def canonical_text(self):
        lines = []
        for name in ("window_length", "conv_filters", "kernel_sizes",
                     "lstm_units", "dense_units", "dropout_rates", "l2"):
            value = getattr(self, name)
            if isinstance(value, tuple):
                value = ",".join(repr(v) for v in value)
            else:
                value = repr(value)
            lines.append(f"arch.{name} = {value}")
        return "\n".join(lines) + "\n"

    def fingerprint(self):
        return hashlib.blake2b(self.canonical_text().encode(), digest_size=8).hexdigest()


FULL_ARCH = Architecture()
TINY_ARCH = Architecture(window_length=8, conv_filters=(2, 4), lstm_units=(3, 2))


class EqualizerNet:
    """The network with its parameters, forward pass, loss and gradients."""

    def __init__(self, arch=FULL_ARCH, dtype=np.float32):
        self.arch = arch
        self.dtype = np.dtype(dtype)
        f1, f2 = arch.conv_filters
        k1, k2 = arch.kernel_sizes
        u1, u2 = arch.lstm_units
        d1, d2, d3 = arch.dropout_rates
        self.layers = [
            Conv1D(1, f1, k1, l2=arch.l2, name="conv1"),
            BatchNorm(f1, name="bn1"),
            MaxPool1D(2, name="pool1"),
            Dropout(d1, name="drop1"),
            Conv1D(f1, f2, k2, l2=arch.l2, name="conv2"),
            BatchNorm(f2, name="bn2"),
            MaxPool1D(2, name="pool2"),
            Dropout(d2, name="drop2"),
            BiLSTM(f2, u1, return_sequences=True, name="bilstm1"),
            BiLSTM(2 * u1, u2, return_sequences=False, name="bilstm2"),
            Dense(2 * u2, arch.dense_units, activation="relu", name="dense1"),
            Dropout(d3, name="drop3"),
            Dense(arch.dense_units, 1, activation="sigmoid", name="out"),
        ]

    def init_params(self, rng):
        for layer in self.layers:
            layer.init_params(rng, self.dtype)
        return self

    def params(self):
        out = []
        for layer in self.layers:
            out.extend(layer.params())
        return out

    def grads(self):
        out = []
        for layer in self.layers:
            out.extend(layer.grads())
        return out

    def variables(self):
        out = []
        for layer in self.layers:
            out.extend(layer.variables())
        return out

    def forward(self, x, train=False, rng=None):
        """x: (batch, window_length, 1) -> probabilities (batch, 1) in (0, 1)."""
        x = np.asarray(x, dtype=self.dtype)
        if x.ndim != 3 or x.shape[1] != self.arch.window_length or x.shape[2] != 1:
            raise ValueError(
                f"expected (batch, {self.arch.window_length}, 1) input, got {x.shape}")
        out = x
        for layer in self.layers:
            out = layer.forward(out, train=train, rng=rng)
        return out

    def loss(self, probs, labels):
        """Mean binary cross-entropy plus the conv-kernel L2 penalty.

        Probabilities are clipped to [1e-7, 1 - 1e-7]; the clip saturates
        (zero gradient outside the window), matching the backward pass.
        """
        probs, labels = self._check_prob_labels(probs, labels)
        clipped = np.clip(probs, PROB_CLIP, 1.0 - PROB_CLIP)
        bce = -np.mean(labels * np.log(clipped) + (1.0 - labels) * np.log(1.0 - clipped))
        penalty = sum(layer.l2_penalty() for layer in self.layers)
        return float(bce) + float(penalty)

    def backward(self, probs, labels):
        """Backprop the loss for the batch of the most recent forward pass.

        ``probs`` must be that forward pass's output (layer caches are keyed
        to it).  Gradients land on the layers; returns the input gradient.
        """
        probs, labels = self._check_prob_labels(probs, labels)
        n = probs.shape[0]
        clipped = np.clip(probs, PROB_CLIP, 1.0 - PROB_CLIP)
        dclipped = (clipped - labels) / (clipped * (1.0 - clipped)) / n
        inside = (probs > PROB_CLIP) & (probs < 1.0 - PROB_CLIP)
        dout = (dclipped * inside).astype(probs.dtype).reshape(n, 1)
        for layer in reversed(self.layers):
            dout = layer.backward(dout)
        return dout

    @staticmethod
    def _check_prob_labels(probs, labels):
        probs = np.asarray(probs).reshape(-1)
        labels = np.asarray(labels).reshape(-1)
        if probs.shape != labels.shape:
            raise ValueError(f"{probs.shape} probabilities vs {labels.shape} labels")
        if not np.all((labels == 0) | (labels == 1)):
            raise ValueError("labels must be binary (0 or 1)")
        return probs, labels.astype(probs.dtype)

    def predict_proba(self, x, batch_size=4096):
        """Inference-mode probabilities, flattened to (n,)."""
        x = np.asarray(x, dtype=self.dtype)
        chunks = [
            self.forward(x[i:i + batch_size], train=False)[:, 0]
            for i in range(0, len(x), batch_size)
        ]
        return np.concatenate(chunks)

    def clone_variables(self):
        """Deep copy of every persistent tensor, keyed by name."""
        return {name: arr.copy() for name, arr in self.variables()}

    def restore_variables(self, snapshot):
        for name, arr in self.variables():
            arr[:] = snapshot[name]


def init_model(seed=0, arch=FULL_ARCH, dtype=np.float32):
    """Build a network with freshly initialized parameters.

    Conv/dense/LSTM kernels use Glorot-uniform draws from the "init"
    stream; biases start at zero except the LSTM forget gates (1.0).
    """
    from .rng import stream

    return EqualizerNet(arch, dtype=dtype).init_params(stream(seed, "init"))
