"""Mini-batch training with plateau LR decay, early stopping and restore-best."""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ContractViolation, TrainingDiverged
from .metrics import classification_metrics
from .optim import Adam, PlateauPolicy
from .rng import stream


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-4
    batch_size: int = 128
    max_epochs: int = 100
    early_stop_patience: int = 10
    lr_factor: float = 0.5
    lr_patience: int = 3
    min_lr: float = 1e-6
    split_ratio: float = 0.8
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.split_ratio < 1.0:
            raise ValueError("split_ratio must lie in (0, 1)")
        if self.early_stop_patience < 1 or self.lr_patience < 1:
            raise ValueError("patience values must be >= 1")
        if self.batch_size < 2:
            raise ValueError("batch_size must be >= 2 (batch normalization)")

    def canonical_text(self):
        lines = []
        for name in ("learning_rate", "batch_size", "max_epochs",
                     "early_stop_patience", "lr_factor", "lr_patience",
                     "min_lr", "split_ratio", "seed"):
            lines.append(f"train.{name} = {getattr(self, name)!r}")
        return "\n".join(lines) + "\n"


@dataclass
class TrainHistory:
    train_loss: list = field(default_factory=list)
    val_loss: list = field(default_factory=list)
    val_accuracy: list = field(default_factory=list)
    val_precision: list = field(default_factory=list)
    val_recall: list = field(default_factory=list)
    learning_rate: list = field(default_factory=list)
    best_epoch: int = -1

    def n_epochs(self):
        return len(self.val_loss)


def evaluate_loss_and_metrics(model, dataset, batch_size=1024):
    """Inference-mode loss and classification metrics on a dataset."""
    probs = model.predict_proba(dataset.inputs, batch_size=batch_size)
    loss = model.loss(probs, dataset.targets)
    acc, prec, rec = classification_metrics(probs, dataset.targets)
    return loss, acc, prec, rec, probs


def train_equalizer(model, train_set, val_set, cfg):
    """Train in place; returns the model (restored to its best epoch) and history.

    Deterministic given (model init, datasets, cfg.seed): batch shuffling
    and dropout masks draw from named streams of the config seed.
    """
    if train_set.norm_mean is None or val_set.norm_mean is None:
        raise ContractViolation("datasets must be standardized before training")
    if (train_set.norm_mean != val_set.norm_mean
            or train_set.norm_std != val_set.norm_std):
        raise ContractViolation("validation must reuse the training normalization")
    shuffle_rng = stream(cfg.seed, "shuffle")
    dropout_rng = stream(cfg.seed, "dropout")
    policy = PlateauPolicy(cfg.learning_rate, factor=cfg.lr_factor,
                           lr_patience=cfg.lr_patience,
                           stop_patience=cfg.early_stop_patience,
                           min_lr=cfg.min_lr)
    optimizer = Adam(learning_rate=cfg.learning_rate)
    history = TrainHistory()
    best_snapshot = model.clone_variables()
    n = len(train_set)
    inputs, targets = train_set.inputs, train_set.targets
    for epoch in range(cfg.max_epochs):
        optimizer.learning_rate = policy.lr
        order = shuffle_rng.permutation(n)
        epoch_loss = 0.0
        n_batches = 0
        for lo in range(0, n - 1, cfg.batch_size):
            idx = order[lo:lo + cfg.batch_size]
            if len(idx) < 2:
                continue   # batchnorm cannot digest a single sample
            probs = model.forward(inputs[idx], train=True, rng=dropout_rng)
            loss = model.loss(probs, targets[idx])
            if not math.isfinite(loss):
                raise TrainingDiverged(
                    f"non-finite training loss at epoch {epoch}", history=history)
            model.backward(probs, targets[idx])
            optimizer.step(model.params(), model.grads())
            epoch_loss += loss
            n_batches += 1
        val_loss, acc, prec, rec, _ = evaluate_loss_and_metrics(model, val_set)
        if not math.isfinite(val_loss):
            raise TrainingDiverged(
                f"non-finite validation loss at epoch {epoch}", history=history)
        history.train_loss.append(epoch_loss / max(n_batches, 1))
        history.val_loss.append(val_loss)
        history.val_accuracy.append(acc)
        history.val_precision.append(prec)
        history.val_recall.append(rec)
        history.learning_rate.append(policy.lr)
        improved, stop = policy.update(epoch, val_loss)
        if improved:
            best_snapshot = model.clone_variables()
        if stop:
            break
    history.best_epoch = policy.best_epoch
    model.restore_variables(best_snapshot)
    return model, history


def predict_bits(model, inputs, threshold=0.5, batch_size=1024):
    """Inference probabilities and thresholded bits for standardized windows."""
    probs = model.predict_proba(inputs, batch_size=batch_size)
    return probs, (probs >= threshold).astype(np.int8)
