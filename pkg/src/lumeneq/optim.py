"""Adam optimizer and the plateau/early-stop bookkeeping used in training."""

import numpy as np

from ._kernels import adam_update


class Adam:
    """Bias-corrected Adam. Moments are keyed by parameter name."""

    def __init__(self, learning_rate=1e-4, beta1=0.9, beta2=0.999, eps=1e-8):
        self.learning_rate = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = {}
        self.v = {}

    def step(self, params, grads):
        """Update parameters in place. One call per mini-batch."""
        self.t += 1
        bias1 = 1.0 - self.beta1 ** self.t
        bias2 = 1.0 - self.beta2 ** self.t
        for (name, p), (gname, g) in zip(params, grads):
            if gname != name:
                raise ValueError(f"parameter/gradient order mismatch: {name} vs {gname}")
            if g.shape != p.shape:
                raise ValueError(f"{name}: gradient shape {g.shape} != {p.shape}")
            if name not in self.m:
                self.m[name] = np.zeros_like(p)
                self.v[name] = np.zeros_like(p)
            adam_update(p, np.ascontiguousarray(g), self.m[name], self.v[name],
                        self.learning_rate, self.beta1, self.beta2, self.eps,
                        bias1, bias2)


class PlateauPolicy:
    """Validation-loss plateau tracking: LR halving and early stop.

    Mirrors the usual reduce-on-plateau plus early-stopping pair: the LR is
    multiplied by ``factor`` after ``lr_patience`` epochs without a new best
    validation loss (never below ``min_lr``), and training stops after
    ``stop_patience`` epochs without improvement.  Improvement is strict.
    """

    def __init__(self, initial_lr, factor=0.5, lr_patience=3,
                 stop_patience=10, min_lr=1e-6):
        self.lr = initial_lr
        self.factor = factor
        self.lr_patience = lr_patience
        self.stop_patience = stop_patience
        self.min_lr = min_lr
        self.best_loss = np.inf
        self.best_epoch = -1
        self._lr_wait = 0
        self._stop_wait = 0

    def update(self, epoch, val_loss):
        """Record one epoch's validation loss.

        Returns (improved, stop): whether this epoch is the new best, and
        whether training should stop after it.
        """
        if val_loss < self.best_loss:
            self.best_loss = val_loss
            self.best_epoch = epoch
            self._lr_wait = 0
            self._stop_wait = 0
            return True, False
        self._lr_wait += 1
        self._stop_wait += 1
        if self._lr_wait >= self.lr_patience:
            self.lr = max(self.lr * self.factor, self.min_lr)
            self._lr_wait = 0
        return False, self._stop_wait >= self.stop_patience
