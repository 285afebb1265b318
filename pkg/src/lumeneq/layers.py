"""Neural layers with explicit forward passes and analytic gradients.

Every layer caches what its backward pass needs during forward; backward
consumes the cache, stores parameter gradients on the layer and returns the
gradient with respect to its input.  All arrays follow the (batch, time,
channels) convention until the recurrent stage collapses time.

Layers are dtype-agnostic: they compute in whatever precision their
parameters carry (float32 for training, float64 for gradient checking).
"""

import numpy as np

from ._kernels import bn_backward_dx, lstm_backward_step
from .errors import ContractViolation


def sigmoid(x):
    # tanh formulation: saturates cleanly at 0/1 without overflow, and the
    # recurrent fast path below applies the identical operation sequence.
    return 0.5 * (np.tanh(0.5 * x) + 1.0)


def relu(x):
    return np.maximum(x, 0.0)


def glorot_uniform(rng, fan_in, fan_out, shape, dtype):
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape).astype(dtype)


class Layer:
    """Base interface: parameter/variable registries plus forward/backward."""

    name = "layer"

    def params(self):
        """Ordered (name, array) pairs of trainable tensors."""
        return []

    def grads(self):
        """Ordered (name, array) pairs matching :meth:`params`."""
        return []

    def variables(self):
        """All persistent tensors (trainable plus running statistics)."""
        return self.params()

    def init_params(self, rng, dtype):
        pass

    def l2_penalty(self):
        return 0.0

    def forward(self, x, train=False, rng=None):
        raise NotImplementedError

    def backward(self, dout):
        raise NotImplementedError


class Conv1D(Layer):
    """Same-padded stride-1 1-D convolution with ReLU activation.

    kernel shape (kernel_size, in_channels, filters); output time length
    equals input time length.
    """

    def __init__(self, in_channels, filters, kernel_size, l2=0.0, name="conv"):
        if kernel_size % 2 != 1:
            raise ValueError("kernel_size must be odd for same padding")
        self.in_channels = in_channels
        self.filters = filters
        self.kernel_size = kernel_size
        self.l2 = l2
        self.name = name
        self.kernel = None
        self.bias = None
        self.d_kernel = None
        self.d_bias = None
        self._cache = None

    def init_params(self, rng, dtype):
        k, cin, cout = self.kernel_size, self.in_channels, self.filters
        self.kernel = glorot_uniform(rng, k * cin, k * cout, (k, cin, cout), dtype)
        self.bias = np.zeros(cout, dtype=dtype)

    def params(self):
        return [(f"{self.name}.kernel", self.kernel), (f"{self.name}.bias", self.bias)]

    def grads(self):
        return [(f"{self.name}.kernel", self.d_kernel), (f"{self.name}.bias", self.d_bias)]

    def l2_penalty(self):
        if self.l2 == 0.0:
            return 0.0
        return self.l2 * float(np.sum(self.kernel.astype(np.float64) ** 2))

    def forward(self, x, train=False, rng=None):
        if x.ndim != 3 or x.shape[2] != self.in_channels:
            raise ValueError(
                f"{self.name}: expected (batch, time, {self.in_channels}), got {x.shape}")
        b, t, cin = x.shape
        k = self.kernel_size
        pad = (k - 1) // 2
        xpad = np.zeros((b, t + 2 * pad, cin), dtype=x.dtype)
        xpad[:, pad:pad + t, :] = x
        # im2col: columns grouped tap-major to match kernel.reshape(k*cin, -1)
        xcol = np.concatenate([xpad[:, j:j + t, :] for j in range(k)], axis=2)
        flat = xcol.reshape(b * t, k * cin)
        pre = flat @ self.kernel.reshape(k * cin, self.filters) + self.bias
        out = relu(pre).reshape(b, t, self.filters)
        self._cache = (flat, pre, x.shape)
        return out

    def backward(self, dout):
        if self._cache is None:
            raise ContractViolation(f"{self.name}: backward before forward")
        flat, pre, in_shape = self._cache
        b, t, cin = in_shape
        k = self.kernel_size
        dpre = dout.reshape(b * t, self.filters) * (pre > 0)
        kflat = self.kernel.reshape(k * cin, self.filters)
        self.d_kernel = (flat.T @ dpre).reshape(self.kernel.shape)
        if self.l2 != 0.0:
            self.d_kernel += (2.0 * self.l2) * self.kernel
        self.d_bias = dpre.sum(axis=0)
        dcol = (dpre @ kflat.T).reshape(b, t, k * cin)
        pad = (k - 1) // 2
        dxpad = np.zeros((b, t + 2 * pad, cin), dtype=dout.dtype)
        for j in range(k):
            dxpad[:, j:j + t, :] += dcol[:, :, j * cin:(j + 1) * cin]
        return dxpad[:, pad:pad + t, :]


class BatchNorm(Layer):
    """Per-channel normalization over (batch x time).

    Train mode normalizes with batch statistics and updates running
    statistics (momentum 0.99); infer mode normalizes with the running
    statistics, which also serves as the frozen mode for gradient checks.
    """

    def __init__(self, channels, eps=1e-3, momentum=0.99, name="bn"):
        self.channels = channels
        self.eps = eps
        self.momentum = momentum
        self.name = name
        self.gamma = None
        self.beta = None
        self.running_mean = None
        self.running_var = None
        self.d_gamma = None
        self.d_beta = None
        self._cache = None

    def init_params(self, rng, dtype):
        self.gamma = np.ones(self.channels, dtype=dtype)
        self.beta = np.zeros(self.channels, dtype=dtype)
        self.running_mean = np.zeros(self.channels, dtype=dtype)
        self.running_var = np.ones(self.channels, dtype=dtype)

    def params(self):
        return [(f"{self.name}.gamma", self.gamma), (f"{self.name}.beta", self.beta)]

    def grads(self):
        return [(f"{self.name}.gamma", self.d_gamma), (f"{self.name}.beta", self.d_beta)]

    def variables(self):
        return self.params() + [
            (f"{self.name}.running_mean", self.running_mean),
            (f"{self.name}.running_var", self.running_var),
        ]

    def forward(self, x, train=False, rng=None):
        b, t, c = x.shape
        flat = x.reshape(b * t, c)
        if train:
            if b < 2:
                raise ValueError(
                    f"{self.name}: batch of {b} is degenerate in train mode")
            mean = flat.mean(axis=0)
            xhat = flat - mean
            var = np.mean(xhat * xhat, axis=0)
            m = self.momentum
            self.running_mean[:] = m * self.running_mean + (1 - m) * mean
            self.running_var[:] = m * self.running_var + (1 - m) * var
        else:
            mean = self.running_mean
            var = self.running_var
            xhat = flat - mean
        inv_std = 1.0 / np.sqrt(var + self.eps)
        xhat *= inv_std
        out = self.gamma * xhat + self.beta
        self._cache = (xhat, inv_std, train, x.shape)
        return out.reshape(x.shape).astype(x.dtype, copy=False)

    def backward(self, dout):
        if self._cache is None:
            raise ContractViolation(f"{self.name}: backward before forward")
        xhat, inv_std, was_train, shape = self._cache
        b, t, c = shape
        dflat = dout.reshape(b * t, c)
        self.d_gamma = (dflat * xhat).sum(axis=0)
        self.d_beta = dflat.sum(axis=0)
        if was_train:
            n = b * t
            dx = np.empty_like(dflat)
            coef = self.gamma * inv_std / n
            bn_backward_dx(np.ascontiguousarray(dflat), xhat,
                           coef.astype(dout.dtype, copy=False),
                           self.d_beta, self.d_gamma, dout.dtype.type(n), dx)
        else:
            # frozen statistics: the normalization is a fixed affine map
            dx = dflat * (self.gamma * inv_std)
        return dx.reshape(shape).astype(dout.dtype, copy=False)


class MaxPool1D(Layer):
    """Non-overlapping max pooling along time; trailing remainder dropped.

    The argmax (ties resolved to the earlier position) is recorded for the
    backward scatter.  Pool size 2 runs on a fast elementwise path.
    """

    def __init__(self, pool=2, name="pool"):
        self.pool = pool
        self.name = name
        self._cache = None

    def forward(self, x, train=False, rng=None):
        b, t, c = x.shape
        if t < self.pool:
            raise ValueError(
                f"{self.name}: time length {t} shorter than pool size {self.pool}")
        t_out = t // self.pool
        if self.pool == 2:
            first = x[:, 0:t_out * 2:2, :]
            second = x[:, 1:t_out * 2:2, :]
            take_second = second > first
            out = np.where(take_second, second, first)
            self._cache = (x, take_second, x.shape)
            return out
        windows = x[:, :t_out * self.pool, :].reshape(b, t_out, self.pool, c)
        argmax = windows.argmax(axis=2)
        out = np.take_along_axis(windows, argmax[:, :, None, :], axis=2)[:, :, 0, :]
        self._cache = (x, argmax, x.shape)
        return out

    def backward(self, dout):
        if self._cache is None:
            raise ContractViolation(f"{self.name}: backward before forward")
        _, selector, shape = self._cache
        b, t, c = shape
        t_out = t // self.pool
        dx = np.zeros(shape, dtype=dout.dtype)
        if self.pool == 2:
            take_second = selector
            np.copyto(dx[:, 0:t_out * 2:2, :], dout, where=~take_second)
            np.copyto(dx[:, 1:t_out * 2:2, :], dout, where=take_second)
            return dx
        dwin = np.zeros((b, t_out, self.pool, c), dtype=dout.dtype)
        np.put_along_axis(dwin, selector[:, :, None, :], dout[:, :, None, :], axis=2)
        dx[:, :t_out * self.pool, :] = dwin.reshape(b, t_out * self.pool, c)
        return dx


class Dropout(Layer):
    """Inverted dropout: zeros with probability ``rate`` at train time and
    rescales survivors by 1/(1-rate); inference is the identity."""

    def __init__(self, rate, name="drop"):
        if not 0.0 <= rate < 1.0:
            raise ValueError(f"dropout rate must lie in [0, 1), got {rate}")
        self.rate = rate
        self.name = name
        self._scaled_mask = None

    def forward(self, x, train=False, rng=None):
        if not train or self.rate == 0.0:
            self._scaled_mask = None
            return x
        if rng is None:
            raise ContractViolation(f"{self.name}: train-mode forward needs an rng")
        keep = rng.random(x.shape, dtype=np.float32) >= self.rate
        self._scaled_mask = keep.astype(x.dtype) / (1.0 - self.rate)
        return x * self._scaled_mask

    def backward(self, dout):
        if self._scaled_mask is None:
            return dout
        return dout * self._scaled_mask


class Dense(Layer):
    """Affine map with optional relu/sigmoid activation."""

    def __init__(self, in_features, units, activation=None, name="dense"):
        if activation not in (None, "relu", "sigmoid"):
            raise ValueError(f"unsupported activation {activation!r}")
        self.in_features = in_features
        self.units = units
        self.activation = activation
        self.name = name
        self.weights = None
        self.bias = None
        self.d_weights = None
        self.d_bias = None
        self._cache = None

    def init_params(self, rng, dtype):
        self.weights = glorot_uniform(
            rng, self.in_features, self.units,
            (self.in_features, self.units), dtype)
        self.bias = np.zeros(self.units, dtype=dtype)

    def params(self):
        return [(f"{self.name}.weights", self.weights), (f"{self.name}.bias", self.bias)]

    def grads(self):
        return [(f"{self.name}.weights", self.d_weights), (f"{self.name}.bias", self.d_bias)]

    def forward(self, x, train=False, rng=None):
        if x.ndim != 2 or x.shape[1] != self.in_features:
            raise ValueError(
                f"{self.name}: expected (batch, {self.in_features}), got {x.shape}")
        pre = x @ self.weights + self.bias
        if self.activation == "relu":
            out = relu(pre)
        elif self.activation == "sigmoid":
            out = sigmoid(pre)
        else:
            out = pre
        self._cache = (x, pre, out)
        return out

    def backward(self, dout):
        if self._cache is None:
            raise ContractViolation(f"{self.name}: backward before forward")
        x, pre, out = self._cache
        if self.activation == "relu":
            dpre = dout * (pre > 0)
        elif self.activation == "sigmoid":
            dpre = dout * out * (1.0 - out)
        else:
            dpre = dout
        self.d_weights = x.T @ dpre
        self.d_bias = dpre.sum(axis=0)
        return dpre @ self.weights.T


GATES = ("f", "i", "c", "o")


def lstm_cell_step(x_t, h_prev, c_prev, weights, biases):
    """One recurrent step on the concatenated [h_prev, x_t] input.

    ``weights``/``biases`` map gate names f/i/c/o to arrays of shape
    (hidden + input, hidden) and (hidden,).  Returns (h_t, c_t).
    """
    xh = np.concatenate([h_prev, x_t], axis=-1)
    f = sigmoid(xh @ weights["f"] + biases["f"])
    i = sigmoid(xh @ weights["i"] + biases["i"])
    c_tilde = np.tanh(xh @ weights["c"] + biases["c"])
    c_t = f * c_prev + i * c_tilde
    o = sigmoid(xh @ weights["o"] + biases["o"])
    h_t = o * np.tanh(c_t)
    return h_t, c_t


class BiLSTM(Layer):
    """Two independent LSTM directions, hidden states concatenated.

    With ``return_sequences`` the output is (batch, time, 2*units); without
    it, the forward direction's final state is concatenated with the
    backward direction's state after it has consumed the reversed sequence.

    Both directions march in lockstep through one batched-matmul recurrence
    (the backward direction sees the time-reversed input), which keeps the
    per-step work in a few large array operations.
    """

    DIRECTIONS = ("fw", "bw")
    _ORDER = ("f", "i", "o", "c")   # three sigmoid gates first, then tanh

    def __init__(self, in_features, units, return_sequences, name="bilstm"):
        self.in_features = in_features
        self.units = units
        self.return_sequences = return_sequences
        self.name = name
        self.weights = {}   # (direction, gate) -> (units + in_features, units)
        self.biases = {}    # (direction, gate) -> (units,)
        self.d_weights = {}
        self.d_biases = {}
        self._cache = None

    def init_params(self, rng, dtype):
        h, d = self.units, self.in_features
        for direction in self.DIRECTIONS:
            for gate in GATES:
                rec = glorot_uniform(rng, h, h, (h, h), dtype)
                inp = glorot_uniform(rng, d, h, (d, h), dtype)
                self.weights[direction, gate] = np.concatenate([rec, inp], axis=0)
                bias = np.zeros(h, dtype=dtype)
                if gate == "f":
                    bias[:] = 1.0   # forget-gate bias at 1 eases early training
                self.biases[direction, gate] = bias

    def params(self):
        out = []
        for direction in self.DIRECTIONS:
            for gate in GATES:
                out.append((f"{self.name}.{direction}.W_{gate}",
                            self.weights[direction, gate]))
            for gate in GATES:
                out.append((f"{self.name}.{direction}.b_{gate}",
                            self.biases[direction, gate]))
        return out

    def grads(self):
        out = []
        for direction in self.DIRECTIONS:
            for gate in GATES:
                out.append((f"{self.name}.{direction}.W_{gate}",
                            self.d_weights[direction, gate]))
            for gate in GATES:
                out.append((f"{self.name}.{direction}.b_{gate}",
                            self.d_biases[direction, gate]))
        return out

    def _fused(self, dtype):
        h = self.units
        wh = np.stack([
            np.concatenate([self.weights[d, g][:h] for g in self._ORDER], axis=1)
            for d in self.DIRECTIONS])                       # (2, h, 4h)
        wx = np.stack([
            np.concatenate([self.weights[d, g][h:] for g in self._ORDER], axis=1)
            for d in self.DIRECTIONS])                       # (2, in, 4h)
        bias = np.stack([
            np.concatenate([self.biases[d, g] for g in self._ORDER])
            for d in self.DIRECTIONS])[:, None, :]           # (2, 1, 4h)
        return wh.astype(dtype, copy=False), wx.astype(dtype, copy=False), \
            bias.astype(dtype, copy=False)

    def forward(self, x, train=False, rng=None):
        if x.ndim != 3 or x.shape[2] != self.in_features:
            raise ValueError(
                f"{self.name}: expected (batch, time, {self.in_features}), got {x.shape}")
        b, t, d = x.shape
        h = self.units
        wh, wx, bias = self._fused(x.dtype)
        xs = np.stack([x, x[:, ::-1]])                       # (2, b, t, d)
        flat = xs.reshape(2, b * t, d)
        proj = np.matmul(flat, wx)
        proj += bias
        proj = np.ascontiguousarray(
            proj.reshape(2, b, t, 4 * h).transpose(2, 0, 1, 3))   # (t, 2, b, 4h)
        gates = np.empty((t, 2, b, 4 * h), dtype=x.dtype)    # post-activation
        cells = np.empty((t, 2, b, h), dtype=x.dtype)
        tanh_c = np.empty((t, 2, b, h), dtype=x.dtype)
        hs = np.empty((t, 2, b, h), dtype=x.dtype)
        h_prev = np.zeros((2, b, h), dtype=x.dtype)
        c_prev = np.zeros((2, b, h), dtype=x.dtype)
        half = x.dtype.type(0.5)
        one = x.dtype.type(1.0)
        for step in range(t):
            z = gates[step]
            np.matmul(h_prev, wh, out=z)
            z += proj[step]
            zs = z[..., :3 * h]        # sigmoid(v) = (tanh(v/2) + 1) / 2
            zs *= half
            np.tanh(z, out=z)
            zs += one
            zs *= half
            c_t = cells[step]
            np.multiply(z[..., :h], c_prev, out=c_t)         # f * c_prev
            c_t += z[..., h:2 * h] * z[..., 3 * h:]          # + i * c~
            tc = tanh_c[step]
            np.tanh(c_t, out=tc)
            h_t = hs[step]
            np.multiply(z[..., 2 * h:3 * h], tc, out=h_t)    # o * tanh(c)
            h_prev, c_prev = h_t, c_t
        self._cache = (flat, gates, cells, tanh_c, hs, (b, t, d))
        if self.return_sequences:
            out = np.empty((b, t, 2 * h), dtype=x.dtype)
            out[:, :, :h] = hs[:, 0].transpose(1, 0, 2)
            out[:, :, h:] = hs[::-1, 1].transpose(1, 0, 2)
            return out
        return np.concatenate([hs[-1, 0], hs[-1, 1]], axis=1)

    def backward(self, dout):
        if self._cache is None:
            raise ContractViolation(f"{self.name}: backward before forward")
        flat, gates, cells, tanh_c, hs, (b, t, d) = self._cache
        h = self.units
        wh, wx, _ = self._fused(dout.dtype)
        dh_t = np.zeros((t, 2, b, h), dtype=dout.dtype)
        if self.return_sequences:
            dh_t[:, 0] = dout[:, :, :h].transpose(1, 0, 2)
            dh_t[:, 1] = dout[:, ::-1, h:].transpose(1, 0, 2)
        else:
            dh_t[-1, 0] = dout[:, :h]
            dh_t[-1, 1] = dout[:, h:]
        wh_T = np.ascontiguousarray(wh.transpose(0, 2, 1))
        dz_all = np.empty((t, 2, b, 4 * h), dtype=dout.dtype)
        dh_next = np.zeros((2, b, h), dtype=dout.dtype)
        dc = np.zeros((2, b, h), dtype=dout.dtype)   # carries dc_next in/out
        zeros = np.zeros((2, b, h), dtype=dout.dtype)
        for step in range(t - 1, -1, -1):
            c_prev = cells[step - 1] if step > 0 else zeros
            dz = dz_all[step]
            lstm_backward_step(gates[step], tanh_c[step], c_prev,
                               dh_t[step], dh_next, dc, dz)
            np.matmul(dz, wh_T, out=dh_next)
        # (t, 2, b, 4h) -> per direction, batch-major (2, b*t, 4h)
        dz_flat = np.ascontiguousarray(
            dz_all.transpose(1, 2, 0, 3)).reshape(2, b * t, 4 * h)
        h_prev_seq = np.concatenate(
            [np.zeros((1, 2, b, h), dtype=dout.dtype), hs[:-1]], axis=0)
        hp_flat = np.ascontiguousarray(
            h_prev_seq.transpose(1, 2, 0, 3)).reshape(2, b * t, h)
        d_wh = np.matmul(hp_flat.transpose(0, 2, 1), dz_flat)   # (2, h, 4h)
        d_wx = np.matmul(flat.transpose(0, 2, 1), dz_flat)      # (2, d, 4h)
        d_b = dz_flat.sum(axis=1)                               # (2, 4h)
        for di, direction in enumerate(self.DIRECTIONS):
            for gi, gate in enumerate(self._ORDER):
                sl = slice(gi * h, (gi + 1) * h)
                self.d_weights[direction, gate] = np.concatenate(
                    [d_wh[di][:, sl], d_wx[di][:, sl]], axis=0)
                self.d_biases[direction, gate] = d_b[di][sl]
        dxs = np.matmul(dz_flat, wx.transpose(0, 2, 1)).reshape(2, b, t, d)
        return dxs[0] + dxs[1][:, ::-1]
