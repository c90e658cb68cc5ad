"""Layers with hand-written forward and backward passes.

Every layer follows the same protocol::

    y, cache = layer.forward(x, training, rng)
    dx, grads = layer.backward(dy, cache)

``grads`` maps parameter names (keys of ``layer.params``) to arrays of the
same shape.  All arrays are float64.
"""
from __future__ import annotations

from typing import Dict, Optional, Tuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

ACTIVATIONS = ("relu", "sigmoid", "tanh", "linear")


class ShapeError(ValueError):
    pass


def sigmoid(x):
    # split by sign so exp never overflows
    out = np.empty_like(x, dtype=np.float64)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def apply_activation(kind: str, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if kind == "relu":
        return np.maximum(x, 0.0)
    if kind == "sigmoid":
        return sigmoid(x)
    if kind == "tanh":
        return np.tanh(x)
    if kind == "linear":
        return x.copy()
    raise ValueError(f"unknown activation {kind!r}; expected one of {ACTIVATIONS}")


def activation_derivative(kind: str, x: np.ndarray, y: Optional[np.ndarray] = None) -> np.ndarray:
    """Derivative of the activation at ``x``; ``y`` is the forward output if known."""
    if y is None:
        y = apply_activation(kind, x)
    if kind == "relu":
        return (x > 0).astype(np.float64)
    if kind == "sigmoid":
        return y * (1.0 - y)
    if kind == "tanh":
        return 1.0 - y * y
    if kind == "linear":
        return np.ones_like(y)
    raise ValueError(f"unknown activation {kind!r}")


def glorot_uniform(rng, shape, fan_in, fan_out):
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


class Layer:
    kind = "layer"

    def __init__(self):
        self.params: Dict[str, np.ndarray] = {}
        self.input_shape: Tuple[int, ...] = ()
        self.output_shape: Tuple[int, ...] = ()

    def build(self, input_shape, rng) -> Tuple[int, ...]:
        """Allocate parameters for per-sample ``input_shape``; return output shape."""
        self.input_shape = tuple(input_shape)
        self.output_shape = self.input_shape
        return self.output_shape

    def forward(self, x, training=False, rng=None):
        raise NotImplementedError

    def backward(self, dy, cache):
        raise NotImplementedError

    def config(self) -> dict:
        return {"kind": self.kind}

    @property
    def weight_names(self) -> Tuple[str, ...]:
        """Parameters subject to L1/L2 penalties (biases excluded)."""
        return ()

    def n_params(self) -> int:
        return int(sum(p.size for p in self.params.values()))


class Dense(Layer):
    kind = "dense"

    def __init__(self, units: int):
        super().__init__()
        if units < 1:
            raise ValueError("units must be positive")
        self.units = int(units)

    def build(self, input_shape, rng):
        if len(input_shape) != 1:
            raise ShapeError(f"dense expects flat input, got shape {input_shape}")
        self.input_shape = tuple(input_shape)
        fan_in = input_shape[0]
        self.params = {
            "W": glorot_uniform(rng, (fan_in, self.units), fan_in, self.units),
            "b": np.zeros(self.units),
        }
        self.output_shape = (self.units,)
        return self.output_shape

    def forward(self, x, training=False, rng=None):
        return x @ self.params["W"] + self.params["b"], x

    def backward(self, dy, cache):
        x = cache
        grads = {"W": x.T @ dy, "b": dy.sum(axis=0)}
        return dy @ self.params["W"].T, grads

    def config(self):
        return {"kind": self.kind, "units": self.units}

    @property
    def weight_names(self):
        return ("W",)


class Activation(Layer):
    kind = "activation"

    def __init__(self, activation: str):
        super().__init__()
        if activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {activation!r}; expected one of {ACTIVATIONS}")
        self.activation = activation

    def forward(self, x, training=False, rng=None):
        y = apply_activation(self.activation, x)
        return y, (x, y)

    def backward(self, dy, cache):
        x, y = cache
        return dy * activation_derivative(self.activation, x, y), {}

    def config(self):
        return {"kind": self.kind, "activation": self.activation}


class Dropout(Layer):
    """Inverted dropout: kept units are scaled by 1/(1-rate) at train time."""

    kind = "dropout"

    def __init__(self, rate: float):
        super().__init__()
        if not 0.0 <= rate < 1.0:
            raise ValueError(f"drop rate must lie in [0, 1), got {rate}")
        self.rate = float(rate)

    def forward(self, x, training=False, rng=None):
        if not training or self.rate == 0.0:
            return x, None
        if rng is None:
            raise ValueError("dropout in training mode needs an rng")
        mask = (rng.random(x.shape) >= self.rate) / (1.0 - self.rate)
        return x * mask, mask

    def backward(self, dy, cache):
        if cache is None:
            return dy, {}
        return dy * cache, {}

    def config(self):
        return {"kind": self.kind, "rate": self.rate}


class Flatten(Layer):
    kind = "flatten"

    def build(self, input_shape, rng):
        self.input_shape = tuple(input_shape)
        self.output_shape = (int(np.prod(input_shape)),)
        return self.output_shape

    def forward(self, x, training=False, rng=None):
        return x.reshape(x.shape[0], -1), x.shape

    def backward(self, dy, cache):
        return dy.reshape(cache), {}


class Reshape(Layer):
    """Zero-pad a flat feature vector to ``prod(target)`` and reshape it."""

    kind = "reshape"

    def __init__(self, target_shape):
        super().__init__()
        self.target_shape = tuple(int(s) for s in target_shape)

    def build(self, input_shape, rng):
        if len(input_shape) != 1:
            raise ShapeError(f"reshape expects flat input, got shape {input_shape}")
        size = int(np.prod(self.target_shape))
        if size < input_shape[0]:
            raise ShapeError(f"cannot fit {input_shape[0]} features into {self.target_shape}")
        self.input_shape = tuple(input_shape)
        self.output_shape = self.target_shape
        return self.output_shape

    def forward(self, x, training=False, rng=None):
        n, d = x.shape
        pad = int(np.prod(self.target_shape)) - d
        if pad:
            x = np.concatenate([x, np.zeros((n, pad))], axis=1)
        return x.reshape((n,) + self.target_shape), d

    def backward(self, dy, cache):
        d = cache
        return dy.reshape(dy.shape[0], -1)[:, :d], {}

    def config(self):
        return {"kind": self.kind, "target_shape": list(self.target_shape)}


def conv1d_output_length(length: int, kernel: int, stride: int) -> int:
    return (length - kernel) // stride + 1


def conv1d_forward(x: np.ndarray, kernels: np.ndarray, bias: Optional[np.ndarray] = None, stride: int = 1) -> np.ndarray:
    """Valid cross-correlation of ``x [batch, length, channels]`` with
    ``kernels [kernel, channels, filters]`` (no kernel flip)."""
    k = kernels.shape[0]
    if k > x.shape[1]:
        raise ShapeError(f"kernel size {k} exceeds input length {x.shape[1]}")
    windows = sliding_window_view(x, k, axis=1)[:, ::stride]  # [B, L_out, C, K]
    out = np.einsum("blck,kcf->blf", windows, kernels, optimize=True)
    if bias is not None:
        out = out + bias
    return out


class Conv1D(Layer):
    kind = "conv1d"

    def __init__(self, filters: int, kernel_size: int, stride: int = 1):
        super().__init__()
        if filters < 1 or kernel_size < 1 or stride < 1:
            raise ValueError("filters, kernel_size and stride must be positive")
        self.filters = int(filters)
        self.kernel_size = int(kernel_size)
        self.stride = int(stride)

    def build(self, input_shape, rng):
        if len(input_shape) != 2:
            raise ShapeError(f"conv1d expects [length, channels], got {input_shape}")
        length, channels = input_shape
        if self.kernel_size > length:
            raise ShapeError(f"kernel size {self.kernel_size} exceeds input length {length}")
        self.input_shape = tuple(input_shape)
        fan_in = self.kernel_size * channels
        fan_out = self.kernel_size * self.filters
        self.params = {
            "W": glorot_uniform(rng, (self.kernel_size, channels, self.filters), fan_in, fan_out),
            "b": np.zeros(self.filters),
        }
        self.output_shape = (conv1d_output_length(length, self.kernel_size, self.stride), self.filters)
        return self.output_shape

    def forward(self, x, training=False, rng=None):
        return conv1d_forward(x, self.params["W"], self.params["b"], self.stride), x

    def backward(self, dy, cache):
        x = cache
        W = self.params["W"]
        k, s = self.kernel_size, self.stride
        l_out = dy.shape[1]
        windows = sliding_window_view(x, k, axis=1)[:, ::s]
        grads = {
            "W": np.einsum("blck,blf->kcf", windows, dy, optimize=True),
            "b": dy.sum(axis=(0, 1)),
        }
        dx = np.zeros_like(x)
        span = s * (l_out - 1) + 1
        for j in range(k):
            dx[:, j:j + span:s, :] += dy @ W[j].T
        return dx, grads

    def config(self):
        return {"kind": self.kind, "filters": self.filters,
                "kernel_size": self.kernel_size, "stride": self.stride}

    @property
    def weight_names(self):
        return ("W",)


class MaxPool1D(Layer):
    """Non-overlapping max pooling; trailing positions that do not fill a
    window are dropped.  Ties route the gradient to the first maximum."""

    kind = "maxpool1d"

    def __init__(self, pool_size: int):
        super().__init__()
        if pool_size < 1:
            raise ValueError("pool_size must be positive")
        self.pool_size = int(pool_size)

    def build(self, input_shape, rng):
        if len(input_shape) != 2:
            raise ShapeError(f"maxpool1d expects [length, channels], got {input_shape}")
        length, channels = input_shape
        if self.pool_size > length:
            raise ShapeError(f"pool size {self.pool_size} exceeds input length {length}")
        self.input_shape = tuple(input_shape)
        self.output_shape = (length // self.pool_size, channels)
        return self.output_shape

    def forward(self, x, training=False, rng=None):
        b, length, c = x.shape
        p = self.pool_size
        n_out = length // p
        windows = x[:, :n_out * p, :].reshape(b, n_out, p, c)
        idx = windows.argmax(axis=2)
        out = np.take_along_axis(windows, idx[:, :, None, :], axis=2)[:, :, 0, :]
        return out, (x.shape, idx)

    def backward(self, dy, cache):
        shape, idx = cache
        b, length, c = shape
        p = self.pool_size
        n_out = dy.shape[1]
        dwin = np.zeros((b, n_out, p, c))
        np.put_along_axis(dwin, idx[:, :, None, :], dy[:, :, None, :], axis=2)
        dx = np.zeros(shape)
        dx[:, :n_out * p, :] = dwin.reshape(b, n_out * p, c)
        return dx, {}

    def config(self):
        return {"kind": self.kind, "pool_size": self.pool_size}


class LSTM(Layer):
    """Single LSTM layer returning the final hidden state.

    Gate order in the stacked weights is input, forget, candidate, output.
    """

    kind = "lstm"

    def __init__(self, units: int, forget_bias: float = 1.0):
        super().__init__()
        if units < 1:
            raise ValueError("units must be positive")
        self.units = int(units)
        self.forget_bias = float(forget_bias)

    def build(self, input_shape, rng):
        if len(input_shape) != 2:
            raise ShapeError(f"lstm expects [timesteps, features], got {input_shape}")
        _, n_in = input_shape
        h = self.units
        self.input_shape = tuple(input_shape)
        limit = np.sqrt(6.0 / (n_in + h + 4 * h))
        b = np.zeros(4 * h)
        b[h:2 * h] = self.forget_bias
        self.params = {
            "W": rng.uniform(-limit, limit, size=(n_in, 4 * h)),
            "U": rng.uniform(-limit, limit, size=(h, 4 * h)),
            "b": b,
        }
        self.output_shape = (h,)
        return self.output_shape

    def forward(self, x, training=False, rng=None):
        W, U, b = self.params["W"], self.params["U"], self.params["b"]
        n, steps, _ = x.shape
        H = self.units
        h = np.zeros((n, H))
        c = np.zeros((n, H))
        xw = np.einsum("btf,fg->btg", x, W) + b
        steps_cache = []
        for t in range(steps):
            z = xw[:, t] + h @ U
            i = sigmoid(z[:, :H])
            f = sigmoid(z[:, H:2 * H])
            g = np.tanh(z[:, 2 * H:3 * H])
            o = sigmoid(z[:, 3 * H:])
            c_prev, h_prev = c, h
            c = f * c_prev + i * g
            tc = np.tanh(c)
            h = o * tc
            steps_cache.append((h_prev, c_prev, i, f, g, o, tc))
        return h, (x, steps_cache)

    def backward(self, dy, cache):
        x, steps_cache = cache
        W, U = self.params["W"], self.params["U"]
        H = self.units
        dW = np.zeros_like(W)
        dU = np.zeros_like(U)
        db = np.zeros_like(self.params["b"])
        dx = np.zeros_like(x)
        dh = dy
        dc = np.zeros_like(dy)
        for t in reversed(range(len(steps_cache))):
            h_prev, c_prev, i, f, g, o, tc = steps_cache[t]
            do = dh * tc
            dc = dc + dh * o * (1.0 - tc * tc)
            di = dc * g
            dg = dc * i
            df = dc * c_prev
            dz = np.concatenate([
                di * i * (1.0 - i),
                df * f * (1.0 - f),
                dg * (1.0 - g * g),
                do * o * (1.0 - o),
            ], axis=1)
            dW += x[:, t].T @ dz
            dU += h_prev.T @ dz
            db += dz.sum(axis=0)
            dx[:, t] = dz @ W.T
            dh = dz @ U.T
            dc = dc * f
        return dx, {"W": dW, "U": dU, "b": db}

    def config(self):
        return {"kind": self.kind, "units": self.units, "forget_bias": self.forget_bias}

    @property
    def weight_names(self):
        return ("W", "U")


LAYER_TYPES = {cls.kind: cls for cls in (Dense, Activation, Dropout, Flatten, Reshape, Conv1D, MaxPool1D, LSTM)}


def layer_from_config(cfg: dict) -> Layer:
    cfg = dict(cfg)
    kind = cfg.pop("kind")
    try:
        cls = LAYER_TYPES[kind]
    except KeyError:
        raise ValueError(f"unknown layer kind {kind!r}") from None
    return cls(**cfg)
