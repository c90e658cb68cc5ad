"""Default ANN, CNN and LSTM architectures."""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Sequence, Tuple

from ..nn import LSTM, Activation, Conv1D, Dense, Dropout, Flatten, MaxPool1D, Network, Reshape, ShapeError
from ..nn.layers import ACTIVATIONS, conv1d_output_length

FAMILIES = ("ANN", "CNN", "LSTM")


@dataclass(frozen=True)
class ModelSpec:
    """Architecture description; ``build`` turns it into a fresh network."""

    family: str = "ANN"
    input_dim: int = 20
    activation: str = "relu"
    hidden_sizes: Tuple[int, ...] = (64, 32)
    filters: int = 32
    kernel_size: int = 3
    pool_size: int = 2
    dense_units: int = 64
    timesteps: int = 10
    hidden_units: int = 64

    def __post_init__(self):
        family = str(self.family).upper()
        if family not in FAMILIES:
            raise ValueError(f"unknown model family {self.family!r}; expected one of {FAMILIES}")
        object.__setattr__(self, "family", family)
        activation = str(self.activation).lower()
        if activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        object.__setattr__(self, "activation", activation)
        object.__setattr__(self, "hidden_sizes", tuple(int(h) for h in self.hidden_sizes))
        for name in ("input_dim", "filters", "kernel_size", "pool_size", "dense_units", "timesteps", "hidden_units"):
            if int(getattr(self, name)) < 1:
                raise ValueError(f"{name} must be positive")
        if any(h < 1 for h in self.hidden_sizes):
            raise ValueError("hidden sizes must be positive")

    def build(self, dropout_rate: float = 0.0, seed: int = 0) -> Network:
        if self.family == "ANN":
            return build_ann(self.input_dim, self.hidden_sizes, self.activation, dropout_rate, seed)
        if self.family == "CNN":
            return build_cnn(self.input_dim, self.filters, self.kernel_size, self.pool_size,
                             self.dense_units, self.activation, dropout_rate, seed)
        return build_lstm(self.input_dim, self.timesteps, self.hidden_units, dropout_rate, seed)

    def replace(self, **kwargs) -> "ModelSpec":
        return dataclasses.replace(self, **kwargs)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["hidden_sizes"] = list(self.hidden_sizes)
        return d

    @classmethod
    def from_dict(cls, d) -> "ModelSpec":
        return cls(**d)


def _hidden_block(units, activation, dropout_rate):
    layers = [Dense(units), Activation(activation)]
    if dropout_rate > 0:
        layers.append(Dropout(dropout_rate))
    return layers


def _head():
    return [Dense(1), Activation("sigmoid")]


def build_ann(input_dim: int, hidden_sizes: Sequence[int] = (64, 32), activation: str = "relu",
              dropout_rate: float = 0.0, seed: int = 0) -> Network:
    """Dense stack; an empty ``hidden_sizes`` gives logistic regression."""
    if input_dim < 1:
        raise ValueError("input_dim must be >= 1")
    layers = []
    for units in hidden_sizes:
        layers += _hidden_block(units, activation, dropout_rate)
    return Network(layers + _head(), (input_dim,), seed=seed)


def build_cnn(input_dim: int, filters: int = 32, kernel_size: int = 3, pool_size: int = 2,
              dense_units: int = 64, activation: str = "relu", dropout_rate: float = 0.0,
              seed: int = 0) -> Network:
    """Features as a one-channel sequence -> conv1d -> maxpool -> dense."""
    if kernel_size > input_dim:
        raise ValueError(f"kernel_size {kernel_size} exceeds input_dim {input_dim}")
    conv_len = conv1d_output_length(input_dim, kernel_size, 1)
    if pool_size > conv_len:
        raise ValueError(f"pool_size {pool_size} exceeds conv output length {conv_len}")
    layers = [
        Reshape((input_dim, 1)),
        Conv1D(filters, kernel_size),
        Activation(activation),
        MaxPool1D(pool_size),
        Flatten(),
        *_hidden_block(dense_units, activation, dropout_rate),
        *_head(),
    ]
    return Network(layers, (input_dim,), seed=seed)


def lstm_shape(input_dim: int, timesteps: int) -> Tuple[int, int]:
    """(timesteps, step width) after zero-padding to a multiple of timesteps."""
    if timesteps < 1:
        raise ValueError("timesteps must be >= 1")
    if input_dim < 1:
        raise ValueError("input_dim must be >= 1")
    return timesteps, -(-input_dim // timesteps)


def build_lstm(input_dim: int, timesteps: int = 10, hidden_units: int = 64,
               dropout_rate: float = 0.0, seed: int = 0) -> Network:
    """Segment one flow's features into ``timesteps`` chunks and run an LSTM."""
    steps, width = lstm_shape(input_dim, timesteps)
    layers = [Reshape((steps, width)), LSTM(hidden_units)]
    if dropout_rate > 0:
        layers.append(Dropout(dropout_rate))
    return Network(layers + _head(), (input_dim,), seed=seed)


__all__ = ["FAMILIES", "ModelSpec", "build_ann", "build_cnn", "build_lstm", "lstm_shape", "ShapeError"]
