"""Seeded toy networks for gradient checks, one builder per layer kind."""
import numpy as np

from flowsentry.modeling import ModelSpec
from flowsentry.nn import LSTM, Activation, Conv1D, Dense, Dropout, Flatten, MaxPool1D, Network, gradient_check


def dense_net(seed):
    return Network([Dense(4), Activation("tanh"), Dense(1), Activation("sigmoid")], (5,), seed)


def activation_stack(seed):
    layers = [Dense(4), Activation("relu"), Dense(4), Activation("tanh"), Dense(3), Activation("sigmoid"),
              Dense(3), Activation("linear"), Dropout(0.3), Dense(1), Activation("sigmoid")]
    return Network(layers, (4,), seed)


def conv_net(seed):
    stride = 1 + seed % 2
    return Network([Conv1D(3, 3, stride=stride), Flatten(), Dense(1), Activation("sigmoid")], (7, 2), seed)


def pool_net(seed):
    return Network([Conv1D(2, 2), MaxPool1D(2), Flatten(), Dense(1), Activation("sigmoid")], (8, 2), seed)


def lstm_net(seed):
    return Network([LSTM(3), Dense(1), Activation("sigmoid")], (3, 2), seed)


def ann_default(seed):
    return ModelSpec("ANN", input_dim=6, hidden_sizes=(5, 4)).build(dropout_rate=0.2, seed=seed)


def cnn_default(seed):
    return ModelSpec("CNN", input_dim=8, filters=3, kernel_size=3, pool_size=2, dense_units=4).build(0.2, seed)


def lstm_default(seed):
    return ModelSpec("LSTM", input_dim=7, timesteps=3, hidden_units=3).build(0.2, seed)


BUILDERS = {
    "dense": dense_net,
    "activation_stack": activation_stack,
    "conv1d": conv_net,
    "maxpool1d": pool_net,
    "lstm": lstm_net,
    "ann_default": ann_default,
    "cnn_default": cnn_default,
    "lstm_default": lstm_default,
}


KINK_MARGIN = 1e-4


def kink_distance(net, batch, seed):
    """Smallest distance of any ReLU input, or any max-pool runner-up, to its kink.

    Central differences are only meaningful when no such point lies within
    a few steps h of the evaluation point.  Replays ``Network.forward``.
    """
    rng = np.random.default_rng(seed)
    x = batch
    dist = np.inf
    for layer in net.layers:
        if layer.kind == "activation" and layer.activation == "relu":
            dist = min(dist, float(np.abs(x).min()))
        if layer.kind == "maxpool1d":
            P = layer.pool_size
            T = x.shape[1] // P * P
            win = np.sort(x[:, :T].reshape(x.shape[0], -1, P, x.shape[2]), axis=2)
            gap = win[:, :, -1] - win[:, :, -2]
            # exact ties between dead ReLU zeros carry no gradient either way
            live = win[:, :, -1] != 0.0
            if live.any():
                dist = min(dist, float(gap[live].min()))
        x, _ = layer.forward(x, training=True, rng=rng)
    return dist


def check_instance(kind, seed, tol=1e-4):
    """Gradient check of one seeded instance; odd seeds add L1/L2 penalties."""
    net = BUILDERS[kind](seed)
    rng = np.random.default_rng(10_000 + seed)
    # move every parameter (biases included) slightly off its initial value
    # so that no unit sits exactly on a ReLU kink
    for w in net.parameters().values():
        w += rng.normal(scale=0.1, size=w.shape)
    n = int(rng.integers(2, 6))
    for _ in range(100):
        batch = rng.normal(size=(n,) + net.input_shape)
        if kink_distance(net, batch, seed) > KINK_MARGIN:
            break
    targets = rng.integers(0, 2, n)
    l1, l2 = (0.01, 0.02) if seed % 2 else (0.0, 0.0)
    return gradient_check(net, batch, targets, h=1e-5, tol=tol, l1=l1, l2=l2, training=True, seed=seed)
