from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence

import numpy as np

from .layers import Activation, Layer, ShapeError

# Output probabilities are clipped into [OUTPUT_EPS, 1 - OUTPUT_EPS] so that
# thresholding and log-losses downstream are always defined.
OUTPUT_EPS = 1e-12
BCE_EPS = 1e-7


class StaleCacheError(RuntimeError):
    pass


@dataclass
class ForwardCache:
    network_id: int
    version: int
    layer_caches: list
    probabilities: np.ndarray


class Network:
    """Ordered stack of layers ending in a single sigmoid unit.

    Parameters are addressed as ``"<layer index>.<name>"``, e.g. ``"0.W"``.
    """

    def __init__(self, layers: Sequence[Layer], input_shape, seed: int = 0):
        self.layers: List[Layer] = list(layers)
        self.input_shape = tuple(int(s) for s in np.atleast_1d(input_shape))
        self.seed = int(seed)
        self._version = 0
        self._build()

    def _build(self):
        rng = np.random.default_rng(self.seed)
        shape = self.input_shape
        for layer in self.layers:
            shape = layer.build(shape, rng)
        if shape != (1,):
            raise ShapeError(f"network must end in a single output unit, got shape {shape}")
        last = self.layers[-1] if self.layers else None
        if not isinstance(last, Activation) or last.activation != "sigmoid":
            raise ShapeError("final layer must be a sigmoid activation")
        self.output_shape = shape

    # parameters -----------------------------------------------------------

    def parameters(self) -> Dict[str, np.ndarray]:
        """Live views of every parameter, in declaration order."""
        return {
            f"{i}.{name}": arr
            for i, layer in enumerate(self.layers)
            for name, arr in layer.params.items()
        }

    def weight_names(self) -> List[str]:
        return [f"{i}.{name}" for i, layer in enumerate(self.layers) for name in layer.weight_names]

    def n_params(self) -> int:
        return sum(layer.n_params() for layer in self.layers)

    def get_weights(self) -> Dict[str, np.ndarray]:
        return {k: v.copy() for k, v in self.parameters().items()}

    def set_weights(self, weights: Dict[str, np.ndarray]):
        params = self.parameters()
        if set(weights) != set(params):
            raise ValueError("weight names do not match network parameters")
        for k, v in weights.items():
            if params[k].shape != np.shape(v):
                raise ShapeError(f"shape mismatch for {k}: {params[k].shape} vs {np.shape(v)}")
            params[k][...] = v
        self.mark_updated()

    def mark_updated(self):
        """Invalidate outstanding forward caches after an in-place update."""
        self._version += 1

    # passes ---------------------------------------------------------------

    def forward(self, batch, training: bool = False, seed: Optional[int] = None, rng=None):
        x = np.asarray(batch, dtype=np.float64)
        if x.shape[1:] != self.input_shape:
            raise ShapeError(f"batch shape {x.shape[1:]} does not match input shape {self.input_shape}")
        if rng is None and training:
            rng = np.random.default_rng(seed)
        caches = []
        for layer in self.layers:
            x, cache = layer.forward(x, training=training, rng=rng)
            caches.append(cache)
        p = np.clip(x[:, 0], OUTPUT_EPS, 1.0 - OUTPUT_EPS)
        return p, ForwardCache(id(self), self._version, caches, p)

    def predict_proba(self, batch) -> np.ndarray:
        return self.forward(batch, training=False)[0]

    def backward(self, cache: ForwardCache, loss_grad, l1: float = 0.0, l2: float = 0.0) -> Dict[str, np.ndarray]:
        """Gradients of the loss w.r.t. every parameter.

        ``loss_grad`` is dLoss/dprobability per row.  Penalty gradients
        ``l1 * sign(w)`` and ``2 * l2 * w`` are added to weight tensors.
        """
        if cache.network_id != id(self) or cache.version != self._version:
            raise StaleCacheError("forward cache does not belong to the current parameters")
        dy = np.asarray(loss_grad, dtype=np.float64).reshape(-1, 1)
        grads: Dict[str, np.ndarray] = {}
        for i in reversed(range(len(self.layers))):
            dy, layer_grads = self.layers[i].backward(dy, cache.layer_caches[i])
            for name, g in layer_grads.items():
                grads[f"{i}.{name}"] = g
        if l1 or l2:
            params = self.parameters()
            for name in self.weight_names():
                w = params[name]
                if l1:
                    grads[name] = grads[name] + l1 * np.sign(w)
                if l2:
                    grads[name] = grads[name] + 2.0 * l2 * w
        return {k: grads[k] for k in self.parameters()}

    def penalty(self, l1: float = 0.0, l2: float = 0.0) -> float:
        if not (l1 or l2):
            return 0.0
        params = self.parameters()
        total = 0.0
        for name in self.weight_names():
            w = params[name]
            total += l1 * float(np.abs(w).sum()) + l2 * float((w * w).sum())
        return total

    # description ----------------------------------------------------------

    def config(self) -> dict:
        return {
            "input_shape": list(self.input_shape),
            "seed": self.seed,
            "layers": [layer.config() for layer in self.layers],
        }

    def summary(self) -> str:
        lines = []
        for i, layer in enumerate(self.layers):
            lines.append(f"{i:>2} {layer.kind:<10} {str(layer.output_shape):<14} {layer.n_params():>8}")
        lines.append(f"total parameters: {self.n_params()}")
        return "\n".join(lines)

    def __repr__(self):
        kinds = ", ".join(layer.kind for layer in self.layers)
        return f"Network(input_shape={self.input_shape}, layers=[{kinds}])"


def binary_cross_entropy(pred, target, epsilon: float = BCE_EPS):
    """Mean binary cross-entropy and its gradient w.r.t. ``pred``.

    Predictions are clipped to ``[epsilon, 1 - epsilon]``; the gradient is
    zero wherever clipping is active.
    """
    p = np.asarray(pred, dtype=np.float64).ravel()
    t = np.asarray(target, dtype=np.float64).ravel()
    if p.shape != t.shape:
        raise ShapeError(f"prediction/target length mismatch: {p.size} vs {t.size}")
    pc = np.clip(p, epsilon, 1.0 - epsilon)
    n = p.size
    loss = -float(np.mean(t * np.log(pc) + (1.0 - t) * np.log1p(-pc)))
    grad = (pc - t) / (pc * (1.0 - pc)) / n
    grad[(p < epsilon) | (p > 1.0 - epsilon)] = 0.0
    return loss, grad
