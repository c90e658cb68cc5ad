"""Parameter update rules: SGD, Adam, AdaDelta, AdaGrad, AdaMax, FTRL, Nadam, RMSProp.

Every rule works on a mapping ``name -> ndarray`` and updates the arrays in
place.  The exact recurrences are written out in ``docs/optimizers.md``.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Dict, Mapping, Tuple

import numpy as np

__all__ = [
    "OPTIMIZER_KINDS",
    "DEFAULTS",
    "OptimizerConfig",
    "OptimizerState",
    "OptimizerError",
    "init_optimizer",
    "step",
]

# Column order of the optimizer x activation grid.
OPTIMIZER_KINDS: Tuple[str, ...] = (
    "Adam", "AdaDelta", "AdaGrad", "AdaMax", "FTRL", "Nadam", "RMSProp", "SGD",
)

DEFAULTS: Dict[str, Dict[str, float]] = {
    "SGD": {"learning_rate": 0.01, "momentum": 0.0},
    "Adam": {"learning_rate": 0.001, "beta1": 0.9, "beta2": 0.999, "epsilon": 1e-8},
    "Nadam": {"learning_rate": 0.001, "beta1": 0.9, "beta2": 0.999, "epsilon": 1e-8},
    "AdaMax": {"learning_rate": 0.001, "beta1": 0.9, "beta2": 0.999, "epsilon": 1e-8},
    "AdaDelta": {"learning_rate": 1.0, "rho": 0.95, "epsilon": 1e-6},
    "AdaGrad": {"learning_rate": 0.01, "epsilon": 1e-10},
    "RMSProp": {"learning_rate": 0.001, "rho": 0.9, "epsilon": 1e-8},
    # FTRL-proximal: ``learning_rate`` plays the role of alpha.
    "FTRL": {"learning_rate": 0.05, "beta": 1.0, "l1": 0.0, "l2": 0.0},
}

_BUFFERS: Dict[str, Tuple[str, ...]] = {
    "SGD": (),
    "Adam": ("m", "v"),
    "Nadam": ("m", "v"),
    "AdaMax": ("m", "u"),
    "AdaDelta": ("acc_grad", "acc_delta"),
    "AdaGrad": ("acc",),
    "RMSProp": ("acc",),
    "FTRL": ("z", "n"),
}


class OptimizerError(ValueError):
    """Invalid optimizer configuration or update inputs."""


def _canonical_kind(kind: str) -> str:
    for k in OPTIMIZER_KINDS:
        if k.lower() == str(kind).lower():
            return k
    raise OptimizerError(f"unknown optimizer kind {kind!r}; expected one of {OPTIMIZER_KINDS}")


@dataclass(frozen=True)
class OptimizerConfig:
    """Optimizer kind plus hyperparameters.

    Unspecified hyperparameters take the per-kind defaults from ``DEFAULTS``;
    :meth:`to_dict` always materializes the full set.
    """

    kind: str = "Adam"
    learning_rate: float | None = None
    beta1: float | None = None
    beta2: float | None = None
    rho: float | None = None
    epsilon: float | None = None
    momentum: float | None = None
    beta: float | None = None
    l1: float | None = None
    l2: float | None = None

    def __post_init__(self):
        kind = _canonical_kind(self.kind)
        object.__setattr__(self, "kind", kind)
        allowed = DEFAULTS[kind]
        for f in dataclasses.fields(self):
            if f.name == "kind":
                continue
            value = getattr(self, f.name)
            if value is None:
                if f.name in allowed:
                    object.__setattr__(self, f.name, float(allowed[f.name]))
            elif f.name not in allowed:
                raise OptimizerError(f"{kind} does not take hyperparameter {f.name!r}")
            else:
                object.__setattr__(self, f.name, float(value))
        self._validate()

    def _validate(self):
        if not self.learning_rate >= 0 or not np.isfinite(self.learning_rate):
            raise OptimizerError(f"learning_rate must be >= 0, got {self.learning_rate}")
        for name in ("beta1", "beta2", "rho", "momentum"):
            value = getattr(self, name)
            if value is not None and not 0.0 <= value < 1.0:
                raise OptimizerError(f"{name} must lie in [0, 1), got {value}")
        if self.epsilon is not None and not self.epsilon >= 0:
            raise OptimizerError(f"epsilon must be >= 0, got {self.epsilon}")
        for name in ("beta", "l1", "l2"):
            value = getattr(self, name)
            if value is not None and not value >= 0:
                raise OptimizerError(f"{name} must be >= 0, got {value}")

    def to_dict(self) -> dict:
        out = {"kind": self.kind}
        out.update({k: getattr(self, k) for k in DEFAULTS[self.kind]})
        return out

    @classmethod
    def from_dict(cls, d: Mapping) -> "OptimizerConfig":
        return cls(**dict(d))

    def with_updates(self, **kwargs) -> "OptimizerConfig":
        d = self.to_dict()
        d.update(kwargs)
        return OptimizerConfig.from_dict(d)


@dataclass
class OptimizerState:
    config: OptimizerConfig
    buffers: Dict[str, Dict[str, np.ndarray]] = field(default_factory=dict)
    t: int = 0

    def norms(self) -> Dict[str, float]:
        """L2 norm of every auxiliary buffer, for diagnostics."""
        return {
            f"{p}.{b}": float(np.linalg.norm(arr))
            for p, bufs in self.buffers.items()
            for b, arr in bufs.items()
        }


def init_optimizer(config: OptimizerConfig, parameter_shapes: Mapping[str, tuple]) -> OptimizerState:
    if not parameter_shapes:
        raise OptimizerError("no parameters to optimize")
    if not isinstance(config, OptimizerConfig):
        config = OptimizerConfig.from_dict(config)
    names = _BUFFERS[config.kind]
    if config.kind == "SGD" and config.momentum > 0:
        names = ("velocity",)
    buffers = {
        p: {b: np.zeros(shape, dtype=np.float64) for b in names}
        for p, shape in parameter_shapes.items()
    }
    return OptimizerState(config=config, buffers=buffers, t=0)


def step(state: OptimizerState, params: Dict[str, np.ndarray], grads: Mapping[str, np.ndarray]) -> Dict[str, np.ndarray]:
    """Apply one update to ``params`` in place and return it."""
    if set(params) != set(state.buffers):
        raise OptimizerError("parameter names do not match optimizer state")
    for name, w in params.items():
        g = grads.get(name)
        if g is None or g.shape != w.shape:
            raise OptimizerError(f"gradient shape mismatch for parameter {name!r}")
        if not np.all(np.isfinite(g)):
            raise OptimizerError(f"non-finite gradient for parameter {name!r}")
    state.t += 1
    if state.config.learning_rate == 0.0:
        # null update; FTRL would otherwise divide by alpha
        return params
    rule = _RULES[state.config.kind]
    for name, w in params.items():
        rule(state.config, state.buffers[name], w, np.asarray(grads[name], dtype=np.float64), state.t)
    return params


def _sgd(c, buf, w, g, t):
    if "velocity" in buf:
        v = buf["velocity"]
        v *= c.momentum
        v -= c.learning_rate * g
        w += v
    else:
        w -= c.learning_rate * g


def _adam(c, buf, w, g, t):
    m, v = buf["m"], buf["v"]
    m *= c.beta1
    m += (1.0 - c.beta1) * g
    v *= c.beta2
    v += (1.0 - c.beta2) * g * g
    m_hat = m / (1.0 - c.beta1 ** t)
    v_hat = v / (1.0 - c.beta2 ** t)
    w -= c.learning_rate * m_hat / (np.sqrt(v_hat) + c.epsilon)


def _nadam(c, buf, w, g, t):
    # Nesterov look-ahead: mix bias-corrected momentum for step t+1 with the
    # bias-corrected current gradient.
    m, v = buf["m"], buf["v"]
    m *= c.beta1
    m += (1.0 - c.beta1) * g
    v *= c.beta2
    v += (1.0 - c.beta2) * g * g
    m_bar = c.beta1 * m / (1.0 - c.beta1 ** (t + 1)) + (1.0 - c.beta1) * g / (1.0 - c.beta1 ** t)
    v_hat = v / (1.0 - c.beta2 ** t)
    w -= c.learning_rate * m_bar / (np.sqrt(v_hat) + c.epsilon)


def _adamax(c, buf, w, g, t):
    m, u = buf["m"], buf["u"]
    m *= c.beta1
    m += (1.0 - c.beta1) * g
    np.maximum(c.beta2 * u, np.abs(g), out=u)
    w -= (c.learning_rate / (1.0 - c.beta1 ** t)) * m / (u + c.epsilon)


def _adadelta(c, buf, w, g, t):
    eg, ed = buf["acc_grad"], buf["acc_delta"]
    eg *= c.rho
    eg += (1.0 - c.rho) * g * g
    delta = -np.sqrt(ed + c.epsilon) / np.sqrt(eg + c.epsilon) * g
    ed *= c.rho
    ed += (1.0 - c.rho) * delta * delta
    w += c.learning_rate * delta


def _adagrad(c, buf, w, g, t):
    acc = buf["acc"]
    acc += g * g
    w -= c.learning_rate * g / (np.sqrt(acc) + c.epsilon)


def _rmsprop(c, buf, w, g, t):
    acc = buf["acc"]
    acc *= c.rho
    acc += (1.0 - c.rho) * g * g
    w -= c.learning_rate * g / (np.sqrt(acc) + c.epsilon)


def _ftrl(c, buf, w, g, t):
    # Per-coordinate FTRL-proximal.  Only coordinates with a nonzero gradient
    # are touched; those are rebuilt from (z, n).
    active = g != 0.0
    if not np.any(active):
        return
    z, n = buf["z"], buf["n"]
    ga, wa, na = g[active], w[active], n[active]
    n_new = na + ga * ga
    sigma = (np.sqrt(n_new) - np.sqrt(na)) / c.learning_rate
    za = z[active] + ga - sigma * wa
    z[active] = za
    n[active] = n_new
    denom = (c.beta + np.sqrt(n_new)) / c.learning_rate + c.l2
    w[active] = -np.sign(za) * np.maximum(np.abs(za) - c.l1, 0.0) / denom


_RULES = {
    "SGD": _sgd,
    "Adam": _adam,
    "Nadam": _nadam,
    "AdaMax": _adamax,
    "AdaDelta": _adadelta,
    "AdaGrad": _adagrad,
    "RMSProp": _rmsprop,
    "FTRL": _ftrl,
}
