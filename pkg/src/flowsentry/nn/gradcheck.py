"""Central finite-difference gradient checking."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Optional

import numpy as np

from .network import Network, binary_cross_entropy

REL_FLOOR = 1e-8


def relative_error(analytic, numeric):
    analytic = np.asarray(analytic, dtype=np.float64)
    numeric = np.asarray(numeric, dtype=np.float64)
    scale = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), REL_FLOOR)
    return np.abs(analytic - numeric) / scale


@dataclass
class GradCheckReport:
    max_rel_error: Dict[str, float] = field(default_factory=dict)
    tol: float = 1e-4

    @property
    def passed(self) -> Dict[str, bool]:
        return {k: v <= self.tol for k, v in self.max_rel_error.items()}

    @property
    def ok(self) -> bool:
        return all(self.passed.values())

    @property
    def worst(self) -> float:
        return max(self.max_rel_error.values(), default=0.0)


def network_loss(network: Network, batch, targets, l1=0.0, l2=0.0, training=False, seed=0) -> float:
    p, _ = network.forward(batch, training=training, seed=seed)
    return binary_cross_entropy(p, targets)[0] + network.penalty(l1, l2)


def gradient_check(
    network: Network,
    batch,
    targets=None,
    h: float = 1e-5,
    tol: float = 1e-4,
    l1: float = 0.0,
    l2: float = 0.0,
    training: bool = False,
    seed: int = 0,
    analytic: Optional[Dict[str, np.ndarray]] = None,
) -> GradCheckReport:
    """Compare analytic gradients of BCE(+penalties) against central differences.

    With ``training=True`` the same dropout mask is reused for every
    evaluation (fixed ``seed``).  ``analytic`` lets a caller inject its own
    gradients, e.g. to confirm that a corrupted gradient is caught.
    """
    batch = np.asarray(batch, dtype=np.float64)
    if targets is None:
        targets = np.arange(batch.shape[0]) % 2
    if analytic is None:
        p, cache = network.forward(batch, training=training, seed=seed)
        _, dp = binary_cross_entropy(p, targets)
        analytic = network.backward(cache, dp, l1=l1, l2=l2)

    report = GradCheckReport(tol=tol)
    for name, w in network.parameters().items():
        numeric = np.zeros_like(w)
        flat = w.reshape(-1)
        num_flat = numeric.reshape(-1)
        for j in range(flat.size):
            orig = flat[j]
            flat[j] = orig + h
            up = network_loss(network, batch, targets, l1, l2, training, seed)
            flat[j] = orig - h
            down = network_loss(network, batch, targets, l1, l2, training, seed)
            flat[j] = orig
            num_flat[j] = (up - down) / (2.0 * h)
        err = relative_error(analytic[name], numeric)
        report.max_rel_error[name] = float(err.max()) if err.size else 0.0
    return report
