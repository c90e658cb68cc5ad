"""Seeded synthetic flow data for tests, demos and the CLI fixture."""
from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .flowdata import AttackType, Dataset, FlowSchema, map_labels

# Raw labels as they appear in CICIDS2017 exports.
_ATTACK_LABELS = ("DoS Hulk", "DDoS", "PortScan", "FTP-Patator", "SSH-Patator", "Bot")


def make_synthetic_flows(n_samples: int = 4000, n_features: int = 20, separation: float = 1.5,
                         attack_fraction: float = 0.44, seed: int = 0) -> Dataset:
    """Two Gaussian classes with unit variance per coordinate.

    The attack mean is shifted by ``separation`` standard deviations along
    every coordinate.  Each column is then given its own positive scale and
    offset (spanning several orders of magnitude, as flow counters do), so
    normalization matters.  Attack rows cycle through a few CICIDS2017
    label strings.
    """
    rng = np.random.default_rng(seed)
    n_attack = int(round(n_samples * attack_fraction))
    y = np.zeros(n_samples, dtype=np.int64)
    y[rng.permutation(n_samples)[:n_attack]] = 1
    Z = rng.standard_normal((n_samples, n_features)) + separation * y[:, None]
    scale = 10.0 ** rng.uniform(0, 4, size=n_features)
    offset = 10.0 * scale
    X = Z * scale + offset
    labels = np.empty(n_samples, dtype=object)
    labels[y == 0] = "BENIGN"
    labels[y == 1] = [_ATTACK_LABELS[i % len(_ATTACK_LABELS)] for i in range(n_attack)]
    names = tuple(f"Flow Stat {i:02d}" for i in range(n_features))
    ds = Dataset(
        schema=FlowSchema(names),
        X=X,
        label_raw=labels,
        label_binary=y,
        attack_type=np.full(n_samples, AttackType.Benign.value, dtype=object),
        provenance=(f"synthetic(n={n_samples}, d={n_features}, sep={separation}, seed={seed})",),
    )
    return map_labels(ds)


def write_flow_csv(dataset: Dataset, path, leading_space: bool = True) -> Path:
    """Write a dataset in CICIDS2017 CSV layout (header names with a leading
    space, label in the last column, full float precision)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    pad = " " if leading_space else ""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([pad + n for n in dataset.schema.feature_names] + [pad + dataset.schema.label_column])
        for x, label in zip(dataset.X, dataset.label_raw):
            w.writerow([repr(float(v)) for v in x] + [label])
    return path
