"""Held-out evaluation, k-fold cross-validation and the optimizer x activation grid."""
from __future__ import annotations

import hashlib
import logging
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from ..evaluation import (ClassificationReport, ConfusionMatrix, RocCurve, classification_report,
                          confusion_matrix, fmt, roc_curve)
from ..flowdata import Dataset
from ..optimizers import OPTIMIZER_KINDS, OptimizerConfig
from ..preprocess import kfold_partition, split_train_test
from .architectures import ModelSpec
from .training import PreprocessOptions, TrainConfig, TrainedModel, prepare_and_train

log = logging.getLogger(__name__)

GRID_ACTIVATIONS = ("relu", "sigmoid", "tanh")
GRID_ROW_LABELS = {"relu": "Relu", "sigmoid": "Sigmoid", "tanh": "Tanh"}


@dataclass
class Evaluation:
    confusion: ConfusionMatrix
    report: ClassificationReport
    roc: Optional[RocCurve]
    probabilities: np.ndarray


def evaluate_model(model: TrainedModel, dataset: Dataset, threshold: float = 0.5) -> Evaluation:
    if dataset.synthetic.any():
        raise ValueError("evaluation data contains synthetic rows")
    p = model.predict_proba(model.align(dataset))
    y = dataset.label_binary
    cm = confusion_matrix(p, y, threshold)
    roc = roc_curve(p, y) if np.unique(y).size == 2 else None
    return Evaluation(cm, classification_report(cm), roc, p)


def _pmap(fn: Callable, items: Sequence, n_jobs: int = 1) -> list:
    """Ordered map; results do not depend on ``n_jobs``."""
    if n_jobs <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ProcessPoolExecutor(max_workers=n_jobs) as pool:
        return list(pool.map(fn, items))


# --------------------------------------------------------------------------
# cross-validation


@dataclass
class CVResult:
    reports: List[ClassificationReport]
    fold_sizes: List[int]
    validation_synthetic: List[int]
    summary: Dict[str, Dict[str, float]] = field(default_factory=dict)

    @property
    def k(self) -> int:
        return len(self.reports)


def _summarize(reports: Sequence[ClassificationReport]) -> Dict[str, Dict[str, float]]:
    out = {}
    for name in ("accuracy", "precision_attack", "recall_attack", "f1_attack", "macro_f1"):
        vals = np.array([getattr(r, name) for r in reports])
        out[name] = {"mean": float(np.mean(vals)), "std": float(np.std(vals))}
    return out


class _FoldJob:
    def __init__(self, spec, dataset, folds, config, options):
        self.spec, self.dataset, self.folds = spec, dataset, folds
        self.config, self.options = config, options

    def __call__(self, i):
        tr, va = self.folds.split(i)
        val = self.dataset.subset(va)
        model, _ = prepare_and_train(self.dataset.subset(tr), self.spec, self.config, self.options)
        ev = evaluate_model(model, val, self.config.threshold)
        return ev.report, int(va.size), int(val.synthetic.sum())


def cross_validate(spec: ModelSpec, dataset: Dataset, k: int, config: TrainConfig,
                   options: PreprocessOptions = PreprocessOptions(), n_jobs: int = 1) -> CVResult:
    """Stratified k-fold CV; all preprocessing is re-fitted inside each fold."""
    folds = kfold_partition(dataset, k, seed=config.seed)
    results = _pmap(_FoldJob(spec, dataset, folds, config, options), list(range(k)), n_jobs)
    reports = [r for r, _, _ in results]
    return CVResult(
        reports=reports,
        fold_sizes=[n for _, n, _ in results],
        validation_synthetic=[s for _, _, s in results],
        summary=_summarize(reports),
    )


# --------------------------------------------------------------------------
# optimizer x activation grid


def cell_seed(base_seed: int, optimizer: str, activation: str) -> int:
    """Stable per-cell seed (independent of Python's hash randomization)."""
    digest = hashlib.sha256(f"{base_seed}:{optimizer}:{activation}".encode()).digest()
    return int.from_bytes(digest[:4], "little")


@dataclass
class GridCell:
    optimizer: str
    activation: str
    seed: int
    accuracy: Optional[float] = None
    status: str = "ok"
    error: str = ""

    @property
    def display(self) -> str:
        return fmt(self.accuracy) if self.status == "ok" else "ERR"


@dataclass
class GridReport:
    cells: Dict[Tuple[str, str], GridCell]
    optimizers: Tuple[str, ...] = OPTIMIZER_KINDS
    activations: Tuple[str, ...] = GRID_ACTIVATIONS

    def accuracy(self, activation: str, optimizer: str) -> Optional[float]:
        return self.cells[(activation, optimizer)].accuracy

    def table(self):
        """(header, rows): one row per activation, one column per optimizer."""
        header = ["activation", *self.optimizers]
        rows = [[GRID_ROW_LABELS.get(a, a), *(self.cells[(a, o)].display for o in self.optimizers)]
                for a in self.activations]
        return header, rows

    def failures(self) -> List[GridCell]:
        return [c for c in self.cells.values() if c.status != "ok"]

    def format(self) -> str:
        header, rows = self.table()
        widths = [max(len(str(r[i])) for r in [header, *rows]) for i in range(len(header))]
        return "\n".join("  ".join(str(v).rjust(w) for v, w in zip(r, widths)) for r in [header, *rows])


class _GridJob:
    def __init__(self, train_part, test_part, base_spec, config, options, overrides):
        self.train_part, self.test_part = train_part, test_part
        self.base_spec, self.config, self.options = base_spec, config, options
        self.overrides = overrides

    def __call__(self, key):
        activation, optimizer = key
        seed = cell_seed(self.config.seed, optimizer, activation)
        cell = GridCell(optimizer, activation, seed)
        try:
            opt = OptimizerConfig(kind=optimizer, **self.overrides.get(optimizer, {}))
            cfg = self.config.replace(optimizer=opt, seed=seed)
            spec = self.base_spec.replace(activation=activation)
            model, _ = prepare_and_train(self.train_part, spec, cfg, self.options)
            cell.accuracy = evaluate_model(model, self.test_part, cfg.threshold).report.accuracy
        except Exception as exc:  # recorded in-cell, grid continues
            cell.status = "error"
            cell.error = f"{type(exc).__name__}: {exc}"
            log.warning("grid cell %s/%s failed: %s\n%s", activation, optimizer, cell.error, traceback.format_exc())
        return cell


def run_optimizer_activation_grid(
    dataset: Dataset,
    base_spec: ModelSpec,
    config: TrainConfig,
    options: PreprocessOptions = PreprocessOptions(),
    optimizer_overrides: Optional[Mapping[str, dict]] = None,
    train_fraction: float = 0.8,
    n_jobs: int = 1,
) -> GridReport:
    """Train and test one ANN per (activation, optimizer) pair.

    The cleaned ``dataset`` is split once (stratified, ``config.seed``);
    every cell trains on the same training part with its own derived seed
    and is scored by accuracy on the same test part.
    """
    if base_spec.family != "ANN":
        raise ValueError("the optimizer x activation grid runs on the ANN family")
    train_part, test_part = split_train_test(dataset, train_fraction, seed=config.seed)
    keys = [(a, o) for a in GRID_ACTIVATIONS for o in OPTIMIZER_KINDS]
    job = _GridJob(train_part, test_part, base_spec, config, options, dict(optimizer_overrides or {}))
    cells = _pmap(job, keys, n_jobs)
    return GridReport({(c.activation, c.optimizer): c for c in cells})
