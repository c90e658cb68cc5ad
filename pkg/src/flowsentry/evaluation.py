"""Metrics, ROC analysis, latency measurement and report files.

The positive class is *attack* everywhere.
"""
from __future__ import annotations

import csv
import json
import time
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Callable, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from ._validation import check_binary_labels

__all__ = [
    "METRICS_SCHEMA_VERSION",
    "ConfusionMatrix",
    "ClassificationReport",
    "RocCurve",
    "LatencyStats",
    "EvaluationError",
    "confusion_matrix",
    "classification_report",
    "roc_curve",
    "measure_latency",
    "render_reports",
    "write_metrics_json",
    "read_metrics_json",
    "fmt",
]

METRICS_SCHEMA_VERSION = 1
POSITIVE_CLASS_NOTE = "# positive_class=attack"
MIN_LATENCY_REPETITIONS = 1000
LATENCY_WARMUP = 100


class EvaluationError(ValueError):
    pass


def fmt(x) -> str:
    """Six significant digits, '.' decimal separator."""
    return f"{float(x):.6g}"


@dataclass(frozen=True)
class ConfusionMatrix:
    tn: int
    fp: int
    fn: int
    tp: int

    @property
    def total(self) -> int:
        return self.tn + self.fp + self.fn + self.tp

    def to_dict(self) -> dict:
        return asdict(self)


def confusion_matrix(probabilities, labels, threshold: float = 0.5) -> ConfusionMatrix:
    """Counts with ``predicted attack`` meaning ``probability >= threshold``."""
    p = np.asarray(probabilities, dtype=np.float64).ravel()
    y = check_binary_labels(labels)
    if p.size != y.size:
        raise EvaluationError(f"length mismatch: {p.size} probabilities vs {y.size} labels")
    if p.size == 0:
        raise EvaluationError("nothing to evaluate")
    pred = p >= threshold
    pos = y == 1
    return ConfusionMatrix(
        tn=int(np.sum(~pred & ~pos)),
        fp=int(np.sum(pred & ~pos)),
        fn=int(np.sum(~pred & pos)),
        tp=int(np.sum(pred & pos)),
    )


@dataclass(frozen=True)
class ClassificationReport:
    accuracy: float
    precision_attack: float
    recall_attack: float
    f1_attack: float
    precision_benign: float
    recall_benign: float
    f1_benign: float
    macro_precision: float
    macro_recall: float
    macro_f1: float
    false_positive_rate: float
    support_benign: int
    support_attack: int
    undefined: Tuple[str, ...] = ()

    def to_dict(self) -> dict:
        d = asdict(self)
        d["undefined"] = list(self.undefined)
        return d

    @classmethod
    def from_dict(cls, d: Mapping) -> "ClassificationReport":
        kw = {f.name: d[f.name] for f in fields(cls)}
        kw["undefined"] = tuple(kw["undefined"])
        return cls(**kw)


def _ratio(num: int, den: int, name: str, undefined: List[str]) -> float:
    if den == 0:
        undefined.append(name)
        return 0.0
    return num / den


def _f1(p: float, r: float, name: str, undefined: List[str], parts_defined: bool) -> float:
    if not parts_defined or p + r == 0:
        undefined.append(name)
        return 0.0
    return 2.0 * p * r / (p + r)


def classification_report(cm: ConfusionMatrix) -> ClassificationReport:
    """Per-class and macro metrics.

    Ratios with a zero denominator are reported as 0.0 and their names are
    listed in ``undefined``.
    """
    if cm.total <= 0:
        raise EvaluationError("empty confusion matrix")
    und: List[str] = []
    pa = _ratio(cm.tp, cm.tp + cm.fp, "precision_attack", und)
    ra = _ratio(cm.tp, cm.tp + cm.fn, "recall_attack", und)
    fa = _f1(pa, ra, "f1_attack", und, "precision_attack" not in und and "recall_attack" not in und)
    pb = _ratio(cm.tn, cm.tn + cm.fn, "precision_benign", und)
    rb = _ratio(cm.tn, cm.tn + cm.fp, "recall_benign", und)
    fb = _f1(pb, rb, "f1_benign", und, "precision_benign" not in und and "recall_benign" not in und)
    fpr = _ratio(cm.fp, cm.fp + cm.tn, "false_positive_rate", und)
    return ClassificationReport(
        accuracy=(cm.tp + cm.tn) / cm.total,
        precision_attack=pa,
        recall_attack=ra,
        f1_attack=fa,
        precision_benign=pb,
        recall_benign=rb,
        f1_benign=fb,
        macro_precision=(pa + pb) / 2.0,
        macro_recall=(ra + rb) / 2.0,
        macro_f1=(fa + fb) / 2.0,
        false_positive_rate=fpr,
        support_benign=cm.tn + cm.fp,
        support_attack=cm.fn + cm.tp,
        undefined=tuple(und),
    )


@dataclass(frozen=True)
class RocCurve:
    fpr: np.ndarray
    tpr: np.ndarray
    thresholds: np.ndarray
    auc: float

    @property
    def points(self) -> List[Tuple[float, float]]:
        return list(zip(self.fpr.tolist(), self.tpr.tolist()))


def roc_curve(probabilities, labels) -> RocCurve:
    """Threshold sweep over the distinct scores, highest first.

    Tied scores form a single step.  The first point (threshold +inf) is
    (0, 0) and the last is (1, 1).  AUC uses the trapezoidal rule.
    """
    s = np.asarray(probabilities, dtype=np.float64).ravel()
    y = check_binary_labels(labels)
    if s.size != y.size:
        raise EvaluationError(f"length mismatch: {s.size} scores vs {y.size} labels")
    n_pos = int(y.sum())
    n_neg = y.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise EvaluationError("ROC undefined: labels contain a single class")
    order = np.argsort(-s, kind="mergesort")
    s_sorted, y_sorted = s[order], y[order]
    # last index of each run of equal scores
    ends = np.flatnonzero(np.r_[s_sorted[1:] != s_sorted[:-1], True])
    tp = np.cumsum(y_sorted)[ends]
    fp = (ends + 1) - tp
    tpr = np.r_[0.0, tp / n_pos]
    fpr = np.r_[0.0, fp / n_neg]
    thresholds = np.r_[np.inf, s_sorted[ends]]
    auc = float(np.sum(np.diff(fpr) * (tpr[1:] + tpr[:-1]) / 2.0))
    return RocCurve(fpr=fpr, tpr=tpr, thresholds=thresholds, auc=auc)


@dataclass(frozen=True)
class LatencyStats:
    mean_ms: float
    p50_ms: float
    p95_ms: float
    p99_ms: float
    count: int

    def to_dict(self) -> dict:
        return asdict(self)


def measure_latency(model, sample_records: Sequence, repetitions: int = 10_000,
                    predict_fn: Optional[Callable] = None) -> LatencyStats:
    """Single-threaded wall time of one-record predictions.

    ``predict_fn(model, record)`` defaults to :func:`flowsentry.modeling.predict`,
    so the stored preprocessing is replayed on every call.  The first
    ``LATENCY_WARMUP`` calls are run but not recorded.
    """
    if repetitions < MIN_LATENCY_REPETITIONS:
        raise EvaluationError(f"repetitions must be >= {MIN_LATENCY_REPETITIONS}, got {repetitions}")
    if not len(sample_records):
        raise EvaluationError("no sample records")
    if predict_fn is None:
        from .modeling import predict as predict_fn
    n = len(sample_records)
    for i in range(LATENCY_WARMUP):
        predict_fn(model, sample_records[i % n])
    times = np.empty(repetitions)
    clock = time.perf_counter_ns
    for i in range(repetitions):
        rec = sample_records[i % n]
        t0 = clock()
        predict_fn(model, rec)
        times[i] = clock() - t0
    ms = times / 1e6
    p50, p95, p99 = np.percentile(ms, [50, 95, 99])
    return LatencyStats(float(ms.mean()), float(p50), float(p95), float(p99), repetitions)


# --------------------------------------------------------------------------
# files


def write_metrics_json(path, reports: Mapping[str, ClassificationReport], extra: Optional[Mapping[str, dict]] = None):
    """metrics.json: ``{"schema_version", "positive_class", "models": {name: report}}``.

    ``extra[name]`` is merged into each model entry (confusion counts, AUC).
    """
    models = {}
    for name, rep in reports.items():
        entry = rep.to_dict()
        if extra and name in extra:
            entry.update(extra[name])
        models[name] = entry
    doc = {"schema_version": METRICS_SCHEMA_VERSION, "positive_class": "attack", "models": models}
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def read_metrics_json(path) -> Dict[str, ClassificationReport]:
    doc = json.loads(Path(path).read_text())
    if doc.get("schema_version") != METRICS_SCHEMA_VERSION:
        raise EvaluationError(f"unsupported metrics schema version {doc.get('schema_version')!r}")
    return {name: ClassificationReport.from_dict(d) for name, d in doc["models"].items()}


def _write_csv(path: Path, header: Sequence[str], rows: Sequence[Sequence], note: bool = True):
    try:
        with open(path, "w", newline="") as fh:
            if note:
                fh.write(POSITIVE_CLASS_NOTE + "\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            w.writerows(rows)
    except OSError as exc:
        raise OSError(f"failed to write {path}: {exc}") from exc
    return path


def read_report_csv(path) -> List[Dict[str, str]]:
    """Read a CSV written by :func:`render_reports`, skipping comment lines."""
    with open(path, newline="") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    return list(csv.DictReader(lines))


def render_reports(
    out_dir,
    reports: Optional[Mapping[str, ClassificationReport]] = None,
    confusions: Optional[Mapping[str, ConfusionMatrix]] = None,
    rocs: Optional[Mapping[str, RocCurve]] = None,
    distribution=None,
    correlation=None,
    grid=None,
    latency: Optional[Mapping[str, LatencyStats]] = None,
) -> List[Path]:
    """Write every provided artifact into ``out_dir``; returns the paths written.

    Files: metrics.json, comparison.csv, confusion_<model>.csv,
    roc_<model>.csv, distribution.csv, correlation.csv, grid.csv,
    latency.json.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written: List[Path] = []
    confusions = confusions or {}
    rocs = rocs or {}

    if reports:
        extra = {}
        for name in reports:
            e = {}
            if name in confusions:
                e["confusion"] = confusions[name].to_dict()
            if name in rocs:
                e["auc"] = rocs[name].auc
            extra[name] = e
        write_metrics_json(out / "metrics.json", reports, extra)
        written.append(out / "metrics.json")
        rows = [[name, fmt(r.accuracy), fmt(r.precision_attack), fmt(r.recall_attack), fmt(r.f1_attack)]
                for name, r in reports.items()]
        written.append(_write_csv(out / "comparison.csv", ["model", "accuracy", "precision", "recall", "f1"], rows))
    for name, cm in confusions.items():
        rows = [["benign", cm.tn, cm.fp], ["attack", cm.fn, cm.tp]]
        written.append(_write_csv(out / f"confusion_{name}.csv", ["actual", "pred_benign", "pred_attack"], rows))
    for name, roc in rocs.items():
        rows = [[fmt(f), fmt(t)] for f, t in zip(roc.fpr, roc.tpr)]
        written.append(_write_csv(out / f"roc_{name}.csv", ["fpr", "tpr"], rows))
    if distribution is not None:
        rows = [[k, v, fmt(frac)] for k, v, frac in distribution.to_rows()]
        rows += [["benign_total", distribution.count_benign, fmt(distribution.fraction_benign)],
                 ["attack_total", distribution.count_attack, fmt(distribution.fraction_attack)]]
        written.append(_write_csv(out / "distribution.csv", ["class", "count", "fraction"], rows))
    if correlation is not None:
        rows = [[name, fmt(r), int(d)] for name, r, d in correlation.ranked()]
        written.append(_write_csv(out / "correlation.csv", ["feature", "r", "defined"], rows))
    if grid is not None:
        header, rows = grid.table()
        written.append(_write_csv(out / "grid.csv", header, rows))
    if latency:
        path = out / "latency.json"
        try:
            path.write_text(json.dumps({k: v.to_dict() for k, v in latency.items()}, indent=2, sort_keys=True) + "\n")
        except OSError as exc:
            raise OSError(f"failed to write {path}: {exc}") from exc
        written.append(path)
    return written
