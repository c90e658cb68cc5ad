"""Flow-record CSV ingestion, label mapping and class distributions."""
from __future__ import annotations

import csv
import enum
from collections import Counter
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Dict, FrozenSet, Iterable, List, Optional, Sequence, Tuple

import numpy as np

__all__ = [
    "AttackType",
    "FlowSchema",
    "FlowRecord",
    "Dataset",
    "DistributionReport",
    "FlowDataError",
    "DEFAULT_ID_COLUMNS",
    "load_flow_csv",
    "map_labels",
    "attack_type_of",
    "class_distribution",
]


class FlowDataError(ValueError):
    pass


class AttackType(str, enum.Enum):
    Benign = "Benign"
    BruteForceFTP = "BruteForceFTP"
    BruteForceSSH = "BruteForceSSH"
    DoS = "DoS"
    Heartbleed = "Heartbleed"
    WebAttack = "WebAttack"
    Infiltration = "Infiltration"
    Botnet = "Botnet"
    DDoS = "DDoS"
    PortScan = "PortScan"
    Other = "Other"


# Endpoint identity and timing columns of CICIDS2017-style exports.
DEFAULT_ID_COLUMNS: FrozenSet[str] = frozenset({
    "Flow ID", "Source IP", "Src IP", "Destination IP", "Dst IP",
    "Source Port", "Src Port", "Destination Port", "Dst Port", "Timestamp",
})

# Matched against the lowercased label with spaces, dashes and underscores
# removed.  Longer prefixes first so "ddos" wins over "dos".
_PREFIXES: Tuple[Tuple[str, AttackType], ...] = (
    ("bruteforceftp", AttackType.BruteForceFTP),
    ("ftppatator", AttackType.BruteForceFTP),
    ("bruteforcessh", AttackType.BruteForceSSH),
    ("sshpatator", AttackType.BruteForceSSH),
    ("infiltration", AttackType.Infiltration),
    ("heartbleed", AttackType.Heartbleed),
    ("webattack", AttackType.WebAttack),
    ("portscan", AttackType.PortScan),
    ("botnet", AttackType.Botnet),
    ("ddos", AttackType.DDoS),
    ("bot", AttackType.Botnet),
    ("dos", AttackType.DoS),
)


def _squash(label: str) -> str:
    return "".join(ch for ch in label.lower() if ch.isalnum())


@dataclass(frozen=True)
class FlowSchema:
    feature_names: Tuple[str, ...]
    label_column: str = "Label"
    id_columns: Tuple[str, ...] = ()

    def __post_init__(self):
        names = tuple(n.strip() for n in self.feature_names)
        object.__setattr__(self, "feature_names", names)
        object.__setattr__(self, "label_column", self.label_column.strip())
        object.__setattr__(self, "id_columns", tuple(c.strip() for c in self.id_columns))
        if not names:
            raise FlowDataError("schema has no feature columns")
        dupes = sorted(n for n, c in Counter(names).items() if c > 1)
        if dupes:
            raise FlowDataError(f"duplicate feature names after trimming: {dupes}")
        if self.label_column in names:
            raise FlowDataError(f"label column {self.label_column!r} listed as a feature")

    @property
    def n_features(self) -> int:
        return len(self.feature_names)

    def to_dict(self) -> dict:
        return {
            "feature_names": list(self.feature_names),
            "label_column": self.label_column,
            "id_columns": list(self.id_columns),
        }

    @classmethod
    def from_dict(cls, d) -> "FlowSchema":
        return cls(tuple(d["feature_names"]), d.get("label_column", "Label"), tuple(d.get("id_columns", ())))


@dataclass(frozen=True)
class FlowRecord:
    features: np.ndarray
    label_raw: str = ""
    label_binary: int = 0
    attack_type: AttackType = AttackType.Benign


@dataclass(frozen=True, eq=False)
class Dataset:
    """Column-oriented flow table.

    ``X`` holds one float64 row per flow.  ``synthetic`` marks rows created
    by oversampling so they can be kept out of evaluation splits.
    """

    schema: FlowSchema
    X: np.ndarray
    label_raw: np.ndarray
    label_binary: np.ndarray
    attack_type: np.ndarray
    provenance: Tuple[str, ...] = ()
    synthetic: Optional[np.ndarray] = None

    def __post_init__(self):
        n = self.X.shape[0]
        if self.X.ndim != 2 or self.X.shape[1] != self.schema.n_features:
            raise FlowDataError(f"feature matrix shape {self.X.shape} does not match schema ({self.schema.n_features} features)")
        for name in ("label_raw", "label_binary", "attack_type"):
            if len(getattr(self, name)) != n:
                raise FlowDataError(f"{name} length does not match row count")
        if self.synthetic is None:
            object.__setattr__(self, "synthetic", np.zeros(n, dtype=bool))

    def __len__(self):
        return self.X.shape[0]

    def __getitem__(self, i) -> FlowRecord:
        return FlowRecord(
            features=self.X[i].copy(),
            label_raw=str(self.label_raw[i]),
            label_binary=int(self.label_binary[i]),
            attack_type=AttackType(self.attack_type[i]),
        )

    @property
    def rows(self) -> List[FlowRecord]:
        return [self[i] for i in range(len(self))]

    @property
    def y(self) -> np.ndarray:
        return self.label_binary

    def subset(self, index) -> "Dataset":
        index = np.asarray(index)
        return replace(
            self,
            X=self.X[index],
            label_raw=self.label_raw[index],
            label_binary=self.label_binary[index],
            attack_type=self.attack_type[index],
            synthetic=self.synthetic[index],
        )

    def with_features(self, X: np.ndarray, feature_names: Sequence[str]) -> "Dataset":
        schema = FlowSchema(tuple(feature_names), self.schema.label_column, self.schema.id_columns)
        return replace(self, schema=schema, X=np.asarray(X, dtype=np.float64))

    def concat(self, other: "Dataset") -> "Dataset":
        if other.schema.feature_names != self.schema.feature_names:
            raise FlowDataError("cannot concatenate datasets with different schemas")
        return replace(
            self,
            X=np.vstack([self.X, other.X]),
            label_raw=np.concatenate([self.label_raw, other.label_raw]),
            label_binary=np.concatenate([self.label_binary, other.label_binary]),
            attack_type=np.concatenate([self.attack_type, other.attack_type]),
            synthetic=np.concatenate([self.synthetic, other.synthetic]),
            provenance=tuple(dict.fromkeys(self.provenance + other.provenance)),
        )

    @classmethod
    def from_arrays(cls, X, y, feature_names=None, labels=None) -> "Dataset":
        """Build a mapped dataset from a feature matrix and 0/1 labels."""
        X = np.asarray(X, dtype=np.float64)
        y = np.asarray(y).astype(np.int64)
        if feature_names is None:
            feature_names = [f"f{i}" for i in range(X.shape[1])]
        given = labels is not None
        if not given:
            labels = np.where(y == 1, "ATTACK", "BENIGN")
        ds = cls(
            schema=FlowSchema(tuple(feature_names)),
            X=X,
            label_raw=np.asarray(labels, dtype=object),
            label_binary=y,
            attack_type=np.where(y == 1, AttackType.Other.value, AttackType.Benign.value).astype(object),
        )
        return map_labels(ds) if given else ds


@dataclass(frozen=True)
class DistributionReport:
    count_per_attack_type: Dict[str, int]
    count_benign: int
    count_attack: int
    fraction_benign: float
    fraction_attack: float

    @property
    def total(self) -> int:
        return self.count_benign + self.count_attack

    def to_rows(self) -> List[Tuple[str, int, float]]:
        n = self.total
        return [(k, v, v / n) for k, v in self.count_per_attack_type.items()]

    def format(self) -> str:
        lines = [f"rows: {self.total}",
                 f"benign: {self.count_benign} ({self.fraction_benign:.4f})",
                 f"attack: {self.count_attack} ({self.fraction_attack:.4f})"]
        for name, count, frac in self.to_rows():
            if count:
                lines.append(f"  {name:<14} {count:>9} ({frac:.4f})")
        return "\n".join(lines)


def _parse_float_column(cells: List[str]) -> np.ndarray:
    out = np.empty(len(cells), dtype=np.float64)
    for i, cell in enumerate(cells):
        try:
            out[i] = float(cell)
        except ValueError:
            # empty or non-numeric cells become NaN; cleaning drops them later
            out[i] = np.nan
    return out


def _read_one(path: Path, label_column: str, require_label: bool, rename_duplicates: bool):
    with open(path, newline="", encoding="utf-8-sig", errors="replace") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise FlowDataError(f"{path}: empty file, expected a header row") from None
        header = [h.strip() for h in header]
        dupes = sorted(h for h, c in Counter(header).items() if c > 1)
        if dupes and rename_duplicates:
            seen: Counter = Counter()
            renamed = []
            for h in header:
                renamed.append(f"{h}.{seen[h]}" if seen[h] else h)
                seen[h] += 1
            header = renamed
        elif dupes:
            raise FlowDataError(f"{path}: duplicate column names after trimming: {dupes}")
        if require_label and label_column not in header:
            raise FlowDataError(f"{path}: label column {label_column!r} absent; columns: {header}")
        width = len(header)
        rows = []
        for row in reader:
            if not row:
                continue
            if len(row) != width:
                raise FlowDataError(
                    f"{path}:{reader.line_num}: expected {width} fields, found {len(row)}")
            rows.append(row)
    return header, rows


def load_flow_csv(
    paths: Sequence,
    schema_hint: Optional[FlowSchema] = None,
    label_column: str = "Label",
    id_columns: Iterable[str] = DEFAULT_ID_COLUMNS,
    benign_tokens: Iterable[str] = ("BENIGN",),
    require_label: bool = True,
    rename_duplicates: bool = False,
) -> Dataset:
    """Read one or more flow CSV exports into a :class:`Dataset`.

    Column names are whitespace-trimmed.  Every non-label, non-id column is
    a float64 feature; ``Infinity``/``inf`` parse to +inf and empty or
    ``NaN`` cells to NaN.  Labels are mapped with :func:`map_labels`.

    With ``require_label=False`` a missing label column is tolerated and all
    rows get an empty raw label (used for prediction on unlabeled flows).
    Duplicate column names are an error unless ``rename_duplicates`` is set,
    in which case repeats get ``.1``, ``.2``... suffixes (the public
    CICIDS2017 export repeats "Fwd Header Length").
    """
    paths = [Path(p) for p in paths]
    if not paths:
        raise FlowDataError("no input files")
    for p in paths:
        if not p.is_file():
            raise FlowDataError(f"missing file: {p}")
    if schema_hint is not None:
        label_column = schema_hint.label_column
        id_columns = schema_hint.id_columns

    label_column = label_column.strip()
    id_set = {c.strip() for c in id_columns}
    header0 = None
    feature_idx: List[int] = []
    feature_names: Tuple[str, ...] = ()
    blocks_X, blocks_label = [], []
    for path in paths:
        header, rows = _read_one(path, label_column, require_label, rename_duplicates)
        if header0 is None:
            header0 = header
            if schema_hint is not None:
                missing = [f for f in schema_hint.feature_names if f not in header]
                if missing:
                    raise FlowDataError(f"{path}: schema features absent from header: {missing}")
                feature_names = schema_hint.feature_names
                feature_idx = [header.index(f) for f in feature_names]
            else:
                feature_idx = [i for i, h in enumerate(header) if h != label_column and h not in id_set]
                feature_names = tuple(header[i] for i in feature_idx)
        elif header != header0:
            raise FlowDataError(f"{path}: header does not match {paths[0]}")
        has_label = label_column in header
        label_idx = header.index(label_column) if has_label else None
        cols = list(zip(*rows)) if rows else [()] * len(header)
        X = np.column_stack([_parse_float_column(list(cols[i])) for i in feature_idx]) if rows else np.empty((0, len(feature_idx)))
        blocks_X.append(X)
        labels = [c.strip() for c in cols[label_idx]] if has_label else [""] * len(rows)
        blocks_label.append(np.asarray(labels, dtype=object))

    schema = FlowSchema(feature_names, label_column, tuple(sorted(id_set & set(header0))))
    X = np.vstack(blocks_X) if blocks_X else np.empty((0, len(feature_names)))
    label_raw = np.concatenate(blocks_label) if blocks_label else np.empty(0, dtype=object)
    n = X.shape[0]
    ds = Dataset(
        schema=schema,
        X=X,
        label_raw=label_raw,
        label_binary=np.zeros(n, dtype=np.int64),
        attack_type=np.full(n, AttackType.Benign.value, dtype=object),
        provenance=tuple(str(p) for p in paths),
    )
    if require_label or all(label_raw):
        ds = map_labels(ds, benign_tokens)
    return ds


def attack_type_of(label: str, benign_tokens: Iterable[str] = ("BENIGN",)) -> AttackType:
    norm = label.strip().lower()
    if norm in {t.strip().lower() for t in benign_tokens}:
        return AttackType.Benign
    squashed = _squash(label)
    for prefix, kind in _PREFIXES:
        if squashed.startswith(prefix):
            return kind
    return AttackType.Other


def map_labels(dataset: Dataset, benign_tokens: Iterable[str] = ("BENIGN",)) -> Dataset:
    """Assign binary labels and attack types from the raw label strings."""
    tokens = tuple(benign_tokens)
    cache: Dict[str, AttackType] = {}
    types = []
    for label in dataset.label_raw:
        label = str(label)
        if not label.strip():
            raise FlowDataError("row with empty label")
        if label not in cache:
            cache[label] = attack_type_of(label, tokens)
        types.append(cache[label].value)
    attack_type = np.asarray(types, dtype=object)
    binary = (attack_type != AttackType.Benign.value).astype(np.int64)
    return replace(dataset, label_binary=binary, attack_type=attack_type)


def class_distribution(dataset: Dataset) -> DistributionReport:
    n = len(dataset)
    if n == 0:
        raise FlowDataError("empty dataset")
    counts = Counter(dataset.attack_type.tolist())
    per_type = {t.value: int(counts.get(t.value, 0)) for t in AttackType}
    n_attack = int(dataset.label_binary.sum())
    n_benign = n - n_attack
    frac_attack = n_attack / n
    return DistributionReport(
        count_per_attack_type=per_type,
        count_benign=n_benign,
        count_attack=n_attack,
        fraction_benign=1.0 - frac_attack,
        fraction_attack=frac_attack,
    )
