"""Cleaning, normalization, correlation-based feature selection, SMOTE and
stratified splitting.

All stochastic functions take an explicit integer seed and draw from
``numpy.random.default_rng(seed)`` (PCG64).
"""
from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, replace
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.spatial import cKDTree
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_binary_labels, check_matrix, check_positive_int
from .flowdata import Dataset

__all__ = [
    "PreprocessError",
    "CleanReport",
    "NormalizationParams",
    "FeatureCorrelation",
    "FeatureSelection",
    "FoldAssignment",
    "clean",
    "fit_normalizer",
    "apply_normalizer",
    "feature_label_correlation",
    "select_top_k_features",
    "smote_samples",
    "smote_oversample",
    "split_train_test",
    "kfold_partition",
    "FlowPreprocessor",
    "SMOTEResampler",
]

MINMAX_CLIP = (-0.5, 1.5)


class PreprocessError(ValueError):
    pass


# --------------------------------------------------------------------------
# cleaning


@dataclass(frozen=True)
class CleanReport:
    rows_in: int
    rows_out: int
    rows_dropped_nan: int
    rows_dropped_inf: int


def clean(dataset: Dataset) -> Tuple[Dataset, CleanReport]:
    """Drop every row with a NaN or infinite feature.

    A row holding both NaN and infinity is counted under NaN.
    """
    X = dataset.X
    has_nan = np.isnan(X).any(axis=1)
    has_inf = np.isinf(X).any(axis=1) & ~has_nan
    keep = ~(has_nan | has_inf)
    report = CleanReport(
        rows_in=len(dataset),
        rows_out=int(keep.sum()),
        rows_dropped_nan=int(has_nan.sum()),
        rows_dropped_inf=int(has_inf.sum()),
    )
    if report.rows_out == 0:
        raise PreprocessError("empty after cleaning")
    if report.rows_out == report.rows_in:
        return dataset, report
    return dataset.subset(np.flatnonzero(keep)), report


# --------------------------------------------------------------------------
# normalization


@dataclass(frozen=True)
class NormalizationParams:
    """Per-feature statistics.

    For ``minmax`` ``loc``/``scale`` hold min and max; for ``zscore`` they
    hold mean and population standard deviation.
    """

    method: str
    loc: np.ndarray
    scale: np.ndarray
    constant: np.ndarray
    feature_names: Tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "loc": self.loc.tolist(),
            "scale": self.scale.tolist(),
            "constant": self.constant.tolist(),
            "feature_names": list(self.feature_names),
        }

    @classmethod
    def from_dict(cls, d) -> "NormalizationParams":
        return cls(
            method=d["method"],
            loc=np.asarray(d["loc"], dtype=np.float64),
            scale=np.asarray(d["scale"], dtype=np.float64),
            constant=np.asarray(d["constant"], dtype=bool),
            feature_names=tuple(d.get("feature_names", ())),
        )


def _fit_stats(X: np.ndarray, method: str):
    if method == "minmax":
        lo, hi = X.min(axis=0), X.max(axis=0)
        return lo, hi, hi == lo
    if method == "zscore":
        mean = X.mean(axis=0)
        std = np.sqrt(((X - mean) ** 2).mean(axis=0))
        return mean, std, std == 0.0
    raise PreprocessError(f"unknown normalization method {method!r}; expected 'minmax' or 'zscore'")


def _apply_stats(X: np.ndarray, params: NormalizationParams) -> np.ndarray:
    const = params.constant
    if params.method == "minmax":
        span = np.where(const, 1.0, params.scale - params.loc)
        out = (X - params.loc) / span
        out = np.clip(out, *MINMAX_CLIP)
    else:
        out = (X - params.loc) / np.where(const, 1.0, params.scale)
    out[:, const] = 0.0
    return out


def fit_normalizer(train, method: str = "minmax") -> NormalizationParams:
    X = train.X if isinstance(train, Dataset) else check_matrix(train)
    if X.shape[0] == 0:
        raise PreprocessError("cannot fit a normalizer on an empty dataset")
    names = train.schema.feature_names if isinstance(train, Dataset) else ()
    loc, scale, const = _fit_stats(X, method)
    return NormalizationParams(method, loc, scale, const, tuple(names))


def apply_normalizer(params: NormalizationParams, dataset):
    if isinstance(dataset, Dataset):
        if params.feature_names and dataset.schema.feature_names != params.feature_names:
            raise PreprocessError("dataset schema does not match the fitted normalizer")
        return replace(dataset, X=_apply_stats(dataset.X, params))
    X = check_matrix(dataset, finite=False)
    if X.shape[1] != params.loc.size:
        raise PreprocessError(f"expected {params.loc.size} features, got {X.shape[1]}")
    return _apply_stats(X, params)


# --------------------------------------------------------------------------
# correlation and selection


@dataclass(frozen=True)
class FeatureCorrelation:
    r: np.ndarray
    defined: np.ndarray
    feature_names: Tuple[str, ...] = ()

    def ranked(self) -> List[Tuple[str, float, bool]]:
        """(name, r, defined) sorted by descending |r|, ties by index."""
        order = sorted(range(self.r.size), key=lambda i: (-abs(self.r[i]), i))
        names = self.feature_names or tuple(f"f{i}" for i in range(self.r.size))
        return [(names[i], float(self.r[i]), bool(self.defined[i])) for i in order]


def _pearson_columns(X: np.ndarray, y: np.ndarray):
    y = y.astype(np.float64)
    xc = X - X.mean(axis=0)
    yc = y - y.mean()
    sxx = (xc * xc).sum(axis=0)
    syy = float(yc @ yc)
    sxy = yc @ xc
    defined = (sxx > 0) & (syy > 0)
    with np.errstate(invalid="ignore", divide="ignore"):
        r = np.where(defined, sxy / np.sqrt(sxx * syy), 0.0)
    return np.clip(r, -1.0, 1.0), defined


def feature_label_correlation(dataset: Dataset) -> FeatureCorrelation:
    """Point-biserial (Pearson) correlation of every feature with the 0/1 label.

    Zero-variance features, or any feature when only one class is present,
    get ``r = 0`` with ``defined = False``.
    """
    r, defined = _pearson_columns(dataset.X, dataset.label_binary)
    return FeatureCorrelation(r, defined, dataset.schema.feature_names)


@dataclass(frozen=True)
class FeatureSelection:
    selected_indices: Tuple[int, ...]
    k: int
    feature_names: Tuple[str, ...] = ()

    @property
    def selected_names(self) -> Tuple[str, ...]:
        return tuple(self.feature_names[i] for i in self.selected_indices) if self.feature_names else ()


def select_top_k_features(corr: FeatureCorrelation, k: int) -> FeatureSelection:
    if isinstance(k, bool) or int(k) != k or k < 1:
        raise PreprocessError(f"k must be a positive integer, got {k!r}")
    candidates = [i for i in range(corr.r.size) if corr.defined[i]]
    candidates.sort(key=lambda i: (-abs(corr.r[i]), i))
    return FeatureSelection(tuple(candidates[:int(k)]), int(k), corr.feature_names)


# --------------------------------------------------------------------------
# oversampling


def smote_samples(X_min: np.ndarray, n_new: int, k_neighbors: int, rng):
    """Draw ``n_new`` SMOTE points from the minority matrix ``X_min``.

    Seeds cycle through a random permutation of the minority rows so every
    row seeds either floor or ceil of ``n_new / len(X_min)`` points.  Each
    point is ``x + u * (x_nn - x)`` with ``u ~ U[0, 1)`` and ``x_nn`` drawn
    uniformly from the ``k_neighbors`` nearest other minority rows.

    Returns ``(points, seed_index, neighbor_index, u)``.
    """
    n_min = X_min.shape[0]
    tree = cKDTree(X_min)
    k_query = min(k_neighbors + 1, n_min)
    _, nn = tree.query(X_min, k=k_query)
    nn = np.atleast_2d(nn)
    # drop the query row itself, wherever duplicates put it
    neighbors = np.empty((n_min, k_neighbors), dtype=np.int64)
    for i in range(n_min):
        row = [j for j in nn[i] if j != i][:k_neighbors]
        neighbors[i] = row
    reps = -(-n_new // n_min)
    order = np.concatenate([rng.permutation(n_min) for _ in range(reps)])[:n_new]
    pick = rng.integers(0, k_neighbors, size=n_new)
    nn_idx = neighbors[order, pick]
    u = rng.random(n_new)
    points = X_min[order] + u[:, None] * (X_min[nn_idx] - X_min[order])
    return points, order, nn_idx, u


def _minority_plan(y: np.ndarray, target_ratio: float):
    counts = np.bincount(y, minlength=2)
    if counts.min() == 0:
        raise PreprocessError("oversampling needs both classes present")
    minority = int(np.argmin(counts)) if counts[0] != counts[1] else 1
    n_min, n_maj = counts[minority], counts[1 - minority]
    n_new = max(0, math.ceil(target_ratio * n_maj - 1e-9) - n_min)
    return minority, int(n_min), int(n_maj), n_new


def smote_oversample(
    train: Dataset,
    k_neighbors: int = 5,
    target_ratio: float = 1.0,
    seed: int = 0,
    method: str = "smote",
    return_details: bool = False,
):
    """Append synthetic minority rows until minority/majority >= target_ratio.

    Synthetic rows copy their seed row's labels and carry ``synthetic=True``.
    ``method="duplicate"`` falls back to random duplication of minority rows.
    With ``return_details`` the result is ``(dataset, details)`` where
    details holds the seed and neighbor row indices (into ``train``) and the
    interpolation weights.
    """
    k_neighbors = check_positive_int(k_neighbors, "k_neighbors")
    if target_ratio <= 0:
        raise PreprocessError("target_ratio must be positive")
    minority, n_min, n_maj, n_new = _minority_plan(train.label_binary, target_ratio)
    empty = {"seed": np.empty(0, np.int64), "neighbor": np.empty(0, np.int64), "u": np.empty(0)}
    if n_new == 0:
        return (train, empty) if return_details else train
    min_rows = np.flatnonzero(train.label_binary == minority)
    rng = np.random.default_rng(seed)
    if method == "duplicate":
        seeds = rng.choice(n_min, size=n_new, replace=True)
        points, nn_idx, u = train.X[min_rows[seeds]], seeds, np.zeros(n_new)
    elif method == "smote":
        if n_min < 2:
            raise PreprocessError("SMOTE needs >=2 minority samples")
        if n_min <= k_neighbors:
            warnings.warn(f"only {n_min} minority samples; reducing k_neighbors from {k_neighbors} to {n_min - 1}")
            k_neighbors = n_min - 1
        points, seeds, nn_idx, u = smote_samples(train.X[min_rows], n_new, k_neighbors, rng)
    else:
        raise PreprocessError(f"unknown oversampling method {method!r}")

    src = min_rows[seeds]
    extra = Dataset(
        schema=train.schema,
        X=points,
        label_raw=train.label_raw[src],
        label_binary=train.label_binary[src],
        attack_type=train.attack_type[src],
        provenance=train.provenance,
        synthetic=np.ones(n_new, dtype=bool),
    )
    out = train.concat(extra)
    if return_details:
        return out, {"seed": src, "neighbor": min_rows[nn_idx], "u": u}
    return out


# --------------------------------------------------------------------------
# splitting


def _require_real_rows(dataset: Dataset, what: str):
    if dataset.synthetic.any():
        raise PreprocessError(f"{what} must run before oversampling; dataset holds synthetic rows")


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def split_train_test(dataset: Dataset, train_fraction: float = 0.8, seed: int = 0,
                     stratified: bool = True) -> Tuple[Dataset, Dataset]:
    """Seeded train/test split; per-class counts are rounded half-up."""
    if not 0.0 < train_fraction < 1.0:
        raise PreprocessError(f"train_fraction must lie in (0, 1), got {train_fraction}")
    _require_real_rows(dataset, "splitting")
    rng = np.random.default_rng(seed)
    y = dataset.label_binary
    train_idx, test_idx = [], []
    groups = [np.flatnonzero(y == c) for c in (0, 1)] if stratified else [np.arange(len(dataset))]
    for members in groups:
        if members.size == 0:
            continue
        if stratified and members.size < 2:
            raise PreprocessError("stratified split needs at least 2 rows per class")
        perm = members[rng.permutation(members.size)]
        n_train = _round_half_up(members.size * train_fraction)
        train_idx.append(perm[:n_train])
        test_idx.append(perm[n_train:])
    tr = np.sort(np.concatenate(train_idx))
    te = np.sort(np.concatenate(test_idx))
    if tr.size == 0 or te.size == 0:
        raise PreprocessError(f"split with train_fraction={train_fraction} leaves an empty part")
    return dataset.subset(tr), dataset.subset(te)


@dataclass(frozen=True)
class FoldAssignment:
    k: int
    fold_of_row: np.ndarray

    def split(self, i: int) -> Tuple[np.ndarray, np.ndarray]:
        """Row indices (train, validation) for fold ``i``."""
        if not 0 <= i < self.k:
            raise IndexError(f"fold {i} out of range for k={self.k}")
        return np.flatnonzero(self.fold_of_row != i), np.flatnonzero(self.fold_of_row == i)

    def sizes(self) -> List[int]:
        return np.bincount(self.fold_of_row, minlength=self.k).tolist()


def kfold_partition(dataset, k: int, seed: int = 0) -> FoldAssignment:
    """Stratified k-fold assignment.

    Each class is shuffled, the classes are laid end to end, and folds are
    dealt round-robin along that sequence.  Per-class and overall fold sizes
    therefore differ by at most one.
    """
    y = dataset.label_binary if isinstance(dataset, Dataset) else check_binary_labels(dataset)
    if isinstance(dataset, Dataset):
        _require_real_rows(dataset, "fold assignment")
    k = check_positive_int(k, "k", minimum=2)
    counts = np.bincount(y, minlength=2)
    present = counts[counts > 0]
    if k > present.min():
        raise PreprocessError(f"k={k} exceeds the smallest class count {int(present.min())}")
    rng = np.random.default_rng(seed)
    sequence = np.concatenate([
        np.flatnonzero(y == c)[rng.permutation(counts[c])] for c in (0, 1) if counts[c]
    ])
    fold = np.empty(y.size, dtype=np.int64)
    fold[sequence] = np.arange(y.size) % k
    return FoldAssignment(k, fold)


# --------------------------------------------------------------------------
# estimator wrappers


class FlowPreprocessor(TransformerMixin, BaseEstimator):
    """Fitted normalize-then-select transform replayed at inference.

    ``fit`` learns normalization statistics on the training matrix, then
    ranks the normalized features by |point-biserial r| and keeps the top
    ``top_k``.  ``transform`` refuses non-finite input: cleaning is an
    explicit step, never applied silently.

    Parameters
    ----------
    normalization : {"minmax", "zscore"}
    top_k : int or None
        Number of features kept; ``None`` keeps every defined feature.
    """

    clean_policy = "drop_nonfinite_rows"

    def __init__(self, normalization="minmax", top_k=20):
        self.normalization = normalization
        self.top_k = top_k

    def fit(self, X, y, feature_names: Optional[Sequence[str]] = None):
        X = check_matrix(X)
        y = check_binary_labels(y, X.shape[0])
        if feature_names is None:
            feature_names = [f"f{i}" for i in range(X.shape[1])]
        self.feature_names_in_ = np.asarray(list(feature_names), dtype=object)
        self.n_features_in_ = X.shape[1]
        self.normalization_ = fit_normalizer(X, self.normalization)
        self.normalization_ = replace(self.normalization_, feature_names=tuple(feature_names))
        Xn = _apply_stats(X, self.normalization_)
        r, defined = _pearson_columns(Xn, y)
        self.correlation_ = FeatureCorrelation(r, defined, tuple(feature_names))
        k = self.n_features_in_ if self.top_k is None else self.top_k
        self.selection_ = select_top_k_features(self.correlation_, k)
        if not self.selection_.selected_indices:
            raise PreprocessError("no feature has a defined correlation with the label")
        return self

    def transform(self, X):
        check_is_fitted(self, "selection_")
        X = check_matrix(X, self.n_features_in_)
        return _apply_stats(X, self.normalization_)[:, list(self.selection_.selected_indices)]

    def get_feature_names_out(self, input_features=None):
        check_is_fitted(self, "selection_")
        return np.asarray(self.selection_.selected_names, dtype=object)

    @property
    def n_features_out_(self) -> int:
        return len(self.selection_.selected_indices)

    def to_dict(self) -> dict:
        check_is_fitted(self, "selection_")
        return {
            "clean_policy": self.clean_policy,
            "params": self.get_params(),
            "feature_names_in": list(self.feature_names_in_),
            "normalization": self.normalization_.to_dict(),
            "correlation": {"r": self.correlation_.r.tolist(), "defined": self.correlation_.defined.tolist()},
            "selection": {"indices": list(self.selection_.selected_indices), "k": self.selection_.k},
        }

    @classmethod
    def from_dict(cls, d) -> "FlowPreprocessor":
        obj = cls(**d["params"])
        names = tuple(d["feature_names_in"])
        obj.feature_names_in_ = np.asarray(names, dtype=object)
        obj.n_features_in_ = len(names)
        obj.normalization_ = NormalizationParams.from_dict(d["normalization"])
        obj.correlation_ = FeatureCorrelation(
            np.asarray(d["correlation"]["r"], dtype=np.float64),
            np.asarray(d["correlation"]["defined"], dtype=bool),
            names,
        )
        obj.selection_ = FeatureSelection(tuple(d["selection"]["indices"]), d["selection"]["k"], names)
        return obj

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "FlowPreprocessor":
        return cls.from_dict(json.loads(text))


class SMOTEResampler(BaseEstimator):
    """``fit_resample`` front end to :func:`smote_oversample` on plain arrays.

    The boolean mask of synthetic rows from the last call is kept in
    ``synthetic_mask_``.
    """

    def __init__(self, k_neighbors=5, target_ratio=1.0, method="smote", random_state=0):
        self.k_neighbors = k_neighbors
        self.target_ratio = target_ratio
        self.method = method
        self.random_state = random_state

    def fit_resample(self, X, y):
        ds = Dataset.from_arrays(check_matrix(X), check_binary_labels(y))
        out = smote_oversample(ds, self.k_neighbors, self.target_ratio, self.random_state, self.method)
        self.synthetic_mask_ = out.synthetic.copy()
        return out.X, out.label_binary
