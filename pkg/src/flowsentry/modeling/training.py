"""Mini-batch training, trained-model artifacts and single-flow inference."""
from __future__ import annotations

import dataclasses
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..flowdata import Dataset, FlowRecord, FlowSchema
from ..nn import Network, binary_cross_entropy
from ..nn.serialization import network_blob, network_from_manifest, network_manifest
from ..optimizers import OptimizerConfig, OptimizerError, init_optimizer, step
from ..preprocess import FlowPreprocessor, smote_oversample, split_train_test
from .architectures import ModelSpec

log = logging.getLogger(__name__)

ATTACK, BENIGN = "attack", "benign"


class TrainingAborted(RuntimeError):
    """Raised when the training loss becomes non-finite."""

    def __init__(self, message, diagnostics):
        super().__init__(message)
        self.diagnostics = diagnostics


class SchemaMismatch(ValueError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    epochs: int = 30
    batch_size: int = 256
    l1: float = 0.0
    l2: float = 1e-4
    dropout_rate: float = 0.2
    early_stop_patience: int = 5
    seed: int = 0
    threshold: float = 0.5

    def __post_init__(self):
        if not isinstance(self.optimizer, OptimizerConfig):
            object.__setattr__(self, "optimizer", OptimizerConfig.from_dict(self.optimizer))
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be positive")
        if self.l1 < 0 or self.l2 < 0:
            raise ValueError("l1 and l2 must be non-negative")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValueError("dropout_rate must lie in [0, 1)")
        if self.early_stop_patience < 0:
            raise ValueError("early_stop_patience must be >= 0")
        if not 0.0 < self.threshold < 1.0:
            raise ValueError("threshold must lie in (0, 1)")

    def replace(self, **kwargs) -> "TrainConfig":
        return dataclasses.replace(self, **kwargs)

    def to_dict(self) -> dict:
        d = {f.name: getattr(self, f.name) for f in dataclasses.fields(self)}
        d["optimizer"] = self.optimizer.to_dict()
        return d

    @classmethod
    def from_dict(cls, d) -> "TrainConfig":
        d = dict(d)
        if "optimizer" in d:
            d["optimizer"] = OptimizerConfig.from_dict(d["optimizer"])
        return cls(**d)


@dataclass(frozen=True)
class PreprocessOptions:
    """Fit-time preprocessing applied inside every training run."""

    normalization: str = "minmax"
    top_k_features: Optional[int] = 20
    smote: bool = True
    smote_k: int = 5
    smote_ratio: float = 1.0
    oversample_method: str = "smote"
    validation_fraction: float = 0.1

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d) -> "PreprocessOptions":
        return cls(**d)


@dataclass
class TrainHistory:
    train_loss: List[float] = field(default_factory=list)
    val_loss: List[float] = field(default_factory=list)
    val_accuracy: List[float] = field(default_factory=list)
    best_epoch: Optional[int] = None
    stopped_early: bool = False

    def __len__(self):
        return len(self.train_loss)

    def rows(self):
        for i, tl in enumerate(self.train_loss):
            vl = self.val_loss[i] if i < len(self.val_loss) else float("nan")
            va = self.val_accuracy[i] if i < len(self.val_accuracy) else float("nan")
            yield i + 1, tl, vl, va


@dataclass
class TrainedModel:
    """Frozen network plus everything needed to score raw flow rows."""

    network: Network
    spec: ModelSpec
    config: TrainConfig
    preprocessor: Optional[FlowPreprocessor] = None
    schema: Optional[FlowSchema] = None
    metrics: Dict = field(default_factory=dict)

    def __post_init__(self):
        for arr in self.network.parameters().values():
            arr.flags.writeable = False

    @property
    def n_features_in(self) -> int:
        if self.preprocessor is not None:
            return self.preprocessor.n_features_in_
        return self.network.input_shape[0]

    def transform(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X.reshape(1, -1)
        if X.shape[1] != self.n_features_in:
            raise SchemaMismatch(f"expected {self.n_features_in} features, found {X.shape[1]}")
        if not np.all(np.isfinite(X)):
            raise ValueError("input contains NaN or infinite feature values")
        if self.preprocessor is not None:
            X = self.preprocessor.transform(X)
        return X

    def predict_proba(self, X) -> np.ndarray:
        """Attack probability for each raw row of ``X``."""
        return self.network.forward(self.transform(X))[0]

    def align(self, dataset: Dataset) -> np.ndarray:
        """Raw feature matrix of ``dataset`` ordered by this model's schema."""
        if self.schema is None:
            return dataset.X
        have = dataset.schema.feature_names
        want = self.schema.feature_names
        if have == want:
            return dataset.X
        missing = [f for f in want if f not in have]
        if missing:
            raise SchemaMismatch(
                f"expected {len(want)} features, found {len(have)}; missing {missing[:5]}")
        pos = {name: i for i, name in enumerate(have)}
        return dataset.X[:, [pos[f] for f in want]]

    # persistence ----------------------------------------------------------

    def save(self, directory, name: str = "model") -> Path:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        manifest = network_manifest(self.network)
        bin_path = directory / f"{name}.bin"
        manifest.update({
            "blob": bin_path.name,
            "model_spec": self.spec.to_dict(),
            "train_config": self.config.to_dict(),
            "preprocessor": self.preprocessor.to_dict() if self.preprocessor is not None else None,
            "schema": self.schema.to_dict() if self.schema is not None else None,
            "metrics": self.metrics,
        })
        bin_path.write_bytes(network_blob(self.network))
        json_path = directory / f"{name}.json"
        json_path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
        return json_path

    @classmethod
    def load(cls, path) -> "TrainedModel":
        path = Path(path)
        if path.is_dir():
            path = path / "model.json"
        manifest = json.loads(path.read_text())
        network = network_from_manifest(manifest, (path.parent / manifest["blob"]).read_bytes())
        pre = manifest.get("preprocessor")
        schema = manifest.get("schema")
        return cls(
            network=network,
            spec=ModelSpec.from_dict(manifest["model_spec"]),
            config=TrainConfig.from_dict(manifest["train_config"]),
            preprocessor=FlowPreprocessor.from_dict(pre) if pre else None,
            schema=FlowSchema.from_dict(schema) if schema else None,
            metrics=manifest.get("metrics", {}),
        )


def _bce_eval(network: Network, X, y, threshold: float) -> Tuple[float, float]:
    p = network.forward(X)[0]
    loss, _ = binary_cross_entropy(p, y)
    return loss, float(np.mean((p >= threshold) == (y == 1)))


def fit_network(network: Network, X, y, X_val=None, y_val=None, config: TrainConfig = TrainConfig()) -> TrainHistory:
    """Train ``network`` in place on arrays; returns the per-epoch history.

    Shuffling and dropout draw from two independent streams spawned from
    ``config.seed``.  Early stopping (``early_stop_patience > 0`` and a
    validation set) restores the weights of the best validation epoch.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n = X.shape[0]
    batch = min(config.batch_size, n)
    shuffle_ss, dropout_ss = np.random.SeedSequence(config.seed).spawn(2)
    shuffle_rng = np.random.default_rng(shuffle_ss)
    dropout_rng = np.random.default_rng(dropout_ss)

    params = network.parameters()
    opt = init_optimizer(config.optimizer, {k: v.shape for k, v in params.items()})
    history = TrainHistory()
    has_val = X_val is not None and len(X_val) > 0
    use_es = has_val and config.early_stop_patience > 0
    best_loss, best_weights, since_best = np.inf, None, 0

    for epoch in range(config.epochs):
        order = shuffle_rng.permutation(n)
        total = 0.0
        for b, start in enumerate(range(0, n, batch)):
            idx = order[start:start + batch]
            p, cache = network.forward(X[idx], training=True, rng=dropout_rng)
            loss, dp = binary_cross_entropy(p, y[idx])
            loss += network.penalty(config.l1, config.l2)
            if not np.isfinite(loss):
                diag = {"epoch": epoch + 1, "batch": b + 1, "loss": str(loss),
                        "optimizer_state_norms": opt.norms(), "step": opt.t}
                raise TrainingAborted(f"non-finite loss at epoch {epoch + 1}, batch {b + 1}", diag)
            grads = network.backward(cache, dp, config.l1, config.l2)
            try:
                step(opt, params, grads)
            except OptimizerError as exc:
                diag = {"epoch": epoch + 1, "batch": b + 1, "loss": loss,
                        "optimizer_state_norms": opt.norms(), "step": opt.t, "error": str(exc)}
                raise TrainingAborted(f"optimizer failed at epoch {epoch + 1}, batch {b + 1}: {exc}", diag) from exc
            network.mark_updated()
            total += loss * idx.size
        history.train_loss.append(total / n)

        if has_val:
            vloss, vacc = _bce_eval(network, X_val, np.asarray(y_val, dtype=np.float64), config.threshold)
            history.val_loss.append(vloss)
            history.val_accuracy.append(vacc)
            if vloss < best_loss:
                best_loss, since_best = vloss, 0
                history.best_epoch = epoch + 1
                if use_es:
                    best_weights = network.get_weights()
            else:
                since_best += 1
            log.debug("epoch %d loss %.5f val_loss %.5f val_acc %.4f", epoch + 1, history.train_loss[-1], vloss, vacc)
            if use_es and since_best >= config.early_stop_patience:
                history.stopped_early = epoch + 1 < config.epochs
                break

    if use_es and best_weights is not None:
        network.set_weights(best_weights)
    return history


def train(spec: ModelSpec, train_data: Dataset, validation: Optional[Dataset], config: TrainConfig,
          preprocessor: Optional[FlowPreprocessor] = None, schema: Optional[FlowSchema] = None,
          ) -> Tuple[TrainedModel, TrainHistory]:
    """Train ``spec`` on already-preprocessed datasets."""
    y = train_data.label_binary
    if np.unique(y).size < 2:
        raise ValueError("training data must contain both classes")
    if train_data.X.shape[1] != spec.input_dim:
        raise SchemaMismatch(f"spec expects {spec.input_dim} features, training data has {train_data.X.shape[1]}")
    network = spec.build(config.dropout_rate, seed=config.seed)
    Xv = yv = None
    if validation is not None and len(validation):
        Xv, yv = validation.X, validation.label_binary
    history = fit_network(network, train_data.X, y, Xv, yv, config)
    model = TrainedModel(network, spec, config, preprocessor, schema)
    return model, history


def prepare_and_train(dataset: Dataset, spec: ModelSpec, config: TrainConfig,
                      options: PreprocessOptions = PreprocessOptions()) -> Tuple[TrainedModel, TrainHistory]:
    """Fit preprocessing on ``dataset`` (clean, real rows only) and train.

    A stratified validation slice is held out first; the normalizer,
    feature selection and oversampling see only the remaining rows, and
    oversampling never touches the validation slice.
    """
    if options.validation_fraction > 0:
        fit_part, val_part = split_train_test(dataset, 1.0 - options.validation_fraction, seed=config.seed)
    else:
        fit_part, val_part = dataset, None
    pre = FlowPreprocessor(options.normalization, options.top_k_features)
    pre.fit(fit_part.X, fit_part.label_binary, dataset.schema.feature_names)
    names = tuple(pre.get_feature_names_out())
    fit_t = fit_part.with_features(pre.transform(fit_part.X), names)
    if options.smote:
        fit_t = smote_oversample(fit_t, options.smote_k, options.smote_ratio, seed=config.seed,
                                 method=options.oversample_method)
    val_t = val_part.with_features(pre.transform(val_part.X), names) if val_part is not None else None
    spec = spec.replace(input_dim=len(names))
    return train(spec, fit_t, val_t, config, preprocessor=pre, schema=dataset.schema)


# --------------------------------------------------------------------------
# inference


def _features(record) -> np.ndarray:
    if isinstance(record, FlowRecord):
        return np.asarray(record.features, dtype=np.float64)
    return np.asarray(record, dtype=np.float64)


def predict(model: TrainedModel, record) -> float:
    """Attack probability in (0, 1) for one flow record (or raw feature vector)."""
    x = _features(record)
    if x.ndim != 1:
        raise ValueError("predict expects a single record")
    return float(model.predict_proba(x)[0])


def classify(model: TrainedModel, record, threshold: float = 0.5) -> str:
    if not 0.0 < threshold < 1.0:
        raise ValueError("threshold must lie in (0, 1)")
    return ATTACK if predict(model, record) >= threshold else BENIGN


def _check_weights(n: int, weights) -> np.ndarray:
    if weights is None:
        return np.full(n, 1.0 / n)
    w = np.asarray(weights, dtype=np.float64)
    if w.shape != (n,):
        raise ValueError(f"expected {n} weights, got {w.size}")
    if np.any(w < 0) or w.sum() <= 0:
        raise ValueError("weights must be non-negative and not all zero")
    return w / w.sum()


def check_same_schema(models: Sequence[TrainedModel]):
    if len(models) < 2:
        raise ValueError("an ensemble needs at least two models")
    ref = models[0]
    for m in models[1:]:
        if m.n_features_in != ref.n_features_in or (
                ref.schema is not None and m.schema is not None
                and m.schema.feature_names != ref.schema.feature_names):
            raise SchemaMismatch("ensemble members do not share one input schema")


def ensemble_predict(models: Sequence[TrainedModel], record, weights=None) -> float:
    """Soft vote: weighted mean of member attack probabilities."""
    check_same_schema(models)
    w = _check_weights(len(models), weights)
    probs = np.array([predict(m, record) for m in models])
    return float(probs @ w)


def ensemble_predict_proba(models: Sequence[TrainedModel], X, weights=None) -> np.ndarray:
    check_same_schema(models)
    w = _check_weights(len(models), weights)
    return np.column_stack([m.predict_proba(X) for m in models]) @ w
