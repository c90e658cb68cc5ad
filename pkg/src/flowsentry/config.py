"""Strict JSON run configuration and run manifests."""
from __future__ import annotations

import dataclasses
import hashlib
import json
import platform
import sys
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

from . import __version__
from .flowdata import DEFAULT_ID_COLUMNS
from .modeling import ModelSpec, PreprocessOptions, TrainConfig
from .optimizers import OPTIMIZER_KINDS, DEFAULTS, OptimizerConfig

MANIFEST_VERSION = 1

_TOP_KEYS = {"data", "out", "seed", "label_column", "id_columns", "benign_tokens",
             "rename_duplicate_columns", "train_fraction", "folds", "preprocess", "model", "train", "grid"}
_MODEL_KEYS = {f.name for f in dataclasses.fields(ModelSpec)} - {"input_dim"}
_TRAIN_KEYS = {f.name for f in dataclasses.fields(TrainConfig)} - {"seed"}
_PRE_KEYS = {f.name for f in dataclasses.fields(PreprocessOptions)}
_GRID_KEYS = {"optimizer_overrides"}


class ConfigError(ValueError):
    pass


def _reject_unknown(d: dict, allowed, where: str):
    if not isinstance(d, dict):
        raise ConfigError(f"{where or 'config'} must be a JSON object")
    for key in d:
        if key not in allowed:
            path = f"{where}.{key}" if where else str(key)
            raise ConfigError(f"unknown config key '{path}'")


@dataclass
class RunConfig:
    data: List[str] = field(default_factory=list)
    out: Optional[str] = None
    seed: int = 0
    label_column: str = "Label"
    id_columns: Tuple[str, ...] = tuple(sorted(DEFAULT_ID_COLUMNS))
    benign_tokens: Tuple[str, ...] = ("BENIGN",)
    rename_duplicate_columns: bool = False
    train_fraction: float = 0.8
    folds: int = 0
    preprocess: PreprocessOptions = field(default_factory=PreprocessOptions)
    model: ModelSpec = field(default_factory=ModelSpec)
    train: TrainConfig = field(default_factory=TrainConfig)
    optimizer_overrides: Dict[str, dict] = field(default_factory=dict)

    @property
    def train_config(self) -> TrainConfig:
        return self.train.replace(seed=self.seed)

    def to_dict(self) -> dict:
        """Every setting, defaults included."""
        model = self.model.to_dict()
        model.pop("input_dim")
        train = self.train.to_dict()
        train.pop("seed")
        return {
            "data": list(self.data),
            "out": self.out,
            "seed": self.seed,
            "label_column": self.label_column,
            "id_columns": list(self.id_columns),
            "benign_tokens": list(self.benign_tokens),
            "rename_duplicate_columns": self.rename_duplicate_columns,
            "train_fraction": self.train_fraction,
            "folds": self.folds,
            "preprocess": self.preprocess.to_dict(),
            "model": model,
            "train": train,
            "grid": {"optimizer_overrides": {
                k: OptimizerConfig(kind=k, **v).to_dict() for k, v in sorted(self.optimizer_overrides.items())
            }},
        }

    def digest(self) -> str:
        return hashlib.sha256(canonical_json(self.to_dict()).encode()).hexdigest()


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def parse_config(doc: dict) -> RunConfig:
    """Validate a config document; any unknown key is an error."""
    _reject_unknown(doc, _TOP_KEYS, "")
    kw = {k: doc[k] for k in ("data", "out", "seed", "label_column", "rename_duplicate_columns",
                              "train_fraction", "folds") if k in doc}
    if isinstance(kw.get("data"), str):
        kw["data"] = [kw["data"]]
    for k in ("id_columns", "benign_tokens"):
        if k in doc:
            kw[k] = tuple(doc[k])
    try:
        if "preprocess" in doc:
            _reject_unknown(doc["preprocess"], _PRE_KEYS, "preprocess")
            kw["preprocess"] = PreprocessOptions(**doc["preprocess"])
        if "model" in doc:
            _reject_unknown(doc["model"], _MODEL_KEYS, "model")
            kw["model"] = ModelSpec(**doc["model"])
        if "train" in doc:
            _reject_unknown(doc["train"], _TRAIN_KEYS, "train")
            train = dict(doc["train"])
            if "optimizer" in train:
                opt = train["optimizer"]
                if isinstance(opt, str):
                    opt = {"kind": opt}
                _reject_unknown(opt, {"kind", *DEFAULTS[_kind(opt)]}, "train.optimizer")
                train["optimizer"] = OptimizerConfig(**opt)
            kw["train"] = TrainConfig(**train)
        if "grid" in doc:
            _reject_unknown(doc["grid"], _GRID_KEYS, "grid")
            overrides = doc["grid"].get("optimizer_overrides", {})
            _reject_unknown(overrides, set(OPTIMIZER_KINDS), "grid.optimizer_overrides")
            for k, v in overrides.items():
                _reject_unknown(v, {"kind", *DEFAULTS[k]}, f"grid.optimizer_overrides.{k}")
                OptimizerConfig(kind=k, **{a: b for a, b in v.items() if a != "kind"})
            kw["optimizer_overrides"] = {k: {a: b for a, b in v.items() if a != "kind"} for k, v in overrides.items()}
        cfg = RunConfig(**kw)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    if not 0.0 < cfg.train_fraction < 1.0:
        raise ConfigError("train_fraction must lie in (0, 1)")
    if cfg.folds == 1 or cfg.folds < 0:
        raise ConfigError("folds must be 0 (disabled) or >= 2")
    return cfg


def _kind(opt: dict) -> str:
    kind = opt.get("kind", "Adam")
    for k in OPTIMIZER_KINDS:
        if k.lower() == str(kind).lower():
            return k
    raise ConfigError(f"unknown optimizer kind {kind!r}")


def load_config(path) -> RunConfig:
    """Read a config file, or the ``config`` section of a run manifest."""
    try:
        doc = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    if isinstance(doc, dict) and "manifest_version" in doc:
        doc = doc["config"]
    return parse_config(doc)


def file_digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def now_iso() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def write_manifest(out_dir, command: str, argv: Sequence[str], config: Optional[RunConfig] = None,
                   data_paths: Sequence = (), seeds: Optional[dict] = None, started_at: Optional[str] = None,
                   extra: Optional[dict] = None) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    doc = {
        "manifest_version": MANIFEST_VERSION,
        "command": command,
        "argv": list(argv),
        "toolkit_version": __version__,
        "python": sys.version.split()[0],
        "platform": platform.platform(),
        "config": config.to_dict() if config is not None else None,
        "config_digest": config.digest() if config is not None else None,
        "datasets": {str(p): file_digest(p) for p in data_paths},
        "seeds": seeds or {},
        "started_at": started_at or now_iso(),
        "finished_at": now_iso(),
    }
    if extra:
        doc.update(extra)
    path = out / "manifest.json"
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return path
