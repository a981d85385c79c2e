"""Pipeline configuration and its key/value file format.

The config file is plain text, one `key = value` per line, `#` comments.
Top-level keys name PipelineConfig fields (`features`, `model`, `colormap`,
`downsample`, `seed`, ...); extraction and training knobs are reached with
dotted keys, e.g. `extraction.n_ceps = 20` or `train.epochs = 200`. The
comma-separated `features` list fixes both the extractors that run and the
slab order of the combined image.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from .classifiers import TrainConfig
from .features import FEATURE_KINDS, ExtractionConfig, params_digest

DEFAULT_FEATURES = ("cqcc", "mfcc", "bfcc")
MODEL_VARIANTS = ("logistic", "linear_svm", "decision_tree", "random_forest", "small_cnn")

__all__ = ["PipelineConfig", "DEFAULT_FEATURES", "MODEL_VARIANTS", "load_config", "with_seed"]


@dataclass(frozen=True)
class PipelineConfig:
    features: tuple = DEFAULT_FEATURES
    extraction: ExtractionConfig = field(default_factory=ExtractionConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    model: str = "logistic"
    colormap: str = "grayscale"
    downsample: int = 8
    sample_rate_hz: int = 16000
    seed: int = 0

    def __post_init__(self):
        feats = tuple(self.features)
        if not feats:
            raise ValueError("features list must not be empty")
        if len(set(feats)) != len(feats):
            raise ValueError("features list must not repeat kinds")
        unknown = [f for f in feats if f not in FEATURE_KINDS]
        if unknown:
            raise ValueError(f"unknown feature kinds: {unknown}")
        if self.model not in MODEL_VARIANTS:
            raise ValueError(f"unknown model {self.model!r}")
        object.__setattr__(self, "features", feats)

    def digest(self) -> str:
        parts = [
            f"features={','.join(self.features)}",
            f"model={self.model}",
            f"colormap={self.colormap}",
            f"downsample={self.downsample}",
            f"sample_rate_hz={self.sample_rate_hz}",
            f"seed={self.seed}",
            f"train={self.train.digest()}",
        ]
        parts += [f"extract.{k}={params_digest(k, self.extraction)}" for k in self.features]
        return hashlib.sha256(";".join(parts).encode()).hexdigest()[:16]

    def extraction_digests(self) -> dict:
        return {k: params_digest(k, self.extraction) for k in self.features}


def _coerce(raw: str, kind):
    raw = raw.strip()
    if kind is bool:
        if raw.lower() in ("1", "true", "yes", "on"):
            return True
        if raw.lower() in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"not a boolean: {raw!r}")
    if kind is int:
        return int(raw)
    if kind is float:
        return float(raw)
    return raw


def load_config(path) -> PipelineConfig:
    """Parse the key/value config file into a PipelineConfig."""
    path = Path(path)
    top: dict = {}
    nested: dict = {"extraction": {}, "train": {}}
    extraction_types = {f.name: f.type for f in fields(ExtractionConfig)}
    train_types = {f.name: f.type for f in fields(TrainConfig)}

    for lineno, line in enumerate(path.read_text().splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ValueError(f"{path}:{lineno}: expected 'key = value'")
        key, _, raw = stripped.partition("=")
        key = key.strip()
        raw = raw.strip()
        if key == "features":
            top["features"] = tuple(k.strip() for k in raw.split(",") if k.strip())
        elif key in ("model", "colormap"):
            top[key] = raw
        elif key in ("downsample", "sample_rate_hz", "seed"):
            top[key] = int(raw)
        elif key.startswith("extraction."):
            name = key.split(".", 1)[1]
            if name not in extraction_types:
                raise ValueError(f"{path}:{lineno}: unknown extraction key {name!r}")
            nested["extraction"][name] = _coerce(raw, _type_of(ExtractionConfig, name))
        elif key.startswith("train."):
            name = key.split(".", 1)[1]
            if name not in train_types:
                raise ValueError(f"{path}:{lineno}: unknown train key {name!r}")
            nested["train"][name] = _coerce(raw, _type_of(TrainConfig, name))
        else:
            raise ValueError(f"{path}:{lineno}: unknown key {key!r}")

    cfg = PipelineConfig(
        extraction=ExtractionConfig(**nested["extraction"]),
        train=TrainConfig(**nested["train"]),
        **top,
    )
    return cfg


def _type_of(cls, name):
    default = getattr(cls(), name)
    return type(default)


def with_seed(cfg: PipelineConfig, seed: int) -> PipelineConfig:
    """Override the pipeline seed and keep the training seed in sync."""
    return replace(cfg, seed=seed, train=replace(cfg.train, seed=seed))
