"""Configuration dataclasses and the TOML run-config loader.

Defaults follow the review-dataset setup: 60-token sentences, 10-sentence
documents, a 15k-word vocabulary, 300-d embeddings and 50 topics.
"""

from __future__ import annotations

import dataclasses
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

from .errors import ConfigError


@dataclass
class PreprocessConfig:
    max_sentence_len: int = 60
    max_doc_sentences: int = 10
    max_vocab: int = 15000
    unk_threshold: float = 0.3
    embed_dim: int = 300
    oov_tfidf: float = 1e-4

    def validate(self):
        if self.max_sentence_len < 1 or self.max_doc_sentences < 1:
            raise ConfigError("sentence and document limits must be >= 1")
        if self.max_vocab < 1:
            raise ConfigError("max_vocab must be >= 1")
        if not 0.0 <= self.unk_threshold <= 1.0:
            raise ConfigError("unk_threshold must lie in [0, 1]")
        if self.oov_tfidf <= 0:
            raise ConfigError("oov_tfidf must be positive")


@dataclass
class ModelConfig:
    embed_dim: int = 300
    attn_dim: int | None = None  # defaults to embed_dim // 2
    num_topics: int = 50
    node_hidden: int = 200
    node_dim: int = 50
    gat_layers: int = 1
    clf_hidden: int = 200
    num_classes: int = 2
    dropout: float = 0.4
    # "attended": encode r_i (main-text form); "seed": encode the TFIDF seed
    topic_input: str = "attended"
    # "mse" or "margin" (contrastive max-margin reconstruction)
    recon: str = "mse"
    edge_stop_gradient: bool = False
    freeze_embeddings: bool = False

    def __post_init__(self):
        if self.attn_dim is None:
            self.attn_dim = max(1, self.embed_dim // 2)

    def validate(self):
        if self.embed_dim < 2 or self.embed_dim % 2:
            raise ConfigError("embed_dim must be an even number >= 2")
        if self.num_topics < 2:
            raise ConfigError("num_topics must be >= 2")
        if self.gat_layers < 0:
            raise ConfigError("gat_layers must be >= 0")
        if self.num_classes < 2:
            raise ConfigError("num_classes must be >= 2")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError("dropout must lie in [0, 1)")
        if self.topic_input not in ("attended", "seed"):
            raise ConfigError(f"unknown topic_input {self.topic_input!r}")
        if self.recon not in ("mse", "margin"):
            raise ConfigError(f"unknown recon {self.recon!r}")


@dataclass
class TrainConfig:
    learning_rate: float = 1e-4
    epochs: int = 30
    batch_size: int = 32
    lambda1: float = 0.05
    lambda2: float = 0.01
    eta_a: float = 0.001
    eta_b: float = 1.0
    alpha_mix: float = 0.5
    seed: int = 0
    num_runs: int = 5
    clip_norm: float | None = None
    dtype: str = "float32"
    # let the uniqueness regularizer back-propagate into topic occurrences
    r2_occurrence_grad: bool = False

    def validate(self):
        for name in ("learning_rate", "eta_b"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")
        for name in ("lambda1", "lambda2", "eta_a"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be non-negative")
        if self.epochs < 1 or self.batch_size < 1 or self.num_runs < 1:
            raise ConfigError("epochs, batch_size and num_runs must be >= 1")
        if not 0.0 < self.alpha_mix <= 1.0:
            raise ConfigError("alpha_mix must lie in (0, 1]")
        if self.clip_norm is not None and self.clip_norm <= 0:
            raise ConfigError("clip_norm must be positive when set")
        if self.dtype not in ("float32", "float64"):
            raise ConfigError("dtype must be float32 or float64")


@dataclass
class InterpretConfig:
    top_n: int = 10
    format: str = "json"

    def validate(self):
        if self.top_n < 1:
            raise ConfigError("top_n must be >= 1")
        if self.format not in ("json", "html"):
            raise ConfigError(f"unknown report format {self.format!r}")


@dataclass
class EvaluateConfig:
    bins: list[int] = field(default_factory=lambda: [1, 5, 10, 20, 50])
    ks: list[int] = field(default_factory=lambda: [20, 40, 60])
    npmi_window: int = 110
    uci_window: int = 10
    metrics: list[str] = field(default_factory=lambda: ["accuracy"])

    def validate(self):
        if any(b <= 0 or b > 100 for b in self.bins):
            raise ConfigError("bins must be percentages in (0, 100]")
        if any(k < 0 for k in self.ks):
            raise ConfigError("ks must be non-negative")
        if self.npmi_window < 1 or self.uci_window < 1:
            raise ConfigError("coherence windows must be >= 1")


@dataclass
class DataConfig:
    train: str | None = None
    val: str | None = None
    test: str | None = None
    embeddings: str | None = None


@dataclass
class RunConfig:
    data: DataConfig = field(default_factory=DataConfig)
    preprocess: PreprocessConfig = field(default_factory=PreprocessConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    interpret: InterpretConfig = field(default_factory=InterpretConfig)
    evaluate: EvaluateConfig = field(default_factory=EvaluateConfig)

    def validate(self, check_paths=True):
        self.preprocess.validate()
        self.model.validate()
        self.train.validate()
        self.interpret.validate()
        self.evaluate.validate()
        if self.preprocess.embed_dim != self.model.embed_dim:
            raise ConfigError("preprocess.embed_dim and model.embed_dim differ")
        if check_paths:
            for name in ("train", "val", "test", "embeddings"):
                p = getattr(self.data, name)
                if p is not None and not os.path.exists(p):
                    raise ConfigError(f"data.{name}: no such file {p!r}")
        return self


_SECTIONS = {
    "data": DataConfig,
    "preprocess": PreprocessConfig,
    "model": ModelConfig,
    "train": TrainConfig,
    "interpret": InterpretConfig,
    "evaluate": EvaluateConfig,
}


def _build(cls, values: dict[str, Any], where: str):
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(values) - names)
    if unknown:
        raise ConfigError(f"unknown key(s) in [{where}]: {', '.join(unknown)}")
    return cls(**values)


def config_from_dict(raw: dict[str, Any], base_dir: str | Path | None = None) -> RunConfig:
    """Build a RunConfig from nested dicts, rejecting unknown sections and keys.

    Relative data paths are resolved against ``base_dir``.
    """
    unknown = sorted(set(raw) - set(_SECTIONS))
    if unknown:
        raise ConfigError(f"unknown config section(s): {', '.join(unknown)}")
    parts = {}
    for name, cls in _SECTIONS.items():
        section = raw.get(name, {})
        if not isinstance(section, dict):
            raise ConfigError(f"[{name}] must be a table")
        parts[name] = _build(cls, dict(section), name)
    cfg = RunConfig(**parts)
    if base_dir is not None:
        for name in ("train", "val", "test", "embeddings"):
            p = getattr(cfg.data, name)
            if p is not None and not os.path.isabs(p):
                setattr(cfg.data, name, str(Path(base_dir) / p))
    return cfg


def load_config(path: str | Path, check_paths=True) -> RunConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        raw = tomllib.loads(path.read_text(encoding="utf-8"))
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc
    return config_from_dict(raw, base_dir=path.parent).validate(check_paths)


def config_to_dict(cfg) -> dict[str, Any]:
    return dataclasses.asdict(cfg)
