"""Flat `key = value` run configuration.

One text format covers features, model sizing, and training.  `#` starts a
comment, blank lines are ignored, and unknown keys are hard errors that list
the valid keys.  The same serialization is embedded in checkpoints so a saved
model carries everything needed to rebuild it.
"""

from __future__ import annotations

import dataclasses
import typing
from dataclasses import dataclass

from .embedder import BackboneConfig
from .encoder import EncoderConfig
from .errors import ConfigError
from .frontend import FeatureConfig
from .model import ModelConfig


@dataclass
class RunConfig:
    # features
    sample_rate: int = 16000
    frame_ms: float = 32.0
    hop_ms: float = 10.0
    nfft: int = 512
    segment_seconds: float = 3.0
    # encoder sizing (1 = faithful widths)
    encoder_scale: int = 1
    # embedder backbone
    backbone_widths: tuple[int, ...] = (16, 32, 64, 128)
    backbone_blocks: int = 1
    embed_dim: int = 256
    # training
    optimizer: str = "adam"
    learning_rate: float = 1e-3
    momentum: float = 0.9
    batch_size: int = 8
    epochs: int = 50
    patience: int = 10
    val_fraction: float = 0.1
    seed: int = 1
    # synthetic corpus generation (the train --synth path)
    synth_utterances: int = 20
    synth_seconds: float = 3.5
    synth_unseen_speakers: int = 4
    synth_seed: int = 7
    # snapshot fields, written into checkpoints by the trainer
    num_classes: int = 0
    train_speakers: str = ""

    def validate(self) -> None:
        checks = [
            (self.sample_rate > 0, "sample_rate must be positive"),
            (self.frame_ms > 0, "frame_ms must be positive"),
            (self.hop_ms > 0, "hop_ms must be positive"),
            (self.nfft > 0, "nfft must be positive"),
            (self.segment_seconds > 0, "segment_seconds must be positive"),
            (self.encoder_scale >= 1, "encoder_scale must be >= 1"),
            (len(self.backbone_widths) >= 1, "backbone_widths must not be empty"),
            (all(w >= 1 for w in self.backbone_widths),
             "backbone_widths must be positive"),
            (self.backbone_blocks >= 0, "backbone_blocks must be >= 0"),
            (self.embed_dim >= 1, "embed_dim must be positive"),
            (self.optimizer in ("adam", "sgd"),
             f"optimizer must be adam or sgd, got {self.optimizer!r}"),
            (self.learning_rate > 0, "learning_rate must be positive"),
            (self.batch_size >= 1, "batch_size must be >= 1"),
            (self.epochs >= 0, "epochs must be >= 0"),
            (self.patience >= 1, "patience must be >= 1"),
            (0.0 < self.val_fraction < 1.0, "val_fraction must be in (0, 1)"),
            (self.synth_utterances >= 1, "synth_utterances must be >= 1"),
            (self.synth_seconds > 0, "synth_seconds must be positive"),
            (self.synth_unseen_speakers >= 0,
             "synth_unseen_speakers must be >= 0"),
        ]
        for ok, message in checks:
            if not ok:
                raise ConfigError(message)


_FIELD_TYPES = typing.get_type_hints(RunConfig)
VALID_KEYS = tuple(f.name for f in dataclasses.fields(RunConfig))


def _coerce(key: str, raw: str):
    ftype = _FIELD_TYPES[key]
    try:
        if ftype is int:
            return int(raw)
        if ftype is float:
            return float(raw)
        if ftype is str:
            return raw
        # tuple[int, ...] fields are comma-separated integer lists
        return tuple(int(part) for part in raw.split(",") if part.strip())
    except ValueError:
        raise ConfigError(f"config key {key!r}: cannot parse {raw!r}") from None


def parse_config(text: str) -> RunConfig:
    cfg = RunConfig()
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, raw = (part.strip() for part in body.split("=", 1))
        if key not in _FIELD_TYPES:
            raise ConfigError(
                f"unknown config key {key!r}; valid keys: {', '.join(VALID_KEYS)}"
            )
        setattr(cfg, key, _coerce(key, raw))
    cfg.validate()
    return cfg


def load_config(path) -> RunConfig:
    try:
        with open(path, "r", encoding="utf-8") as f:
            text = f.read()
    except OSError as e:
        raise ConfigError(f"cannot read config file {path}: {e}") from e
    return parse_config(text)


def serialize_config(cfg: RunConfig) -> str:
    lines = []
    for f in dataclasses.fields(RunConfig):
        value = getattr(cfg, f.name)
        if isinstance(value, tuple):
            value = ",".join(str(v) for v in value)
        lines.append(f"{f.name} = {value}")
    return "\n".join(lines) + "\n"


def apply_overrides(cfg: RunConfig, overrides: dict[str, str]) -> RunConfig:
    for key, raw in overrides.items():
        if key not in _FIELD_TYPES:
            raise ConfigError(
                f"unknown config key {key!r}; valid keys: {', '.join(VALID_KEYS)}"
            )
        setattr(cfg, key, _coerce(key, str(raw)))
    cfg.validate()
    return cfg


# ---------------------------------------------------------------------------
# run config -> typed module configs


def feature_config(cfg: RunConfig) -> FeatureConfig:
    return FeatureConfig(sample_rate=cfg.sample_rate, frame_ms=cfg.frame_ms,
                         hop_ms=cfg.hop_ms, nfft=cfg.nfft)


def model_config(cfg: RunConfig, num_classes: int | None = None) -> ModelConfig:
    features = feature_config(cfg)
    classes = cfg.num_classes if num_classes is None else int(num_classes)
    return ModelConfig(
        features=features,
        encoder=EncoderConfig.scaled(bins=features.bins, scale=cfg.encoder_scale),
        backbone=BackboneConfig(widths=tuple(cfg.backbone_widths),
                                blocks=cfg.backbone_blocks,
                                embed_dim=cfg.embed_dim),
        num_classes=classes,
    )
