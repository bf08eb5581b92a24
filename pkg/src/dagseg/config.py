"""Training configuration with the published defaults and a flat ``key=value`` file format."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Any, Mapping

from dagseg.encoders import VARIANTS
from dagseg.errors import ConfigError, InputError


@dataclass
class TrainConfig:
    variant: str = "wi-dag"
    d_e: int = 100
    d_h: int = 150
    lr: float = 0.2
    l2: float = 0.05
    eta: float = 0.2
    dropout: float = 0.2
    iv_dropout: float = 0.5
    batch_size: int = 128
    epochs: int = 30
    seed: int = 1
    l_max: int = 4
    max_word_len: int | None = None
    dev_ratio: float = 0.1
    init_range: float = 0.05
    adagrad_eps: float = 1e-6
    l2_embeddings: bool = True
    clip_norm: float | None = None
    plain_decode_train: bool = False
    embeddings: str | None = None

    def validate(self) -> TrainConfig:
        if self.variant not in VARIANTS:
            raise ConfigError(f"variant must be one of {', '.join(VARIANTS)}, got {self.variant!r}")
        for name in ("d_e", "d_h", "batch_size", "l_max"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")
        if self.epochs < 0:
            raise ConfigError("epochs must be non-negative")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError("dropout must be in [0, 1)")
        for name in ("iv_dropout", "dev_ratio"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ConfigError(f"{name} must be in [0, 1]")
        if self.dev_ratio == 1.0:
            raise ConfigError("dev_ratio leaves no training data")
        if self.max_word_len is not None and self.max_word_len < 1:
            raise ConfigError("max_word_len must be at least 1")
        for name in ("lr", "init_range"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")
        for name in ("l2", "eta", "adagrad_eps"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be non-negative")
        if self.clip_norm is not None and self.clip_norm <= 0:
            raise ConfigError("clip_norm must be positive")
        return self

    def to_dict(self) -> dict[str, Any]:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, values: Mapping[str, Any]) -> TrainConfig:
        known = {f.name for f in fields(cls)}
        unknown = set(values) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
        return cls(**values).validate()

    def replace(self, **changes: Any) -> TrainConfig:
        return dataclasses.replace(self, **changes).validate()


def _convert(name: str, raw: str) -> Any:
    field = {f.name: f for f in fields(TrainConfig)}.get(name)
    if field is None:
        raise ConfigError(f"unknown config key {name!r}")
    text = raw.strip()
    kind = str(field.type)
    if text.lower() in ("none", "") and "None" in kind:
        return None
    try:
        if kind.startswith("bool"):
            if text.lower() in ("1", "true", "yes", "on"):
                return True
            if text.lower() in ("0", "false", "no", "off"):
                return False
            raise ValueError(text)
        if kind.startswith("int"):
            return int(text)
        if kind.startswith("float"):
            return float(text)
    except ValueError:
        raise ConfigError(f"bad value for {name}: {raw!r}") from None
    return text


def parse_config_text(text: str) -> dict[str, Any]:
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key=value")
        key, raw = line.split("=", 1)
        key = key.strip().replace("-", "_")
        values[key] = _convert(key, raw)
    return values


def load_config(path: str | Path | None = None, **overrides: Any) -> TrainConfig:
    """Defaults, then the file's values, then non-None ``overrides``."""
    values: dict[str, Any] = {}
    if path is not None:
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise InputError(f"cannot read config {path}: {exc.strerror}") from exc
        except UnicodeDecodeError:
            raise InputError(f"config {path} is not UTF-8") from None
        values.update(parse_config_text(text))
    values.update({k: v for k, v in overrides.items() if v is not None})
    return TrainConfig.from_dict(values)


def format_config(cfg: TrainConfig) -> str:
    return "".join(f"{k}={'none' if v is None else v}\n" for k, v in cfg.to_dict().items())
