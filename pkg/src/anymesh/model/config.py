"""Transformer configuration."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

from ..synthworld.types import DEFAULT_DF, DEFAULT_LF


class ConfigError(ValueError):
    pass


@dataclass
class ModelConfig:
    vocab_size: int
    d_model: int = 128
    n_layers: int = 4
    n_heads: int = 4
    d_ff: int = 256
    lf: int = DEFAULT_LF
    df: int = DEFAULT_DF
    max_positions: int = 256
    lora_rank: int = 8
    lora_targets: tuple[str, ...] = ("q", "v")

    def __post_init__(self):
        if self.d_model % self.n_heads != 0:
            raise ConfigError(f"d_model {self.d_model} not divisible by n_heads {self.n_heads}")
        if self.lora_rank < 1:
            raise ConfigError(f"lora_rank must be >= 1, got {self.lora_rank}")
        self.lora_targets = tuple(self.lora_targets)
        if any(t not in ("q", "k", "v", "o") for t in self.lora_targets):
            raise ConfigError(f"lora_targets must be attention maps, got {self.lora_targets}")

    def to_json(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(asdict(self), indent=2, sort_keys=True))

    @classmethod
    def from_json(cls, path: str | Path) -> "ModelConfig":
        return cls(**json.loads(Path(path).read_text()))
