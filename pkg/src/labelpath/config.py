"""Run configuration with paper-faithful and desk-scale profiles."""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field

from .corpus import DEFAULT_TYPE_LENGTHS, DOC_TYPES
from .nn import ConfigError


@dataclass
class Config:
    hidden_size: int = 64
    num_heads: int = 8
    encoder_layers: int = 8       # two-level text encoder depth
    fusion_layers: int = 8
    graph_layers: int = 1         # GCN depth == subgraph hop radius
    ffn_mult: int = 4
    dropout: float = 0.2
    learning_rate: float = 1e-3
    weight_decay: float = 1e-7
    batch_size: int = 512
    warmup_steps: int = 1000
    threshold: float = 0.5
    seed: int = 0
    type_lengths: dict = field(default_factory=lambda: dict(DEFAULT_TYPE_LENGTHS))
    char_tokenize: bool = False
    graph_symmetrize: str = "mean"
    force_nonempty: bool = True
    mask_children: bool = False
    share_fuse_fc: bool = False

    def validate(self) -> None:
        positive = ("hidden_size", "num_heads", "encoder_layers",
                    "fusion_layers", "graph_layers", "ffn_mult",
                    "learning_rate", "batch_size")
        for name in positive:
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")
        if self.hidden_size % self.num_heads != 0:
            raise ConfigError("hidden_size must be divisible by num_heads")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError("dropout must lie in [0, 1)")
        if not 0.0 < self.threshold < 1.0:
            raise ConfigError("threshold must lie in (0, 1)")
        if self.weight_decay < 0 or self.warmup_steps < 0:
            raise ConfigError("weight_decay and warmup_steps must be >= 0")
        missing = [t for t in DOC_TYPES if t not in self.type_lengths]
        if missing:
            raise ConfigError(f"type_lengths missing document types: {missing}")
        if any(v < 1 for v in self.type_lengths.values()):
            raise ConfigError("type_lengths entries must be >= 1")

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "Config":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config fields: {sorted(unknown)}")
        cfg = cls(**d)
        cfg.validate()
        return cfg


PROFILES = {
    "paper": {},
    # desk scale: small widths/depths, and optimizer settings retuned for
    # corpora of thousands rather than hundreds of thousands of proposals
    "desk": {"hidden_size": 32, "encoder_layers": 2, "fusion_layers": 2,
             "batch_size": 32, "learning_rate": 2e-3, "dropout": 0.0,
             "warmup_steps": 100},
}


def make_config(profile: str = "paper", overrides: dict | None = None) -> Config:
    """Profile defaults, then explicit overrides, then validation."""
    if profile not in PROFILES:
        raise ConfigError(f"unknown profile {profile!r}; "
                          f"choose from {sorted(PROFILES)}")
    merged: dict = dict(PROFILES[profile])
    if overrides:
        merged.update(overrides)
    return Config.from_dict(merged)


def load_overrides(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    if not isinstance(doc, dict):
        raise ConfigError("config override file must hold a JSON object")
    return doc
