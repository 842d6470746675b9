"""Pipeline configuration: defaults, JSON file loading, flag overrides.

The config is a nested JSON object with sections loss, net, train,
threshold, and staple. Unknown keys anywhere are rejected so typos fail
loudly at startup.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

from .errors import ConfigError
from .loss import LossConfig
from .model import NetConfig


@dataclass(frozen=True)
class TrainParams:
    lr: float = 1e-3
    batch: int = 2
    epochs: int = 100

    def __post_init__(self):
        if not self.lr >= 0:
            raise ConfigError(f"lr must be >= 0, got {self.lr}")
        if self.batch < 1:
            raise ConfigError(f"batch must be >= 1, got {self.batch}")
        if self.epochs < 1:
            raise ConfigError(f"epochs must be >= 1, got {self.epochs}")


@dataclass(frozen=True)
class StapleParams:
    prior: float | None = None  # None: mean foreground fraction across raters
    max_iters: int = 100
    tol: float = 1e-6

    def __post_init__(self):
        if self.prior is not None and not (0 < self.prior < 1):
            raise ConfigError(f"staple prior must lie in (0, 1), got {self.prior}")
        if self.max_iters < 1:
            raise ConfigError(f"staple max_iters must be >= 1, got {self.max_iters}")
        if not self.tol > 0:
            raise ConfigError(f"staple tol must be positive, got {self.tol}")


@dataclass(frozen=True)
class PipelineConfig:
    loss: LossConfig = field(default_factory=LossConfig)
    net: NetConfig = field(default_factory=NetConfig)
    train: TrainParams = field(default_factory=TrainParams)
    tau: float = 0.0
    staple: StapleParams = field(default_factory=StapleParams)

    def to_dict(self) -> dict:
        d = {
            "loss": asdict(self.loss),
            "net": {"depth": self.net.depth,
                    "start_channels": self.net.start_channels,
                    "seed": self.net.seed},
            "train": asdict(self.train),
            "threshold": {"tau": self.tau},
            "staple": asdict(self.staple),
        }
        return d


_SECTIONS = {
    "loss": ("alpha", "beta", "weight_source"),
    "net": ("depth", "start_channels", "seed"),
    "train": ("lr", "batch", "epochs"),
    "threshold": ("tau",),
    "staple": ("prior", "max_iters", "tol"),
}


def config_from_dict(raw: dict) -> PipelineConfig:
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a JSON object")
    unknown = set(raw) - set(_SECTIONS)
    if unknown:
        raise ConfigError(f"unknown config section(s): {sorted(unknown)}")
    merged = {}
    for section, keys in _SECTIONS.items():
        body = raw.get(section, {})
        if not isinstance(body, dict):
            raise ConfigError(f"config section {section!r} must be an object")
        bad = set(body) - set(keys)
        if bad:
            raise ConfigError(f"unknown key(s) in config section {section!r}: {sorted(bad)}")
        merged[section] = dict(body)
    try:
        return PipelineConfig(
            loss=LossConfig(**merged["loss"]),
            net=NetConfig(**merged["net"]),
            train=TrainParams(**merged["train"]),
            tau=float(merged["threshold"].get("tau", 0.0)),
            staple=StapleParams(**merged["staple"]),
        )
    except TypeError as e:
        raise ConfigError(f"bad config value: {e}") from e


def load_config(path) -> PipelineConfig:
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}: not valid JSON ({e})") from e
    return config_from_dict(raw)


def dump_config(cfg: PipelineConfig, path) -> None:
    Path(path).write_text(json.dumps(cfg.to_dict(), indent=2, sort_keys=True) + "\n")
