"""Run configuration: nested dataclasses loaded from YAML with strict keys."""

from __future__ import annotations

import dataclasses
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any

import yaml

from .numerics.fft import MASK_MODES


class ConfigError(ValueError):
    pass


@dataclass
class MaskConfig:
    mode: str = "off"
    q: float = 0.5


@dataclass
class SteConfig:
    mask: MaskConfig = field(default_factory=MaskConfig)
    kernel_width: int = 3
    share_gru: bool = False


@dataclass
class TtrConfig:
    share_weights: bool = False


@dataclass
class StrategyConfig:
    N: int = 3
    literal: bool = False


@dataclass
class LossConfig:
    w_3d: float = 300.0
    w_2d: float = 300.0
    w_shape: float = 0.06
    w_pose: float = 60.0
    supervise_all: bool = False


@dataclass
class OptimConfig:
    lr: float = 5e-5
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    batch_size: int = 32
    epochs: int = 30
    patience: int = 5
    factor: float = 10.0


@dataclass
class ModelConfig:
    fusion_hidden: list[int] | None = None      # default: two layers of width 2C
    regressor_hidden: int | None = None         # default: 2C
    regressor_iterations: int = 3


@dataclass
class BodyConfig:
    seed: int = 1234
    joints: int = 6
    vertices: int = 30


@dataclass
class DataConfig:
    num_sequences: int = 16
    frames_per_seq: int = 64
    stride: int = 1
    noise_std: float = 0.05
    dropout_prob: float = 0.5
    dropout_len: int = 4
    embed_seed: int = 0


@dataclass
class RunConfig:
    T: int = 16
    C: int = 64
    fragments: int = 4
    seed: int = 0
    ttr: TtrConfig = field(default_factory=TtrConfig)
    ste: SteConfig = field(default_factory=SteConfig)
    strategy: StrategyConfig = field(default_factory=StrategyConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    loss: LossConfig = field(default_factory=LossConfig)
    optim: OptimConfig = field(default_factory=OptimConfig)
    body: BodyConfig = field(default_factory=BodyConfig)
    data: DataConfig = field(default_factory=DataConfig)

    def validate(self) -> "RunConfig":
        if self.T < 2 or self.C < 1:
            raise ConfigError("T must be >= 2 and C >= 1")
        if self.fragments < 2 or self.T % self.fragments:
            raise ConfigError(f"T={self.T} must be divisible by the fragment count {self.fragments}")
        if self.T % 2:
            raise ConfigError(f"T={self.T} must be even for the two-way integration split")
        if self.strategy.N < 1:
            raise ConfigError("strategy.N must be >= 1")
        if self.ste.mask.mode not in MASK_MODES:
            raise ConfigError(f"ste.mask.mode must be one of {MASK_MODES}")
        if not 0 < self.ste.mask.q <= 1:
            raise ConfigError("ste.mask.q must be in (0, 1]")
        if self.ste.kernel_width % 2 == 0:
            raise ConfigError("ste.kernel_width must be odd")
        if self.optim.lr <= 0 or self.optim.batch_size < 1 or self.optim.epochs < 0:
            raise ConfigError("optim.lr and optim.batch_size must be positive, epochs >= 0")
        if min(self.loss.w_3d, self.loss.w_2d, self.loss.w_shape, self.loss.w_pose) < 0:
            raise ConfigError("loss weights must be nonnegative")
        if self.body.joints < 2 or self.body.vertices < self.body.joints:
            raise ConfigError("body needs >= 2 joints and at least as many vertices")
        return self

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)


def _build(cls, data: Any, path: str):
    if not dataclasses.is_dataclass(cls):
        return data
    if data is None:
        return cls()
    if not isinstance(data, dict):
        raise ConfigError(f"{path or 'config'}: expected a mapping, got {type(data).__name__}")
    unknown = sorted(set(data) - {f.name for f in dataclasses.fields(cls)})
    if unknown:
        raise ConfigError(f"unknown config key(s) {', '.join(path + k for k in unknown)}")
    kwargs = {}
    for name, value in data.items():
        sub = _nested_types.get((cls, name))
        kwargs[name] = _build(sub, value, f"{path}{name}.") if sub else value
    return cls(**kwargs)


_nested_types = {
    (RunConfig, "ttr"): TtrConfig, (RunConfig, "ste"): SteConfig, (SteConfig, "mask"): MaskConfig,
    (RunConfig, "strategy"): StrategyConfig, (RunConfig, "model"): ModelConfig,
    (RunConfig, "loss"): LossConfig, (RunConfig, "optim"): OptimConfig,
    (RunConfig, "body"): BodyConfig, (RunConfig, "data"): DataConfig,
}


def config_from_dict(data: dict | None) -> RunConfig:
    data = dict(data or {})
    ste = data.get("ste")
    if isinstance(ste, dict) and isinstance(ste.get("mask"), dict) and ste["mask"].get("mode") is False:
        # YAML 1.1 reads a bare `off` as boolean false
        ste["mask"]["mode"] = "off"
    return _build(RunConfig, data, "").validate()


def load_config(path: str | Path | None) -> RunConfig:
    if path is None:
        return RunConfig().validate()
    with open(path) as fh:
        data = yaml.safe_load(fh)
    return config_from_dict(data)
