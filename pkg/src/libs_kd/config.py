"""Flat key=value run configuration shared by every CLI subcommand.

One file carries both the corpus generator settings (GenConfig fields) and
the training settings (TrainConfig fields); the namespaces are disjoint
except for ``seed``, which deliberately seeds both. Unknown keys are
rejected so typos fail loudly.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from .errors import ConfigError
from .synthdata import GenConfig, kv_from_text

MODES = ("baseline", "kd1", "kd2", "kd3", "kd1+kd2", "full")


@dataclass(frozen=True)
class TrainConfig:
    # model
    d_h: int = 16
    enc_layers: int = 1
    dec_layers: int = 1
    d_emb: int = 8
    attention: str = "general"
    dtype: str = "float32"
    # optimizer
    lr: float = 1e-3
    plateau_patience: int = 2
    lr_decay: float = 0.5
    # scheduled sampling: probability of feeding ground truth moves linearly
    # from sampling_hi at each curriculum stage start down to sampling_lo
    sampling_lo: float = 0.7
    sampling_hi: float = 1.0
    # curriculum: stage s admits sentences up to curriculum_lengths[s] tokens
    curriculum_lengths: tuple[int, ...] = (4, 6, 8)
    curriculum_epochs: tuple[int, ...] = (2, 2, 4)
    # distillation balance weights
    kd_seq: float = 10.0
    kd_ctx: float = 40.0
    kd_frame: float = 10.0
    # decoding
    beam_width: int = 1
    max_decode_len: int = 16
    # bookkeeping
    seed: int = 0
    corpus_dir: str = "data/default"
    checkpoint_dir: str = "runs/checkpoints"
    report_dir: str = "runs/reports"

    def __post_init__(self):
        if self.lr <= 0:
            raise ConfigError("lr must be positive")
        if not 0.0 <= self.sampling_lo <= self.sampling_hi <= 1.0:
            raise ConfigError("need 0 <= sampling_lo <= sampling_hi <= 1")
        if not 0.0 < self.lr_decay < 1.0:
            raise ConfigError("lr_decay must be in (0, 1)")
        if self.plateau_patience < 1:
            raise ConfigError("plateau_patience must be >= 1")
        if len(self.curriculum_lengths) != len(self.curriculum_epochs) or \
                not self.curriculum_lengths:
            raise ConfigError("curriculum_lengths and curriculum_epochs must be "
                              "non-empty and equally long")
        if any(e < 0 for e in self.curriculum_epochs):
            raise ConfigError("curriculum epochs must be non-negative")
        if list(self.curriculum_lengths) != sorted(self.curriculum_lengths):
            raise ConfigError("curriculum_lengths must be non-decreasing")
        if self.beam_width < 1:
            raise ConfigError("beam_width must be >= 1")
        if self.max_decode_len < 1:
            raise ConfigError("max_decode_len must be >= 1")


_GEN_FIELDS = {f.name: f for f in fields(GenConfig)}
_TRAIN_FIELDS = {f.name: f for f in fields(TrainConfig)}


def _convert(name: str, ftype: str, raw: str):
    raw = raw.strip()
    try:
        if ftype == "int":
            return int(raw)
        if ftype == "float":
            return float(raw)
        if ftype == "str":
            return raw
        if ftype.startswith("tuple[int"):
            return tuple(int(x) for x in raw.split(",") if x.strip())
    except ValueError as e:
        raise ConfigError(f"bad value for {name}: {raw!r}") from e
    raise ConfigError(f"unsupported config field type {ftype} for {name}")


@dataclass
class RunConfig:
    """Parsed configuration: generator plus training settings."""

    gen: GenConfig = field(default_factory=GenConfig)
    train: TrainConfig = field(default_factory=TrainConfig)

    def with_seed(self, seed: int) -> "RunConfig":
        return RunConfig(gen=replace(self.gen, seed=seed),
                         train=replace(self.train, seed=seed))


def config_from_kv(kv: dict[str, str]) -> RunConfig:
    gen_kwargs = {}
    train_kwargs = {}
    for key, raw in kv.items():
        known = False
        if key in _GEN_FIELDS:
            gen_kwargs[key] = _convert(key, _GEN_FIELDS[key].type, raw)
            known = True
        if key in _TRAIN_FIELDS:
            train_kwargs[key] = _convert(key, _TRAIN_FIELDS[key].type, raw)
            known = True
        if not known:
            raise ConfigError(f"unknown config key {key!r}")
    return RunConfig(gen=GenConfig(**gen_kwargs), train=TrainConfig(**train_kwargs))


def load_config(path: str | Path | None, overrides: list[str] = (),
                seed: int | None = None) -> RunConfig:
    """Read a config file, apply key=value overrides, then the seed override."""
    kv: dict[str, str] = {}
    if path is not None:
        p = Path(path)
        if not p.exists():
            raise ConfigError(f"config file not found: {p}")
        kv = kv_from_text(p.read_text())
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        key, val = item.split("=", 1)
        kv[key.strip()] = val.strip()
    cfg = config_from_kv(kv)
    if seed is not None:
        cfg = cfg.with_seed(seed)
    return cfg


def train_config_to_kv(cfg: TrainConfig) -> dict[str, str]:
    out = {}
    for f in fields(TrainConfig):
        val = getattr(cfg, f.name)
        if isinstance(val, tuple):
            out[f.name] = ",".join(str(x) for x in val)
        else:
            out[f.name] = str(val)
    return out


def train_config_from_kv(kv: dict[str, str]) -> TrainConfig:
    kwargs = {}
    for f in fields(TrainConfig):
        if f.name in kv:
            kwargs[f.name] = _convert(f.name, f.type, kv[f.name])
    return TrainConfig(**kwargs)
