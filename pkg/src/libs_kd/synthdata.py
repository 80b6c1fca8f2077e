"""Synthetic paired-modality corpus generator.

Each sample renders one token sequence twice: a "video" stream where tokens
sharing a viseme class look nearly identical (class embedding plus a small
within-class residual), and an "audio" stream where every token has its own
well-separated embedding. The two streams run at different frame rates and
carry independent random blank frames at both ends, so their lengths differ
and are not synchronized. This is the regime where distilling from the
discriminative modality into the ambiguous one should pay off.

Generation is deterministic: every sample draws from its own generator
seeded by (master seed, split, index), so a corpus regenerates bit-identically
and any prefix of a split is independent of the split's size.
"""

from __future__ import annotations

from dataclasses import dataclass, fields, replace
from pathlib import Path
from typing import Iterable

import numpy as np

from .binio import Reader, Writer
from .errors import ConfigError, FormatError

MAGIC = b"LIBSCRP1"
SPLITS = ("train", "val", "test")
_SPLIT_ID_BASE = 1_000_000


@dataclass(frozen=True)
class GenConfig:
    vocab_size: int = 20          # base tokens, before reserved ids
    viseme_classes: int = 8       # tokens are assigned round-robin
    video_rate: int = 2           # frames per token, video
    audio_rate: int = 5           # frames per token, audio
    d_v: int = 16
    d_a: int = 16
    video_ambiguity: float = 0.15  # within-class residual scale
    noise_video: float = 0.05
    noise_audio: float = 0.05
    blank_max: int = 3            # frames per end, drawn uniformly from [0, blank_max]
    len_min: int = 3
    len_max: int = 8
    n_train: int = 2000
    n_val: int = 200
    n_test: int = 200
    seed: int = 0

    def __post_init__(self):
        if not 1 <= self.viseme_classes <= self.vocab_size:
            raise ConfigError(f"need 1 <= viseme classes <= vocab size, got "
                              f"{self.viseme_classes} vs {self.vocab_size}")
        if min(self.video_rate, self.audio_rate, self.d_v, self.d_a) < 1:
            raise ConfigError("frame rates and feature dims must be positive")
        if min(self.video_ambiguity, self.noise_video, self.noise_audio) < 0:
            raise ConfigError("scales must be non-negative")
        if self.blank_max < 0:
            raise ConfigError("blank_max must be non-negative")
        if not 1 <= self.len_min <= self.len_max:
            raise ConfigError(f"bad sentence length range [{self.len_min}, {self.len_max}]")
        if min(self.n_train, self.n_val, self.n_test) < 0:
            raise ConfigError("split sizes must be non-negative")

    def viseme_class_of(self, token: int) -> int:
        return token % self.viseme_classes

    def viseme_class_map(self) -> list[int]:
        return [self.viseme_class_of(t) for t in range(self.vocab_size)]

    def viseme_class_sets(self) -> list[list[int]]:
        sets: list[list[int]] = [[] for _ in range(self.viseme_classes)]
        for tok in range(self.vocab_size):
            sets[self.viseme_class_of(tok)].append(tok)
        return sets


@dataclass(frozen=True)
class Embeddings:
    """Fixed rendering vectors, all unit-norm rows drawn from the master seed."""

    video_class: np.ndarray    # [C, d_v]
    video_residual: np.ndarray  # [V, d_v]
    audio_token: np.ndarray    # [V, d_a]


def _unit_rows(rng: np.random.Generator, n: int, d: int) -> np.ndarray:
    rows = rng.normal(size=(n, d))
    return rows / np.linalg.norm(rows, axis=1, keepdims=True)


def make_embeddings(cfg: GenConfig) -> Embeddings:
    rng = np.random.default_rng([cfg.seed, 1])
    return Embeddings(video_class=_unit_rows(rng, cfg.viseme_classes, cfg.d_v),
                      video_residual=_unit_rows(rng, cfg.vocab_size, cfg.d_v),
                      audio_token=_unit_rows(rng, cfg.vocab_size, cfg.d_a))


@dataclass(frozen=True)
class PairedSample:
    """One utterance: base-token targets plus both frame renderings."""

    sample_id: int
    tokens: tuple[int, ...]
    video: np.ndarray  # [J, d_v] float32
    audio: np.ndarray  # [I, d_a] float32


@dataclass
class Corpus:
    cfg: GenConfig
    train: list[PairedSample]
    val: list[PairedSample]
    test: list[PairedSample]

    def split(self, name: str) -> list[PairedSample]:
        if name not in SPLITS:
            raise ConfigError(f"unknown split {name!r}, expected one of {SPLITS}")
        return getattr(self, name)

    def find(self, sample_id: int) -> PairedSample:
        for name in SPLITS:
            for s in self.split(name):
                if s.sample_id == sample_id:
                    return s
        raise LookupError(f"no sample with id {sample_id}")


def _render_sample(cfg: GenConfig, emb: Embeddings, sample_id: int,
                   rng: np.random.Generator) -> PairedSample:
    k = int(rng.integers(cfg.len_min, cfg.len_max + 1))
    tokens = rng.integers(0, cfg.vocab_size, size=k)
    lead_v, trail_v = rng.integers(0, cfg.blank_max + 1, size=2)
    lead_a, trail_a = rng.integers(0, cfg.blank_max + 1, size=2)

    j = k * cfg.video_rate + int(lead_v) + int(trail_v)
    video = rng.normal(0.0, cfg.noise_video, size=(j, cfg.d_v))
    pos = int(lead_v)
    for tok in tokens:
        mean = emb.video_class[cfg.viseme_class_of(tok)] + cfg.video_ambiguity * emb.video_residual[tok]
        video[pos:pos + cfg.video_rate] += mean
        pos += cfg.video_rate

    i = k * cfg.audio_rate + int(lead_a) + int(trail_a)
    audio = rng.normal(0.0, cfg.noise_audio, size=(i, cfg.d_a))
    pos = int(lead_a)
    for tok in tokens:
        audio[pos:pos + cfg.audio_rate] += emb.audio_token[tok]
        pos += cfg.audio_rate

    return PairedSample(sample_id=sample_id, tokens=tuple(int(t) for t in tokens),
                        video=video.astype(np.float32), audio=audio.astype(np.float32))


def gen_corpus(cfg: GenConfig) -> Corpus:
    """Generate all three splits; sample ids are unique across splits."""
    emb = make_embeddings(cfg)
    splits: dict[str, list[PairedSample]] = {}
    sizes = {"train": cfg.n_train, "val": cfg.n_val, "test": cfg.n_test}
    for split_idx, name in enumerate(SPLITS):
        out = []
        for idx in range(sizes[name]):
            rng = np.random.default_rng([cfg.seed, 2, split_idx, idx])
            out.append(_render_sample(cfg, emb, split_idx * _SPLIT_ID_BASE + idx, rng))
        splits[name] = out
    return Corpus(cfg, splits["train"], splits["val"], splits["test"])


# -- persistence ---------------------------------------------------------------


def config_to_kv(cfg: GenConfig) -> dict[str, str]:
    kv = {f.name: str(getattr(cfg, f.name)) for f in fields(GenConfig)}
    kv["viseme_class_map"] = ",".join(str(c) for c in cfg.viseme_class_map())
    return kv


def config_from_kv(kv: dict[str, str]) -> GenConfig:
    kwargs = {}
    for f in fields(GenConfig):
        if f.name not in kv:
            raise FormatError(f"corpus header missing key {f.name!r}")
        raw = kv[f.name]
        kwargs[f.name] = int(raw) if f.type == "int" else float(raw)
    return GenConfig(**kwargs)


def kv_to_text(kv: dict[str, str]) -> str:
    return "".join(f"{k} = {v}\n" for k, v in kv.items())


def kv_from_text(text: str) -> dict[str, str]:
    kv: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise FormatError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, val = line.split("=", 1)
        kv[key.strip()] = val.strip()
    return kv


def _write_split(path: Path, cfg: GenConfig, name: str,
                 samples: Iterable[PairedSample]) -> None:
    samples = list(samples)
    w = Writer()
    w.raw(MAGIC)
    kv = config_to_kv(cfg)
    kv["split"] = name
    w.block32(kv_to_text(kv).encode("utf-8"))
    w.u32(len(samples))
    for s in samples:
        w.u64(s.sample_id)
        w.u32(len(s.tokens))
        for tok in s.tokens:
            w.u32(tok)
        w.u32(s.video.shape[0])
        w.u32(s.video.shape[1])
        w.f32s(s.video)
        w.u32(s.audio.shape[0])
        w.u32(s.audio.shape[1])
        w.f32s(s.audio)
    path.write_bytes(w.getvalue())


def save_corpus(corpus: Corpus, directory: str | Path) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for name in SPLITS:
        _write_split(directory / f"{name}.corpus", corpus.cfg, name, corpus.split(name))


def _read_split(path: Path) -> tuple[GenConfig, list[PairedSample]]:
    r = Reader(path.read_bytes(), what=str(path))
    r.expect_magic(MAGIC)
    kv = kv_from_text(r.block32().decode("utf-8"))
    cfg = config_from_kv(kv)
    count = r.u32()
    samples = []
    for _ in range(count):
        sample_id = r.u64()
        k = r.u32()
        tokens = tuple(r.u32() for _ in range(k))
        n_frames, d = r.u32(), r.u32()
        video = r.f32s(n_frames * d).reshape(n_frames, d)
        n_frames, d = r.u32(), r.u32()
        audio = r.f32s(n_frames * d).reshape(n_frames, d)
        samples.append(PairedSample(sample_id, tokens, video, audio))
    r.done()
    return cfg, samples


def load_corpus(directory: str | Path) -> Corpus:
    directory = Path(directory)
    parts: dict[str, list[PairedSample]] = {}
    cfg = None
    for name in SPLITS:
        path = directory / f"{name}.corpus"
        if not path.exists():
            raise FormatError(f"missing corpus split file {path}")
        split_cfg, samples = _read_split(path)
        if cfg is None:
            cfg = split_cfg
        elif split_cfg != cfg:
            raise FormatError(f"{path}: header disagrees with other splits")
        parts[name] = samples
    return Corpus(cfg, parts["train"], parts["val"], parts["test"])
