"""Training and evaluation orchestration.

Randomness discipline (everything derives from one master seed, so the full
pipeline is reproducible bit-for-bit):

- model parameter init:      default_rng([seed, 0])
- corpus embeddings/samples: default_rng([seed, 1]) / ([seed, 2, split, idx])
- epoch shuffling:           default_rng([seed, 3, global_epoch])
- scheduled sampling:        default_rng([seed, 4, global_epoch, sample_id])

Training runs single-threaded over one sample at a time (graphs are small);
the teacher's per-sample artifacts are precomputed once and cached on disk
keyed by the teacher checkpoint hash, so every student mode and seed reuses
them.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np

from . import distill as D
from . import metrics as M
from . import seq2seq as S
from . import tensor as T
from .align import EquivRelation, class_equiv, lcs_match
from .checkpoint import file_hash, load_checkpoint, save_checkpoint
from .config import MODES, RunConfig, TrainConfig, train_config_from_kv, train_config_to_kv
from .distill import DistillParams, KDWeights, TeacherArtifacts
from .errors import ConfigError, FormatError
from .seq2seq import ModelConfig, Seq2Seq, Vocab
from .synthdata import Corpus, PairedSample
from .tensor import Tensor


# -- optimizer -----------------------------------------------------------------


class Adam:
    """Adam with lazily skipped parameters: a parameter whose grad is None
    this step keeps its moments and step count untouched."""

    BETA1 = 0.9
    BETA2 = 0.999
    EPS = 1e-8

    def __init__(self, params: dict[str, Tensor]):
        self.params = params
        self.m = {k: np.zeros_like(p.data) for k, p in params.items()}
        self.v = {k: np.zeros_like(p.data) for k, p in params.items()}
        self.t = {k: 0 for k in params}

    def step(self, lr: float) -> None:
        for name, p in self.params.items():
            g = p.grad
            if g is None:
                continue
            self.t[name] += 1
            t = self.t[name]
            m = self.m[name]
            v = self.v[name]
            m *= self.BETA1
            m += (1.0 - self.BETA1) * g
            v *= self.BETA2
            v += (1.0 - self.BETA2) * (g * g)
            m_hat = m / (1.0 - self.BETA1 ** t)
            v_hat = v / (1.0 - self.BETA2 ** t)
            p.data = p.data - lr * m_hat / (np.sqrt(v_hat) + self.EPS)
            p.grad = None


# -- schedules -----------------------------------------------------------------


def curriculum_stages(cfg: TrainConfig) -> list[tuple[int, int]]:
    """(max sentence length, epoch count) per stage."""
    return list(zip(cfg.curriculum_lengths, cfg.curriculum_epochs))


def stage_subset(samples: Sequence[PairedSample], max_len: int) -> list[PairedSample]:
    """Corpus-order samples admitted by a curriculum stage."""
    return [s for s in samples if len(s.tokens) <= max_len]


class PlateauDecay:
    """Multiplies the learning rate by ``decay`` whenever the tracked error
    fails to improve for ``patience`` consecutive updates."""

    def __init__(self, lr: float, patience: int, decay: float,
                 best: float = float("inf"), stall: int = 0):
        self.lr = lr
        self.patience = patience
        self.decay = decay
        self.best = best
        self.stall = stall

    def update(self, err: float) -> float:
        if err < self.best:
            self.best = err
            self.stall = 0
        else:
            self.stall += 1
            if self.stall >= self.patience:
                self.lr *= self.decay
                self.stall = 0
        return self.lr


def epoch_schedule(cfg: TrainConfig) -> list[tuple[int, float]]:
    """Flattened per-epoch schedule: (stage max length, sampling prob).

    Within each stage the ground-truth feeding probability moves linearly
    from sampling_hi down to sampling_lo, hitting both endpoints.
    """
    out = []
    for max_len, n_epochs in curriculum_stages(cfg):
        for e in range(n_epochs):
            frac = e / (n_epochs - 1) if n_epochs > 1 else 0.0
            p = cfg.sampling_hi + (cfg.sampling_lo - cfg.sampling_hi) * frac
            out.append((max_len, p))
    return out


# -- model plumbing --------------------------------------------------------------


def model_config(run: RunConfig, modality: str) -> ModelConfig:
    d_in = run.gen.d_a if modality == "audio" else run.gen.d_v
    return ModelConfig(vocab_size=run.gen.vocab_size + 3, d_in=d_in,
                       d_h=run.train.d_h, enc_layers=run.train.enc_layers,
                       dec_layers=run.train.dec_layers, d_emb=run.train.d_emb,
                       attention=run.train.attention, dtype=run.train.dtype)


def sample_frames(sample: PairedSample, modality: str) -> np.ndarray:
    return sample.audio if modality == "audio" else sample.video


def sample_target(sample: PairedSample) -> list[int]:
    """Model-id target wrapped in [sos] ... [eos]."""
    return [Vocab.SOS] + [t + 3 for t in sample.tokens] + [Vocab.EOS]


def mode_weights(mode: str, cfg: TrainConfig) -> KDWeights:
    masks = {"baseline": (0, 0, 0), "kd1": (1, 0, 0), "kd2": (0, 1, 0),
             "kd3": (0, 0, 1), "kd1+kd2": (1, 1, 0), "full": (1, 1, 1)}
    if mode not in masks:
        raise ConfigError(f"unknown mode {mode!r}, expected one of {MODES}")
    m1, m2, m3 = masks[mode]
    return KDWeights(seq=cfg.kd_seq * m1, ctx=cfg.kd_ctx * m2, frame=cfg.kd_frame * m3)


# -- teacher artifacts -----------------------------------------------------------


def compute_artifact_map(teacher: Seq2Seq, samples: Sequence[PairedSample],
                         max_len: int) -> dict[int, TeacherArtifacts]:
    return {s.sample_id: D.compute_teacher_artifacts(teacher, s.audio, max_len)
            for s in samples}


def cached_teacher_artifacts(teacher_ckpt: str | Path, corpus: Corpus,
                             samples: Sequence[PairedSample], cache_dir: str | Path,
                             max_len: int) -> dict[int, TeacherArtifacts]:
    """Load or compute the frozen teacher's per-sample artifacts.

    Cache files are keyed by the checkpoint content hash; missing samples
    are computed and merged back in.
    """
    cache_dir = Path(cache_dir)
    cache_dir.mkdir(parents=True, exist_ok=True)
    cache_path = cache_dir / f"teacher_{file_hash(teacher_ckpt)}.npz"
    store: dict[str, np.ndarray] = {}
    if cache_path.exists():
        with np.load(cache_path) as z:
            store = {k: z[k] for k in z.files}

    have = {int(k.rsplit("_", 1)[0]) for k in store if k.endswith("_enc")}
    missing = [s for s in samples if s.sample_id not in have]
    if missing:
        teacher, _, _ = load_model(teacher_ckpt)
        for s in missing:
            art = D.compute_teacher_artifacts(teacher, s.audio, max_len)
            store[f"{s.sample_id}_enc"] = art.enc_states
            store[f"{s.sample_id}_seq"] = art.seq_vector
            store[f"{s.sample_id}_ctx"] = art.contexts
            store[f"{s.sample_id}_pred"] = np.asarray(art.pred_tokens, dtype=np.int64)
        np.savez(cache_path, **store)

    out = {}
    for s in samples:
        sid = s.sample_id
        out[sid] = TeacherArtifacts(
            enc_states=store[f"{sid}_enc"], seq_vector=store[f"{sid}_seq"],
            contexts=store[f"{sid}_ctx"],
            pred_tokens=tuple(int(t) for t in store[f"{sid}_pred"]))
    return out


# -- checkpoint assembly ---------------------------------------------------------


def _state_tensors(model: Seq2Seq, dp: Optional[DistillParams], adam: Adam
                   ) -> dict[str, np.ndarray]:
    tensors = {k: p.data.copy() for k, p in model.parameters().items()}
    if dp is not None:
        tensors.update({k: p.data.copy() for k, p in dp.named().items()})
    for k in adam.m:
        tensors[f"opt.m.{k}"] = adam.m[k].copy()
        tensors[f"opt.v.{k}"] = adam.v[k].copy()
    return tensors


def save_state(path: Path, model: Seq2Seq, dp: Optional[DistillParams], adam: Adam,
               run: RunConfig, kind: str, mode: str, modality: str, epoch: int,
               lr: float, best_train: float, stall: int, best_val_cer: float,
               val_history: list[float]) -> None:
    kv = {"kind": kind, "mode": mode, "modality": modality,
          "model.vocab_size": str(model.cfg.vocab_size),
          "model.d_in": str(model.cfg.d_in)}
    for key, val in train_config_to_kv(run.train).items():
        kv[f"train.{key}"] = val
    kv["state.epoch"] = str(epoch)
    kv["state.lr"] = repr(lr)
    kv["state.best_train"] = repr(best_train)
    kv["state.stall"] = str(stall)
    kv["state.best_val_cer"] = repr(best_val_cer)
    kv["state.val_history"] = ",".join(repr(v) for v in val_history)
    for name, t in adam.t.items():
        kv[f"opt.t.{name}"] = str(t)
    save_checkpoint(path, _state_tensors(model, dp, adam), kv)


def load_model(path: str | Path) -> tuple[Seq2Seq, Optional[DistillParams], dict[str, str]]:
    """Rebuild a model (and distillation params, if saved) from a checkpoint."""
    tensors, kv = load_checkpoint(path)
    try:
        train_cfg = train_config_from_kv(
            {k[len("train."):]: v for k, v in kv.items() if k.startswith("train.")})
        cfg = ModelConfig(vocab_size=int(kv["model.vocab_size"]),
                          d_in=int(kv["model.d_in"]), d_h=train_cfg.d_h,
                          enc_layers=train_cfg.enc_layers, dec_layers=train_cfg.dec_layers,
                          d_emb=train_cfg.d_emb, attention=train_cfg.attention,
                          dtype=train_cfg.dtype)
    except KeyError as e:
        raise FormatError(f"{path}: checkpoint missing config key {e}")
    model = Seq2Seq(cfg, seed=0)
    dt = cfg.np_dtype
    for name, p in model.parameters().items():
        if name not in tensors:
            raise FormatError(f"{path}: checkpoint missing tensor {name!r}")
        if tensors[name].shape != p.data.shape:
            raise FormatError(f"{path}: tensor {name!r} has shape "
                              f"{tensors[name].shape}, expected {p.data.shape}")
        p.data = tensors[name].astype(dt)
    dp = None
    if "kd.w_align" in tensors:
        dp = D.init_distill_params(tensors["kd.t_seq.w"].shape[1],
                                   tensors["kd.t_seq.w"].shape[0], dt)
        for name, p in dp.named().items():
            p.data = tensors[name].astype(dt)
    return model, dp, kv


# -- training ---------------------------------------------------------------------


@dataclass
class TrainResult:
    best_path: Path
    last_path: Path
    best_val_cer: float
    val_history: list[float]
    epoch_losses: list[dict[str, float]]  # mean loss breakdown per epoch


def _mean_cer(model: Seq2Seq, samples: Sequence[PairedSample], modality: str,
              beam_width: int, max_len: int) -> float:
    if not samples:
        return float("nan")
    pairs = []
    with T.no_grad():
        for s in samples:
            enc = model.encode(sample_frames(s, modality).astype(model.cfg.np_dtype))
            hyp = S.beam_search(model, enc, beam_width, max_len)
            pred = [t for t in hyp.token_ids if t > Vocab.PAD]
            ref = [t + 3 for t in s.tokens]
            pairs.append((ref, pred))
    return M.corpus_error_rate(pairs)


def train_run(run: RunConfig, corpus: Corpus, kind: str, mode: str = "baseline",
              teacher_ckpt: str | Path | None = None,
              resume_from: str | Path | None = None,
              out_name: str | None = None, max_epochs: int | None = None,
              log: Optional[Callable[[str], None]] = None) -> TrainResult:
    """Train a teacher (audio) or student (video, optionally distilled).

    Saves two checkpoints under the configured checkpoint directory: the
    best-validation-CER state (the result, ``<name>.ckpt``) and the final
    state (``<name>.last.ckpt``, the resume point). ``max_epochs`` truncates
    the curriculum schedule (checkpointing cadence control); resuming later
    continues the full schedule bit-exactly.
    """
    cfg = run.train
    modality = "audio" if kind == "teacher" else "video"
    weights = mode_weights(mode, cfg) if kind == "student" else KDWeights(0, 0, 0)
    use_kd = any(w > 0 for w in weights.as_tuple())
    log = log or (lambda s: None)

    artifacts: dict[int, TeacherArtifacts] = {}
    equiv: Optional[EquivRelation] = None
    if use_kd:
        if teacher_ckpt is None:
            raise ConfigError(f"mode {mode!r} needs a teacher checkpoint")
        artifacts = cached_teacher_artifacts(
            teacher_ckpt, corpus, corpus.train, Path(cfg.checkpoint_dir) / "cache",
            cfg.max_decode_len)
        equiv = EquivRelation.identity(run.gen.vocab_size + 3)

    if resume_from is not None:
        model, dp, kv = load_model(resume_from)
        if use_kd and dp is None:
            raise ConfigError("resume checkpoint has no distillation parameters")
        tensors, _ = load_checkpoint(resume_from)
        params = dict(model.parameters())
        if dp is not None:
            params.update(dp.named())
        adam = Adam(params)
        dt = model.cfg.np_dtype
        for name in params:
            adam.m[name] = tensors[f"opt.m.{name}"].astype(dt)
            adam.v[name] = tensors[f"opt.v.{name}"].astype(dt)
            adam.t[name] = int(kv[f"opt.t.{name}"])
        start_epoch = int(kv["state.epoch"])
        plateau = PlateauDecay(float(kv["state.lr"]), cfg.plateau_patience,
                               cfg.lr_decay, best=float(kv["state.best_train"]),
                               stall=int(kv["state.stall"]))
        best_val_cer = float(kv["state.best_val_cer"])
        raw_hist = kv.get("state.val_history", "")
        val_history = [float(x) for x in raw_hist.split(",") if x]
    else:
        mcfg = model_config(run, modality)
        model = Seq2Seq(mcfg, seed=cfg.seed)
        dp = None
        if use_kd:
            dims = {a.enc_states.shape[1] for a in artifacts.values()}
            if len(dims) != 1:
                raise ConfigError(f"teacher artifacts have mixed feature dims {dims}")
            d_teacher = dims.pop()
            if weights.frame > 0 and mcfg.d_enc != d_teacher:
                raise ConfigError(f"frame-level distillation requires equal feature "
                                  f"dims, teacher has {d_teacher}, student {mcfg.d_enc}")
            dp = D.init_distill_params(mcfg.d_enc, d_teacher, mcfg.np_dtype)
        params = dict(model.parameters())
        if dp is not None:
            params.update(dp.named())
        adam = Adam(params)
        start_epoch = 0
        plateau = PlateauDecay(cfg.lr, cfg.plateau_patience, cfg.lr_decay)
        best_val_cer = float("inf")
        val_history = []

    name = out_name or (kind if kind == "teacher" else f"student_{mode}")
    ckpt_dir = Path(cfg.checkpoint_dir)
    ckpt_dir.mkdir(parents=True, exist_ok=True)
    best_path = ckpt_dir / f"{name}.ckpt"
    last_path = ckpt_dir / f"{name}.last.ckpt"

    schedule = epoch_schedule(cfg)
    epoch_losses: list[dict[str, float]] = []
    dtype = model.cfg.np_dtype

    def save(path: Path, epoch: int) -> None:
        save_state(path, model, dp, adam, run, kind, mode, modality, epoch,
                   plateau.lr, plateau.best, plateau.stall, best_val_cer, val_history)

    end_epoch = len(schedule) if max_epochs is None else min(max_epochs, len(schedule))
    if start_epoch >= end_epoch:
        save(last_path, start_epoch)
        if not best_path.exists():
            save(best_path, start_epoch)
        return TrainResult(best_path, last_path, best_val_cer, val_history, [])

    for epoch in range(start_epoch, end_epoch):
        max_len, sampling_prob = schedule[epoch]
        subset = stage_subset(corpus.train, max_len)
        order = np.random.default_rng([cfg.seed, 3, epoch]).permutation(len(subset))
        sums: dict[str, float] = {}
        for idx in order:
            sample = subset[idx]
            rng = (np.random.default_rng([cfg.seed, 4, epoch, sample.sample_id])
                   if sampling_prob < 1.0 else None)
            enc = model.encode(sample_frames(sample, modality).astype(dtype))
            target = sample_target(sample)
            trace, base = S.decode_teacher_forced(model, enc, target, sampling_prob, rng)
            kd1 = kd2 = kd3 = None
            if use_kd:
                art = artifacts[sample.sample_id]
                if weights.seq > 0:
                    kd1 = D.loss_kd1(art.seq_vector, enc.sequence_vector, dp.t_seq)
                if weights.ctx > 0:
                    truth = [t + 3 for t in sample.tokens]
                    match = lcs_match(art.pred_tokens, truth, equiv)
                    kd2 = D.loss_kd2(art.contexts, trace.contexts[:len(truth)],
                                     match, dp.t_ctx)
                if weights.frame > 0:
                    h_tilde, _ = D.align_frames(art.enc_states, enc.rows, dp.w_align)
                    kd3 = D.loss_kd3(art.enc_states, h_tilde)
            breakdown = D.total_loss(base, kd1, kd2, kd3, weights)
            T.backward(breakdown.total)
            adam.step(plateau.lr)
            for key, val in breakdown.values().items():
                sums[key] = sums.get(key, 0.0) + val

        n = max(len(subset), 1)
        means = {k: v / n for k, v in sums.items()}
        epoch_losses.append(means)
        train_err = means.get("total", float("inf"))
        plateau.update(train_err)

        val_cer = _mean_cer(model, corpus.val, modality, 1, cfg.max_decode_len)
        val_history.append(val_cer)
        if val_cer < best_val_cer:
            best_val_cer = val_cer
            save(best_path, epoch + 1)
        log(f"[{name}] epoch {epoch + 1}/{len(schedule)} "
            f"train={train_err:.4f} val_cer={val_cer:.4f} lr={plateau.lr:.2e} "
            f"p={sampling_prob:.2f}")

    save(last_path, end_epoch)
    if not best_path.exists():  # validation never improved on inf (empty val split)
        save(best_path, end_epoch)
    return TrainResult(best_path, last_path, best_val_cer, val_history, epoch_losses)


def train_teacher(run: RunConfig, corpus: Corpus,
                  resume_from: str | Path | None = None,
                  max_epochs: int | None = None, log=None) -> TrainResult:
    return train_run(run, corpus, kind="teacher", resume_from=resume_from,
                     max_epochs=max_epochs, log=log)


def train_student(run: RunConfig, corpus: Corpus, teacher_ckpt: str | Path | None,
                  mode: str, resume_from: str | Path | None = None,
                  out_name: str | None = None, max_epochs: int | None = None,
                  log=None) -> TrainResult:
    return train_run(run, corpus, kind="student", mode=mode, teacher_ckpt=teacher_ckpt,
                     resume_from=resume_from, out_name=out_name,
                     max_epochs=max_epochs, log=log)


# -- evaluation --------------------------------------------------------------------


@dataclass
class EvalRow:
    sample_id: int
    ref: list[int]   # base token ids
    hyp: list[int]
    subs: int
    dels: int
    inss: int
    cer: float
    wer: float
    bleu: float


@dataclass
class EvalReport:
    split: str
    beam_width: int
    rows: list[EvalRow]
    cer: float   # micro-averaged
    wer: float
    bleu: float  # mean over samples

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["sample_id", "ref", "hyp", "S", "D", "I", "cer", "wer", "bleu"])
        for r in self.rows:
            w.writerow([r.sample_id, " ".join(map(str, r.ref)), " ".join(map(str, r.hyp)),
                        r.subs, r.dels, r.inss,
                        f"{r.cer:.9g}", f"{r.wer:.9g}", f"{r.bleu:.9g}"])
        return buf.getvalue()

    def summary(self) -> str:
        lines = [f"split: {self.split}", f"samples: {len(self.rows)}",
                 f"beam_width: {self.beam_width}"]
        if self.rows:
            lines += [f"CER: {self.cer:.6f}", f"WER: {self.wer:.6f}",
                      f"BLEU: {self.bleu:.6f}"]
        else:
            lines += ["CER: n/a", "WER: n/a", "BLEU: n/a"]
        return "\n".join(lines) + "\n"


def evaluate_model(model: Seq2Seq, samples: Sequence[PairedSample], modality: str,
                   beam_width: int, max_len: int, split: str = "test") -> EvalReport:
    rows: list[EvalRow] = []
    edits = ref_total = 0
    w_edits = 0
    with T.no_grad():
        for s in samples:
            enc = model.encode(sample_frames(s, modality).astype(model.cfg.np_dtype))
            hyp = S.beam_search(model, enc, beam_width, max_len)
            pred = [t - 3 for t in hyp.token_ids if t > Vocab.PAD]
            ref = list(s.tokens)
            rep = M.edit_distance(ref, pred)
            # one synthetic token is both one character and one word
            wrep = M.edit_distance([f"t{t}" for t in ref], [f"t{t}" for t in pred])
            rows.append(EvalRow(s.sample_id, ref, pred, rep.substitutions,
                                rep.deletions, rep.insertions, rep.rate, wrep.rate,
                                M.bleu_unigram(ref, pred)))
            edits += rep.edits
            w_edits += wrep.edits
            ref_total += rep.ref_len
    if rows:
        cer = edits / ref_total
        wer = w_edits / ref_total
        bleu = sum(r.bleu for r in rows) / len(rows)
    else:
        cer = wer = bleu = float("nan")
    return EvalReport(split, beam_width, rows, cer, wer, bleu)


def evaluate(ckpt_path: str | Path, corpus: Corpus, split: str, beam_width: int,
             max_len: int, report_dir: str | Path | None = None,
             tag: str = "eval") -> EvalReport:
    """Evaluate a checkpoint on a corpus split; optionally write reports."""
    model, _, kv = load_model(ckpt_path)
    modality = kv.get("modality", "video")
    report = evaluate_model(model, corpus.split(split), modality, beam_width,
                            max_len, split)
    if report_dir is not None:
        report_dir = Path(report_dir)
        report_dir.mkdir(parents=True, exist_ok=True)
        (report_dir / f"{tag}_{split}.csv").write_text(report.to_csv())
        (report_dir / f"{tag}_{split}.txt").write_text(report.summary())
    return report


# -- ablation ----------------------------------------------------------------------


def ablate(run: RunConfig, corpus: Corpus, teacher_ckpt: str | Path,
           split: str = "test", log=None) -> list[dict[str, object]]:
    """Train all six modes with a shared seed and report their test metrics."""
    table = []
    for mode in MODES:
        result = train_student(run, corpus, teacher_ckpt, mode,
                               out_name=f"ablate_{mode}", log=log)
        report = evaluate(result.best_path, corpus, split, run.train.beam_width,
                          run.train.max_decode_len)
        table.append({"mode": mode, "cer": report.cer, "wer": report.wer,
                      "bleu": report.bleu})
    return table


def ablation_csv(table: list[dict[str, object]]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["mode", "cer", "wer", "bleu"])
    for row in table:
        w.writerow([row["mode"], f"{row['cer']:.9g}", f"{row['wer']:.9g}",
                    f"{row['bleu']:.9g}"])
    return buf.getvalue()


# -- attention export ----------------------------------------------------------------


def diagonal_mass(alpha: np.ndarray, window_tokens: float = 2.0) -> float:
    """Fraction of attention mass within +-window_tokens of the diagonal."""
    steps, frames = alpha.shape
    token_width = frames / steps
    mass = 0.0
    for k in range(steps):
        center = (k + 0.5) * token_width
        lo = center - window_tokens * token_width
        hi = center + window_tokens * token_width
        idx = np.arange(frames)
        mass += alpha[k, (idx + 0.5 >= lo) & (idx + 0.5 <= hi)].sum()
    return float(mass / steps)


def _matrix_csv(mat: np.ndarray, row_label: str, col_prefix: str) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([row_label] + [f"{col_prefix}{i}" for i in range(mat.shape[1])])
    for i, row in enumerate(mat):
        w.writerow([i] + [f"{x:.9g}" for x in row])
    return buf.getvalue()


def export_attention(ckpt_path: str | Path, corpus: Corpus, sample_id: int,
                     out_dir: str | Path, max_len: int,
                     teacher_ckpt: str | Path | None = None) -> dict[str, object]:
    """Write the decoder attention matrix (and the cross-modal alignment
    matrix, when the checkpoint carries distillation parameters and a
    teacher checkpoint is supplied) as CSV files."""
    model, dp, kv = load_model(ckpt_path)
    modality = kv.get("modality", "video")
    sample = corpus.find(sample_id)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    with T.no_grad():
        enc = model.encode(sample_frames(sample, modality).astype(model.cfg.np_dtype))
        hyp, trace = S.greedy_decode(model, enc, max_len)
    alpha = np.stack([a.data for a in trace.alphas])
    alpha_path = out_dir / f"attention_{sample_id}.csv"
    alpha_path.write_text(_matrix_csv(alpha, "step", "frame_"))
    info: dict[str, object] = {"alpha_path": alpha_path, "alpha_shape": alpha.shape,
                               "diagonal_mass": diagonal_mass(alpha),
                               "tokens": [t - 3 for t in hyp.token_ids if t > Vocab.PAD]}

    if dp is not None and teacher_ckpt is not None:
        teacher, _, _ = load_model(teacher_ckpt)
        with T.no_grad():
            t_enc = teacher.encode(sample.audio.astype(teacher.cfg.np_dtype))
            _, betas = D.align_frames(t_enc.matrix.data, enc.rows, dp.w_align)
        beta = np.stack([b.data for b in betas], axis=1)  # [J, I]
        beta_path = out_dir / f"alignment_{sample_id}.csv"
        beta_path.write_text(_matrix_csv(beta, "video_frame", "audio_"))
        info["beta_path"] = beta_path
        info["beta_shape"] = beta.shape
    return info
