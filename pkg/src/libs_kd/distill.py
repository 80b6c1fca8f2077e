"""Multi-granularity cross-modal distillation losses.

A frozen teacher (audio-side recognizer) supplies per-sample artifacts:
encoder states, the sequence vector, free-running context vectors and the
predicted tokens. The student (video-side) is trained against them at three
granularities:

- sequence level: squared distance between sequence vectors, through a
  trainable affine map;
- context level: squared distance between context vectors, restricted to
  decode positions where teacher prediction and ground truth agree (LCS
  filtered), through a second affine map;
- frame level: squared distance between each teacher encoder state and an
  attention-weighted mix of student encoder states (audio attends video;
  the reverse direction is deliberately not implemented).

Teacher artifacts are plain arrays: no gradient ever reaches them.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import seq2seq
from . import tensor as T
from .align import LcsMatch
from .errors import ConfigError, ContractError, ShapeError
from .seq2seq import EncoderOutput, Seq2Seq, Vocab
from .tensor import Tensor


@dataclass
class KDWeights:
    """Balance weights for the three distillation terms."""

    seq: float = 10.0
    ctx: float = 40.0
    frame: float = 10.0

    def __post_init__(self):
        if min(self.seq, self.ctx, self.frame) < 0:
            raise ConfigError("distillation weights must be non-negative")

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.seq, self.ctx, self.frame)


@dataclass
class AffineMap:
    """y = W x + b, the feature-space transformation applied to the student."""

    w: Tensor
    b: Tensor

    def __call__(self, x: Tensor) -> Tensor:
        return (self.w @ x) + self.b

    @property
    def d_out(self) -> int:
        return self.w.shape[0]


def identity_affine(d_out: int, d_in: int, dtype) -> AffineMap:
    """Affine map initialized to (a slice of) the identity."""
    return AffineMap(Tensor(np.eye(d_out, d_in, dtype=dtype), requires_grad=True),
                     Tensor(np.zeros(d_out, dtype=dtype), requires_grad=True))


@dataclass
class DistillParams:
    """Trainable distillation-side parameters, discarded at inference."""

    t_seq: AffineMap
    t_ctx: AffineMap
    w_align: Tensor  # [d_v, d_a] bilinear similarity for frame alignment

    def named(self) -> dict[str, Tensor]:
        return {"kd.t_seq.w": self.t_seq.w, "kd.t_seq.b": self.t_seq.b,
                "kd.t_ctx.w": self.t_ctx.w, "kd.t_ctx.b": self.t_ctx.b,
                "kd.w_align": self.w_align}


def init_distill_params(d_v: int, d_a: int, dtype) -> DistillParams:
    """Identity-like starting point: t is the identity and the alignment
    similarity starts as a scaled dot product."""
    w_align = np.eye(d_v, d_a, dtype=dtype) / np.sqrt(d_a)
    return DistillParams(t_seq=identity_affine(d_a, d_v, dtype),
                         t_ctx=identity_affine(d_a, d_v, dtype),
                         w_align=Tensor(w_align, requires_grad=True))


@dataclass(frozen=True)
class TeacherArtifacts:
    """Frozen per-sample teacher outputs (plain arrays, never differentiated).

    ``contexts`` has one row per predicted token in ``pred_tokens`` (the
    teacher's free-running emission steps, reserved tokens excluded).
    """

    enc_states: np.ndarray     # [I, d_a]
    seq_vector: np.ndarray     # [d_a]
    contexts: np.ndarray       # [L, d_a]
    pred_tokens: tuple[int, ...]


def compute_teacher_artifacts(teacher: Seq2Seq, audio_frames: np.ndarray,
                              max_len: int) -> TeacherArtifacts:
    """Greedy free-running teacher pass, recorded without graph tracking."""
    with T.no_grad():
        enc = teacher.encode(audio_frames.astype(teacher.cfg.np_dtype))
        hyp, trace = seq2seq.greedy_decode(teacher, enc, max_len)
    kept = [(tok, ctx.data) for tok, ctx in zip(hyp.token_ids, trace.contexts)
            if tok > Vocab.PAD]
    d_a = enc.matrix.shape[1]
    contexts = (np.stack([c for _, c in kept]) if kept
                else np.zeros((0, d_a), dtype=enc.matrix.dtype))
    return TeacherArtifacts(enc_states=enc.matrix.data,
                            seq_vector=enc.sequence_vector.data,
                            contexts=contexts,
                            pred_tokens=tuple(tok for tok, _ in kept))


def loss_kd1(s_a: np.ndarray, s_v: Tensor, t_seq: AffineMap) -> Tensor:
    """Sequence-level distillation: || s_a - t(s_v) ||^2."""
    if t_seq.d_out != s_a.shape[0]:
        raise ShapeError(f"t_seq maps into dim {t_seq.d_out}, teacher vector "
                         f"has dim {s_a.shape[0]}")
    return T.sq_l2(Tensor(s_a.astype(s_v.dtype)), t_seq(s_v))


def loss_kd2(c_a: np.ndarray, c_v: Sequence[Tensor], match: LcsMatch,
             t_ctx: AffineMap) -> Tensor:
    """Context-level distillation averaged over LCS-matched positions.

    ``match.pred_idx`` indexes teacher context rows, ``match.truth_idx``
    indexes student (teacher-forced) context vectors. An empty match
    contributes an exact zero.
    """
    if len(match) == 0:
        dtype = c_v[0].dtype if len(c_v) else np.float64
        return Tensor(np.zeros((), dtype=dtype))
    if max(match.pred_idx) >= c_a.shape[0]:
        raise ContractError(f"match index {max(match.pred_idx)} out of range for "
                            f"{c_a.shape[0]} teacher contexts")
    if max(match.truth_idx) >= len(c_v):
        raise ContractError(f"match index {max(match.truth_idx)} out of range for "
                            f"{len(c_v)} student contexts")
    dtype = c_v[0].dtype
    terms = [T.sq_l2(Tensor(c_a[ia].astype(dtype)), t_ctx(c_v[iv]))
             for ia, iv in match.pairs]
    return T.add_n(terms) * (1.0 / len(terms))


def align_frames(h_a: np.ndarray, h_v: Sequence[Tensor], w_align: Tensor
                 ) -> tuple[list[Tensor], list[Tensor]]:
    """Audio-attends-video alignment.

    For each teacher frame i, beta_i = softmax_j(h_v_j . W h_a_i) over the
    student frames and h_tilde_i = sum_j beta_i[j] h_v_j. Returns the mixed
    student states (one per teacher frame) and the beta columns. Gradients
    flow into the student states and W, not into the teacher states.
    """
    if h_a.ndim != 2 or h_a.shape[0] < 1 or not h_v:
        raise ShapeError("align_frames: need non-empty teacher and student states")
    h_v_mat = T.stack_rows(list(h_v))
    # scores[i, j] = (h_v_j)^T W h_a_i, built as (H_a W^T) H_v^T
    scores = (Tensor(h_a.astype(h_v_mat.dtype)) @ T.transpose(w_align)) @ T.transpose(h_v_mat)
    h_tilde: list[Tensor] = []
    betas: list[Tensor] = []
    for i in range(h_a.shape[0]):
        beta = T.softmax(T.row(scores, i))
        betas.append(beta)
        h_tilde.append(beta @ h_v_mat)
    return h_tilde, betas


def loss_kd3(h_a: np.ndarray, h_tilde: Sequence[Tensor]) -> Tensor:
    """Frame-level distillation: mean_i || h_a_i - h_tilde_i ||^2."""
    if len(h_tilde) != h_a.shape[0]:
        raise ContractError(f"got {len(h_tilde)} mixed states for {h_a.shape[0]} "
                            "teacher frames")
    dtype = h_tilde[0].dtype
    terms = [T.sq_l2(Tensor(h_a[i].astype(dtype)), h_tilde[i])
             for i in range(h_a.shape[0])]
    return T.add_n(terms) * (1.0 / len(terms))


@dataclass
class LossBreakdown:
    """The combined objective and its parts (absent parts reported as 0)."""

    base: Tensor
    kd_seq: Optional[Tensor]
    kd_ctx: Optional[Tensor]
    kd_frame: Optional[Tensor]
    total: Tensor

    def values(self) -> dict[str, float]:
        out = {"base": self.base.item(), "total": self.total.item()}
        for name, part in (("kd_seq", self.kd_seq), ("kd_ctx", self.kd_ctx),
                           ("kd_frame", self.kd_frame)):
            out[name] = part.item() if part is not None else 0.0
        return out


def total_loss(base: Tensor, kd_seq: Optional[Tensor], kd_ctx: Optional[Tensor],
               kd_frame: Optional[Tensor], weights: KDWeights) -> LossBreakdown:
    """Weighted sum of the parts.

    A term with zero weight (or a None component) is excluded from the sum
    outright rather than multiplied by zero, so disabling a granularity is
    bit-exact to never having computed it.
    """
    total = base
    for part, lam in ((kd_seq, weights.seq), (kd_ctx, weights.ctx),
                      (kd_frame, weights.frame)):
        if part is not None and lam > 0.0:
            total = total + part * lam
    return LossBreakdown(base=base, kd_seq=kd_seq, kd_ctx=kd_ctx,
                         kd_frame=kd_frame, total=total)
