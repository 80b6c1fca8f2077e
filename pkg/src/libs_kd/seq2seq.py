"""Attention-based encoder-decoder over GRU cells.

The same architecture serves both modalities: a bidirectional multi-layer
GRU encoder producing per-frame states plus a sequence vector, and a
unidirectional GRU decoder with additive per-step attention over the
encoder states. The decoder cell size is fixed at twice the encoder cell
size so that it matches the bidirectional encoder output dimension.

GRU variant: the reset gate is applied to the hidden state before the
recurrent matmul (the original formulation),

    z = sigmoid(W_z x + U_z h + b_z)
    r = sigmoid(W_r x + U_r h + b_r)
    hcand = tanh(W x + U (r * h) + b)
    h' = (1 - z) * h + z * hcand
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import tensor as T
from .errors import ConfigError, ContractError, DomainError, ShapeError
from .tensor import Tensor

ATTENTION_KINDS = ("dot", "general", "concat")


@dataclass(frozen=True)
class Vocab:
    """Token table with reserved ids 0=[sos], 1=[eos], 2=[pad]."""

    tokens: tuple[str, ...]

    SOS = 0
    EOS = 1
    PAD = 2
    RESERVED = ("[sos]", "[eos]", "[pad]")

    def __post_init__(self):
        if tuple(self.tokens[:3]) != self.RESERVED:
            raise ConfigError(f"vocab must start with {self.RESERVED}")
        if len(set(self.tokens)) != len(self.tokens):
            raise ConfigError("vocab tokens must be unique")

    @classmethod
    def synthetic(cls, n_base: int) -> "Vocab":
        """Reserved tokens plus n_base generator tokens t00..t<n-1>."""
        return cls(cls.RESERVED + tuple(f"t{i:02d}" for i in range(n_base)))

    def __len__(self) -> int:
        return len(self.tokens)

    def id(self, token: str) -> int:
        return self.tokens.index(token)

    def token(self, token_id: int) -> str:
        return self.tokens[token_id]

    def strip_reserved(self, ids: Sequence[int]) -> list[int]:
        return [i for i in ids if i > self.PAD]

    def to_model_ids(self, base_ids: Sequence[int]) -> list[int]:
        """Map generator token ids (0..n_base) into this vocab's id space."""
        return [int(i) + 3 for i in base_ids]


@dataclass
class GruParams:
    """Per-gate weights for one GRU cell direction."""

    d_in: int
    d_h: int
    w_z: Tensor
    u_z: Tensor
    b_z: Tensor
    w_r: Tensor
    u_r: Tensor
    b_r: Tensor
    w_h: Tensor
    u_h: Tensor
    b_h: Tensor

    def named(self, prefix: str) -> dict[str, Tensor]:
        return {f"{prefix}.{k}": getattr(self, k)
                for k in ("w_z", "u_z", "b_z", "w_r", "u_r", "b_r", "w_h", "u_h", "b_h")}


def _init_mat(rng: np.random.Generator, rows: int, cols: int, dtype) -> Tensor:
    k = 1.0 / np.sqrt(cols)
    return Tensor(rng.uniform(-k, k, size=(rows, cols)).astype(dtype), requires_grad=True)


def _zeros(n: int, dtype) -> Tensor:
    return Tensor(np.zeros(n, dtype=dtype), requires_grad=True)


def init_gru_params(rng: np.random.Generator, d_in: int, d_h: int, dtype) -> GruParams:
    def w():
        return _init_mat(rng, d_h, d_in, dtype)

    def u():
        return _init_mat(rng, d_h, d_h, dtype)

    return GruParams(d_in, d_h, w(), u(), _zeros(d_h, dtype),
                     w(), u(), _zeros(d_h, dtype),
                     w(), u(), _zeros(d_h, dtype))


def _gru_from_gates(p: GruParams, wx_z: Tensor, wx_r: Tensor, wx_h: Tensor,
                    h_prev: Tensor) -> Tensor:
    """Gate algebra shared by the plain cell and the precomputed-input path."""
    z = T.sigmoid(wx_z + (p.u_z @ h_prev) + p.b_z)
    r = T.sigmoid(wx_r + (p.u_r @ h_prev) + p.b_r)
    cand = T.tanh(wx_h + (p.u_h @ (r * h_prev)) + p.b_h)
    one = Tensor(np.ones(p.d_h, dtype=z.dtype))
    return (one - z) * h_prev + z * cand


def gru_cell(params: GruParams, x: Tensor, h_prev: Tensor) -> Tensor:
    """One GRU step."""
    if x.shape != (params.d_in,):
        raise ShapeError(f"gru_cell: input shape {x.shape}, expected ({params.d_in},)")
    if h_prev.shape != (params.d_h,):
        raise ShapeError(f"gru_cell: state shape {h_prev.shape}, expected ({params.d_h},)")
    return _gru_from_gates(params, params.w_z @ x, params.w_r @ x, params.w_h @ x, h_prev)


@dataclass
class EncoderOutput:
    """Per-frame hidden states plus the whole-sequence summary vector."""

    rows: list[Tensor]      # T vectors of size d_enc = 2 * d_h
    matrix: Tensor          # [T, d_enc], same states stacked
    sequence_vector: Tensor  # [d_enc]

    @property
    def length(self) -> int:
        return len(self.rows)


def encode(layers: Sequence[tuple[GruParams, GruParams]], frames) -> EncoderOutput:
    """Run a bidirectional GRU stack over frames [T, d_in].

    Each layer concatenates forward and backward states per timestep; the
    sequence vector is the concat of the top layer's final forward state and
    final backward state (the two ends that have seen the whole input).
    """
    x = frames if isinstance(frames, Tensor) else Tensor(frames)
    if x.data.ndim != 2 or x.shape[0] < 1:
        raise DomainError(f"encode: need a non-empty [T, d_in] matrix, got {x.shape}")

    n_t = x.shape[0]
    fwd_states: list[Tensor] = []
    bwd_states: list[Tensor] = []
    for fwd, bwd in layers:
        # Input projections for all timesteps at once, one matmul per gate.
        gates = {}
        for tag, p in (("f", fwd), ("b", bwd)):
            for g in ("w_z", "w_r", "w_h"):
                gates[tag, g] = x @ T.transpose(getattr(p, g))
        dtype = x.dtype
        h = Tensor(np.zeros(fwd.d_h, dtype=dtype))
        fwd_states = []
        for t in range(n_t):
            h = _gru_from_gates(fwd, T.row(gates["f", "w_z"], t),
                                T.row(gates["f", "w_r"], t),
                                T.row(gates["f", "w_h"], t), h)
            fwd_states.append(h)
        h = Tensor(np.zeros(bwd.d_h, dtype=dtype))
        bwd_states = [None] * n_t
        for t in range(n_t - 1, -1, -1):
            h = _gru_from_gates(bwd, T.row(gates["b", "w_z"], t),
                                T.row(gates["b", "w_r"], t),
                                T.row(gates["b", "w_h"], t), h)
            bwd_states[t] = h
        rows = [T.concat([fwd_states[t], bwd_states[t]]) for t in range(n_t)]
        x = T.stack_rows(rows)

    seq_vec = T.concat([fwd_states[-1], bwd_states[0]])
    return EncoderOutput(rows=rows, matrix=x, sequence_vector=seq_vec)


@dataclass
class AttnParams:
    kind: str
    w: Optional[Tensor] = None  # general: [d_dec, d_enc]; concat: [d_att, d_dec + d_enc]
    v: Optional[Tensor] = None  # concat only: [d_att]


def attention_score(kind: str, h_dec: Tensor, h_enc: Tensor,
                    params: Optional[AttnParams] = None) -> Tensor:
    """Unnormalized similarity between a decoder state and one encoder state."""
    if kind == "dot":
        if h_dec.shape != h_enc.shape:
            raise ShapeError(f"dot score: shapes differ: {h_dec.shape} vs {h_enc.shape}")
        return h_dec @ h_enc
    if kind == "general":
        if params is None or params.w is None:
            raise ConfigError("general score requires a weight matrix")
        return h_dec @ (params.w @ h_enc)
    if kind == "concat":
        if params is None or params.w is None or params.v is None:
            raise ConfigError("concat score requires a weight matrix and vector")
        return params.v @ T.tanh(params.w @ T.concat([h_dec, h_enc]))
    raise ConfigError(f"unknown attention kind {kind!r}")


def attention_context(h_dec_prev: Tensor, enc: EncoderOutput,
                      params: AttnParams) -> tuple[Tensor, Tensor]:
    """Attention weights over encoder states and their weighted sum."""
    if params.kind == "dot":
        scores = enc.matrix @ h_dec_prev
    elif params.kind == "general":
        if params.w is None:
            raise ConfigError("general score requires a weight matrix")
        scores = enc.matrix @ (T.transpose(params.w) @ h_dec_prev)
    else:
        scores = T.stack_scalars(
            [attention_score(params.kind, h_dec_prev, h, params) for h in enc.rows])
    alpha = T.softmax(scores)
    context = alpha @ enc.matrix
    return context, alpha


@dataclass
class DecoderTrace:
    """Per-step decoder internals from one decoding pass."""

    fed_tokens: list[int]
    alphas: list[Tensor]
    contexts: list[Tensor]
    hiddens: list[Tensor]  # top-layer decoder state per step
    logits: list[Tensor]

    @property
    def steps(self) -> int:
        return len(self.logits)


@dataclass
class Hypothesis:
    """A decoded candidate: emitted token ids and their joint log-prob."""

    token_ids: tuple[int, ...]
    log_prob: float


@dataclass
class ModelConfig:
    vocab_size: int
    d_in: int
    d_h: int = 16
    enc_layers: int = 1
    dec_layers: int = 1
    d_emb: int = 8
    attention: str = "general"
    dtype: str = "float32"

    def __post_init__(self):
        if self.attention not in ATTENTION_KINDS:
            raise ConfigError(f"attention must be one of {ATTENTION_KINDS}")
        if self.dtype not in ("float32", "float64"):
            raise ConfigError("dtype must be float32 or float64")
        if min(self.vocab_size, self.d_in, self.d_h, self.enc_layers,
               self.dec_layers, self.d_emb) < 1:
            raise ConfigError("all model dimensions must be positive")

    @property
    def np_dtype(self):
        return np.float32 if self.dtype == "float32" else np.float64

    @property
    def d_enc(self) -> int:
        return 2 * self.d_h

    @property
    def d_dec(self) -> int:
        return 2 * self.d_h


class Seq2Seq:
    """Encoder-decoder model; parameters are owned, named, and ordered."""

    def __init__(self, cfg: ModelConfig, seed: int):
        self.cfg = cfg
        rng = np.random.default_rng([seed, 0])
        dt = cfg.np_dtype

        self.embedding = _init_mat(rng, cfg.vocab_size, cfg.d_emb, dt)
        self.enc_layers: list[tuple[GruParams, GruParams]] = []
        d_in = cfg.d_in
        for _ in range(cfg.enc_layers):
            fwd = init_gru_params(rng, d_in, cfg.d_h, dt)
            bwd = init_gru_params(rng, d_in, cfg.d_h, dt)
            self.enc_layers.append((fwd, bwd))
            d_in = cfg.d_enc
        self.dec_layers: list[GruParams] = []
        d_in = cfg.d_emb + cfg.d_enc
        for _ in range(cfg.dec_layers):
            self.dec_layers.append(init_gru_params(rng, d_in, cfg.d_dec, dt))
            d_in = cfg.d_dec
        if cfg.attention == "general":
            self.attn = AttnParams("general", w=_init_mat(rng, cfg.d_dec, cfg.d_enc, dt))
        elif cfg.attention == "concat":
            k = 1.0 / np.sqrt(cfg.d_dec)
            self.attn = AttnParams("concat",
                                   w=_init_mat(rng, cfg.d_dec, cfg.d_dec + cfg.d_enc, dt),
                                   v=Tensor(rng.uniform(-k, k, cfg.d_dec).astype(dt),
                                            requires_grad=True))
        else:
            self.attn = AttnParams("dot")
        self.out_w = _init_mat(rng, cfg.vocab_size, cfg.d_dec + cfg.d_enc, dt)
        self.out_b = _zeros(cfg.vocab_size, dt)

    def parameters(self) -> dict[str, Tensor]:
        params: dict[str, Tensor] = {"embedding": self.embedding}
        for i, (fwd, bwd) in enumerate(self.enc_layers):
            params.update(fwd.named(f"enc{i}.fwd"))
            params.update(bwd.named(f"enc{i}.bwd"))
        for i, p in enumerate(self.dec_layers):
            params.update(p.named(f"dec{i}"))
        if self.attn.w is not None:
            params["attn.w"] = self.attn.w
        if self.attn.v is not None:
            params["attn.v"] = self.attn.v
        params["out.w"] = self.out_w
        params["out.b"] = self.out_b
        return params

    def encode(self, frames) -> EncoderOutput:
        return encode(self.enc_layers, frames)

    def init_decoder_state(self) -> list[Tensor]:
        dt = self.cfg.np_dtype
        return [Tensor(np.zeros(self.cfg.d_dec, dtype=dt)) for _ in self.dec_layers]

    def decode_step(self, enc: EncoderOutput, hiddens: list[Tensor], prev_token: int
                    ) -> tuple[list[Tensor], Tensor, Tensor, Tensor]:
        """One decoder step; returns (new hiddens, logits, alpha, context)."""
        context, alpha = attention_context(hiddens[-1], enc, self.attn)
        x = T.concat([T.row(self.embedding, prev_token), context])
        new_hiddens = []
        for p, h_prev in zip(self.dec_layers, hiddens):
            x = gru_cell(p, x, h_prev)
            new_hiddens.append(x)
        logits = (self.out_w @ T.concat([new_hiddens[-1], context])) + self.out_b
        return new_hiddens, logits, alpha, context


def decode_teacher_forced(model: Seq2Seq, enc: EncoderOutput, target: Sequence[int],
                          sampling_prob: float,
                          rng: Optional[np.random.Generator] = None
                          ) -> tuple[DecoderTrace, Tensor]:
    """Decode against a known target with scheduled sampling.

    ``target`` must start with [sos] and end with [eos]. At step k the fed
    token is the ground truth with probability ``sampling_prob``, otherwise
    the model's own argmax from the previous step. The first step always
    feeds [sos]; with sampling_prob >= 1 the rng is never consulted. The
    returned loss is the mean negative log-likelihood over non-pad steps.
    """
    target = [int(t) for t in target]
    if not target:
        raise DomainError("decode_teacher_forced: empty target")
    body = len(target)
    while body > 0 and target[body - 1] == Vocab.PAD:
        body -= 1
    if body == 0 or target[0] != Vocab.SOS or target[body - 1] != Vocab.EOS:
        raise ContractError("target must start with [sos] and end with [eos] "
                            "(trailing [pad] allowed)")
    if not 0.0 <= sampling_prob <= 1.0:
        raise ConfigError(f"sampling_prob must be in [0, 1], got {sampling_prob}")
    if sampling_prob < 1.0 and rng is None:
        raise ConfigError("sampling_prob < 1 requires an rng")

    hiddens = model.init_decoder_state()
    trace = DecoderTrace([], [], [], [], [])
    nlls: list[Tensor] = []
    prev_argmax: Optional[int] = None
    for k in range(len(target) - 1):
        if k == 0 or sampling_prob >= 1.0:
            fed = target[k]
        elif sampling_prob <= 0.0:
            fed = prev_argmax
        else:
            fed = target[k] if rng.random() < sampling_prob else prev_argmax
        hiddens, logits, alpha, context = model.decode_step(enc, hiddens, fed)
        prev_argmax = int(np.argmax(logits.data))
        trace.fed_tokens.append(fed)
        trace.alphas.append(alpha)
        trace.contexts.append(context)
        trace.hiddens.append(hiddens[-1])
        trace.logits.append(logits)
        if target[k + 1] != Vocab.PAD:
            nlls.append(T.pick(T.log_softmax(logits), target[k + 1]))
    if not nlls:
        raise DomainError("decode_teacher_forced: no non-pad target steps")
    base_loss = T.add_n(nlls) * (-1.0 / len(nlls))
    return trace, base_loss


def greedy_decode(model: Seq2Seq, enc: EncoderOutput, max_len: int
                  ) -> tuple[Hypothesis, DecoderTrace]:
    """Free-running argmax decode; stops after emitting [eos] or at max_len."""
    hiddens = model.init_decoder_state()
    trace = DecoderTrace([], [], [], [], [])
    tokens: list[int] = []
    log_prob = 0.0
    prev = Vocab.SOS
    for _ in range(max_len):
        hiddens, logits, alpha, context = model.decode_step(enc, hiddens, prev)
        logp = T.log_softmax(logits)
        tok = int(np.argmax(logits.data))
        log_prob += float(logp.data[tok])
        trace.fed_tokens.append(prev)
        trace.alphas.append(alpha)
        trace.contexts.append(context)
        trace.hiddens.append(hiddens[-1])
        trace.logits.append(logits)
        tokens.append(tok)
        if tok == Vocab.EOS:
            break
        prev = tok
    return Hypothesis(tuple(tokens), log_prob), trace


def beam_search(model: Seq2Seq, enc: EncoderOutput, width: int, max_len: int) -> Hypothesis:
    """Beam search over token log-probs.

    Hypotheses finalize on [eos]; the highest cumulative log-prob finalized
    hypothesis wins (no length normalization). If nothing finalizes within
    max_len, the best live hypothesis is returned truncated. Ties break
    toward the lexicographically smaller token id sequence, so width 1 is
    token-identical to greedy decoding.
    """
    if width < 1:
        raise ConfigError(f"beam width must be >= 1, got {width}")

    def key(item):
        tokens, logp = item[0], item[1]
        return (-logp, tokens)

    live = [((), 0.0, model.init_decoder_state(), Vocab.SOS)]
    finished: list[tuple[tuple[int, ...], float]] = []
    for _ in range(max_len):
        pool = []
        for tokens, logp, hiddens, prev in live:
            new_hiddens, logits, _, _ = model.decode_step(enc, hiddens, prev)
            step_logp = T.log_softmax(logits).data
            for tok in range(len(step_logp)):
                pool.append((tokens + (tok,), logp + float(step_logp[tok]), new_hiddens))
        pool.sort(key=key)
        live = []
        for tokens, logp, hiddens in pool:
            if tokens[-1] == Vocab.EOS:
                finished.append((tokens, logp))
            elif len(live) < width:
                live.append((tokens, logp, hiddens, tokens[-1]))
            if len(live) >= width:
                break
        if not live:
            break
    if finished:
        best = min(finished, key=key)
        return Hypothesis(best[0], best[1])
    best = min(((t, lp) for t, lp, _, _ in live), key=key)
    return Hypothesis(best[0], best[1])
