import itertools
import math

import numpy as np
import pytest

from libs_kd import seq2seq as S
from libs_kd import tensor as T
from libs_kd.errors import ConfigError, ContractError, DomainError, ShapeError
from libs_kd.seq2seq import (AttnParams, ModelConfig, Seq2Seq, Vocab,
                             attention_context, attention_score, beam_search,
                             decode_teacher_forced, encode, greedy_decode,
                             gru_cell, init_gru_params)
from libs_kd.tensor import Tensor

from .helpers import check_grads


def f64(x, rg=False):
    return Tensor(np.asarray(x, dtype=np.float64), requires_grad=rg)


def zero_gru(d_in, d_h):
    z = lambda *shape: Tensor(np.zeros(shape))
    return S.GruParams(d_in, d_h, z(d_h, d_in), z(d_h, d_h), z(d_h),
                       z(d_h, d_in), z(d_h, d_h), z(d_h),
                       z(d_h, d_in), z(d_h, d_h), z(d_h))


def tiny_model(seed=0, vocab_size=5, d_in=2, d_h=2, dtype="float64", **kw):
    cfg = ModelConfig(vocab_size=vocab_size, d_in=d_in, d_h=d_h, dtype=dtype, **kw)
    return Seq2Seq(cfg, seed=seed)


class TestVocab:
    def test_synthetic_layout(self):
        v = Vocab.synthetic(4)
        assert len(v) == 7
        assert v.tokens[:3] == ("[sos]", "[eos]", "[pad]")
        assert v.id("t02") == 5 and v.token(5) == "t02"

    def test_reserved_required(self):
        with pytest.raises(ConfigError):
            Vocab(("a", "b", "c"))

    def test_strip_and_map(self):
        v = Vocab.synthetic(4)
        assert v.to_model_ids([0, 3]) == [3, 6]
        assert v.strip_reserved([0, 3, 6, 1, 2]) == [3, 6]


class TestGruCell:
    def test_zero_weights_zero_state(self):
        p = zero_gru(3, 4)
        h = gru_cell(p, f64(np.zeros(3)), f64(np.zeros(4)))
        assert np.array_equal(h.data, np.zeros(4))

    def test_zero_weights_halve_state(self):
        # z = sigmoid(0) = 0.5 and candidate = tanh(0) = 0, so h' = h/2
        p = zero_gru(3, 4)
        v = np.array([1.0, -2.0, 0.5, 4.0])
        h = gru_cell(p, f64(np.zeros(3)), f64(v))
        assert np.allclose(h.data, v / 2, atol=1e-15)

    def test_scalar_hand_oracle(self):
        # d_in = d_h = 1 with hand-set weights, checked against a scalar
        # computation of the gate equations
        w_z, u_z, b_z = 0.3, -0.4, 0.1
        w_r, u_r, b_r = -0.2, 0.5, -0.3
        w_h, u_h, b_h = 0.7, 0.6, 0.2
        p = S.GruParams(1, 1, f64([[w_z]]), f64([[u_z]]), f64([b_z]),
                        f64([[w_r]]), f64([[u_r]]), f64([b_r]),
                        f64([[w_h]]), f64([[u_h]]), f64([b_h]))
        x, h0 = 0.8, -0.6

        def sig(v):
            return 1.0 / (1.0 + math.exp(-v))

        z = sig(w_z * x + u_z * h0 + b_z)
        r = sig(w_r * x + u_r * h0 + b_r)
        cand = math.tanh(w_h * x + u_h * (r * h0) + b_h)
        expected = (1 - z) * h0 + z * cand
        got = gru_cell(p, f64([x]), f64([h0])).data[0]
        assert got == pytest.approx(expected, rel=1e-14)

    def test_dim_mismatch(self):
        p = zero_gru(3, 4)
        with pytest.raises(ShapeError):
            gru_cell(p, f64(np.zeros(2)), f64(np.zeros(4)))
        with pytest.raises(ShapeError):
            gru_cell(p, f64(np.zeros(3)), f64(np.zeros(5)))


class TestEncode:
    def test_single_frame_row_equals_sequence_vector(self):
        rng = np.random.default_rng(0)
        layers = [(init_gru_params(rng, 3, 2, np.float64),
                   init_gru_params(rng, 3, 2, np.float64))]
        out = encode(layers, rng.uniform(-1, 1, (1, 3)))
        assert out.length == 1
        assert np.array_equal(out.rows[0].data, out.sequence_vector.data)
        assert out.matrix.shape == (1, 4)

    def test_zero_weights_zero_states(self):
        layers = [(zero_gru(3, 2), zero_gru(3, 2))]
        out = encode(layers, np.ones((4, 3)))
        assert np.array_equal(out.matrix.data, np.zeros((4, 4)))

    def test_empty_sequence_rejected(self):
        layers = [(zero_gru(3, 2), zero_gru(3, 2))]
        with pytest.raises(DomainError):
            encode(layers, np.zeros((0, 3)))

    def test_matches_unrolled_cell_oracle(self):
        rng = np.random.default_rng(42)
        fwd = init_gru_params(rng, 3, 2, np.float64)
        bwd = init_gru_params(rng, 3, 2, np.float64)
        frames = rng.uniform(-1, 1, (3, 3))
        out = encode([(fwd, bwd)], frames)

        h = f64(np.zeros(2))
        fwd_states = []
        for t in range(3):
            h = gru_cell(fwd, f64(frames[t]), h)
            fwd_states.append(h.data)
        h = f64(np.zeros(2))
        bwd_states = [None] * 3
        for t in range(2, -1, -1):
            h = gru_cell(bwd, f64(frames[t]), h)
            bwd_states[t] = h.data
        expected = np.stack([np.concatenate([fwd_states[t], bwd_states[t]])
                             for t in range(3)])
        assert np.allclose(out.matrix.data, expected, atol=1e-14)
        assert np.allclose(out.sequence_vector.data,
                           np.concatenate([fwd_states[2], bwd_states[0]]), atol=1e-14)

    def test_two_layer_shapes(self):
        rng = np.random.default_rng(1)
        layers = [(init_gru_params(rng, 3, 2, np.float64),
                   init_gru_params(rng, 3, 2, np.float64)),
                  (init_gru_params(rng, 4, 2, np.float64),
                   init_gru_params(rng, 4, 2, np.float64))]
        out = encode(layers, rng.uniform(-1, 1, (5, 3)))
        assert out.matrix.shape == (5, 4)

    def test_deterministic(self):
        rng = np.random.default_rng(2)
        layers = [(init_gru_params(rng, 3, 2, np.float64),
                   init_gru_params(rng, 3, 2, np.float64))]
        frames = rng.uniform(-1, 1, (4, 3))
        a = encode(layers, frames).matrix.data
        b = encode(layers, frames).matrix.data
        assert np.array_equal(a, b)


class TestAttentionScore:
    def test_dot_orthogonal(self):
        assert attention_score("dot", f64([1.0, 0.0]), f64([0.0, 1.0])).item() == 0.0

    def test_general_identity_reduces_to_dot(self):
        rng = np.random.default_rng(3)
        a, b = rng.uniform(-1, 1, 3), rng.uniform(-1, 1, 3)
        p = AttnParams("general", w=f64(np.eye(3)))
        got = attention_score("general", f64(a), f64(b), p).item()
        assert got == pytest.approx(float(a @ b), rel=1e-14)

    def test_concat_zero_v(self):
        rng = np.random.default_rng(4)
        p = AttnParams("concat", w=f64(rng.uniform(-1, 1, (3, 6))), v=f64(np.zeros(3)))
        assert attention_score("concat", f64(rng.uniform(-1, 1, 3)),
                               f64(rng.uniform(-1, 1, 3)), p).item() == 0.0

    def test_missing_params(self):
        with pytest.raises(ConfigError):
            attention_score("general", f64([1.0]), f64([1.0]), AttnParams("general"))
        with pytest.raises(ConfigError):
            attention_score("concat", f64([1.0]), f64([1.0]), AttnParams("concat"))


class TestAttentionContext:
    def _enc(self, states):
        rows = [f64(s) for s in states]
        return S.EncoderOutput(rows=rows, matrix=T.stack_rows(rows),
                               sequence_vector=rows[-1])

    def test_single_state(self):
        enc = self._enc([[1.0, 2.0]])
        c, alpha = attention_context(f64([0.3, -0.7]), enc, AttnParams("dot"))
        assert np.array_equal(alpha.data, [1.0])
        assert np.array_equal(c.data, [1.0, 2.0])

    def test_identical_rows(self):
        enc = self._enc([[1.0, -1.0]] * 4)
        c, alpha = attention_context(f64([0.5, 0.5]), enc, AttnParams("dot"))
        assert np.allclose(c.data, [1.0, -1.0], atol=1e-15)
        assert alpha.data.sum() == pytest.approx(1.0, abs=1e-6)

    def test_weighted_sum_oracle(self):
        rng = np.random.default_rng(5)
        states = rng.uniform(-1, 1, (4, 3))
        query = rng.uniform(-1, 1, 3)
        w = rng.uniform(-1, 1, (3, 3))
        enc = self._enc(states)
        c, alpha = attention_context(f64(query), enc, AttnParams("general", w=f64(w)))
        scores = np.array([query @ w @ s for s in states])
        e = np.exp(scores - scores.max())
        a_exp = e / e.sum()
        assert np.allclose(alpha.data, a_exp, atol=1e-12)
        assert np.allclose(c.data, a_exp @ states, atol=1e-12)

    def test_all_kinds_normalize(self):
        rng = np.random.default_rng(6)
        for kind in S.ATTENTION_KINDS:
            model = tiny_model(seed=rng.integers(1 << 30), attention=kind)
            enc = model.encode(rng.uniform(-1, 1, (5, 2)))
            _, alpha = attention_context(f64(np.zeros(4), rg=False), enc, model.attn)
            assert abs(alpha.data.sum() - 1.0) <= 1e-6
            assert np.all(alpha.data >= 0)


class TestTeacherForced:
    def test_pure_teacher_forcing_feeds_shifted_truth(self):
        model = tiny_model(seed=7)
        enc = model.encode(np.random.default_rng(8).uniform(-1, 1, (3, 2)))
        target = [0, 3, 4, 2 + 1, 1]  # sos t t t eos
        trace, loss = decode_teacher_forced(model, enc, target, 1.0)
        assert trace.fed_tokens == target[:-1]
        assert np.isfinite(loss.item())

    def test_teacher_forcing_rng_independent(self):
        model = tiny_model(seed=9)
        frames = np.random.default_rng(10).uniform(-1, 1, (3, 2))
        enc = model.encode(frames)
        _, l1 = decode_teacher_forced(model, enc, [0, 3, 1], 1.0,
                                      np.random.default_rng(1))
        _, l2 = decode_teacher_forced(model, enc, [0, 3, 1], 1.0,
                                      np.random.default_rng(999))
        assert l1.item() == l2.item()

    def test_greedy_self_feeding(self):
        model = tiny_model(seed=11)
        rng = np.random.default_rng(12)
        enc = model.encode(rng.uniform(-1, 1, (4, 2)))
        target = [0, 3, 4, 3, 1]
        trace, _ = decode_teacher_forced(model, enc, target, 0.0,
                                         np.random.default_rng(0))
        # after the first step, every fed token is the previous argmax
        assert trace.fed_tokens[0] == 0
        for k in range(1, len(trace.fed_tokens)):
            assert trace.fed_tokens[k] == int(np.argmax(trace.logits[k - 1].data))

    def test_uniform_logits_loss_is_log_vocab(self):
        model = tiny_model(seed=13)
        model.out_w.data[:] = 0.0
        model.out_b.data[:] = 0.0
        enc = model.encode(np.random.default_rng(14).uniform(-1, 1, (3, 2)))
        _, loss = decode_teacher_forced(model, enc, [0, 3, 4, 1], 1.0)
        assert loss.item() == pytest.approx(math.log(5), rel=1e-12)

    def test_empty_target_rejected(self):
        model = tiny_model(seed=15)
        enc = model.encode(np.zeros((2, 2)))
        with pytest.raises(DomainError):
            decode_teacher_forced(model, enc, [], 1.0)

    def test_malformed_target_rejected(self):
        model = tiny_model(seed=15)
        enc = model.encode(np.zeros((2, 2)))
        with pytest.raises(ContractError):
            decode_teacher_forced(model, enc, [3, 4, 1], 1.0)

    def test_pad_steps_excluded_from_loss(self):
        model = tiny_model(seed=16)
        enc = model.encode(np.random.default_rng(17).uniform(-1, 1, (3, 2)))
        target = [0, 3, 1, 2, 2]  # sos t eos pad pad
        trace, loss = decode_teacher_forced(model, enc, target, 1.0)
        assert trace.steps == 4  # steps still run over the padded tail
        # mean NLL over the two non-pad predictions only
        expected = -np.mean([T.log_softmax(trace.logits[0]).data[3],
                             T.log_softmax(trace.logits[1]).data[1]])
        assert loss.item() == pytest.approx(float(expected), rel=1e-12)

    def test_alpha_rows_normalized(self):
        rng = np.random.default_rng(18)
        for _ in range(20):
            model = tiny_model(seed=int(rng.integers(1 << 30)))
            enc = model.encode(rng.uniform(-1, 1, (int(rng.integers(1, 6)), 2)))
            trace, _ = decode_teacher_forced(model, enc, [0, 3, 4, 1], 1.0)
            for alpha in trace.alphas:
                assert abs(alpha.data.sum() - 1.0) <= 1e-6
                assert np.all(alpha.data >= 0)

    def test_base_loss_gradients(self):
        # d_h=2, T=3, V=5 instance, every parameter
        model = tiny_model(seed=19, d_h=2, vocab_size=5)
        frames = np.random.default_rng(20).uniform(-1, 1, (3, 2))
        target = [0, 3, 4, 1]

        def build():
            enc = model.encode(frames)
            _, loss = decode_teacher_forced(model, enc, target, 1.0)
            return loss

        check_grads(build, model.parameters(), tol=1e-4)


class TestGreedyAndBeam:
    def test_beam_width_validation(self):
        model = tiny_model(seed=21)
        enc = model.encode(np.zeros((2, 2)))
        with pytest.raises(ConfigError):
            beam_search(model, enc, 0, 5)

    def test_width_one_equals_greedy(self):
        rng = np.random.default_rng(22)
        for _ in range(25):
            model = tiny_model(seed=int(rng.integers(1 << 30)))
            frames = rng.uniform(-1, 1, (int(rng.integers(1, 5)), 2))
            enc = model.encode(frames)
            greedy_hyp, _ = greedy_decode(model, enc, 8)
            beam_hyp = beam_search(model, enc, 1, 8)
            assert beam_hyp.token_ids == greedy_hyp.token_ids

    def test_full_width_beam_matches_exhaustive_enumeration(self):
        rng = np.random.default_rng(23)
        vocab, max_len = 4, 3
        for _ in range(10):
            model = tiny_model(seed=int(rng.integers(1 << 30)), vocab_size=vocab)
            enc = model.encode(rng.uniform(-1, 1, (2, 2)))

            def score(path):
                with T.no_grad():
                    hiddens = model.init_decoder_state()
                    prev, logp = Vocab.SOS, 0.0
                    for tok in path:
                        hiddens, logits, _, _ = model.decode_step(enc, hiddens, prev)
                        logp += float(T.log_softmax(logits).data[tok])
                        prev = tok
                return logp

            candidates = []
            for n in range(1, max_len + 1):
                for path in itertools.product(range(vocab), repeat=n):
                    if path[-1] == Vocab.EOS and Vocab.EOS not in path[:-1]:
                        candidates.append((path, score(path)))
            best = min(candidates, key=lambda c: (-c[1], c[0]))

            # width >= vocab^(max_len-1) keeps every live prefix: no pruning
            hyp = beam_search(model, enc, vocab ** (max_len - 1), max_len)
            if hyp.token_ids[-1] == Vocab.EOS:
                assert hyp.token_ids == best[0]
                assert hyp.log_prob == pytest.approx(best[1], rel=1e-12)

    def test_markov_rigged_model_width_two(self):
        # Rig the decoder so logits depend only on the previous token,
        # then enumerate all paths as the oracle.
        vocab = 4
        model = tiny_model(seed=24, vocab_size=vocab, d_emb=vocab, d_h=1)
        model.embedding.data = np.eye(vocab)
        dec = model.dec_layers[0]
        for p in (dec.w_z, dec.u_z, dec.w_r, dec.u_r, dec.b_r, dec.u_h, dec.b_h):
            p.data[:] = 0.0
        dec.b_z.data[:] = 50.0  # update gate saturates at 1
        a_mat = np.array([[1.2, -0.3, 0.8, -1.1], [0.2, 0.9, -0.7, 0.4]])
        dec.w_h.data[:] = 0.0
        dec.w_h.data[:, :vocab] = a_mat
        b_mat = np.array([[0.5, -0.2], [-1.0, 0.7], [0.3, 1.1], [0.8, -0.6]])
        model.out_w.data[:] = 0.0
        model.out_w.data[:, :2] = b_mat
        model.out_b.data[:] = np.array([0.1, -0.4, 0.2, 0.0])

        # oracle: Markov transition log-probs, computed independently
        trans = np.zeros((vocab, vocab))
        for prev in range(vocab):
            logits = b_mat @ np.tanh(a_mat @ np.eye(vocab)[prev]) + model.out_b.data
            e = logits - logits.max()
            trans[prev] = e - np.log(np.exp(e).sum())

        max_len = 3
        candidates = []
        for n in range(1, max_len + 1):
            for path in itertools.product(range(vocab), repeat=n):
                if Vocab.EOS in path[:-1] or path[-1] != Vocab.EOS:
                    continue
                prev, logp = Vocab.SOS, 0.0
                for tok in path:
                    logp += trans[prev][tok]
                    prev = tok
                candidates.append((path, logp))
        best = min(candidates, key=lambda c: (-c[1], c[0]))

        enc = model.encode(np.zeros((2, 2)))
        hyp = beam_search(model, enc, 2, max_len)
        assert hyp.token_ids == best[0]
        assert hyp.log_prob == pytest.approx(best[1], abs=1e-9)

    def test_truncation_at_max_len(self):
        # rig output so [eos] never wins
        model = tiny_model(seed=25)
        model.out_w.data[:] = 0.0
        model.out_b.data[:] = 0.0
        model.out_b.data[Vocab.EOS] = -100.0
        model.out_b.data[3] = 5.0
        enc = model.encode(np.zeros((2, 2)))
        hyp = beam_search(model, enc, 2, 4)
        assert len(hyp.token_ids) == 4
        assert Vocab.EOS not in hyp.token_ids

    def test_tie_break_prefers_lower_token_id(self):
        model = tiny_model(seed=26)
        model.out_w.data[:] = 0.0
        model.out_b.data[:] = 0.0  # uniform logits: every path ties
        enc = model.encode(np.zeros((2, 2)))
        hyp = beam_search(model, enc, 3, 4)
        # all paths tie per step, so the shortest finalized path, immediate
        # [eos], has the best cumulative log-prob
        assert hyp.token_ids == (1,)
        assert hyp.log_prob == pytest.approx(-math.log(5), rel=1e-12)
