"""BOW-initialised bidirectional GRU tagger and attentional BiLSTM encoder-decoder.

Both read a line window as ``[embedding; field code]`` per token and start
their recurrent states from affine maps of the target medication's BOW
representation (sum of its embedding rows plus the code 1).
"""

from __future__ import annotations

import numpy as np

from ..corpus.types import FieldLabel
from ..embeddings import EOO_ID, EmbeddingMatrix, Vocabulary
from ..errors import ConfigInvalid
from ..ner.models import N_CLASSES, prepare_table
from ..numkit import GRUCell, LSTMCell, ParamStore, Tensor, get_dtype, glorot_uniform, ops
from .data import Batch, RelConfig

NEG_INF = -1e9


class _RelBase:
    def __init__(self, cfg: RelConfig, E: EmbeddingMatrix | np.ndarray, vocab: Vocabulary):
        cfg.validate()
        table = prepare_table(E)
        if table.shape != (len(vocab), cfg.m):
            raise ConfigInvalid(f"embedding table {table.shape} does not match vocab {len(vocab)} x m={cfg.m}")
        self.cfg, self.vocab, self.table = cfg, vocab, table
        self.store = ParamStore()

    def _affine(self, name: str, n_in: int, n_out: int, rng) -> tuple[Tensor, Tensor]:
        return (self.store.add(f"{name}.W", glorot_uniform(rng, n_in, n_out)),
                self.store.add(f"{name}.b", np.zeros(n_out)))

    def bow(self, term_ids: list[list[int]]) -> Tensor:
        rows = [np.concatenate([self.table[ids].sum(axis=0), [float(FieldLabel.MEDICATION)]]) for ids in term_ids]
        return Tensor(np.asarray(rows, dtype=get_dtype()))

    def inputs(self, batch: Batch) -> Tensor:
        x = np.concatenate([self.table[batch.ids], batch.codes[..., None].astype(self.table.dtype)], axis=-1)
        return Tensor(x.astype(get_dtype(), copy=False))

    def num_params(self) -> int:
        return self.store.num_params()


class Seq2SeqTagger(_RelBase):
    """Per-token 7-way classifier over concatenated forward/backward GRU states."""

    def __init__(self, cfg: RelConfig, E, vocab: Vocabulary, rng: np.random.Generator):
        super().__init__(cfg, E, vocab)
        m, H = cfg.m, cfg.hidden
        self.init_f = self._affine("init.f", m + 1, H, rng)
        self.init_b = self._affine("init.b", m + 1, H, rng)
        self.fwd = GRUCell(self.store, "gru.f", m + 1, H, rng)
        self.bwd = GRUCell(self.store, "gru.b", m + 1, H, rng)
        self.out = self._affine("out", 2 * H, N_CLASSES, rng)

    def initial_states(self, batch: Batch) -> tuple[Tensor, Tensor]:
        bow = self.bow(batch.term_ids)
        return ops.affine(bow, *self.init_f), ops.affine(bow, *self.init_b)

    def logits(self, batch: Batch) -> Tensor:
        xs = self.inputs(batch)
        hf0, hb0 = self.initial_states(batch)
        fo, _ = self.fwd.run(xs, hf0, mask=batch.mask)
        bo, _ = self.bwd.run(xs, hb0, mask=batch.mask, reverse=True)
        states = ops.concat([ops.stack(fo, axis=1), ops.stack(bo, axis=1)], axis=-1)
        return ops.affine(states, *self.out)

    def loss(self, batch: Batch) -> Tensor:
        """Cross-entropy summed over each window, averaged over the batch."""
        ce = ops.cross_entropy(self.logits(batch), batch.tags, weights=batch.mask, reduction="sum")
        return ops.mul(ce, 1.0 / len(batch.ids))

    def proba(self, batch: Batch) -> np.ndarray:
        return ops._softmax(self.logits(batch).data.astype(np.float64), -1)


class EncoderDecoder(_RelBase):
    """BiLSTM encoder, attentional LSTM decoder, softmax over the vocabulary."""

    def __init__(self, cfg: RelConfig, E, vocab: Vocabulary, rng: np.random.Generator):
        super().__init__(cfg, E, vocab)
        if EOO_ID >= len(vocab):
            raise ConfigInvalid("vocabulary lacks the end-of-output token")
        m, H = cfg.m, cfg.hidden
        D = 2 * H
        self.init = {k: self._affine(f"init.{k}", m + 1, H, rng) for k in ("hf", "cf", "hb", "cb")}
        self.enc_f = LSTMCell(self.store, "enc.f", m + 1, H, rng)
        self.enc_b = LSTMCell(self.store, "enc.b", m + 1, H, rng)
        self.dec = LSTMCell(self.store, "dec", m + D, D, rng)
        self.start = self.store.add("dec.start", rng.normal(0.0, 0.1, m))
        if cfg.attention == "bahdanau":
            self.W1 = self.store.add("att.W1", glorot_uniform(rng, D, D))
            self.W2 = self.store.add("att.W2", glorot_uniform(rng, D, D))
            self.v = self.store.add("att.v", glorot_uniform(rng, D, 1))
        else:
            self.Wa = self.store.add("att.W", glorot_uniform(rng, D, D))
        self.out = self._affine("out", 2 * D, len(vocab), rng)

    # -- encoder -----------------------------------------------------------------

    def encode(self, batch: Batch):
        """Returns (states (B,T,2H), attention keys, additive mask, h0, c0)."""
        xs = self.inputs(batch)
        bow = self.bow(batch.term_ids)
        s0 = {k: ops.affine(bow, *p) for k, p in self.init.items()}
        fo, (hf, cf) = self.enc_f.run(xs, s0["hf"], s0["cf"], mask=batch.mask)
        bo, (hb, cb) = self.enc_b.run(xs, s0["hb"], s0["cb"], mask=batch.mask, reverse=True)
        states = ops.concat([ops.stack(fo, axis=1), ops.stack(bo, axis=1)], axis=-1)
        keys = ops.matmul(states, self.W1 if self.cfg.attention == "bahdanau" else self.Wa)
        bias = np.where(batch.mask > 0, 0.0, NEG_INF).astype(get_dtype())
        return states, keys, bias, ops.concat([hf, hb], axis=-1), ops.concat([cf, cb], axis=-1)

    def attend(self, s: Tensor, states: Tensor, keys: Tensor, bias: np.ndarray) -> tuple[Tensor, Tensor]:
        """Context vector and weights over encoder positions given decoder state ``s``."""
        B, T, D = states.shape
        if self.cfg.attention == "bahdanau":
            q = ops.reshape(ops.matmul(s, self.W2), (B, 1, D))
            scores = ops.reshape(ops.matmul(ops.tanh(ops.add(keys, q)), self.v), (B, T))
        else:
            scores = ops.sum(ops.mul(keys, ops.reshape(s, (B, 1, D))), axis=-1)
        alpha = ops.softmax(ops.add(scores, bias), axis=-1)
        ctx = ops.sum(ops.mul(ops.reshape(alpha, (B, T, 1)), states), axis=1)
        return ctx, alpha

    def step(self, prev: Tensor, h: Tensor, c: Tensor, enc) -> tuple[Tensor, Tensor, Tensor, Tensor]:
        states, keys, bias = enc[:3]
        ctx, alpha = self.attend(h, states, keys, bias)
        h, c = self.dec.step(ops.concat([prev, ctx], axis=-1), h, c)
        return ops.affine(ops.concat([h, ctx], axis=-1), *self.out), h, c, alpha

    def _start(self, B: int) -> Tensor:
        return ops.mul(ops.reshape(self.start, (1, self.cfg.m)), np.ones((B, 1), dtype=get_dtype()))

    def logits(self, batch: Batch) -> Tensor:
        """Teacher-forced logits (B, L, V)."""
        enc = self.encode(batch)
        h, c = enc[3], enc[4]
        B, L = batch.out_ids.shape
        prev = self._start(B)
        outs = []
        for t in range(L):
            y, h, c, _ = self.step(prev, h, c, enc)
            outs.append(y)
            prev = Tensor(self.table[batch.out_ids[:, t]])
        return ops.stack(outs, axis=1)

    def loss(self, batch: Batch) -> Tensor:
        return ops.cross_entropy(self.logits(batch), batch.out_ids, weights=batch.out_mask)

    def greedy(self, batch: Batch, max_len: int | None = None) -> tuple[list[list[int]], list[list[np.ndarray]]]:
        """Greedy decoding up to the end-of-output token or ``max_len`` steps.

        Returns per-instance token ids (without the terminator) and the
        attention weights of each emitted step.
        """
        max_len = max_len or self.cfg.max_decode
        enc = self.encode(batch)
        h, c = enc[3], enc[4]
        B = len(batch.ids)
        prev = self._start(B)
        out: list[list[int]] = [[] for _ in range(B)]
        attn: list[list[np.ndarray]] = [[] for _ in range(B)]
        done = np.zeros(B, dtype=bool)
        for _ in range(max_len):
            y, h, c, alpha = self.step(prev, h, c, enc)
            nxt = y.data.argmax(axis=-1)
            for j in np.flatnonzero(~done):
                attn[j].append(alpha.data[j])
                if nxt[j] == EOO_ID:
                    done[j] = True
                else:
                    out[j].append(int(nxt[j]))
            if done.all():
                break
            prev = Tensor(self.table[nxt])
        return out, attn


def build_seq2seq_tagger(cfg: RelConfig, E, vocab: Vocabulary, seed: int = 0) -> Seq2SeqTagger:
    if cfg.arch != "seq2seq":
        raise ConfigInvalid("the tagger needs arch 'seq2seq'")
    return Seq2SeqTagger(cfg, E, vocab, np.random.default_rng(seed))


def build_encdec(cfg: RelConfig, E, vocab: Vocabulary, attention: str | None = None, seed: int = 0) -> EncoderDecoder:
    if cfg.arch != "encdec":
        raise ConfigInvalid("the encoder-decoder needs arch 'encdec'")
    if attention is not None:
        cfg = RelConfig.from_dict({**cfg.to_dict(), "attention": attention})
    return EncoderDecoder(cfg, E, vocab, np.random.default_rng(seed))


def build_rel_model(cfg: RelConfig, E, vocab: Vocabulary, seed: int = 0):
    if cfg.arch == "seq2seq":
        return build_seq2seq_tagger(cfg, E, vocab, seed)
    return build_encdec(cfg, E, vocab, seed=seed)
