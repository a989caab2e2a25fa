"""Context-free FFN, context-aware FFN and windowed LSTM term classifiers.

The two FFNs are per-field binary stacks (six independent models). The LSTM
reads the (2w+1)-token window around a token and predicts one of seven
classes (the six fields or none) for the center token.
"""

from __future__ import annotations

import numpy as np

from ..corpus.types import FIELDS, FieldLabel
from ..embeddings import RESERVED, UNK_ID, EmbeddingMatrix, Vocabulary
from ..errors import ConfigInvalid
from ..numkit import LSTMCell, ParamStore, Tensor, get_dtype, glorot_uniform, ops
from .config import NerConfig

N_CLASSES = 7


def prepare_table(E: EmbeddingMatrix | np.ndarray) -> np.ndarray:
    """Copy of the embedding rows with ``<unk>`` set to the mean trained row."""
    W = np.array(E.weights if isinstance(E, EmbeddingMatrix) else E, dtype=get_dtype())
    trained = W[len(RESERVED):]
    if len(trained):
        W[UNK_ID] = trained.mean(axis=0)
    return W


class _Embed:
    """Frozen lookup (plain numpy) or trainable table in ``store``."""

    def __init__(self, table: np.ndarray, store: ParamStore, finetune: bool, name: str = "emb"):
        self.finetune = finetune
        self.param = store.add(name, table) if finetune else None
        self.table = None if finetune else table

    @property
    def weights(self) -> np.ndarray:
        return self.param.data if self.finetune else self.table

    def __call__(self, ids: np.ndarray) -> Tensor:
        if self.finetune:
            return ops.embedding_lookup(self.param, ids)
        return Tensor(self.table[ids])


class DenseStack:
    """``l`` activation layers, dropout after each, then a linear head."""

    def __init__(self, store: ParamStore, prefix: str, in_dim: int, hidden: list[int], n_out: int,
                 activation: str, dropout: float, rng: np.random.Generator):
        self.layers = []
        dims = [in_dim, *hidden]
        for i in range(len(hidden)):
            W = store.add(f"{prefix}.W{i}", glorot_uniform(rng, dims[i], dims[i + 1]))
            b = store.add(f"{prefix}.b{i}", np.zeros(dims[i + 1]))
            self.layers.append((W, b))
        self.Wo = store.add(f"{prefix}.Wo", glorot_uniform(rng, dims[-1], n_out))
        self.bo = store.add(f"{prefix}.bo", np.zeros(n_out))
        self.act = ops.activation(activation)
        self.dropout = dropout

    def __call__(self, x: Tensor, train: bool = False, rng: np.random.Generator | None = None) -> Tensor:
        for W, b in self.layers:
            x = ops.dropout(self.act(ops.affine(x, W, b)), self.dropout, train, rng)
        return ops.affine(x, self.Wo, self.bo)


class FieldFFN:
    """Six per-field binary FFNs over the flattened (2w+1)-token window."""

    kind = "binary"

    def __init__(self, cfg: NerConfig, E: EmbeddingMatrix | np.ndarray, vocab: Vocabulary,
                 rng: np.random.Generator, fields=FIELDS):
        cfg.validate()
        if cfg.arch == "rnn":
            raise ConfigInvalid("FieldFFN needs an FFN architecture")
        table = prepare_table(E)
        if table.shape != (len(vocab), cfg.m):
            raise ConfigInvalid(f"embedding table {table.shape} does not match vocab {len(vocab)} x m={cfg.m}")
        self.cfg, self.vocab = cfg, vocab
        self.window = 2 * cfg.w + 1
        self.in_dim = cfg.m * self.window
        self.fields = tuple(FieldLabel(f) for f in fields)
        self.stores: dict[FieldLabel, ParamStore] = {}
        self.embeds: dict[FieldLabel, _Embed] = {}
        self.nets: dict[FieldLabel, DenseStack] = {}
        for f in self.fields:
            store = ParamStore()
            self.embeds[f] = _Embed(table, store, cfg.finetune)
            self.nets[f] = DenseStack(store, f"f{int(f)}", self.in_dim, cfg.h, 2, cfg.activation, cfg.d, rng)
            self.stores[f] = store
        self.trained = {f: True for f in self.fields}

    def inputs(self, f: FieldLabel, ids: np.ndarray) -> Tensor:
        x = self.embeds[f](ids)
        return ops.reshape(x, (ids.shape[0], self.in_dim))

    def logits(self, f: FieldLabel, ids: np.ndarray, train: bool = False, rng=None) -> Tensor:
        ids = np.asarray(ids)
        if ids.ndim != 2 or ids.shape[1] != self.window:
            raise ConfigInvalid(f"expected windows of {self.window} ids, got shape {ids.shape}")
        return self.nets[f](self.inputs(f, ids), train, rng)

    def num_params(self, f: FieldLabel = FieldLabel.MEDICATION, include_embeddings: bool = False) -> int:
        n = self.stores[f].num_params()
        if self.cfg.finetune and not include_embeddings:
            n -= self.embeds[f].param.size
        return n

    def positive_proba(self, ids: np.ndarray) -> np.ndarray:
        """(N, 7) probability of each field (column 0 zero)."""
        out = np.zeros((len(ids), N_CLASSES))
        for f in self.fields:
            if self.trained[f] and len(ids):
                out[:, int(f)] = ops._softmax(self.logits(f, ids).data.astype(np.float64), -1)[:, 1]
        return out


class RNNClassifier:
    """LSTM over the window; its final hidden state feeds a 7-way softmax."""

    kind = "multiclass"

    def __init__(self, cfg: NerConfig, E: EmbeddingMatrix | np.ndarray, vocab: Vocabulary,
                 rng: np.random.Generator):
        cfg.validate()
        if cfg.arch != "rnn":
            raise ConfigInvalid("RNNClassifier needs arch 'rnn'")
        table = prepare_table(E)
        if table.shape != (len(vocab), cfg.m):
            raise ConfigInvalid(f"embedding table {table.shape} does not match vocab {len(vocab)} x m={cfg.m}")
        self.cfg, self.vocab = cfg, vocab
        self.window = 2 * cfg.w + 1
        self.store = ParamStore()
        self.embed = _Embed(table, self.store, cfg.finetune)
        H = cfg.h[0]
        self.lstm = LSTMCell(self.store, "lstm", cfg.m, H, rng)
        self.Wo = self.store.add("out.W", glorot_uniform(rng, H, N_CLASSES))
        self.bo = self.store.add("out.b", np.zeros(N_CLASSES))

    def logits(self, ids: np.ndarray, train: bool = False, rng=None) -> Tensor:
        ids = np.asarray(ids)
        if ids.ndim != 2 or ids.shape[1] != self.window:
            raise ConfigInvalid(f"expected windows of {self.window} ids, got shape {ids.shape}")
        xs = self.embed(ids)
        B, H = ids.shape[0], self.lstm.hidden_dim
        zero = np.zeros((B, H), dtype=get_dtype())
        _, (h, _) = self.lstm.run(xs, zero, zero)
        h = ops.dropout(h, self.cfg.d, train, rng)
        return ops.affine(h, self.Wo, self.bo)

    def num_params(self, include_embeddings: bool = False) -> int:
        n = self.store.num_params()
        if self.cfg.finetune and not include_embeddings:
            n -= self.embed.param.size
        return n

    def proba(self, ids: np.ndarray) -> np.ndarray:
        if not len(ids):
            return np.zeros((0, N_CLASSES))
        return ops._softmax(self.logits(ids).data.astype(np.float64), -1)


def build_context_free_ffn(cfg: NerConfig, E, vocab: Vocabulary, seed: int = 0) -> FieldFFN:
    if cfg.w != 0:
        raise ConfigInvalid("the context-free FFN sees only the token itself (w = 0)")
    return FieldFFN(cfg, E, vocab, np.random.default_rng(seed))


def build_context_aware_ffn(cfg: NerConfig, E, vocab: Vocabulary, seed: int = 0) -> FieldFFN:
    if cfg.w < 1:
        raise ConfigInvalid("the context-aware FFN needs w >= 1")
    return FieldFFN(cfg, E, vocab, np.random.default_rng(seed))


def build_rnn_classifier(cfg: NerConfig, E, vocab: Vocabulary, seed: int = 0) -> RNNClassifier:
    return RNNClassifier(cfg, E, vocab, np.random.default_rng(seed))


def build_model(cfg: NerConfig, E, vocab: Vocabulary, seed: int = 0):
    builders = {"cf-ffn": build_context_free_ffn, "ca-ffn": build_context_aware_ffn, "rnn": build_rnn_classifier}
    return builders[cfg.arch](cfg, E, vocab, seed)
