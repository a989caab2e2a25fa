"""Vocabulary, sentence-bounded context windows, and CBOW / skip-gram training.

Both trainers use negative sampling (unigram^0.75 noise) by default and a
full-softmax output layer when ``mode="softmax"``. Updates are plain
per-window SGD in a compiled loop; window order and noise words are drawn
up front from one seeded generator, so a run is bit-reproducible.
"""

from __future__ import annotations

import json
from collections.abc import Iterable, Iterator
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from numba import njit

from .errors import DimensionMismatch, EmptyWindowStream, MalformedHeader, NonFiniteValue
from .numkit import get_dtype
from .preprocess import NUM, sentence_map

PAD = "PAD"
UNK = "<unk>"
EOO = "<end-of-output>"
RESERVED = (PAD, NUM, UNK, EOO)
PAD_ID, NUM_ID, UNK_ID, EOO_ID = range(4)


class Vocabulary:
    """Dense token ids; the four reserved tokens always take ids 0..3."""

    def __init__(self, tokens: Iterable[str] = ()):
        self.tokens: list[str] = list(RESERVED)
        self.index: dict[str, int] = {t: i for i, t in enumerate(self.tokens)}
        for t in tokens:
            if t not in self.index:
                self.index[t] = len(self.tokens)
                self.tokens.append(t)

    def __len__(self) -> int:
        return len(self.tokens)

    def __contains__(self, token: str) -> bool:
        return token in self.index

    def __iter__(self) -> Iterator[str]:
        return iter(self.tokens)

    def __eq__(self, other) -> bool:
        return isinstance(other, Vocabulary) and self.tokens == other.tokens

    def id(self, token: str) -> int:
        return self.index.get(token, UNK_ID)

    def ids(self, tokens: Iterable[str]) -> list[int]:
        return [self.index.get(t, UNK_ID) for t in tokens]

    def token(self, i: int) -> str:
        return self.tokens[i]

    def to_list(self) -> list[str]:
        return list(self.tokens)

    @classmethod
    def from_list(cls, tokens: list[str]) -> "Vocabulary":
        if tuple(tokens[: len(RESERVED)]) != RESERVED or len(set(tokens)) != len(tokens):
            raise MalformedHeader("vocabulary must start with the reserved tokens and be unique")
        return cls(tokens[len(RESERVED):])


def build_vocab(embedding_docs, train_docs=()) -> Vocabulary:
    """Every token type of both document sets, sorted, after the reserved ids."""
    types = {t for docs in (embedding_docs, train_docs) for d in docs for line in d.lines for t in line}
    return Vocabulary(sorted(types - set(RESERVED)))


@dataclass(frozen=True)
class ContextWindow:
    center: int
    context: tuple[int, ...]


def make_windows(docs, vocab: Vocabulary, sentence_maps=None, size: int = 11) -> Iterator[ContextWindow]:
    """One window per token occurrence; neighbours outside the sentence are PAD."""
    if size < 1 or size % 2 == 0:
        raise ValueError("window size must be odd and positive")
    half = size // 2
    docs = list(docs)
    maps = sentence_maps if sentence_maps is not None else [sentence_map(d) for d in docs]
    for doc, sm in zip(docs, maps):
        for li, toks in enumerate(doc.lines):
            ids = vocab.ids(toks)
            for s, e in sm.sentences(li, len(toks)):
                for c in range(s, e):
                    ctx = tuple(
                        ids[j] if s <= j < e else PAD_ID
                        for j in range(c - half, c + half + 1)
                        if j != c
                    )
                    yield ContextWindow(ids[c], ctx)


def window_arrays(windows) -> tuple[np.ndarray, np.ndarray]:
    """Stack windows into (centers (N,), contexts (N, size-1)) int arrays."""
    if isinstance(windows, tuple) and len(windows) == 2 and isinstance(windows[0], np.ndarray):
        return windows
    ws = list(windows)
    if not ws:
        return np.zeros(0, dtype=np.int64), np.zeros((0, 0), dtype=np.int64)
    centers = np.fromiter((w.center for w in ws), dtype=np.int64, count=len(ws))
    contexts = np.array([w.context for w in ws], dtype=np.int64)
    return centers, contexts


@dataclass
class EmbeddingMatrix:
    weights: np.ndarray
    vocab: Vocabulary
    algorithm: str = "cbow"
    manifest: dict = field(default_factory=dict)
    losses: list[float] = field(default_factory=list)

    @property
    def m(self) -> int:
        return int(self.weights.shape[1])

    def __len__(self) -> int:
        return int(self.weights.shape[0])

    def vector(self, token: str) -> np.ndarray:
        return self.weights[self.vocab.id(token)]


def init_embeddings(V: int, m: int, rng: np.random.Generator, init: str = "gaussian") -> np.ndarray:
    if init == "gaussian":
        return rng.standard_normal((V, m))
    if init == "uniform":
        return rng.uniform(-0.5 / m, 0.5 / m, size=(V, m))
    raise ValueError(f"unknown init {init!r}")


def noise_distribution(centers: np.ndarray, V: int, power: float = 0.75) -> np.ndarray:
    counts = np.bincount(centers, minlength=V).astype(np.float64)
    counts[PAD_ID] = 0.0
    p = counts**power
    return p / p.sum()


def cbow_loss(W_in, W_out, center: int, context, pad_id: int = PAD_ID) -> float:
    """Full-softmax cross-entropy of the center word given the averaged context."""
    ctx = [c for c in context if c != pad_id]
    if not ctx:
        return 0.0
    h = W_in[ctx].mean(axis=0)
    s = W_out @ h
    return float(np.logaddexp.reduce(s) - s[center])


def csg_loss(W_in, W_out, center: int, context, pad_id: int = PAD_ID) -> float:
    """Summed full-softmax cross-entropy of each context word given the center."""
    s = W_out @ W_in[center]
    lse = np.logaddexp.reduce(s)
    return float(sum(lse - s[c] for c in context if c != pad_id))


@njit(cache=True)
def _sgd_epoch(W_in, W_out, centers, contexts, order, negs, lrs, cbow, softmax, pad):
    """One pass of plain per-window SGD, in the order of the reference word2vec.

    ``negs`` holds pre-drawn noise ids (N, C, K); CBOW uses ``negs[:, 0]``.
    Returns (summed loss, number of predictions).
    """
    V, m = W_out.shape
    C = contexts.shape[1]
    K = negs.shape[2]
    h = np.empty(m, dtype=W_in.dtype)
    neu1e = np.empty(m, dtype=W_in.dtype)
    scores = np.empty(V, dtype=np.float64)
    loss = 0.0
    count = 0
    for t in range(order.shape[0]):
        i = order[t]
        lr = lrs[t]
        center = centers[i]
        n_pred = 1 if cbow else C
        for j in range(n_pred):
            if cbow:
                cnt = 0
                h[:] = 0.0
                for k in range(C):
                    c = contexts[i, k]
                    if c != pad:
                        h += W_in[c]
                        cnt += 1
                if cnt == 0:
                    continue
                h /= cnt
                target = center
            else:
                target = contexts[i, j]
                if target == pad:
                    continue
                h[:] = W_in[center]
            neu1e[:] = 0.0
            if softmax:
                mx = -np.inf
                for v in range(V):
                    scores[v] = np.dot(W_out[v], h)
                    mx = max(mx, scores[v])
                z = 0.0
                for v in range(V):
                    scores[v] = np.exp(scores[v] - mx)
                    z += scores[v]
                loss -= np.log(scores[target] / z)
                for v in range(V):
                    g = ((1.0 if v == target else 0.0) - scores[v] / z) * lr
                    neu1e += g * W_out[v]
                    W_out[v] += g * h
            else:
                for d in range(K + 1):
                    if d == 0:
                        w, label = target, 1.0
                    else:
                        w, label = negs[i, j, d - 1], 0.0
                        if w == target:
                            continue
                    f = np.dot(h, W_out[w])
                    sign = 2.0 * label - 1.0
                    loss += np.log1p(np.exp(-sign * f)) if sign * f > -30.0 else -sign * f
                    g = (label - 1.0 / (1.0 + np.exp(-f))) * lr
                    neu1e += g * W_out[w]
                    W_out[w] += g * h
            count += 1
            if cbow:
                # the full error goes to every non-PAD context word
                for k in range(C):
                    c = contexts[i, k]
                    if c != pad:
                        W_in[c] += neu1e
            else:
                W_in[center] += neu1e
    return loss, count


def _draw_negatives(rng, cdf, shape):
    return np.searchsorted(cdf, rng.random(shape), side="right").astype(np.int64)


def _train(algo, windows, vocab, m, lr0, lr_min, epochs, negatives, seed, init, mode):
    if m < 1:
        raise ValueError("embedding dimension must be >= 1")
    if mode not in ("negative", "softmax"):
        raise ValueError(f"unknown output mode {mode!r}")
    centers, contexts = window_arrays(windows)
    if len(centers) == 0:
        raise EmptyWindowStream("no windows to train on")
    rng = np.random.default_rng(seed)
    dtype = get_dtype()
    V, N = len(vocab), len(centers)
    W_in = init_embeddings(V, m, rng, init).astype(dtype)
    W_out = np.zeros((V, m), dtype=dtype)
    cdf = np.cumsum(noise_distribution(centers, V))
    cdf[-1] = 1.0
    n_neg = 0 if mode == "softmax" else negatives
    total = epochs * N
    losses = []
    for ep in range(epochs):
        order = rng.permutation(N)
        lrs = lr0 - (lr0 - lr_min) * (ep * N + np.arange(N)) / total
        negs = _draw_negatives(rng, cdf, (N, 1 if algo == "cbow" else contexts.shape[1], n_neg))
        loss, n = _sgd_epoch(W_in, W_out, centers, np.ascontiguousarray(contexts), order, negs,
                             lrs, algo == "cbow", mode == "softmax", PAD_ID)
        losses.append(float(loss) / max(n, 1))
    if not np.all(np.isfinite(W_in)):
        raise NonFiniteValue(f"{algo} training diverged")
    manifest = {
        "algorithm": algo, "m": m, "lr0": lr0, "lr_min": lr_min, "epochs": epochs,
        "negatives": negatives, "seed": seed, "init": init, "mode": mode, "windows": int(N),
    }
    return EmbeddingMatrix(W_in, vocab, algo, manifest, losses)


def train_cbow(windows, vocab: Vocabulary, m: int = 100, lr0: float = 0.025, lr_min: float = 0.0001,
               epochs: int = 5, negatives: int = 5, seed: int = 0, init: str = "gaussian",
               mode: str = "negative") -> EmbeddingMatrix:
    """Predict each center word from the mean of its non-PAD context embeddings."""
    return _train("cbow", windows, vocab, m, lr0, lr_min, epochs, negatives, seed, init, mode)


def train_csg(windows, vocab: Vocabulary, m: int = 100, lr0: float = 0.025, lr_min: float = 0.0001,
              epochs: int = 5, negatives: int = 5, seed: int = 0, init: str = "gaussian",
              mode: str = "negative") -> EmbeddingMatrix:
    """Predict every non-PAD context word from the center embedding."""
    return _train("csg", windows, vocab, m, lr0, lr_min, epochs, negatives, seed, init, mode)


def save_embeddings(E: EmbeddingMatrix, path) -> None:
    path = Path(path)
    V, m = E.weights.shape
    lines = [f"{V} {m}"]
    for tok, row in zip(E.vocab.tokens, E.weights):
        lines.append(tok + " " + " ".join(f"{v:.6f}" for v in row))
    path.write_text("\n".join(lines) + "\n")
    meta = {"algorithm": E.algorithm, "manifest": E.manifest, "losses": E.losses}
    Path(str(path) + ".json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")


def load_embeddings(path) -> EmbeddingMatrix:
    path = Path(path)
    rows = path.read_text().splitlines()
    if not rows:
        raise MalformedHeader(f"{path}: empty file")
    head = rows[0].split()
    try:
        V, m = (int(x) for x in head)
    except ValueError:
        raise MalformedHeader(f"{path}: header must be 'V m', got {rows[0]!r}") from None
    body = [r for r in rows[1:] if r.strip()]
    if V < 0 or m < 1 or len(body) != V:
        raise MalformedHeader(f"{path}: header announces {V} rows, found {len(body)}")
    tokens, W = [], np.empty((V, m))
    for i, r in enumerate(body):
        parts = r.split(" ")
        if len(parts) != m + 1:
            raise DimensionMismatch(f"{path}: row {i + 2} has {len(parts) - 1} values, expected {m}")
        tokens.append(parts[0])
        W[i] = [float(x) for x in parts[1:]]
    meta_path = Path(str(path) + ".json")
    meta = json.loads(meta_path.read_text()) if meta_path.exists() else {}
    return EmbeddingMatrix(W, Vocabulary.from_list(tokens), meta.get("algorithm", "cbow"),
                           meta.get("manifest", {}), meta.get("losses", []))
