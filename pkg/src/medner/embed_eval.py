"""Intrinsic (pairwise distances, t-SNE) and extrinsic (classifier sweep) embedding evaluation."""

from __future__ import annotations

import csv
import itertools
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from scipy.spatial.distance import pdist, squareform

from .corpus.types import FIELDS, FieldLabel
from .embeddings import EmbeddingMatrix, Vocabulary
from .errors import InsufficientClassWords, TooFewPoints, TooFewWords, ZeroVector


def _weights(E) -> np.ndarray:
    return np.asarray(E.weights if isinstance(E, EmbeddingMatrix) else E, dtype=np.float64)


@dataclass
class ClassPartition:
    """Token ids per field (a token may sit in several) plus the ``none`` set."""

    fields: dict[FieldLabel, set[int]] = field(default_factory=dict)
    none: set[int] = field(default_factory=set)

    def tokens(self, f: FieldLabel | None) -> list[int]:
        return sorted(self.none if f is None or f is FieldLabel.NONE else self.fields.get(f, set()))


def build_partition(train_docs, vocab: Vocabulary) -> ClassPartition:
    """Field sets from the annotations of ``train_docs``; every other type is ``none``."""
    fields: dict[FieldLabel, set[int]] = {f: set() for f in FIELDS}
    seen: set[int] = set()
    for d in train_docs:
        for toks in d.lines:
            seen.update(vocab.id(t) for t in toks if t in vocab)
        for e in d.entries:
            for a in e.annotations:
                fields[a.label].update(vocab.id(t) for t in d.span_tokens(a.spans) if t in vocab)
    labelled = set().union(*fields.values())
    return ClassPartition(fields, seen - labelled)


def _class_matrix(E, class_tokens) -> np.ndarray:
    ids = sorted(set(int(i) for i in class_tokens))
    if len(ids) < 2:
        raise TooFewWords(f"need at least 2 words, got {len(ids)}")
    return _weights(E)[ids]


def avg_euclid(E, class_tokens) -> float:
    """Mean Euclidean distance over all unordered pairs of the class words."""
    return float(pdist(_class_matrix(E, class_tokens), "euclidean").mean())


def avg_cosine(E, class_tokens) -> float:
    """Mean cosine similarity over all unordered pairs of the class words."""
    X = _class_matrix(E, class_tokens)
    if (np.linalg.norm(X, axis=1) == 0).any():
        raise ZeroVector("cosine similarity undefined for a zero vector")
    return float((1.0 - pdist(X, "cosine")).mean())


def intrinsic_table(E, partition: ClassPartition) -> dict[FieldLabel, tuple[float | None, float | None]]:
    out = {}
    for f in FIELDS:
        ids = partition.tokens(f)
        try:
            out[f] = (avg_euclid(E, ids), avg_cosine(E, ids))
        except (TooFewWords, ZeroVector):
            out[f] = (None, None)
    return out


# -- t-SNE -----------------------------------------------------------------------

@dataclass
class TSNEResult:
    Y: np.ndarray
    P: np.ndarray
    kl_initial: float
    kl_final: float
    kl_history: list[tuple[int, float]]


def _row_affinities(D: np.ndarray, perplexity: float, tol: float = 1e-4, max_iter: int = 200) -> np.ndarray:
    """Conditional p_{j|i} with per-row precision binary-searched to the target entropy."""
    n = D.shape[0]
    target = np.log(perplexity)
    P = np.zeros((n, n))
    for i in range(n):
        d = np.delete(D[i], i)
        d = d - d.min()
        beta, lo, hi = 1.0, 0.0, np.inf
        for _ in range(max_iter):
            p = np.exp(-d * beta)
            s = p.sum()
            H = np.log(s) + beta * (d * p).sum() / s
            if abs(H - target) < tol:
                break
            if H > target:
                lo = beta
                beta = beta * 2.0 if hi == np.inf else (beta + hi) / 2.0
            else:
                hi = beta
                beta = (beta + lo) / 2.0
        P[i, np.arange(n) != i] = p / s
    return P


def joint_probabilities(X: np.ndarray, perplexity: float = 30.0) -> np.ndarray:
    D = squareform(pdist(np.asarray(X, dtype=np.float64), "sqeuclidean"))
    P = _row_affinities(D, perplexity)
    P = (P + P.T) / (2.0 * P.shape[0])
    return np.maximum(P, 1e-300)


def _q_and_num(Y: np.ndarray):
    num = 1.0 / (1.0 + squareform(pdist(Y, "sqeuclidean")))
    np.fill_diagonal(num, 0.0)
    return np.maximum(num / num.sum(), 1e-300), num


def _kl(P: np.ndarray, Q: np.ndarray) -> float:
    mask = ~np.eye(len(P), dtype=bool)
    return float((P[mask] * np.log(P[mask] / Q[mask])).sum())


def tsne_project(X, perplexity: float = 30.0, iters: int = 1000, seed: int = 0, lr: float = 200.0,
                 exaggeration: float = 12.0, exaggeration_iters: int = 250) -> TSNEResult:
    """Exact t-SNE to two dimensions.

    Momentum gradient descent with per-coordinate adaptive gains (+0.2 when
    the update keeps its sign against the gradient, x0.8 otherwise, floor 0.01).
    """
    X = _weights(X) if isinstance(X, EmbeddingMatrix) else np.asarray(X, dtype=np.float64)
    n = len(X)
    if n < 3 * perplexity:
        raise TooFewPoints(f"{n} points is fewer than 3 x perplexity ({3 * perplexity:g})")
    P = joint_probabilities(X, perplexity)
    rng = np.random.default_rng(seed)
    Y = rng.normal(0.0, 1e-4, size=(n, 2))
    velocity = np.zeros_like(Y)
    gains = np.ones_like(Y)
    kl0 = _kl(P, _q_and_num(Y)[0])
    history = [(0, kl0)]
    for it in range(iters):
        ex = exaggeration if it < exaggeration_iters else 1.0
        Q, num = _q_and_num(Y)
        W = (ex * P - Q) * num
        grad = 4.0 * (W.sum(axis=1)[:, None] * Y - W @ Y)
        momentum = 0.5 if it < exaggeration_iters else 0.8
        same = np.sign(grad) == np.sign(velocity)
        gains = np.maximum(np.where(same, gains * 0.8, gains + 0.2), 0.01)
        velocity = momentum * velocity - lr * gains * grad
        Y = Y + velocity
        Y = Y - Y.mean(axis=0)
        if (it + 1) % 50 == 0 or it + 1 == iters:
            history.append((it + 1, _kl(P, _q_and_num(Y)[0])))
    return TSNEResult(Y, P, kl0, history[-1][1], history)


# -- extrinsic sweep ----------------------------------------------------------------

@dataclass(frozen=True)
class SweepPoint:
    algorithm: str  # "CBOW" | "CSG"
    l: int  # noqa: E741
    activation: str  # "tanh" | "sigmoid" | "relu"
    d: float
    r: float

    def to_dict(self) -> dict:
        return asdict(self)


TABLE6_GRID = tuple(
    SweepPoint(a, l, act, d, r)
    for a, l, act, d, r in itertools.product(
        ("CBOW", "CSG"), (1, 2), ("tanh", "sigmoid", "relu"), (0.0, 0.2, 0.4), (0.001, 0.01)
    )
)


def _tie_key(pt: SweepPoint, f1: float):
    return (-f1, pt.l, pt.d, pt.r, 0 if pt.algorithm == "CBOW" else 1)


@dataclass
class SweepResult:
    best: dict[FieldLabel, tuple[SweepPoint, float]]
    scores: dict[FieldLabel, list[tuple[SweepPoint, float]]]


def sample_words(partition: ClassPartition, f: FieldLabel, n: int, p: float, rng: np.random.Generator):
    """``round(p n)`` positives from the field set, the rest from ``none``, with replacement."""
    pos, neg = partition.tokens(f), partition.tokens(None)
    n_pos = int(round(p * n))
    if n_pos == 0 or not pos:
        raise InsufficientClassWords(f"no positive words for {FieldLabel(f).title} (p={p}, n={n})")
    if n - n_pos > 0 and not neg:
        raise InsufficientClassWords("no negative words in the partition")
    ids = np.concatenate([rng.choice(pos, size=n_pos), rng.choice(neg, size=n - n_pos)]) if n > n_pos else \
        rng.choice(pos, size=n_pos)
    y = np.concatenate([np.ones(n_pos, dtype=np.int64), np.zeros(n - n_pos, dtype=np.int64)])
    order = rng.permutation(n)
    return ids[order].astype(np.int64), y[order]


def _train_point(E, vocab, f, pt, x_tr, y_tr, x_te, y_te, seed, h, e, b):
    from .ner.config import NerConfig
    from .ner.models import FieldFFN
    from .ner.train import _fit
    from .numkit import ops

    m = _weights(E).shape[1]
    cfg = NerConfig.defaults("cf-ffn", m=m, l=pt.l, h=list(h[: pt.l]), d=pt.d, r=pt.r, e=e, b=b,
                             decay=0.0, activation=pt.activation)
    rng = np.random.default_rng(seed)
    model = FieldFFN(cfg, _weights(E), vocab, rng, fields=(f,))
    # the sweep uses the raw rows, including <unk>
    model.embeds[f].table = _weights(E).astype(model.embeds[f].table.dtype)
    X_tr, X_te = x_tr[:, None], x_te[:, None]

    def loss_fn(idx):
        return ops.cross_entropy(model.logits(f, X_tr[idx], train=True, rng=rng), y_tr[idx])

    _fit(model.stores[f], loss_fn, len(X_tr), cfg, rng)
    pred = model.logits(f, X_te).data.argmax(axis=1)
    tp = int(((pred == 1) & (y_te == 1)).sum())
    fp = int(((pred == 1) & (y_te == 0)).sum())
    fn = int(((pred == 0) & (y_te == 1)).sum())
    return 2 * tp / (2 * tp + fp + fn) if tp else 0.0


def extrinsic_sweep(E_cbow, E_csg, partition: ClassPartition, sweep=TABLE6_GRID, n_train: int = 10000,
                    n_test: int = 1000, p: float = 0.1, seed: int = 0, vocab: Vocabulary | None = None,
                    fields=None, h=(100, 100), e: int = 5, b: int = 50) -> SweepResult:
    """Train a context-free binary FFN per (field, sweep point); keep the best point per field.

    Word samples depend only on (seed, field), so every point sees the same
    data; model initialisation depends on (seed, field, point index). Ties
    prefer fewer layers, then lower dropout, then lower learning rate, then CBOW.
    """
    if p <= 0.0:
        raise InsufficientClassWords("positive proportion must be > 0")
    fields = [FieldLabel(f) for f in (fields or [f for f in FIELDS if partition.fields.get(f)])]
    if not fields:
        raise InsufficientClassWords("partition has no labelled words")
    tables = {"CBOW": E_cbow, "CSG": E_csg}
    if vocab is None:
        vocab = next(x.vocab for x in (E_cbow, E_csg) if isinstance(x, EmbeddingMatrix))
    scores: dict[FieldLabel, list[tuple[SweepPoint, float]]] = {}
    best = {}
    for f in fields:
        rng = np.random.default_rng([seed, int(f)])
        x_tr, y_tr = sample_words(partition, f, n_train, p, rng)
        x_te, y_te = sample_words(partition, f, n_test, p, rng)
        rows = []
        for k, pt in enumerate(sweep):
            score = _train_point(tables[pt.algorithm], vocab, f, pt, x_tr, y_tr, x_te, y_te,
                                 [seed, int(f), k], h, e, b)
            rows.append((pt, score))
        scores[f] = rows
        best[f] = min(rows, key=lambda r: _tie_key(*r))
    return SweepResult(best, scores)


# -- reports ------------------------------------------------------------------------

def _fmt(v) -> str:
    return "" if v is None else f"{v:.4f}"


def write_table4(tables: dict[str, dict], path) -> None:
    """``tables`` maps algorithm name -> intrinsic_table output."""
    algos = list(tables)
    with open(Path(path), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["field", *(f"{a}_{k}" for a in algos for k in ("AED", "ACS"))])
        for f in FIELDS:
            w.writerow([f.title, *(_fmt(v) for a in algos for v in tables[a][f])])


def write_table6(result: SweepResult, path) -> None:
    with open(Path(path), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["field", "algorithm", "l", "activation", "d", "r", "f1"])
        for f, (pt, score) in result.best.items():
            w.writerow([f.title, pt.algorithm, pt.l, pt.activation, pt.d, pt.r, f"{score:.4f}"])


def write_tsne_csv(tokens, fields, Y, path) -> None:
    with open(Path(path), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["token", "field", "x", "y"])
        for t, f, (x, y) in zip(tokens, fields, Y):
            w.writerow([t, f, f"{x:.6f}", f"{y:.6f}"])
