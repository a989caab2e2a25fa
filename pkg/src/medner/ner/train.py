"""Training loops, span prediction and checkpoints for the term classifiers."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..corpus.types import FIELDS, FieldLabel, TokenSpan
from ..embeddings import Vocabulary
from ..errors import DataError, NoPositiveInstances
from ..numkit import ParamStore, Tape, adam_step, lr_schedule, ops
from ..numkit.checkpoint import read_manifest, read_params, save_params
from .config import NerConfig
from .data import corpus_windows, doc_windows, runs_to_spans
from .models import RNNClassifier, build_model


@dataclass
class TokenPrediction:
    doc_id: str
    line: int
    index: int
    label: FieldLabel
    scores: list[float]


def sample_binary(member: np.ndarray, f: FieldLabel, p: float, rng: np.random.Generator) -> np.ndarray:
    """Indices of every positive token plus enough negatives for a positive share of ``p``."""
    pos = np.flatnonzero(member[:, int(f)])
    neg = np.flatnonzero(~member[:, int(f)])
    n_neg = min(len(neg), int(round(len(pos) * (1.0 - p) / p)))
    chosen = rng.choice(neg, size=n_neg, replace=False) if n_neg else np.zeros(0, dtype=np.int64)
    return np.sort(np.concatenate([pos, chosen]))


def _fit(store: ParamStore, loss_fn, n: int, cfg: NerConfig, rng: np.random.Generator) -> list[float]:
    """Mini-batch Adam over ``n`` instances; returns the mean batch loss per epoch."""
    curve = []
    for _ in range(cfg.e):
        order = rng.permutation(n)
        losses = []
        for start in range(0, n, cfg.b):
            idx = order[start:start + cfg.b]
            store.zero_grad()
            with Tape() as tape:
                loss = loss_fn(idx)
                tape.backward(loss)
            adam_step(store, store.grads(), lr_schedule(cfg.r, cfg.decay, store.step))
            losses.append(float(loss.data))
        curve.append(float(np.mean(losses)) if losses else 0.0)
    return curve


def train_ner(model, docs, seed: int = 0) -> tuple[object, list[float]]:
    """Train in place; returns (model, per-epoch loss curve).

    FFNs: for every field, all positive tokens plus sampled negatives at
    positive share ``p``; the curve is the mean over fields. RNN: every
    token of the documents with its 7-way code.
    """
    docs = list(docs)
    cfg = model.cfg
    ids, codes, member = corpus_windows(docs, model.vocab, cfg.w)
    if not member[:, 1:].any():
        raise NoPositiveInstances("no annotated tokens in the training documents")
    if isinstance(model, RNNClassifier):
        rng = np.random.default_rng([seed, 0])

        def loss_fn(idx):
            return ops.cross_entropy(model.logits(ids[idx], train=True, rng=rng), codes[idx])

        return model, _fit(model.store, loss_fn, len(ids), cfg, rng)

    curves = []
    for f in model.fields:
        rng = np.random.default_rng([seed, int(f)])
        sel = sample_binary(member, f, cfg.p, rng)
        if not member[sel, int(f)].any():
            model.trained[f] = False
            continue
        model.trained[f] = True
        x_ids, y = ids[sel], member[sel, int(f)].astype(np.int64)

        def loss_fn(idx, f=f, x_ids=x_ids, y=y, rng=rng):
            return ops.cross_entropy(model.logits(f, x_ids[idx], train=True, rng=rng), y[idx])

        curves.append(_fit(model.stores[f], loss_fn, len(sel), cfg, rng))
    return model, [float(v) for v in np.mean(curves, axis=0)] if curves else []


def _binary_labels(proba: np.ndarray, f: FieldLabel) -> np.ndarray:
    return np.where(proba[:, int(f)] > 0.5, int(f), 0)


def predict_tokens(model, doc) -> list[TokenPrediction]:
    """Per-token decision. Binary models report the first field voting positive."""
    win = doc_windows(doc, model.vocab, model.cfg.w)
    if isinstance(model, RNNClassifier):
        proba = model.proba(win.ids)
        labels = proba.argmax(axis=1)  # first maximum, so None wins ties
    else:
        proba = model.positive_proba(win.ids)
        pos = proba[:, 1:] > 0.5
        labels = np.where(pos.any(axis=1), pos.argmax(axis=1) + 1, 0)
    return [
        TokenPrediction(doc.doc_id, li, i, FieldLabel(int(lab)), [float(s) for s in row])
        for (li, i), lab, row in zip(win.positions, labels, proba)
    ]


def predict_spans(model, doc) -> list[tuple[FieldLabel, TokenSpan]]:
    """Maximal same-label runs within a sentence; per field for binary models."""
    win = doc_windows(doc, model.vocab, model.cfg.w)
    if isinstance(model, RNNClassifier):
        return runs_to_spans(model.proba(win.ids).argmax(axis=1), win.positions, win.sentence)
    proba = model.positive_proba(win.ids)
    out = []
    for f in FIELDS:
        out.extend(runs_to_spans(_binary_labels(proba, f), win.positions, win.sentence))
    return out


def predict_corpus(model, docs) -> dict[str, list[tuple[FieldLabel, TokenSpan]]]:
    return {d.doc_id: predict_spans(model, d) for d in docs}


# -- checkpoints -----------------------------------------------------------------

def _flat_store(model) -> ParamStore:
    flat = ParamStore()
    if isinstance(model, RNNClassifier):
        for k, t in model.store.items():
            flat.add(k, t.data)
        if not model.cfg.finetune:
            flat.add("emb", model.embed.weights)
        flat.step = model.store.step
        return flat
    for f in model.fields:
        for k, t in model.stores[f].items():
            flat.add(f"{int(f)}/{k}", t.data)
        if not model.cfg.finetune:
            flat.add(f"{int(f)}/emb", model.embeds[f].weights)
    return flat


def save_model(model, path, seed: int | None = None) -> None:
    meta = {
        "config": model.cfg.to_dict(),
        "vocab": model.vocab.to_list(),
        "trained": {int(f): v for f, v in getattr(model, "trained", {}).items()},
    }
    save_params(path, _flat_store(model), seed=seed, meta=meta)


def load_model(path):
    manifest = read_manifest(path)
    meta = manifest.get("meta", {})
    try:
        cfg = NerConfig.from_dict(meta["config"])
        vocab = Vocabulary.from_list(meta["vocab"])
    except KeyError as exc:
        raise DataError(f"{path}: not a term-classifier checkpoint") from exc
    values = read_params(path)
    first = "emb" if cfg.arch == "rnn" else f"{int(FIELDS[0])}/emb"
    model = build_model(cfg, values[first], vocab)
    if isinstance(model, RNNClassifier):
        model.store.load({k: values[k] for k in model.store.params})
        if not cfg.finetune:
            model.embed.table = values["emb"].astype(model.embed.table.dtype)
        return model
    for f in model.fields:
        model.stores[f].load({k: values[f"{int(f)}/{k}"] for k in model.stores[f].params})
        if not cfg.finetune:
            model.embeds[f].table = values[f"{int(f)}/emb"].astype(model.embeds[f].table.dtype)
    for k, v in meta.get("trained", {}).items():
        model.trained[FieldLabel(int(k))] = v
    return model
