"""Training, extraction and checkpoints for the relation models."""

from __future__ import annotations

import numpy as np

from ..corpus.types import RELATED_FIELDS, FieldLabel
from ..embeddings import EOO_ID, Vocabulary
from ..errors import DataError
from ..numkit import Tape, adam_step, clip_gradients, lr_schedule
from ..numkit.checkpoint import read_manifest, read_params, save_params
from .data import RelConfig, RelInstance, make_batch
from .models import Seq2SeqTagger, build_rel_model

_RELATED_CODES = {int(f) for f in RELATED_FIELDS}


def _bucketed_batches(lengths: np.ndarray, size: int, rng: np.random.Generator, pool: int = 20):
    """Shuffled batches of similar-length windows to limit padding.

    Instances are shuffled, cut into pools of ``pool`` batches, sorted by
    length inside each pool, batched, and the batch order is shuffled.
    """
    order = rng.permutation(len(lengths))
    batches = []
    for start in range(0, len(order), size * pool):
        chunk = order[start:start + size * pool]
        chunk = chunk[np.argsort(lengths[chunk], kind="stable")]
        batches += [chunk[i:i + size] for i in range(0, len(chunk), size)]
    return [batches[i] for i in rng.permutation(len(batches))]


def train_rel(model, instances: list[RelInstance], seed: int = 0) -> tuple[object, list[float]]:
    """Mini-batch Adam with the configured power decay and element-wise clipping.

    Returns (model, mean batch loss per epoch).
    """
    instances = list(instances)
    if not instances:
        raise DataError("no relation instances to train on")
    cfg = model.cfg
    rng = np.random.default_rng([seed, 1])
    store = model.store
    curve = []
    lengths = np.array([len(x.tokens) for x in instances])
    for _ in range(cfg.e):
        losses = []
        for idx in _bucketed_batches(lengths, cfg.b, rng):
            batch = make_batch([instances[i] for i in idx], model.vocab, EOO_ID)
            store.zero_grad()
            with Tape() as tape:
                loss = model.loss(batch)
                tape.backward(loss)
            grads = store.grads()
            if cfg.clip is not None:
                grads = clip_gradients(grads, cfg.clip)
            adam_step(store, grads, lr_schedule(cfg.r, cfg.decay, store.step))
            losses.append(float(loss.data))
        curve.append(float(np.mean(losses)))
    return model, curve


def _batches(instances, size: int):
    for start in range(0, len(instances), size):
        yield instances[start:start + size]


def extract_relations(model, instances: list[RelInstance], batch_size: int = 64) -> dict[tuple[str, int], list[str]]:
    """Related tokens per entry key.

    The tagger returns window tokens tagged with a related field, in window
    order; the encoder-decoder returns its greedy output.
    """
    out = {}
    for chunk in _batches(list(instances), batch_size):
        batch = make_batch(chunk, model.vocab, EOO_ID)
        if isinstance(model, Seq2SeqTagger):
            tags = model.logits(batch).data.argmax(axis=-1)
            for j, x in enumerate(chunk):
                out[x.key] = [t for t, g in zip(x.tokens, tags[j]) if int(g) in _RELATED_CODES]
        else:
            ids, _ = model.greedy(batch)
            for j, x in enumerate(chunk):
                out[x.key] = [model.vocab.token(i) for i in ids[j]]
    return out


def predict_tags(model: Seq2SeqTagger, instances: list[RelInstance], batch_size: int = 64) -> dict:
    out = {}
    for chunk in _batches(list(instances), batch_size):
        tags = model.logits(make_batch(chunk, model.vocab, EOO_ID)).data.argmax(axis=-1)
        for j, x in enumerate(chunk):
            out[x.key] = tags[j, :len(x.tokens)].copy()
    return out


def save_rel_model(model, path, seed: int | None = None, lookup: dict | None = None) -> None:
    """Checkpoint with config, vocabulary and the optional token -> field lookup."""
    from ..numkit import ParamStore

    flat = ParamStore()
    for k, t in model.store.items():
        flat.add(k, t.data)
    flat.add("emb", model.table)
    flat.step = model.store.step
    lookup = lookup if lookup is not None else getattr(model, "lookup", {})
    meta = {"config": model.cfg.to_dict(), "vocab": model.vocab.to_list(), "kind": "relation",
            "lookup": {t: int(f) for t, f in sorted(lookup.items())}}
    save_params(path, flat, seed=seed, meta=meta)


def load_rel_model(path):
    meta = read_manifest(path).get("meta", {})
    if meta.get("kind") != "relation":
        raise DataError(f"{path}: not a relation checkpoint")
    cfg = RelConfig.from_dict(meta["config"])
    vocab = Vocabulary.from_list(meta["vocab"])
    values = read_params(path)
    model = build_rel_model(cfg, values["emb"], vocab)
    model.table = values["emb"].astype(model.table.dtype)
    model.store.load({k: values[k] for k in model.store.params})
    model.lookup = {t: FieldLabel(f) for t, f in meta.get("lookup", {}).items()}
    return model

