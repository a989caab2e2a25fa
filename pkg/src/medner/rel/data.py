"""Relation instances: a line window around each medication with per-token codes."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, replace

import numpy as np

from ..corpus.types import RELATED_FIELDS, AnnotatedDocument, Entry, FieldLabel, TokenSpan
from ..embeddings import EmbeddingMatrix, Vocabulary
from ..errors import ConfigInvalid, EmptyTerm

ARCHS = ("seq2seq", "encdec")
ATTENTIONS = ("bahdanau", "luong")


@dataclass
class RelConfig:
    """Hyper-parameters of a relation model.

    ``hidden`` is the GRU size per direction (tagger) or the LSTM encoder
    size per direction (encoder-decoder, whose decoder has ``2 * hidden``
    units). ``lines`` is the half-window in lines around the medication.
    """

    arch: str = "encdec"
    attention: str = "bahdanau"
    m: int = 100
    hidden: int = 128
    lines: int = 2
    e: int = 100
    b: int = 50
    r: float = 0.001
    decay: float = 1e-5
    clip: float | None = 5.0
    max_decode: int = 64

    @classmethod
    def defaults(cls, arch: str, **overrides) -> "RelConfig":
        if arch == "seq2seq":
            cfg = cls(arch=arch, hidden=100, decay=0.0, clip=None)
        elif arch == "encdec":
            cfg = cls(arch=arch)
        else:
            raise ConfigInvalid(f"unknown relation architecture {arch!r}; expected one of {ARCHS}")
        cfg = replace(cfg, **overrides)
        cfg.validate()
        return cfg

    def validate(self) -> None:
        if self.arch not in ARCHS:
            raise ConfigInvalid(f"unknown relation architecture {self.arch!r}")
        if self.attention not in ATTENTIONS:
            raise ConfigInvalid(f"unknown attention {self.attention!r}")
        if min(self.m, self.hidden, self.b, self.max_decode) < 1 or self.e < 0 or self.lines < 0:
            raise ConfigInvalid("sizes must be positive")
        if self.r < 0 or self.decay < 0 or (self.clip is not None and self.clip <= 0):
            raise ConfigInvalid("learning rate, decay and clip must be non-negative")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "RelConfig":
        known = set(cls.__dataclass_fields__)
        extra = set(data) - known
        if extra:
            raise ConfigInvalid(f"unknown relation config keys: {sorted(extra)}")
        cfg = cls(**data)
        cfg.validate()
        return cfg


def bow_repr(term_tokens, E: EmbeddingMatrix | np.ndarray, vocab: Vocabulary | None = None) -> np.ndarray:
    """Sum of the term's embedding rows followed by the medication code 1."""
    W = E.weights if isinstance(E, EmbeddingMatrix) else np.asarray(E)
    vocab = vocab if vocab is not None else E.vocab
    toks = list(term_tokens)
    if not toks:
        raise EmptyTerm("cannot represent an empty term")
    s = np.sum(W[vocab.ids(toks)], axis=0, dtype=np.float64)
    return np.concatenate([s, [float(FieldLabel.MEDICATION)]])


@dataclass
class RelInstance:
    """One medication entry seen through its line window.

    ``codes`` are the known field codes fed as inputs, ``tags`` the gold
    per-token outputs for the tagger (this entry's fields only), ``target``
    the gold related tokens for the decoder in generation order.
    """

    doc_id: str
    entry_index: int
    tokens: list[str]
    positions: list[tuple[int, int]]
    codes: np.ndarray
    tags: np.ndarray
    term: list[str]
    target: list[str]
    medication_span: TokenSpan
    entry: Entry | None = field(default=None, repr=False)

    @property
    def key(self) -> tuple[str, int]:
        return (self.doc_id, self.entry_index)


def gold_sequence(entry: Entry, doc: AnnotatedDocument) -> list[str]:
    """Related tokens in field order, then document order within a field."""
    out = []
    for f in RELATED_FIELDS:
        anns = sorted((a for a in entry.related if a.label == f), key=lambda a: a.positions()[0])
        for a in anns:
            out.extend(doc.span_tokens(a.spans))
    return out


def doc_codes(doc: AnnotatedDocument) -> dict[tuple[int, int], int]:
    """Known field code per position from the document's annotations (lowest code wins)."""
    out: dict[tuple[int, int], int] = {}
    for e in doc.entries:
        for a in e.annotations:
            for pos in a.positions():
                out[pos] = min(out.get(pos, 99), int(a.label))
    return out


def make_instances(docs, half_lines: int = 2, codes: dict[str, dict] | None = None) -> list[RelInstance]:
    """One instance per entry; window = the medication's first line +/- ``half_lines``.

    ``codes`` maps doc id -> {position: code}; when omitted the gold
    annotations supply the known codes (oracle mode).
    """
    out = []
    for doc in docs:
        known = codes[doc.doc_id] if codes is not None else doc_codes(doc)
        for k, e in enumerate(doc.entries):
            center = e.medication.spans[0].line_index
            lo, hi = max(1, center - half_lines), min(len(doc.lines), center + half_lines)
            positions = [(li, i) for li in range(lo, hi + 1) for i in range(len(doc.lines[li - 1]))]
            own = {}
            for a in e.annotations:
                for pos in a.positions():
                    own[pos] = min(own.get(pos, 99), int(a.label))
            out.append(RelInstance(
                doc_id=doc.doc_id,
                entry_index=k,
                tokens=[doc.token(li, i) for li, i in positions],
                positions=positions,
                codes=np.array([known.get(p, 0) for p in positions], dtype=np.int64),
                tags=np.array([own.get(p, 0) for p in positions], dtype=np.int64),
                term=doc.span_tokens(e.medication.spans),
                target=gold_sequence(e, doc),
                medication_span=e.medication.spans[0],
                entry=e,
            ))
    return out


@dataclass
class Batch:
    ids: np.ndarray  # (B, T)
    codes: np.ndarray  # (B, T)
    mask: np.ndarray  # (B, T) 1 for real tokens
    tags: np.ndarray  # (B, T)
    term_ids: list[list[int]]
    out_ids: np.ndarray  # (B, L) gold decoder outputs ending in <end-of-output>
    out_mask: np.ndarray  # (B, L)


def make_batch(instances, vocab: Vocabulary, eoo_id: int) -> Batch:
    B = len(instances)
    T = max(len(x.tokens) for x in instances)
    L = max(len(x.target) for x in instances) + 1
    ids = np.zeros((B, T), dtype=np.int64)
    codes = np.zeros((B, T), dtype=np.int64)
    tags = np.zeros((B, T), dtype=np.int64)
    mask = np.zeros((B, T))
    out_ids = np.zeros((B, L), dtype=np.int64)
    out_mask = np.zeros((B, L))
    for j, x in enumerate(instances):
        n = len(x.tokens)
        ids[j, :n] = vocab.ids(x.tokens)
        codes[j, :n] = x.codes
        tags[j, :n] = x.tags
        mask[j, :n] = 1.0
        seq = [*vocab.ids(x.target), eoo_id]
        out_ids[j, :len(seq)] = seq
        out_mask[j, :len(seq)] = 1.0
    return Batch(ids, codes, mask, tags, [vocab.ids(x.term) for x in instances], out_ids, out_mask)
