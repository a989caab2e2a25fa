"""Precision, recall and F1 for term and relation extraction.

Token level compares (position, field) pairs; phrase level compares
(field, TokenSpan) pairs exactly. Relation scoring compares per-entry
multisets of related tokens, attributing unmatched generated tokens to a
field through a token -> field lookup built from training annotations.
"""

from __future__ import annotations

import csv
from collections import Counter
from collections.abc import Iterable, Mapping
from dataclasses import dataclass, field
from pathlib import Path

from .corpus.types import FIELDS, RELATED_FIELDS, AnnotatedDocument, Entry, FieldLabel, TokenSpan
from .errors import DocumentMismatch, EntryMismatch


@dataclass
class Counts:
    tp: int = 0
    fp: int = 0
    fn: int = 0

    def __iadd__(self, other: "Counts") -> "Counts":
        self.tp += other.tp
        self.fp += other.fp
        self.fn += other.fn
        return self


def _blank() -> dict[FieldLabel, Counts]:
    return {f: Counts() for f in FIELDS}


@dataclass
class ConfusionCounts:
    token: dict[FieldLabel, Counts] = field(default_factory=_blank)
    phrase: dict[FieldLabel, Counts] = field(default_factory=_blank)

    def __iadd__(self, other: "ConfusionCounts") -> "ConfusionCounts":
        for f in FIELDS:
            self.token[f] += other.token[f]
            self.phrase[f] += other.phrase[f]
        return self


@dataclass(frozen=True)
class PRF:
    precision: float
    recall: float
    f1: float


def prf(c: Counts) -> PRF:
    p = c.tp / (c.tp + c.fp) if c.tp + c.fp else 0.0
    r = c.tp / (c.tp + c.fn) if c.tp + c.fn else 0.0
    f = 2 * p * r / (p + r) if p + r else 0.0
    return PRF(p, r, f)


def f1(counts: Mapping[FieldLabel, Counts] | ConfusionCounts, level: str = "token") -> dict:
    """Per-field PRF plus ``"micro"`` computed from the summed counts."""
    if isinstance(counts, ConfusionCounts):
        counts = counts.token if level == "token" else counts.phrase
    out: dict = {f: prf(c) for f, c in counts.items()}
    total = Counts()
    for c in counts.values():
        total += c
    out["micro"] = prf(total)
    return out


def _check_span(doc: AnnotatedDocument, span: TokenSpan) -> None:
    if span.line_index > len(doc.lines) or span.token_end >= len(doc.lines[span.line_index - 1]):
        raise DocumentMismatch(f"{doc.doc_id}: predicted span {span} outside the document")


def score_tokens(gold: AnnotatedDocument, pred: Iterable[tuple[FieldLabel, TokenSpan]]) -> ConfusionCounts:
    pred = list(pred)
    for _, s in pred:
        _check_span(gold, s)
    out = ConfusionCounts()
    gold_pos = {f: set() for f in FIELDS}
    gold_spans = {f: set() for f in FIELDS}
    for e in gold.entries:
        for a in e.annotations:
            gold_pos[a.label].update(a.positions())
            gold_spans[a.label].update(a.spans)
    pred_pos = {f: set() for f in FIELDS}
    pred_spans = {f: set() for f in FIELDS}
    for lab, s in pred:
        lab = FieldLabel(lab)
        if lab is FieldLabel.NONE:
            continue
        pred_pos[lab].update(s.positions())
        pred_spans[lab].add(s)
    for f in FIELDS:
        for level, g, p in (("token", gold_pos[f], pred_pos[f]), ("phrase", gold_spans[f], pred_spans[f])):
            tp = len(g & p)
            getattr(out, level)[f] = Counts(tp, len(p) - tp, len(g) - tp)
    return out


def score_corpus(gold_docs: Iterable[AnnotatedDocument], preds: Mapping[str, list]) -> ConfusionCounts:
    """Sum of per-document counts; documents without predictions count as empty."""
    gold_docs = list(gold_docs)
    ids = {d.doc_id for d in gold_docs}
    extra = set(preds) - ids
    if extra:
        raise DocumentMismatch(f"predictions for unknown documents: {sorted(extra)[:3]}")
    total = ConfusionCounts()
    for d in gold_docs:
        total += score_tokens(d, preds.get(d.doc_id, []))
    return total


# -- relations ---------------------------------------------------------------

def gold_related_tokens(entry: Entry) -> dict[FieldLabel, list[str]]:
    out: dict[FieldLabel, list[str]] = {f: [] for f in RELATED_FIELDS}
    for a in entry.related:
        out[a.label].extend(a.surface.split())
    return out


def build_lookup(docs: Iterable[AnnotatedDocument]) -> dict[str, FieldLabel]:
    """Token type -> its most frequent related field in the training annotations.

    Ties go to the field that comes first in annotation order.
    """
    counts: dict[str, Counter] = {}
    for d in docs:
        for e in d.entries:
            for a in e.related:
                for t in a.surface.split():
                    counts.setdefault(t, Counter())[a.label] += 1
    return {t: max(sorted(c), key=lambda f: c[f]) for t, c in counts.items()}


def attribute_fields(
    generated: Iterable[str],
    gold: Mapping[FieldLabel, list[str]],
    lookup: Mapping[str, FieldLabel],
) -> dict[FieldLabel | None, list[str]]:
    """Assign each generated token to a field.

    A token still available in some gold field's multiset takes that field
    (first in field order); otherwise it takes ``lookup[token]`` or None.
    """
    remaining = {f: Counter(gold.get(f, [])) for f in RELATED_FIELDS}
    out: dict[FieldLabel | None, list[str]] = {f: [] for f in RELATED_FIELDS}
    out[None] = []
    for t in generated:
        for f in RELATED_FIELDS:
            if remaining[f][t] > 0:
                remaining[f][t] -= 1
                out[f].append(t)
                break
        else:
            f = lookup.get(t)
            out[f if f in RELATED_FIELDS else None].append(t)
    return out


def score_relations(
    gold_entries: Mapping[tuple, Entry],
    extracted: Mapping[tuple, list[str]],
    lookup: Mapping[str, FieldLabel],
) -> dict[FieldLabel, Counts]:
    """Per-field counts over entries keyed identically in both mappings."""
    if set(gold_entries) != set(extracted):
        missing = set(gold_entries) ^ set(extracted)
        raise EntryMismatch(f"entry keys differ: {sorted(missing, key=str)[:3]}")
    out = {f: Counts() for f in RELATED_FIELDS}
    for key in sorted(gold_entries, key=str):
        gold = gold_related_tokens(gold_entries[key])
        got = attribute_fields(extracted[key], gold, lookup)
        for f in RELATED_FIELDS:
            g, p = Counter(gold[f]), Counter(got[f])
            tp = sum((g & p).values())
            out[f] += Counts(tp, sum(p.values()) - tp, sum(g.values()) - tp)
    return out


def write_table7(rows: Mapping[str, ConfusionCounts], path) -> None:
    """One row per (model, field) plus a micro row per model."""
    with open(Path(path), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["model", "field", "precision", "recall", "f1", "phrase_precision", "phrase_recall", "phrase_f1"])
        for model, counts in rows.items():
            tok, phr = f1(counts, "token"), f1(counts, "phrase")
            for key in [*FIELDS, "micro"]:
                name = key.title if isinstance(key, FieldLabel) else key
                t, p = tok[key], phr[key]
                w.writerow([model, name, *(f"{v:.4f}" for v in (t.precision, t.recall, t.f1, p.precision, p.recall, p.f1))])


def write_relation_table(rows: Mapping[str, Mapping[FieldLabel, Counts]], path) -> None:
    with open(Path(path), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["model", "field", "precision", "recall", "f1", "tp", "fp", "fn"])
        for model, counts in rows.items():
            scores = f1(counts)
            for key in [*RELATED_FIELDS, "micro"]:
                name = key.title if isinstance(key, FieldLabel) else key
                s = scores[key]
                c = counts[key] if isinstance(key, FieldLabel) else None
                tail = [c.tp, c.fp, c.fn] if c else ["", "", ""]
                w.writerow([model, name, f"{s.precision:.4f}", f"{s.recall:.4f}", f"{s.f1:.4f}", *tail])
