"""Document and label metrics of annotated corpora, plus CSV/JSON writers.

Report schema
-------------
MetricsReport JSON: flat object with the keys of ``MetricsReport.to_dict``.
CSV: header ``metric,value`` then one row per key.
LabelReport JSON: ``{"entries": int, "proportions": {FieldName: percent}}``;
CSV: header ``field,percent``.
"""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

from .types import FIELDS


def _ratio(a: float, b: float) -> float:
    return a / b if b else 0.0


@dataclass
class MetricsReport:
    documents: int = 0
    entries: int = 0
    phrases: int = 0
    tokens: int = 0
    mean_entries_per_document: float = 0.0
    mean_phrases_per_document: float = 0.0
    mean_tokens_per_document: float = 0.0
    mean_phrases_per_entry: float = 0.0
    mean_tokens_per_entry: float = 0.0
    mean_tokens_per_phrase: float = 0.0
    target_vocabulary: int = 0
    oov_tokens: int | None = None

    def to_dict(self) -> dict:
        return asdict(self)


def corpus_metrics(docs, vocab=None) -> MetricsReport:
    """Counts over annotated docs; a phrase is one annotation, a token one annotated token."""
    docs = list(docs)
    entries = phrases = tokens = 0
    target_types: set[str] = set()
    for d in docs:
        for e in d.entries:
            entries += 1
            for a in e.annotations:
                phrases += 1
                tokens += a.n_tokens
                target_types.update(d.span_tokens(a.spans))
    rep = MetricsReport(
        documents=len(docs),
        entries=entries,
        phrases=phrases,
        tokens=tokens,
        mean_entries_per_document=_ratio(entries, len(docs)),
        mean_phrases_per_document=_ratio(phrases, len(docs)),
        mean_tokens_per_document=_ratio(tokens, len(docs)),
        mean_phrases_per_entry=_ratio(phrases, entries),
        mean_tokens_per_entry=_ratio(tokens, entries),
        mean_tokens_per_phrase=_ratio(tokens, phrases),
        target_vocabulary=len(target_types),
    )
    if vocab is not None:
        from ..preprocess import oov_count

        rep.oov_tokens = oov_count(docs, vocab)
    return rep


@dataclass
class LabelReport:
    entries: int = 0
    proportions: dict[str, float] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"entries": self.entries, "proportions": dict(self.proportions)}


def label_metrics(docs) -> LabelReport:
    """Percentage of entries holding at least one annotation of each field."""
    counts = {f: 0 for f in FIELDS}
    n = 0
    for d in docs:
        for e in d.entries:
            n += 1
            for f in e.fields():
                counts[f] += 1
    return LabelReport(n, {f.title: 100.0 * _ratio(counts[f], n) for f in FIELDS})


def write_metrics(report: MetricsReport, csv_path=None, json_path=None) -> None:
    data = report.to_dict()
    if json_path:
        Path(json_path).write_text(json.dumps(data, indent=2) + "\n")
    if csv_path:
        with open(csv_path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["metric", "value"])
            for k, v in data.items():
                w.writerow([k, "" if v is None else (f"{v:.4f}" if isinstance(v, float) else v)])


def write_labels(report: LabelReport, csv_path=None, json_path=None) -> None:
    if json_path:
        Path(json_path).write_text(json.dumps(report.to_dict(), indent=2) + "\n")
    if csv_path:
        with open(csv_path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["field", "percent"])
            for k, v in report.proportions.items():
                w.writerow([k, f"{v:.2f}"])

