"""Reader and writer for the medication annotation format.

A document is plain text, one line per row, whitespace-tokenised. Its
annotation file holds one entry per line::

    m="aspirin" 3:0 3:0||do="81 mg" 3:1 3:2||mo="nm"||f="daily" 3:3 3:3||du="nm"||r="nm"

Offsets are ``line:token`` with 1-based lines, 0-based tokens and inclusive
ends. A field may list several ``start end`` pairs (discontiguous span).
``"nm"`` marks a field that is not mentioned. An ``ln="..."`` list/narrative
marker, as found in the original challenge files, is accepted and ignored.

On disk a corpus directory holds ``<doc_id>.txt`` plus an optional
``<doc_id>.ann``; preprocessed corpora add ``<doc_id>.sents.json``.
"""

from __future__ import annotations

import json
import re
from pathlib import Path

from ..errors import MalformedAnnotation, SpanOutOfBounds
from .types import FIELDS, AnnotatedDocument, Annotation, Entry, FieldLabel, TokenSpan

_FIELD_RE = re.compile(r'^\s*([a-z]+)="(.*)"\s*(.*?)\s*$')
_OFFSET_RE = re.compile(r"^(\d+):(\d+)$")
_IGNORED_KEYS = {"ln"}


def split_lines(doc_text: str) -> list[list[str]]:
    rows = doc_text.split("\n")
    if rows and rows[-1] == "":
        rows.pop()
    return [row.split() for row in rows]


def _resolve(lines, start: tuple[int, int], end: tuple[int, int], line_no: int) -> list[TokenSpan]:
    (l1, t1), (l2, t2) = start, end
    if (l2, t2) < (l1, t1):
        raise MalformedAnnotation(f"span end {l2}:{t2} precedes start {l1}:{t1}", line_no)
    for li, ti in (start, end):
        if li < 1 or li > len(lines) or ti >= len(lines[li - 1]):
            raise SpanOutOfBounds(f"annotation line {line_no}: offset {li}:{ti} outside document")
    spans = []
    for li in range(l1, l2 + 1):
        lo = t1 if li == l1 else 0
        hi = t2 if li == l2 else len(lines[li - 1]) - 1
        if hi >= lo:
            spans.append(TokenSpan(li, lo, hi))
    return spans


def _parse_field(text: str, lines, line_no: int) -> tuple[str, Annotation | None]:
    m = _FIELD_RE.match(text)
    if not m:
        raise MalformedAnnotation(f"cannot parse field {text!r}", line_no)
    key, surface, rest = m.groups()
    if key in _IGNORED_KEYS:
        return key, None
    try:
        label = FieldLabel.from_key(key)
    except ValueError:
        raise MalformedAnnotation(f"unknown field key {key!r}", line_no) from None
    if surface == "nm":
        if rest:
            raise MalformedAnnotation(f"offsets given for unmentioned field {key}", line_no)
        return key, None
    parts = rest.split()
    if not parts or len(parts) % 2:
        raise MalformedAnnotation(f"field {key} needs start/end offset pairs", line_no)
    offsets = []
    for p in parts:
        om = _OFFSET_RE.match(p.rstrip(","))
        if not om:
            raise MalformedAnnotation(f"bad offset {p!r}", line_no)
        offsets.append((int(om.group(1)), int(om.group(2))))
    spans: list[TokenSpan] = []
    for a, b in zip(offsets[::2], offsets[1::2]):
        spans.extend(_resolve(lines, a, b, line_no))
    return key, Annotation(label, spans, surface)


def _surface_matches(doc_lines, ann: Annotation) -> bool:
    toks = [doc_lines[li - 1][i] for s in ann.spans for li, i in s.positions()]
    return " ".join(ann.surface.split()).lower() == " ".join(toks).lower()


def parse_i2b2(doc_text: str, ann_text: str, doc_id: str = "doc", source_year: int | None = None,
               strict: bool = True) -> AnnotatedDocument:
    """Parse a document and its annotation text.

    With ``strict`` the quoted surface must equal the addressed tokens
    (case-insensitively); a mismatch raises MalformedAnnotation.
    """
    if not doc_text.strip():
        raise MalformedAnnotation(f"document {doc_id} is empty")
    lines = split_lines(doc_text)
    entries = []
    for line_no, row in enumerate(ann_text.splitlines(), start=1):
        if not row.strip():
            continue
        found: dict[str, Annotation | None] = {}
        for chunk in row.split("||"):
            key, ann = _parse_field(chunk, lines, line_no)
            if key in found:
                raise MalformedAnnotation(f"duplicate field {key}", line_no)
            found[key] = ann
        if "m" not in found:
            raise MalformedAnnotation("entry lacks a medication field", line_no)
        med = found["m"]
        if med is None:
            raise MalformedAnnotation("medication cannot be 'nm'", line_no)
        related = [found[f.key] for f in FIELDS[1:] if found.get(f.key) is not None]
        if strict:
            for ann in [med, *related]:
                if not _surface_matches(lines, ann):
                    raise MalformedAnnotation(
                        f"surface {ann.surface!r} does not match the addressed tokens", line_no
                    )
        entries.append(Entry(med, related))
    return AnnotatedDocument(doc_id, lines, entries, source_year)


def _format_spans(spans: list[TokenSpan]) -> str:
    return " ".join(f"{s.line_index}:{s.token_start} {s.line_index}:{s.token_end}" for s in spans)


def serialize_annotations(doc: AnnotatedDocument) -> str:
    rows = []
    for e in doc.entries:
        by_label = {a.label: a for a in e.annotations}
        parts = []
        for f in FIELDS:
            a = by_label.get(f)
            if a is None:
                parts.append(f'{f.key}="nm"')
            else:
                parts.append(f'{f.key}="{a.surface}" {_format_spans(a.spans)}')
        rows.append("||".join(parts))
    return "\n".join(rows) + ("\n" if rows else "")


def serialize_document(doc: AnnotatedDocument) -> str:
    return doc.text + "\n"


def read_document(txt_path, strict: bool = True) -> AnnotatedDocument:
    txt_path = Path(txt_path)
    doc_id = txt_path.name[: -len(".txt")] if txt_path.name.endswith(".txt") else txt_path.stem
    ann_path = txt_path.with_name(doc_id + ".ann")
    ann_text = ann_path.read_text(encoding="utf-8") if ann_path.exists() else ""
    doc = parse_i2b2(txt_path.read_text(encoding="utf-8"), ann_text, doc_id=doc_id, strict=strict)
    sent_path = txt_path.with_name(doc_id + ".sents.json")
    if sent_path.exists():
        doc.sentences = json.loads(sent_path.read_text())
    return doc


def read_corpus(directory, strict: bool = True) -> list[AnnotatedDocument]:
    return [read_document(p, strict=strict) for p in sorted(Path(directory).glob("*.txt"))]


def write_document(doc: AnnotatedDocument, directory) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    (directory / f"{doc.doc_id}.txt").write_text(serialize_document(doc), encoding="utf-8")
    if doc.entries:
        (directory / f"{doc.doc_id}.ann").write_text(serialize_annotations(doc), encoding="utf-8")
    if doc.sentences is not None:
        (directory / f"{doc.doc_id}.sents.json").write_text(json.dumps(doc.sentences))


def write_corpus(docs, directory) -> None:
    for d in docs:
        write_document(d, directory)
