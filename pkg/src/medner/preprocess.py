"""Text normalisation that keeps every token in place.

Order of application: sentence boundaries (needs original case), numbers to
``<num>``, removal of '.', ':' and ';', lowercasing. Token counts per line
never change, so annotation offsets stay valid; only surfaces are rewritten.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, replace

from .corpus.types import AnnotatedDocument, Annotation, Entry

NUM = "<num>"

_EDGE_PUNCT = ".,:;!?()[]{}\"'"
_NUMERIC_RE = re.compile(r"^[+-]?\d+(?:[./:]\d+)?$")
_STRIPPABLE = ".:;"


@dataclass
class SentenceMap:
    """Sentence start indices per line (always beginning with 0)."""

    starts: list[list[int]]

    def sentence_bounds(self, line: int, i: int) -> tuple[int, int]:
        """Half-open [start, end) token range of the sentence holding token i of 0-based line."""
        st = self.starts[line]
        lo, hi = 0, None
        for k, s in enumerate(st):
            if s <= i:
                lo = s
                hi = st[k + 1] if k + 1 < len(st) else None
        return lo, hi

    def sentences(self, line: int, n_tokens: int) -> list[tuple[int, int]]:
        st = self.starts[line]
        return [(s, st[k + 1] if k + 1 < len(st) else n_tokens) for k, s in enumerate(st)]


def split_sentences(doc: AnnotatedDocument) -> SentenceMap:
    """A sentence ends after a token ending in '.' when the next token starts upper-case.

    Line ends always close a sentence.
    """
    starts = []
    for toks in doc.lines:
        line_starts = [0] if toks else []
        for i in range(len(toks) - 1):
            if toks[i].endswith(".") and toks[i + 1][:1].isupper():
                line_starts.append(i + 1)
        starts.append(line_starts)
    return SentenceMap(starts)


def is_numeric(token: str) -> bool:
    core = token.strip(_EDGE_PUNCT)
    return bool(core) and bool(_NUMERIC_RE.match(core))


def strip_punctuation(token: str) -> str:
    """Drop '.', ':' and ';' unless letter-surrounded or right after a digit.

    Neighbours are judged on the original token. A token made only of these
    symbols is left as is so that no position becomes empty.
    """
    out = []
    for k, ch in enumerate(token):
        if ch in _STRIPPABLE:
            prev = token[k - 1] if k > 0 else ""
            nxt = token[k + 1] if k + 1 < len(token) else ""
            if (prev.isalpha() and nxt.isalpha()) or prev.isdigit():
                out.append(ch)
        else:
            out.append(ch)
    result = "".join(out)
    return result if result else token


def normalize_token(token: str) -> str:
    if token == NUM:
        return token
    if is_numeric(token):
        return NUM
    stripped = strip_punctuation(token)
    if is_numeric(stripped):
        return NUM
    return stripped.lower()


def _renormalize_annotation(a: Annotation, lines) -> Annotation:
    surface = " ".join(lines[li - 1][i] for s in a.spans for li, i in s.positions())
    return Annotation(a.label, list(a.spans), surface)


def normalize_tokens(doc: AnnotatedDocument, sentences: SentenceMap | None = None) -> AnnotatedDocument:
    """Return a normalised copy of ``doc`` with rewritten annotation surfaces.

    The sentence map is attached to the result; when not given it is computed
    from ``doc`` (or reused if ``doc`` already carries one).
    """
    if sentences is None:
        sentences = SentenceMap(doc.sentences) if doc.sentences is not None else split_sentences(doc)
    lines = [[normalize_token(t) for t in toks] for toks in doc.lines]
    entries = [
        Entry(
            _renormalize_annotation(e.medication, lines),
            [_renormalize_annotation(a, lines) for a in e.related],
        )
        for e in doc.entries
    ]
    return replace(doc, lines=lines, entries=entries, sentences=[list(s) for s in sentences.starts])


def preprocess_document(doc: AnnotatedDocument) -> AnnotatedDocument:
    return normalize_tokens(doc, split_sentences(doc) if doc.sentences is None else None)


def oov_count(docs, vocab) -> int:
    """Number of distinct token types in ``docs`` missing from ``vocab``."""
    types = {t for d in docs for toks in d.lines for t in toks}
    return sum(1 for t in types if t not in vocab)


def oov_types(docs, vocab) -> list[str]:
    return sorted({t for d in docs for toks in d.lines for t in toks if t not in vocab})


def sentence_map(doc: AnnotatedDocument) -> SentenceMap:
    """Stored sentence map of a preprocessed doc, else one computed from its text."""
    return SentenceMap(doc.sentences) if doc.sentences is not None else split_sentences(doc)


def corpus_vocab_report(docs) -> dict:
    """Token and type counts of preprocessed documents."""
    docs = list(docs)
    counts: dict[str, int] = {}
    for d in docs:
        for toks in d.lines:
            for t in toks:
                counts[t] = counts.get(t, 0) + 1
    return {
        "documents": len(docs),
        "tokens": sum(counts.values()),
        "types": len(counts),
        "num_tokens": counts.get(NUM, 0),
        "sentences": sum(len(d.sentences or []) for d in docs),
    }
