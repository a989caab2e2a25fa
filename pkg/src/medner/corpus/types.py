from __future__ import annotations

from dataclasses import dataclass, field
from enum import IntEnum
from typing import Iterator


class FieldLabel(IntEnum):
    NONE = 0
    MEDICATION = 1
    DOSAGE = 2
    MODE = 3
    FREQUENCY = 4
    DURATION = 5
    REASON = 6

    @property
    def key(self) -> str:
        return _KEYS[self]

    @property
    def title(self) -> str:
        return "None" if self is FieldLabel.NONE else self.name.capitalize()

    @classmethod
    def from_key(cls, key: str) -> "FieldLabel":
        try:
            return _BY_KEY[key]
        except KeyError:
            raise ValueError(f"unknown field key {key!r}") from None

    @classmethod
    def from_name(cls, name: str) -> "FieldLabel":
        return cls[name.upper()]


_KEYS = {
    FieldLabel.NONE: "none",
    FieldLabel.MEDICATION: "m",
    FieldLabel.DOSAGE: "do",
    FieldLabel.MODE: "mo",
    FieldLabel.FREQUENCY: "f",
    FieldLabel.DURATION: "du",
    FieldLabel.REASON: "r",
}
_BY_KEY = {v: k for k, v in _KEYS.items() if k is not FieldLabel.NONE}

# fields in annotation-file order; also the generation order for relations
FIELDS = tuple(FieldLabel(i) for i in range(1, 7))
RELATED_FIELDS = FIELDS[1:]


@dataclass(frozen=True, order=True)
class TokenSpan:
    """Tokens ``token_start..token_end`` (inclusive) of 1-based line ``line_index``."""

    line_index: int
    token_start: int
    token_end: int

    def __post_init__(self):
        if self.line_index < 1 or self.token_start < 0 or self.token_start > self.token_end:
            raise ValueError(f"invalid span {self}")

    def positions(self) -> Iterator[tuple[int, int]]:
        for i in range(self.token_start, self.token_end + 1):
            yield self.line_index, i

    def __len__(self) -> int:
        return self.token_end - self.token_start + 1


@dataclass
class Annotation:
    label: FieldLabel
    spans: list[TokenSpan]
    surface: str

    def positions(self) -> list[tuple[int, int]]:
        return [p for s in self.spans for p in s.positions()]

    @property
    def n_tokens(self) -> int:
        return sum(len(s) for s in self.spans)


@dataclass
class Entry:
    medication: Annotation
    related: list[Annotation] = field(default_factory=list)

    def __post_init__(self):
        if self.medication.label is not FieldLabel.MEDICATION:
            raise ValueError("entry medication must carry the Medication label")
        for a in self.related:
            if a.label in (FieldLabel.MEDICATION, FieldLabel.NONE):
                raise ValueError(f"related annotation cannot be {a.label.title}")

    @property
    def annotations(self) -> list[Annotation]:
        return [self.medication, *self.related]

    def fields(self) -> set[FieldLabel]:
        return {a.label for a in self.annotations}


@dataclass
class AnnotatedDocument:
    doc_id: str
    lines: list[list[str]]
    entries: list[Entry] = field(default_factory=list)
    source_year: int | None = None
    # sentence starts per line, filled by preprocessing
    sentences: list[list[int]] | None = field(default=None, compare=False)
    # free-form provenance (e.g. generator bookkeeping); ignored by equality
    meta: dict = field(default_factory=dict, compare=False, repr=False)

    @property
    def is_annotated(self) -> bool:
        return bool(self.entries)

    @property
    def text(self) -> str:
        return "\n".join(" ".join(toks) for toks in self.lines)

    def token(self, line_index: int, i: int) -> str:
        return self.lines[line_index - 1][i]

    def span_tokens(self, spans) -> list[str]:
        return [self.token(li, i) for s in spans for li, i in s.positions()]

    def num_tokens(self) -> int:
        return sum(len(t) for t in self.lines)

    def positions(self) -> Iterator[tuple[int, int]]:
        for li, toks in enumerate(self.lines, start=1):
            for i in range(len(toks)):
                yield li, i

    def token_labels(self) -> dict[tuple[int, int], set[FieldLabel]]:
        """(line, token) -> set of gold fields covering it."""
        out: dict[tuple[int, int], set[FieldLabel]] = {}
        for e in self.entries:
            for a in e.annotations:
                for p in a.positions():
                    out.setdefault(p, set()).add(a.label)
        return out
