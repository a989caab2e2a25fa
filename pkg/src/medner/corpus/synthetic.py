"""Seeded generator of look-alike clinical notes with gold medication entries.

Two modes:

* template mode (``cfg.templates`` non-empty): each entry line is one template.
  ``{m}``, ``{do}``, ``{mo}``, ``{f}``, ``{du}``, ``{r}`` draw from the field
  lexicons; ``{do:# mg}`` writes literal text as that field. In any text ``#``
  becomes a random integer. Example: ``"started {m} {do:# mg} {mo:po}"``.
* compositional mode (default): notes mix medication-list lines, narrative
  medication sentences, and unannotated distractors (vitals, labs, allergies,
  past history, and family-history sentences that mention drugs the patient
  does not take). Field inclusion per entry follows ``field_proportions``.

The distractors make labels context dependent at two ranges: allergy and lab
lines are resolved by the neighbouring tokens, family-history lines only by a
cue placed six or more tokens before the drug.

Generated documents carry ``meta["numeric"]``: the (line, token) positions of
every number the generator emitted.
"""

from __future__ import annotations

import json
import re
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from ..errors import EmptyLexicon
from .types import AnnotatedDocument, Annotation, Entry, FieldLabel, TokenSpan

# share of entries mentioning each field in the annotated training split
TABLE3_PROPORTIONS = {
    "Dosage": 0.495,
    "Mode": 0.377,
    "Frequency": 0.448,
    "Duration": 0.061,
    "Reason": 0.183,
}

_LEXICON_FIELDS = ("drugs", "doses", "modes", "frequencies", "durations", "reasons", "filler")
_NUMBER_RE = re.compile(r"[+-]?\d+(?:[./:]\d+)?")
_SLOT_RE = re.compile(r"\{(m|do|mo|f|du|r)(?::([^}]*))?\}")


@dataclass
class SyntheticConfig:
    drugs: list[str] = field(default_factory=list)
    doses: list[str] = field(default_factory=list)
    modes: list[str] = field(default_factory=list)
    frequencies: list[str] = field(default_factory=list)
    durations: list[str] = field(default_factory=list)
    reasons: list[str] = field(default_factory=list)
    filler: list[str] = field(default_factory=list)
    templates: list[str] = field(default_factory=list)
    n_unannotated: int = 300
    n_annotated: int = 200
    entries_per_doc: tuple[int, int] = (12, 24)
    field_proportions: dict[str, float] = field(default_factory=lambda: dict(TABLE3_PROPORTIONS))
    # compositional mode knobs
    narrative_rate: float = 0.4
    shared_line_rate: float = 0.1
    # per-entry rates of unannotated drug mentions
    family_history_rate: float = 0.12
    allergy_rate: float = 0.15
    vitals_rate: float = 0.6
    labs_rate: float = 0.6
    history_rate: float = 0.5
    bridge_len: tuple[int, int] = (6, 9)

    @classmethod
    def from_dict(cls, data: dict) -> "SyntheticConfig":
        data = dict(data)
        for k in ("entries_per_doc", "bridge_len"):
            if k in data:
                data[k] = tuple(data[k])
        return cls(**data)

    @classmethod
    def load(cls, path) -> "SyntheticConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def to_dict(self) -> dict:
        return asdict(self)


def default_config(**overrides) -> SyntheticConfig:
    """The bundled lexicon (package data) with optional overrides."""
    path = Path(__file__).resolve().parent.parent / "data" / "synthetic_default.json"
    data = json.loads(path.read_text())
    data.update(overrides)
    return SyntheticConfig.from_dict(data)


class _Writer:
    """Accumulates lines of tokens and records annotation spans as it goes."""

    def __init__(self):
        self.lines: list[list[str]] = []
        self.cur: list[str] = []
        self.sent_start = 0
        self.numeric: list[tuple[int, int]] = []

    @property
    def line_index(self) -> int:
        return len(self.lines) + 1

    def add(self, text: str, rng: np.random.Generator, numbers: bool = True) -> TokenSpan | None:
        toks = text.split()
        if not toks:
            return None
        start = len(self.cur)
        for t in toks:
            if numbers and "#" in t:
                t = t.replace("#", _number(rng, t))
            if _NUMBER_RE.fullmatch(t.strip(".,:;")):
                self.numeric.append((self.line_index, len(self.cur)))
            self.cur.append(t)
        return TokenSpan(self.line_index, start, len(self.cur) - 1)

    def end_sentence(self, period: bool = True, capitalize: bool = True, new_line: bool = True) -> None:
        if len(self.cur) > self.sent_start:
            if capitalize:
                first = self.cur[self.sent_start]
                if first[:1].isalpha():
                    self.cur[self.sent_start] = first[:1].upper() + first[1:]
            if period and not self.cur[-1].endswith("."):
                self.cur[-1] = self.cur[-1] + "."
        if new_line:
            if self.cur:
                self.lines.append(self.cur)
            self.cur = []
            self.sent_start = 0
        else:
            self.sent_start = len(self.cur)


def _number(rng: np.random.Generator, token: str) -> str:
    kind = rng.random()
    if token.count("#") > 1:
        return str(int(rng.integers(1, 10)))
    if kind < 0.7:
        return str(int(rng.choice([1, 2, 3, 4, 5, 6, 8, 10, 12, 20, 25, 40, 50, 75, 81, 100, 250, 325, 500])))
    if kind < 0.9:
        return rng.choice(["0.5", "2.5", "1.5", "0.125", "7.5", "0.25"])
    return rng.choice(["1/2", "1/4", "2/3"])


def _pick(rng: np.random.Generator, items: list[str]) -> str:
    return items[int(rng.integers(len(items)))]


def _check_lexicons(cfg: SyntheticConfig) -> None:
    needed = ["drugs"] if cfg.templates else list(_LEXICON_FIELDS)
    if cfg.templates:
        used = {m.group(1) for t in cfg.templates for m in _SLOT_RE.finditer(t) if m.group(2) is None}
        key_to_lex = {"m": "drugs", "do": "doses", "mo": "modes", "f": "frequencies", "du": "durations", "r": "reasons"}
        needed = sorted({key_to_lex[k] for k in used} | {"drugs"})
    for name in needed:
        if not getattr(cfg, name):
            raise EmptyLexicon(f"lexicon {name!r} is empty")


class _DocBuilder:
    def __init__(self, cfg: SyntheticConfig, rng: np.random.Generator):
        self.cfg = cfg
        self.rng = rng
        self.w = _Writer()
        self.entries: list[Entry] = []

    # -- helpers -------------------------------------------------------------
    def _filler(self, n: int) -> str:
        return " ".join(_pick(self.rng, self.cfg.filler) for _ in range(n))

    def _bridge(self) -> str:
        lo, hi = self.cfg.bridge_len
        return self._filler(int(self.rng.integers(lo, hi + 1)))

    def _field_texts(self) -> dict[FieldLabel, str]:
        cfg, rng = self.cfg, self.rng
        texts = {FieldLabel.MEDICATION: _pick(rng, cfg.drugs)}
        lex = {
            FieldLabel.DOSAGE: cfg.doses,
            FieldLabel.MODE: cfg.modes,
            FieldLabel.FREQUENCY: cfg.frequencies,
            FieldLabel.DURATION: cfg.durations,
            FieldLabel.REASON: cfg.reasons,
        }
        for f, items in lex.items():
            if rng.random() < cfg.field_proportions.get(f.title, 0.0):
                texts[f] = _pick(rng, items)
        return texts

    def _write_entry(self, texts: dict[FieldLabel, str], annotate: bool = True) -> None:
        """Medication then fields in a clinical order; reason sometimes first."""
        w, rng = self.w, self.rng
        spans: dict[FieldLabel, TokenSpan] = {}
        reason_first = FieldLabel.REASON in texts and rng.random() < 0.2
        if reason_first:
            w.add("for", rng)
            spans[FieldLabel.REASON] = w.add(texts[FieldLabel.REASON], rng)
            w.add(",", rng)
        spans[FieldLabel.MEDICATION] = w.add(texts[FieldLabel.MEDICATION], rng)
        for f in (FieldLabel.DOSAGE, FieldLabel.MODE, FieldLabel.FREQUENCY, FieldLabel.DURATION):
            if f in texts:
                spans[f] = w.add(texts[f], rng)
        if FieldLabel.REASON in texts and not reason_first:
            w.add("for", rng)
            spans[FieldLabel.REASON] = w.add(texts[FieldLabel.REASON], rng)
        if annotate:
            self._record(spans)

    def _record(self, spans: dict[FieldLabel, TokenSpan]) -> None:
        # surfaces are filled once the doc is complete
        anns = {f: Annotation(f, [s], "") for f, s in spans.items()}
        related = [anns[f] for f in sorted(anns) if f is not FieldLabel.MEDICATION]
        self.entries.append(Entry(anns[FieldLabel.MEDICATION], related))

    def _end(self) -> None:
        # distractor sentences sometimes share a line with the next one
        self.w.end_sentence(new_line=self.rng.random() >= 0.25)

    # -- line kinds ----------------------------------------------------------
    def list_line(self, number: int) -> None:
        self.w.add(f"{number}.", self.rng, numbers=False)
        self._write_entry(self._field_texts())
        if self.rng.random() < self.cfg.shared_line_rate:
            self.w.add("and", self.rng)
            self._write_entry(self._field_texts())
        self.w.end_sentence(capitalize=False)

    def narrative_line(self) -> None:
        self.w.add(self._bridge(), self.rng)
        self._write_entry(self._field_texts())
        self._end()

    def family_history_line(self) -> None:
        rng = self.rng
        self.w.add(_pick(rng, ["Family history :", "Mother", "Her sister", "Father"]), rng)
        self.w.add(self._bridge(), rng)
        self._write_entry(self._field_texts(), annotate=False)
        self._end()

    def allergy_line(self) -> None:
        rng = self.rng
        self.w.add(_pick(rng, ["Allergies :", "Allergic to", "Intolerant of"]), rng)
        self.w.add(_pick(rng, self.cfg.drugs), rng)
        if rng.random() < 0.5:
            self.w.add("and", rng)
            self.w.add(_pick(rng, self.cfg.drugs), rng)
        self._end()

    def vitals_line(self) -> None:
        rng = self.rng
        hr, rr = int(rng.integers(55, 110)), int(rng.integers(12, 24))
        self.w.add(f"BP {_pick(rng, ['120/80', '135/85', '110/70', '150/90'])} , HR {hr} , RR {rr} , temp 98.6", rng)
        self._end()

    def labs_line(self) -> None:
        rng = self.rng
        labs = ["potassium", "sodium", "creatinine", "magnesium", "glucose", "hemoglobin"]
        parts = [f"{_pick(rng, labs)} #" for _ in range(int(rng.integers(2, 4)))]
        text = " , ".join(parts)
        if rng.random() < 0.4:
            text += " mg/dl"
        self.w.add(text, rng)
        self._end()

    def history_line(self) -> None:
        rng = self.rng
        self.w.add(_pick(rng, ["History of", "Past medical history notable for", "She denies"]), rng)
        self.w.add(_pick(rng, self.cfg.reasons), rng)
        if rng.random() < 0.5:
            self.w.add("and", rng)
            self.w.add(_pick(rng, self.cfg.reasons), rng)
        self._end()

    def header_line(self) -> None:
        if self.w.cur:
            self.w.end_sentence(period=False, capitalize=False)
        self.w.add(_pick(self.rng, ["Discharge medications :", "Medications on admission :", "Home medications :"]),
                   self.rng)
        self.w.end_sentence(period=False, capitalize=False)

    def template_line(self, template: str) -> None:
        rng, w = self.rng, self.w
        spans: dict[FieldLabel, TokenSpan] = {}
        lex = {
            "m": self.cfg.drugs, "do": self.cfg.doses, "mo": self.cfg.modes,
            "f": self.cfg.frequencies, "du": self.cfg.durations, "r": self.cfg.reasons,
        }
        pos = 0
        for m in _SLOT_RE.finditer(template):
            w.add(template[pos:m.start()], rng)
            key, literal = m.group(1), m.group(2)
            text = literal if literal is not None else _pick(rng, lex[key])
            span = w.add(text, rng)
            if span is not None:
                spans[FieldLabel.from_key(key)] = span
            pos = m.end()
        w.add(template[pos:], rng)
        if FieldLabel.MEDICATION not in spans:
            raise EmptyLexicon(f"template {template!r} has no medication slot")
        self._record(spans)
        w.end_sentence(period=False, capitalize=False)

    # -- assembly ------------------------------------------------------------
    def build(self, doc_id: str, annotated: bool) -> AnnotatedDocument:
        cfg, rng = self.cfg, self.rng
        lo, hi = cfg.entries_per_doc
        k = int(rng.integers(lo, hi + 1))
        if cfg.templates:
            for _ in range(k):
                self.template_line(_pick(rng, cfg.templates))
        else:
            blocks: list[str] = []
            n_narr = int(rng.binomial(k, cfg.narrative_rate))
            blocks += ["narrative"] * n_narr
            blocks += ["family_history"] * int(rng.binomial(k, cfg.family_history_rate))
            blocks += ["allergy"] * int(rng.binomial(k, cfg.allergy_rate))
            for kind, rate in (("vitals", cfg.vitals_rate),
                               ("labs", cfg.labs_rate), ("history", cfg.history_rate)):
                if rng.random() < rate:
                    blocks.append(kind)
            blocks = [blocks[i] for i in rng.permutation(len(blocks))]
            n_list = k - n_narr
            cut = int(rng.integers(0, len(blocks) + 1))
            for b in blocks[:cut]:
                getattr(self, f"{b}_line")()
            if n_list:
                self.header_line()
                for i in range(n_list):
                    self.list_line(i + 1)
            for b in blocks[cut:]:
                getattr(self, f"{b}_line")()
        self.w.end_sentence(period=False, capitalize=False)
        lines = self.w.lines
        entries = self.entries if annotated else []
        for e in entries:
            for a in e.annotations:
                a.surface = " ".join(lines[s.line_index - 1][i] for s in a.spans for _, i in s.positions())
        doc = AnnotatedDocument(doc_id, lines, entries)
        doc.meta["numeric"] = list(self.w.numeric)
        return doc


def gen_synthetic(cfg: SyntheticConfig, seed: int = 0) -> tuple[list[AnnotatedDocument], list[AnnotatedDocument]]:
    """Return (unannotated docs, annotated docs), deterministic in ``seed``."""
    _check_lexicons(cfg)
    rng = np.random.default_rng(seed)
    unannotated = [
        _DocBuilder(cfg, rng).build(f"syn-u{i:05d}", annotated=False) for i in range(cfg.n_unannotated)
    ]
    annotated = [_DocBuilder(cfg, rng).build(f"syn-a{i:05d}", annotated=True) for i in range(cfg.n_annotated)]
    return unannotated, annotated


def gen_two_topic(
    n_per_topic: int = 500,
    seed: int = 0,
    topic_words: int = 30,
    shared_words: int = 8,
    sentence_len: tuple[int, int] = (6, 10),
    sentences_per_doc: tuple[int, int] = (2, 4),
    shared_rate: float = 0.2,
) -> tuple[list[AnnotatedDocument], list[list[str]]]:
    """Unannotated docs over two disjoint content lexicons plus a few shared words.

    Returns (docs, [topic-0 words, topic-1 words]); docs alternate topics.
    """
    rng = np.random.default_rng(seed)
    lexicons = [[f"t{k}w{i}" for i in range(topic_words)] for k in range(2)]
    shared = [f"sh{i}" for i in range(shared_words)]
    docs = []
    for i in range(2 * n_per_topic):
        lex = lexicons[i % 2]
        lines = []
        for _ in range(int(rng.integers(sentences_per_doc[0], sentences_per_doc[1] + 1))):
            n = int(rng.integers(sentence_len[0], sentence_len[1] + 1))
            lines.append([
                _pick(rng, shared) if shared and rng.random() < shared_rate else _pick(rng, lex)
                for _ in range(n)
            ])
        docs.append(AnnotatedDocument(f"topic{i % 2}-{i:05d}", lines, []))
    return docs, lexicons
