"""Window assembly and per-token gold labels for the term classifiers."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..corpus.types import FieldLabel, TokenSpan
from ..embeddings import PAD_ID, Vocabulary
from ..preprocess import sentence_map


@dataclass
class DocWindows:
    """Every token of a document with its (2w+1)-token sentence-bounded window."""

    doc_id: str
    ids: np.ndarray  # (N, 2w+1)
    positions: list[tuple[int, int]]  # (1-based line, token index)
    sentence: np.ndarray  # (N,) running sentence number within the doc


def doc_windows(doc, vocab: Vocabulary, w: int) -> DocWindows:
    sm = sentence_map(doc)
    rows, positions, sent = [], [], []
    k = 0
    for li, toks in enumerate(doc.lines):
        ids = np.array(vocab.ids(toks), dtype=np.int64)
        for s, e in sm.sentences(li, len(toks)):
            padded = np.concatenate([np.full(w, PAD_ID), ids[s:e], np.full(w, PAD_ID)])
            rows.append(sliding_window_view(padded, 2 * w + 1))
            positions.extend((li + 1, i) for i in range(s, e))
            sent.extend([k] * (e - s))
            k += 1
    ids = np.concatenate(rows) if rows else np.zeros((0, 2 * w + 1), dtype=np.int64)
    return DocWindows(doc.doc_id, ids, positions, np.array(sent, dtype=np.int64))


def token_label_codes(doc, positions) -> np.ndarray:
    """7-way code per position; a token under several fields takes the lowest code."""
    labels = doc.token_labels()
    return np.array([min(labels[p]) if p in labels else 0 for p in positions], dtype=np.int64)


def token_field_matrix(doc, positions) -> np.ndarray:
    """(N, 7) 0/1 membership of each position in each field (column 0 unused)."""
    labels = doc.token_labels()
    out = np.zeros((len(positions), 7), dtype=bool)
    for r, p in enumerate(positions):
        for f in labels.get(p, ()):
            out[r, int(f)] = True
    return out


def corpus_windows(docs, vocab: Vocabulary, w: int):
    """Stacked windows, 7-way codes and field membership over ``docs``."""
    ws = [doc_windows(d, vocab, w) for d in docs]
    ids = np.concatenate([x.ids for x in ws]) if ws else np.zeros((0, 2 * w + 1), dtype=np.int64)
    codes = np.concatenate([token_label_codes(d, x.positions) for d, x in zip(docs, ws)]) if ws else np.zeros(0, np.int64)
    member = (np.concatenate([token_field_matrix(d, x.positions) for d, x in zip(docs, ws)])
              if ws else np.zeros((0, 7), bool))
    return ids, codes, member


def runs_to_spans(labels, positions, sentence) -> list[tuple[FieldLabel, object]]:
    """Maximal same-label runs within a sentence and line become spans."""
    out = []
    n = len(labels)
    i = 0
    while i < n:
        lab = int(labels[i])
        if lab == 0:
            i += 1
            continue
        j = i
        while (
            j + 1 < n
            and int(labels[j + 1]) == lab
            and sentence[j + 1] == sentence[i]
            and positions[j + 1][0] == positions[i][0]
            and positions[j + 1][1] == positions[j][1] + 1
        ):
            j += 1
        out.append((FieldLabel(lab), TokenSpan(positions[i][0], positions[i][1], positions[j][1])))
        i = j + 1
    return out
