import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from oracles import brute_force_phrase_counts, brute_force_token_counts, hand_f1, random_predictions

from medner.corpus import Annotation, Entry, FieldLabel, TokenSpan, default_config, gen_synthetic, parse_i2b2
from medner.errors import DocumentMismatch, EntryMismatch
from medner.metrics import (
    ConfusionCounts,
    Counts,
    attribute_fields,
    build_lookup,
    f1,
    prf,
    score_corpus,
    score_relations,
    score_tokens,
    write_relation_table,
    write_table7,
)

M, DO, MO = FieldLabel.MEDICATION, FieldLabel.DOSAGE, FieldLabel.MODE


def _doc():
    doc = parse_i2b2("a b c d e f g\n", "", doc_id="d")
    doc.entries = [Entry(Annotation(M, [TokenSpan(1, 3, 4)], "d e"))]
    return doc


def test_perfect_prediction():
    doc = _doc()
    c = score_tokens(doc, [(M, TokenSpan(1, 3, 4))])
    assert f1(c)[M].f1 == 1.0 and f1(c, "phrase")[M].f1 == 1.0


def test_shifted_prediction():
    c = score_tokens(_doc(), [(M, TokenSpan(1, 4, 5))])
    assert (c.token[M].tp, c.token[M].fp, c.token[M].fn) == (1, 1, 1)
    s = f1(c)[M]
    assert (s.precision, s.recall, s.f1) == (0.5, 0.5, 0.5)
    assert c.phrase[M].tp == 0


def test_empty_prediction_conventions():
    s = f1(score_tokens(_doc(), []))[M]
    assert (s.precision, s.recall, s.f1) == (0.0, 0.0, 0.0)
    assert prf(Counts(0, 0, 0)) == prf(Counts()) and prf(Counts()).f1 == 0.0


def test_prf_formula():
    s = prf(Counts(2, 1, 1))
    assert s.precision == pytest.approx(2 / 3) and s.recall == pytest.approx(2 / 3) and s.f1 == pytest.approx(2 / 3)


@settings(max_examples=100)
@given(st.integers(0, 50), st.integers(0, 50), st.integers(0, 50))
def test_prf_swap_symmetry(tp, fp, fn):
    a, b = prf(Counts(tp, fp, fn)), prf(Counts(tp, fn, fp))
    assert (a.precision, a.recall) == (b.recall, b.precision)
    assert a.f1 == pytest.approx(b.f1)
    assert (a.precision, a.recall, a.f1) == pytest.approx(hand_f1(tp, fp, fn))


def test_out_of_bounds_prediction():
    with pytest.raises(DocumentMismatch):
        score_tokens(_doc(), [(M, TokenSpan(1, 6, 9))])
    with pytest.raises(DocumentMismatch):
        score_corpus([_doc()], {"other": []})


def test_micro_average_sums_counts():
    c = ConfusionCounts()
    c.token[M] = Counts(3, 1, 0)
    c.token[DO] = Counts(1, 0, 3)
    assert f1(c)["micro"] == prf(Counts(4, 1, 3))


def test_brute_force_agreement_and_iff():
    _, docs = gen_synthetic(default_config(n_unannotated=0, n_annotated=100), seed=13)
    rng = np.random.default_rng(0)
    for doc in docs:
        pred = random_predictions(doc, rng)
        c = score_tokens(doc, pred)
        tok, phr = brute_force_token_counts(doc, pred), brute_force_phrase_counts(doc, pred)
        for f in tok:
            assert (c.token[f].tp, c.token[f].fp, c.token[f].fn) == tok[f]
            assert (c.phrase[f].tp, c.phrase[f].fp, c.phrase[f].fn) == phr[f]
        exact = {(a.label, s) for e in doc.entries for a in e.annotations for s in a.spans}
        both_one = f1(c)["micro"].f1 == 1.0 and f1(c, "phrase")["micro"].f1 == 1.0
        assert both_one == (set(pred) == exact)


def _entry(**fields):
    rel = [Annotation(FieldLabel.from_key(k), [TokenSpan(1, 0, 0)], v) for k, v in fields.items()]
    return Entry(Annotation(M, [TokenSpan(1, 0, 0)], "aspirin"), rel)


def test_relation_scoring_examples():
    gold = {("d", 0): _entry(do="<num> mg")}
    assert score_relations(gold, {("d", 0): ["<num>", "mg"]}, {})[DO] == Counts(2, 0, 0)
    assert score_relations(gold, {("d", 0): ["<num>"]}, {})[DO] == Counts(1, 0, 1)
    c = score_relations(gold, {("d", 0): ["<num>", "mg", "po"]}, {"po": MO})
    assert c[MO] == Counts(0, 1, 0) and c[DO] == Counts(2, 0, 0)
    c = score_relations(gold, {("d", 0): ["<num>", "mg", "zzz"]}, {"po": MO})
    assert all(v.fp == 0 for v in c.values())
    with pytest.raises(EntryMismatch):
        score_relations(gold, {}, {})


def test_attribute_fields_and_lookup():
    doc = parse_i2b2("x\n", "")
    doc.entries = [_entry(mo="po"), _entry(mo="po"), _entry(r="po", do="mg")]
    lookup = build_lookup([doc])
    assert lookup == {"po": MO, "mg": DO}
    got = attribute_fields(["mg", "po", "new"], {DO: ["mg"]}, lookup)
    assert got[DO] == ["mg"] and got[MO] == ["po"] and got[None] == ["new"]


def test_report_writers(tmp_path):
    c = score_tokens(_doc(), [(M, TokenSpan(1, 3, 4))])
    write_table7({"rnn": c}, tmp_path / "t7.csv")
    rows = (tmp_path / "t7.csv").read_text().splitlines()
    assert rows[1].startswith("rnn,Medication,1.0000,1.0000,1.0000")
    assert rows[-1].startswith("rnn,micro")
    write_relation_table({"encdec": {f: Counts(1, 0, 1) for f in list(FieldLabel)[2:]}}, tmp_path / "r.csv")
    assert "encdec,Dosage,1.0000,0.5000,0.6667,1,0,1" in (tmp_path / "r.csv").read_text()
