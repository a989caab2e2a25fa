from __future__ import annotations

import numpy as np
import pytest

import medner.rel.train as rel_train
from medner.corpus import AnnotatedDocument, Annotation, Entry, FieldLabel, TokenSpan, default_config, gen_synthetic
from medner.embeddings import EOO_ID, EmbeddingMatrix, Vocabulary, build_vocab
from medner.errors import ConfigInvalid, EmptyTerm
from medner.metrics import build_lookup, f1, score_relations
from medner.numkit import finite_diff_check, precision
from medner.preprocess import preprocess_document
from medner.rel import (
    RelConfig,
    RelInstance,
    bow_repr,
    build_encdec,
    build_seq2seq_tagger,
    extract_relations,
    gold_sequence,
    load_rel_model,
    make_batch,
    make_instances,
    predict_tags,
    save_rel_model,
    train_rel,
)

F = FieldLabel


def _doc():
    lines = [
        ["history", "of", "pain"],
        ["take", "aspirin", "81", "mg", "po", "daily", "for", "pain"],
        ["also", "lasix", "iv"],
        ["follow", "up"],
    ]
    e1 = Entry(
        Annotation(F.MEDICATION, [TokenSpan(2, 1, 1)], "aspirin"),
        [
            Annotation(F.REASON, [TokenSpan(2, 7, 7)], "pain"),
            Annotation(F.DOSAGE, [TokenSpan(2, 2, 3)], "81 mg"),
            Annotation(F.MODE, [TokenSpan(2, 4, 4)], "po"),
            Annotation(F.FREQUENCY, [TokenSpan(2, 5, 5)], "daily"),
        ],
    )
    e2 = Entry(Annotation(F.MEDICATION, [TokenSpan(3, 1, 1)], "lasix"), [Annotation(F.MODE, [TokenSpan(3, 2, 2)], "iv")])
    return AnnotatedDocument("d0", lines, [e1, e2])


def _vocab_table(docs, m, seed=0):
    vocab = build_vocab(docs)
    return vocab, np.random.default_rng(seed).standard_normal((len(vocab), m))


# -- representation and instances ----------------------------------------------------

def test_bow_repr_examples():
    vocab = Vocabulary(["baby", "aspirin"])
    W = np.arange(len(vocab) * 3, dtype=float).reshape(len(vocab), 3)
    E = EmbeddingMatrix(W, vocab)
    b, a = vocab.id("baby"), vocab.id("aspirin")
    np.testing.assert_array_equal(bow_repr(["aspirin"], E), [*W[a], 1.0])
    np.testing.assert_array_equal(bow_repr(["baby", "aspirin"], E), [*(W[b] + W[a]), 1.0])
    np.testing.assert_array_equal(bow_repr(["baby", "aspirin"], E), bow_repr(["aspirin", "baby"], E))
    assert len(bow_repr(["zzz"], E)) == 4
    with pytest.raises(EmptyTerm):
        bow_repr([], E)


def test_config_defaults_and_validation():
    s, e = RelConfig.defaults("seq2seq"), RelConfig.defaults("encdec")
    assert (s.hidden, s.r, s.b, s.e) == (100, 0.001, 50, 100)
    assert (e.hidden, e.r, e.decay, e.clip, e.b, e.e) == (128, 0.001, 1e-5, 5.0, 50, 100)
    with pytest.raises(ConfigInvalid):
        RelConfig.defaults("encdec", attention="dot")
    with pytest.raises(ConfigInvalid):
        RelConfig.defaults("transformer")
    assert RelConfig.from_dict(e.to_dict()) == e


def test_instances_window_tags_and_target():
    doc = _doc()
    inst = make_instances([doc], half_lines=0)
    assert [x.key for x in inst] == [("d0", 0), ("d0", 1)]
    a = inst[0]
    assert a.tokens == doc.lines[1] and a.term == ["aspirin"]
    assert a.target == ["81", "mg", "po", "daily", "pain"]  # field order, not annotation order
    assert list(a.tags) == [0, 1, 2, 2, 3, 4, 0, 6]
    wide = make_instances([doc], half_lines=2)[1]
    assert [li for li, _ in wide.positions][0] == 1 and wide.positions[-1] == (4, 1)
    # codes mark every annotated token in the window; tags only this entry's
    assert wide.codes[wide.positions.index((2, 4))] == int(F.MODE)
    assert wide.tags[wide.positions.index((2, 4))] == 0
    assert wide.tags[wide.positions.index((3, 2))] == int(F.MODE)


def test_tagger_window_locality():
    doc = _doc()
    far = AnnotatedDocument(doc.doc_id, [list(x) for x in doc.lines] + [["x"], ["y"], ["changed", "line"]], doc.entries)
    a = make_instances([doc], half_lines=2)[0]
    b = make_instances([far], half_lines=2)[0]
    assert a.tokens == b.tokens and np.array_equal(a.codes, b.codes)


def test_gold_sequence_document_order_within_field():
    doc = _doc()
    e = Entry(doc.entries[0].medication, [
        Annotation(F.REASON, [TokenSpan(2, 7, 7)], "pain"),
        Annotation(F.REASON, [TokenSpan(1, 2, 2)], "pain"),
        Annotation(F.DOSAGE, [TokenSpan(2, 2, 3)], "81 mg"),
    ])
    assert gold_sequence(e, doc) == ["81", "mg", "pain", "pain"]


# -- tagger --------------------------------------------------------------------------------

def _tagger(m=4, hidden=6, seed=0, **kw):
    docs = [_doc()]
    vocab, W = _vocab_table(docs, m, seed)
    cfg = RelConfig.defaults("seq2seq", m=m, hidden=hidden, **kw)
    return build_seq2seq_tagger(cfg, W, vocab, seed=seed), make_instances(docs)


def test_tagger_zero_init_and_normalised_outputs():
    model, inst = _tagger()
    model.init_f[0].data[:] = 0.0
    model.init_f[1].data[:] = 0.0
    batch = make_batch(inst, model.vocab, EOO_ID)
    hf, _ = model.initial_states(batch)
    assert np.all(hf.data == 0.0)
    P = model.proba(batch)
    assert P.shape[-1] == 7
    np.testing.assert_allclose(P.sum(axis=-1), 1.0, atol=1e-6)


@pytest.mark.parametrize("seed", range(3))
def test_tagger_gradient_check(seed):
    with precision(64):
        toks = [f"t{i}" for i in range(6)]
        vocab = Vocabulary(toks)
        W = np.random.default_rng(seed).standard_normal((len(vocab), 4))
        model = build_seq2seq_tagger(RelConfig.defaults("seq2seq", m=4, hidden=6), W, vocab, seed=seed)
        inst = _toy_instance(toks, 5)
        inst.tags = np.random.default_rng(seed).integers(0, 7, 5)
        batch = make_batch([inst], vocab, EOO_ID)
        assert finite_diff_check(lambda: model.loss(batch), model.store) < 1e-4


def test_tagger_lr_zero_keeps_parameters():
    model, inst = _tagger(r=0.0, e=2)
    before = model.store.snapshot()
    train_rel(model, inst)
    for k, v in model.store.snapshot().items():
        np.testing.assert_array_equal(v, before[k])


def test_tagger_overfits_single_instance():
    model, inst = _tagger(m=16, hidden=32, r=0.01, e=50)
    one = inst[:1]
    _, curve = train_rel(model, one, seed=0)
    assert np.array_equal(predict_tags(model, one)[one[0].key], one[0].tags)
    assert extract_relations(model, one)[one[0].key] == ["81", "mg", "po", "daily", "pain"]


# -- encoder-decoder -------------------------------------------------------------------------

def _encdec(attention, m=4, hidden=6, seed=0, tokens=6, **kw):
    vocab = Vocabulary([f"t{i}" for i in range(tokens)])
    W = np.random.default_rng(seed).standard_normal((len(vocab), m))
    cfg = RelConfig.defaults("encdec", m=m, hidden=hidden, attention=attention, **kw)
    return build_encdec(cfg, W, vocab, seed=seed)


def _toy_instance(vocab_tokens, n=4, target=("t1", "t2"), key=0):
    toks = list(vocab_tokens[:n])
    return RelInstance("toy", key, toks, [(1, i) for i in range(n)], np.arange(n) % 7, np.zeros(n, dtype=np.int64),
                       [toks[0]], list(target), TokenSpan(1, 0, 0))


@pytest.mark.parametrize("attention", ["bahdanau", "luong"])
def test_attention_weights_normalised(attention):
    model = _encdec(attention)
    toks = [f"t{i}" for i in range(6)]
    batch = make_batch([_toy_instance(toks, 4), _toy_instance(toks, 2, key=1)], model.vocab, EOO_ID)
    _, attn = model.greedy(batch, max_len=5)
    for steps in attn:
        for a in steps:
            assert abs(a.sum() - 1.0) < 1e-6
    assert all(np.all(a[2:] < 1e-6) for a in attn[1])  # padding gets no mass
    single = make_batch([_toy_instance(toks, 1)], model.vocab, EOO_ID)
    _, attn = model.greedy(single, max_len=3)
    assert all(abs(a[0] - 1.0) < 1e-9 for a in attn[0])


@pytest.mark.parametrize("attention", ["bahdanau", "luong"])
@pytest.mark.parametrize("seed", range(2))
def test_encdec_gradient_check(attention, seed):
    with precision(64):
        model = _encdec(attention, m=4, hidden=6, seed=seed)  # decoder has 12 units, V = 10
        assert len(model.vocab) == 10 and model.dec.hidden_dim == 12
        toks = [f"t{i}" for i in range(6)]
        batch = make_batch([_toy_instance(toks, 4)], model.vocab, EOO_ID)
        assert finite_diff_check(lambda: model.loss(batch), model.store) < 1e-4


@pytest.mark.parametrize("attention", ["bahdanau", "luong"])
def test_encdec_overfits_single_instance(attention):
    model = _encdec(attention, m=16, hidden=16, tokens=20, r=0.01, e=200, decay=0.0)
    toks = [f"t{i}" for i in range(20)]
    inst = [_toy_instance(toks, 8, target=("t3", "t4", "t7"))]
    _, curve = train_rel(model, inst)
    assert curve[-1] < 0.01
    assert extract_relations(model, inst)[inst[0].key] == ["t3", "t4", "t7"]


def test_decoding_is_capped():
    model = _encdec("luong", max_decode=7)
    model.out[1].data[:] = 0.0
    model.out[1].data[EOO_ID] = -1e6  # never terminate by choice
    toks = [f"t{i}" for i in range(6)]
    ids, attn = model.greedy(make_batch([_toy_instance(toks)], model.vocab, EOO_ID))
    assert len(ids[0]) == 7 and len(attn[0]) == 7


def test_gradients_clipped(monkeypatch):
    seen = []
    real = rel_train.adam_step

    def spy(store, grads, lr):
        seen.append(max(float(np.abs(g).max()) for g in grads.values()))
        return real(store, grads, lr)

    monkeypatch.setattr(rel_train, "adam_step", spy)
    model = _encdec("bahdanau", clip=5.0, e=3)
    model.out[0].data *= 1e4  # huge logits, huge gradients
    toks = [f"t{i}" for i in range(6)]
    train_rel(model, [_toy_instance(toks)])
    assert seen and max(seen) <= 5.0


def test_checkpoint_round_trip(tmp_path):
    model = _encdec("luong")
    toks = [f"t{i}" for i in range(6)]
    batch = make_batch([_toy_instance(toks)], model.vocab, EOO_ID)
    save_rel_model(model, tmp_path / "rel.bin", seed=0)
    back = load_rel_model(tmp_path / "rel.bin")
    np.testing.assert_allclose(back.logits(batch).data, model.logits(batch).data, atol=1e-6)


def test_training_deterministic():
    curves = []
    for _ in range(2):
        model, inst = _tagger(e=2)
        curves.append(train_rel(model, inst, seed=4)[1])
    assert curves[0] == curves[1]


@pytest.mark.slow
def test_tagger_fits_synthetic_training_set():
    _, docs = gen_synthetic(default_config(n_unannotated=0, n_annotated=12), seed=0)
    docs = [preprocess_document(d) for d in docs]
    vocab, W = _vocab_table(docs, 16)
    model = build_seq2seq_tagger(RelConfig.defaults("seq2seq", m=16, hidden=32, e=80, r=0.01), W, vocab)
    inst = make_instances(docs)
    train_rel(model, inst)
    res = score_relations({x.key: x.entry for x in inst}, extract_relations(model, inst), build_lookup(docs))
    assert f1(res)["micro"].f1 > 0.95
