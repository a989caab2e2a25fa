import numpy as np
import pytest

from medner.corpus import FieldLabel, TokenSpan, default_config, gen_synthetic, parse_i2b2
from medner.embeddings import PAD_ID, UNK_ID, Vocabulary, build_vocab
from medner.errors import ConfigInvalid, NoPositiveInstances
from medner.ner import (
    NerConfig,
    build_context_aware_ffn,
    build_context_free_ffn,
    build_model,
    build_rnn_classifier,
    doc_windows,
    load_model,
    predict_spans,
    predict_tokens,
    runs_to_spans,
    save_model,
    train_ner,
)
from medner.ner.data import corpus_windows
from medner.numkit import finite_diff_check, ops, precision
from medner.preprocess import preprocess_document

F = FieldLabel


def _table(vocab, m, seed=0):
    return np.random.default_rng(seed).standard_normal((len(vocab), m))


def _corpus(n=20, seed=0, **kw):
    _, docs = gen_synthetic(default_config(n_unannotated=0, n_annotated=n, **kw), seed=seed)
    return [preprocess_document(d) for d in docs]


def test_table5_defaults():
    cf, ca, rnn = (NerConfig.defaults(a) for a in ("cf-ffn", "ca-ffn", "rnn"))
    assert (cf.m, cf.l, cf.h, cf.d, cf.p, cf.e, cf.r, cf.decay, cf.b) == (100, 2, [100, 100], 0.0, 0.1, 5, 0.01, 0.002, 50)
    assert (ca.w, ca.l, ca.h, ca.e, ca.r, ca.decay, ca.b) == (5, 2, [500, 100], 5, 0.001, 0.0, 50)
    assert (rnn.w, rnn.l, rnn.h, rnn.e, rnn.r, rnn.decay, rnn.b) == (15, 1, [100], 3, 0.001, 0.0, 50)


@pytest.mark.parametrize("bad", [dict(l=3), dict(d=1.0), dict(p=0.0), dict(activation="gelu"), dict(b=0)])
def test_config_invalid(bad):
    with pytest.raises(ConfigInvalid):
        NerConfig.defaults("cf-ffn", **bad)
    with pytest.raises(ConfigInvalid):
        NerConfig.defaults("ca-ffn", w=0)
    with pytest.raises(ConfigInvalid):
        NerConfig.from_dict({"arch": "rnn", "bogus": 1})


def test_parameter_counts():
    v = Vocabulary([f"t{i}" for i in range(10)])
    cf = build_context_free_ffn(NerConfig.defaults("cf-ffn"), _table(v, 100), v)
    assert cf.num_params(F.MEDICATION) == 100 * 100 + 100 + 100 * 100 + 100 + 100 * 2 + 2 == 20_402
    assert len(cf.stores) == 6
    rnn = build_rnn_classifier(NerConfig.defaults("rnn"), _table(v, 100), v)
    assert rnn.num_params() == 4 * (100 + 100 + 1) * 100 + 100 * 7 + 7 == 81_107
    ca = build_context_aware_ffn(NerConfig.defaults("ca-ffn"), _table(v, 100), v)
    assert ca.in_dim == 1100


def test_ffn_outputs_and_zero_head():
    v = Vocabulary(["a", "b"])
    model = build_context_free_ffn(NerConfig.defaults("cf-ffn", m=4, h=[3, 3]), _table(v, 4), v)
    ids = np.array([[4], [5], [UNK_ID]])
    p = ops._softmax(model.logits(F.DOSAGE, ids).data.astype(float), -1)
    np.testing.assert_allclose(p.sum(axis=1), 1.0, rtol=1e-6)
    net = model.nets[F.DOSAGE]
    net.Wo.data[:] = 0.0
    p = ops._softmax(model.logits(F.DOSAGE, ids).data.astype(float), -1)
    np.testing.assert_array_equal(p, 0.5)


def test_rnn_all_pad_zero_weights_uniform():
    v = Vocabulary(["a"])
    model = build_rnn_classifier(NerConfig.defaults("rnn", m=4, h=[5], w=2), _table(v, 4), v)
    for _, t in model.store.items():
        if t.name != "emb":
            t.data[:] = 0.0
    p = model.proba(np.full((1, 5), PAD_ID))
    np.testing.assert_allclose(p, np.full((1, 7), 1 / 7), rtol=1e-6)


def test_unk_is_mean_of_trained_rows():
    v = Vocabulary(["a", "b"])
    E = _table(v, 3)
    model = build_context_free_ffn(NerConfig.defaults("cf-ffn", m=3, h=[2, 2]), E, v)
    np.testing.assert_allclose(model.embeds[F.MEDICATION].weights[UNK_ID], E[4:].mean(axis=0), rtol=1e-6)


def test_context_window_layout():
    doc = parse_i2b2("Took aspirin. Then slept\n", "")
    doc = preprocess_document(doc)
    v = build_vocab([doc])
    win = doc_windows(doc, v, 1)
    # sentence start: [PAD, center, right]
    assert list(win.ids[0]) == [PAD_ID, v.id("took"), v.id("aspirin")]
    # "aspirin" ends its sentence, so the right neighbour is PAD
    assert list(win.ids[1]) == [v.id("took"), v.id("aspirin"), PAD_ID]
    assert list(win.sentence) == [0, 0, 1, 1]
    assert doc_windows(doc, v, 0).ids.shape == (4, 1)


def test_runs_to_spans_examples():
    pos = [(1, i) for i in range(5)]
    assert runs_to_spans([0, 1, 1, 0, 2], pos, [0] * 5) == [(F.MEDICATION, TokenSpan(1, 1, 2)), (F.DOSAGE, TokenSpan(1, 4, 4))]
    assert runs_to_spans([0] * 5, pos, [0] * 5) == []
    assert runs_to_spans([1, 1, 1, 0, 0], pos, [0, 0, 1, 1, 1]) == [
        (F.MEDICATION, TokenSpan(1, 0, 1)), (F.MEDICATION, TokenSpan(1, 2, 2))]


def _fd_setup(arch, seed):
    docs = _corpus(2, seed=seed)
    v = build_vocab(docs)
    cfg = {"cf-ffn": dict(m=4, h=[3, 3]), "ca-ffn": dict(m=4, w=1, h=[5, 3]),
           "rnn": dict(m=4, w=1, h=[5], finetune=True)}[arch]
    with precision(64):
        model = build_model(NerConfig.defaults(arch, **cfg), _table(v, 4, seed), v, seed=seed)
    ids, codes, member = corpus_windows(docs, v, model.cfg.w)
    rows = np.random.default_rng(seed).choice(len(ids), size=6, replace=False)
    return model, ids[rows], codes[rows], member[rows]


@pytest.mark.parametrize("arch", ["cf-ffn", "ca-ffn", "rnn"])
def test_gradient_check(arch):
    for seed in range(3):
        with precision(64):
            model, ids, codes, member = _fd_setup(arch, seed)
            if arch == "rnn":
                err = finite_diff_check(lambda: ops.cross_entropy(model.logits(ids), codes), model.store)
            else:
                y = member[:, int(F.DOSAGE)].astype(np.int64)
                err = finite_diff_check(lambda: ops.cross_entropy(model.logits(F.DOSAGE, ids), y),
                                        model.stores[F.DOSAGE])
        assert err < 1e-4


def test_lr_zero_keeps_parameters():
    docs = _corpus(3)
    v = build_vocab(docs)
    model = build_model(NerConfig.defaults("rnn", m=8, h=[6], w=2, r=0.0, e=1), _table(v, 8), v)
    before = model.store.snapshot()
    train_ner(model, docs)
    for k, arr in model.store.snapshot().items():
        np.testing.assert_array_equal(arr, before[k])


def test_training_is_deterministic():
    docs = _corpus(3)
    v = build_vocab(docs)
    curves = []
    for _ in range(2):
        model = build_model(NerConfig.defaults("ca-ffn", m=8, h=[6, 4], e=2), _table(v, 8), v, seed=3)
        curves.append(train_ner(model, docs, seed=3)[1])
    assert curves[0] == curves[1]


def test_no_positive_instances():
    doc = preprocess_document(parse_i2b2("nothing here\n", ""))
    v = build_vocab([doc])
    model = build_model(NerConfig.defaults("cf-ffn", m=4, h=[2, 2]), _table(v, 4), v)
    with pytest.raises(NoPositiveInstances):
        train_ner(model, [doc])


@pytest.mark.slow
def test_rnn_overfits_small_corpus():
    docs = _corpus(20, seed=1)
    v = build_vocab(docs)
    model = build_model(NerConfig.defaults("rnn", m=16, w=4, e=30, r=0.01), _table(v, 16), v, seed=1)
    train_ner(model, docs, seed=1)
    ids, codes, _ = corpus_windows(docs, v, model.cfg.w)
    acc = (model.proba(ids).argmax(axis=1) == codes).mean()
    assert acc >= 0.95


def test_locality_of_predictions():
    docs = _corpus(2, seed=4)
    v = build_vocab(docs)
    model = build_model(NerConfig.defaults("ca-ffn", m=4, w=2, h=[5, 3]), _table(v, 4), v)
    doc = docs[0]
    base = predict_tokens(model, doc)
    # rewrite every token outside the first sentence of line 1
    sm_end = doc_windows(doc, v, 2).sentence
    first = [i for i, s in enumerate(sm_end) if s == 0]
    changed = [list(l) for l in doc.lines]
    for li, toks in enumerate(changed):
        for i in range(len(toks)):
            if not (li == 0 and i < len(first)):
                toks[i] = "zzz"
    doc2 = type(doc)(doc.doc_id, changed, [], sentences=doc.sentences)
    again = predict_tokens(model, doc2)
    for k in range(len(first)):
        assert again[k].scores == base[k].scores


def test_predict_and_checkpoint_round_trip(tmp_path):
    docs = _corpus(3)
    v = build_vocab(docs)
    for arch, kw in (("cf-ffn", dict(h=[4, 4])), ("rnn", dict(h=[4], w=2))):
        model = build_model(NerConfig.defaults(arch, m=6, e=1, **kw), _table(v, 6), v)
        train_ner(model, docs)
        spans = predict_spans(model, docs[0])
        save_model(model, tmp_path / f"{arch}.bin", seed=0)
        back = load_model(tmp_path / f"{arch}.bin")
        assert predict_spans(back, docs[0]) == spans
        toks = predict_tokens(back, docs[0])
        assert len(toks) == docs[0].num_tokens()
