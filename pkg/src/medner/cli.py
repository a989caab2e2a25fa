"""Command-line entry point and the seeded end-to-end pipeline.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numeric
failure (NaN/Inf), 1 anything unexpected.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import platform
import sys
import zlib
from pathlib import Path

import numpy as np

from . import __version__
from .corpus import (
    FIELDS,
    AnnotatedDocument,
    Annotation,
    Entry,
    FieldLabel,
    SplitSizes,
    TokenSpan,
    corpus_metrics,
    dedup_pool,
    default_config,
    gen_synthetic,
    label_metrics,
    read_corpus,
    split_corpus,
    write_corpus,
)
from .corpus.stats import write_labels, write_metrics
from .corpus.synthetic import SyntheticConfig
from .embed_eval import (
    TABLE6_GRID,
    SweepPoint,
    build_partition,
    extrinsic_sweep,
    intrinsic_table,
    tsne_project,
    write_table4,
    write_table6,
    write_tsne_csv,
)
from .embeddings import build_vocab, load_embeddings, make_windows, save_embeddings, train_cbow, train_csg
from .errors import ConfigError, ConfigInvalid, DataError, MednerError, NumericError, StageFailure, TooFewPoints
from .metrics import (
    attribute_fields,
    build_lookup,
    score_corpus,
    score_relations,
    write_relation_table,
    write_table7,
)
from .ner import NerConfig, build_model, load_model, predict_tokens, save_model, train_ner
from .ner.data import doc_windows, runs_to_spans
from .numkit import set_precision
from .preprocess import corpus_vocab_report, preprocess_document
from .rel import RelConfig, build_rel_model, extract_relations, load_rel_model, make_instances, save_rel_model, train_rel
from .rel.data import doc_codes

log = logging.getLogger("medner")


def _exit_code(exc: BaseException) -> int:
    if isinstance(exc, StageFailure):
        exc = exc.cause
    if isinstance(exc, ConfigError):
        return 2
    if isinstance(exc, DataError):
        return 3
    if isinstance(exc, NumericError):
        return 4
    return 1


def stage_seed(master: int, name: str) -> int:
    """Independent, reproducible seed for a named stage."""
    return int(np.random.SeedSequence([master, zlib.crc32(name.encode())]).generate_state(1)[0])


def _read_json(path) -> dict:
    p = Path(path)
    if not p.is_file():
        raise ConfigInvalid(f"config file not found: {p}")
    try:
        return json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigInvalid(f"{p}: invalid JSON ({exc})") from exc


def _dump(data, path) -> None:
    Path(path).write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")


def _sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _read_docs(directory) -> list[AnnotatedDocument]:
    if not Path(directory).is_dir():
        raise ConfigInvalid(f"corpus directory not found: {directory}")
    return [preprocess_document(d) for d in read_corpus(directory)]


# -- prediction files ---------------------------------------------------------------

def scored_spans(model, doc) -> list[dict]:
    """Prediction records ``{doc_id, line, start, end, label, score}`` for one document.

    ``score`` is the mean probability of the label over the span's tokens.
    """
    preds = predict_tokens(model, doc)
    win = doc_windows(doc, model.vocab, model.cfg.w)
    out = []
    fields = [None] if model.kind == "multiclass" else list(FIELDS)
    for f in fields:
        if f is None:
            labels = np.array([int(p.label) for p in preds])
        else:
            labels = np.array([int(f) if p.scores[int(f)] > 0.5 else 0 for p in preds])
        for lab, span in runs_to_spans(labels, win.positions, win.sentence):
            idx = [win.positions.index(pos) for pos in span.positions()]
            score = float(np.mean([preds[i].scores[int(lab)] for i in idx]))
            out.append({"doc_id": doc.doc_id, "line": span.line_index, "start": span.token_start,
                        "end": span.token_end, "label": FieldLabel(lab).key, "score": round(score, 6)})
    return out


def write_predictions(records, path) -> None:
    with open(path, "w") as fh:
        for r in records:
            fh.write(json.dumps(r, sort_keys=True) + "\n")


def read_predictions(path) -> dict[str, list[tuple[FieldLabel, TokenSpan]]]:
    if not Path(path).is_file():
        raise ConfigInvalid(f"prediction file not found: {path}")
    out: dict[str, list] = {}
    for n, line in enumerate(Path(path).read_text().splitlines(), 1):
        if not line.strip():
            continue
        try:
            r = json.loads(line)
            span = TokenSpan(int(r["line"]), int(r["start"]), int(r["end"]))
            out.setdefault(r["doc_id"], []).append((FieldLabel.from_key(r["label"]), span))
        except (KeyError, ValueError, json.JSONDecodeError) as exc:
            raise DataError(f"{path}:{n}: bad prediction record ({exc})") from exc
    return out


def _codes_from_predictions(preds: dict[str, list]) -> dict[str, dict]:
    out: dict[str, dict] = {}
    for doc_id, spans in preds.items():
        codes = out.setdefault(doc_id, {})
        for lab, span in spans:
            for pos in span.positions():
                codes[pos] = min(codes.get(pos, 99), int(lab))
    return out


def relation_records(model, instances, extracted) -> list[dict]:
    """One ``{doc_id, medication_span, field, tokens}`` line per entry and field."""
    lookup = getattr(model, "lookup", {})
    out = []
    for x in instances:
        fields = attribute_fields(extracted[x.key], {}, lookup)
        for f, toks in fields.items():
            if toks:
                s = x.medication_span
                out.append({"doc_id": x.doc_id, "medication_span": [s.line_index, s.token_start, s.token_end],
                            "field": f.key if f is not None else "none", "tokens": toks})
    return out


def _entries_from_file(path, docs) -> list[AnnotatedDocument]:
    """Documents whose entries are only the medications listed in ``path``."""
    by_id = {d.doc_id: d for d in docs}
    wanted: dict[str, list[Entry]] = {}
    for n, line in enumerate(Path(path).read_text().splitlines(), 1):
        if not line.strip():
            continue
        try:
            r = json.loads(line)
            doc = by_id[r["doc_id"]]
            li, a, b = r["medication_span"]
        except (KeyError, ValueError, json.JSONDecodeError) as exc:
            raise DataError(f"{path}:{n}: bad entry record ({exc})") from exc
        span = TokenSpan(int(li), int(a), int(b))
        ann = Annotation(FieldLabel.MEDICATION, [span], " ".join(doc.span_tokens([span])))
        wanted.setdefault(doc.doc_id, []).append(Entry(ann))
    return [AnnotatedDocument(d.doc_id, d.lines, wanted[d.doc_id]) for d in docs if d.doc_id in wanted]


# -- subcommands ------------------------------------------------------------------------

def cmd_gen_synthetic(args) -> None:
    cfg = SyntheticConfig.load(args.config) if args.config else default_config()
    if args.n_annotated is not None:
        cfg.n_annotated = args.n_annotated
    if args.n_unannotated is not None:
        cfg.n_unannotated = args.n_unannotated
    un, ann = gen_synthetic(cfg, seed=args.seed)
    out = Path(args.out)
    write_corpus(un, out / "unannotated")
    write_corpus(ann, out / "annotated")
    log.info("wrote %d unannotated and %d annotated documents to %s", len(un), len(ann), out)


def cmd_preprocess(args) -> None:
    if not Path(args.inp).is_dir():
        raise ConfigInvalid(f"input directory not found: {args.inp}")
    docs = [preprocess_document(d) for d in read_corpus(args.inp)]
    write_corpus(docs, args.out)
    if args.vocab_report:
        _dump(corpus_vocab_report(docs), args.vocab_report)


def cmd_train_embeddings(args) -> None:
    docs = [d for directory in args.inp for d in _read_docs(directory)]
    train_docs = [d for directory in (args.train or []) for d in _read_docs(directory)]
    vocab = build_vocab(docs + train_docs, train_docs)
    trainer = train_cbow if args.algo == "cbow" else train_csg
    E = trainer(make_windows(docs + train_docs, vocab), vocab, m=args.dim, epochs=args.epochs, seed=args.seed)
    save_embeddings(E, args.out)


def cmd_eval_embeddings(args) -> None:
    train = _read_docs(args.train)
    cbow = load_embeddings(args.cbow)
    csg = load_embeddings(args.csg) if args.csg else None
    partition = build_partition(train, cbow.vocab)
    if args.intrinsic:
        tables = {"CBOW": intrinsic_table(cbow, partition)}
        if csg is not None:
            tables["CSG"] = intrinsic_table(csg, partition)
        if args.report:
            write_table4(tables, args.report)
        if args.tsne_out:
            tokens, labels, X = tsne_points(cbow, partition, args.tsne_max)
            res = tsne_project(X, seed=args.seed)
            write_tsne_csv(tokens, labels, res.Y, args.tsne_out)
    if args.extrinsic:
        if csg is None:
            raise ConfigInvalid("the extrinsic sweep needs both --cbow and --csg embeddings")
        sweep = _read_json(args.sweep) if args.sweep else {}
        res = extrinsic_sweep(cbow, csg, partition, **_sweep_kwargs(sweep, args.seed))
        write_table6(res, args.report)


def cmd_train_ner(args) -> None:
    overrides = _read_json(args.config) if args.config else {}
    E = load_embeddings(args.embeddings)
    cfg = NerConfig.defaults(args.arch, **{"m": E.m, **overrides})
    model = build_model(cfg, E, E.vocab, seed=args.seed)
    train_ner(model, _read_docs(args.train), seed=args.seed)
    save_model(model, args.out, seed=args.seed)


def cmd_predict(args) -> None:
    model = load_model(args.model)
    write_predictions([r for d in _read_docs(args.inp) for r in scored_spans(model, d)], args.out)


def cmd_evaluate(args) -> None:
    gold = _read_docs(args.gold)
    counts = score_corpus(gold, read_predictions(args.pred))
    write_table7({args.name: counts}, args.report)


def cmd_train_rel(args) -> None:
    overrides = _read_json(args.config) if args.config else {}
    E = load_embeddings(args.embeddings)
    base = {"m": E.m, **overrides}
    if args.arch == "encdec":
        base["attention"] = args.attention
    cfg = RelConfig.defaults(args.arch, **base)
    docs = _read_docs(args.train)
    model = build_rel_model(cfg, E, E.vocab, seed=args.seed)
    train_rel(model, make_instances(docs, cfg.lines), seed=args.seed)
    save_rel_model(model, args.out, seed=args.seed, lookup=build_lookup(docs))


def cmd_extract_rel(args) -> None:
    model = load_rel_model(args.model)
    full = _read_docs(args.docs)
    if args.pred:
        codes = _codes_from_predictions(read_predictions(args.pred))
    else:
        codes = {d.doc_id: doc_codes(d) for d in full}
    docs = _entries_from_file(args.entries, full) if args.entries else full
    codes = {d.doc_id: codes.get(d.doc_id, {}) for d in docs}
    inst = make_instances(docs, model.cfg.lines, codes)
    write_predictions(relation_records(model, inst, extract_relations(model, inst)), args.out)


def cmd_run_pipeline(args) -> None:
    cfg = _read_json(args.config)
    if args.seed_given:
        cfg["seed"] = args.seed
    run_pipeline(cfg, args.out, base_dir=Path(args.config).resolve().parent)


# -- pipeline ------------------------------------------------------------------------------

PIPELINE_KEYS = {"seed", "corpus", "split", "embeddings", "embed_eval", "ner", "rel"}


def tsne_points(E, partition, max_points: int):
    """Labelled training words (first field wins) plus ``none`` words, capped per class."""
    tokens, labels, rows = [], [], []
    seen: set[int] = set()
    per_class = max(1, max_points // (len(FIELDS) + 1))
    classes = [(f.title, partition.tokens(f)) for f in FIELDS] + [("None", partition.tokens(None))]
    for name, ids in classes:
        ids = [i for i in ids if i not in seen][:per_class]
        seen.update(ids)
        tokens += [E.vocab.token(i) for i in ids]
        labels += [name] * len(ids)
        rows += ids
    return tokens, labels, np.asarray(E.weights, dtype=np.float64)[rows]


def _sweep_kwargs(sweep: dict, seed: int) -> dict:
    pts = sweep.get("points", "table6")
    points = TABLE6_GRID if pts == "table6" else tuple(SweepPoint(**p) for p in pts)
    kw = {"sweep": points, "seed": seed}
    for k in ("n_train", "n_test", "p", "e", "b"):
        if k in sweep:
            kw[k] = sweep[k]
    if "h" in sweep:
        kw["h"] = tuple(sweep["h"])
    return kw


def validate_pipeline(cfg: dict, base_dir: Path) -> dict:
    """Schema checks and path resolution; raises ConfigInvalid before any stage runs."""
    extra = set(cfg) - PIPELINE_KEYS
    if extra:
        raise ConfigInvalid(f"unknown pipeline keys: {sorted(extra)}")
    if not isinstance(cfg.get("seed", 0), int):
        raise ConfigInvalid("seed must be an integer")
    corpus = cfg.get("corpus", {"synthetic": {}})
    if "synthetic" not in corpus:
        for key in ("annotated", "unannotated"):
            if key not in corpus:
                raise ConfigInvalid(f"corpus needs 'synthetic' or both 'annotated' and 'unannotated' ({key} missing)")
            p = Path(corpus[key])
            p = p if p.is_absolute() else base_dir / p
            if not p.is_dir():
                raise ConfigInvalid(f"corpus path not found: {p}")
            corpus[key] = str(p)
    for arch in cfg.get("ner", {}).get("archs", []):
        NerConfig.defaults(arch, **cfg.get("ner", {}).get("overrides", {}).get(arch, {}))
    for arch in cfg.get("rel", {}).get("archs", []):
        RelConfig.defaults(arch, **cfg.get("rel", {}).get("overrides", {}).get(arch, {}))
    return {**cfg, "corpus": corpus}


class _Run:
    """Run directory bookkeeping: one manifest per stage, reports under ``reports/``."""

    def __init__(self, out: Path, cfg: dict):
        self.out, self.cfg = out, cfg
        self.seed = int(cfg.get("seed", 0))
        for sub in ("reports", "manifests", "checkpoints", "data"):
            (out / sub).mkdir(parents=True, exist_ok=True)
        self.upstream = hashlib.sha256(json.dumps(cfg, sort_keys=True).encode()).hexdigest()

    def stage(self, name: str, fn):
        seed = stage_seed(self.seed, name)
        log.info("stage %s (seed %d)", name, seed)
        try:
            outputs = fn(seed)
        except MednerError as exc:
            raise StageFailure(name, exc) from exc
        files = {str(p.relative_to(self.out)): _sha256(p) for p in sorted(outputs)}
        manifest = {
            "stage": name,
            "seed": seed,
            "master_seed": self.seed,
            "inputs_sha256": self.upstream,
            "outputs": files,
            "versions": {"medner": __version__, "numpy": np.__version__, "python": platform.python_version()},
        }
        _dump(manifest, self.out / "manifests" / f"{name}.json")
        self.upstream = hashlib.sha256(json.dumps(files, sort_keys=True).encode() + self.upstream.encode()).hexdigest()


def run_pipeline(cfg: dict, out, base_dir: Path | str = ".") -> Path:
    """Data -> preprocess -> embeddings -> embedding eval -> NER -> relations -> reports."""
    cfg = validate_pipeline(dict(cfg), Path(base_dir))
    out = Path(out)
    run = _Run(out, cfg)
    rep = out / "reports"
    state: dict = {}

    def data(seed):
        corpus = cfg.get("corpus", {"synthetic": {}})
        if "synthetic" in corpus:
            un, ann = gen_synthetic(default_config(**corpus["synthetic"]), seed=seed)
        else:
            un, ann = read_corpus(corpus["unannotated"]), read_corpus(corpus["annotated"])
        pool = dedup_pool([(None, un + ann)])
        sz = cfg.get("split", {})
        split = split_corpus(pool, SplitSizes(sz.get("validation", 10), sz.get("test", 10), sz.get("model_train")),
                             seed=seed)
        by_id = {d.doc_id: d for d in pool.documents}
        state["raw"] = {k: [by_id[i] for i in ids] for k, ids in split.to_dict().items()}
        _dump(split.to_dict(), out / "data" / "split.json")
        write_metrics(corpus_metrics(pool.documents), json_path=rep / "corpus_metrics.json")
        write_labels(label_metrics(pool.annotated), csv_path=rep / "labels.csv")
        return [out / "data" / "split.json", rep / "corpus_metrics.json", rep / "labels.csv"]

    def prep(seed):
        state["docs"] = {k: [preprocess_document(d) for d in v] for k, v in state["raw"].items()}
        _dump(corpus_vocab_report(state["docs"]["model_train"]), out / "data" / "vocab_report.json")
        return [out / "data" / "vocab_report.json"]

    def embeddings(seed):
        ec = cfg.get("embeddings", {})
        docs = state["docs"]
        train = docs["model_train"]
        vocab = build_vocab(docs["embedding_train"] + train, train)
        windows = list(make_windows(docs["embedding_train"] + train, vocab))
        kw = {"m": ec.get("m", 100), "epochs": ec.get("epochs", 5), "seed": seed}
        state["E"] = {"cbow": train_cbow(windows, vocab, **kw), "csg": train_csg(windows, vocab, **kw)}
        paths = []
        for algo, E in state["E"].items():
            save_embeddings(E, out / "checkpoints" / f"{algo}.txt")
            paths.append(out / "checkpoints" / f"{algo}.txt")
        return paths

    def embed_eval(seed):
        ev = cfg.get("embed_eval", {})
        E = state["E"]
        part = build_partition(state["docs"]["model_train"], E["cbow"].vocab)
        write_table4({"CBOW": intrinsic_table(E["cbow"], part), "CSG": intrinsic_table(E["csg"], part)},
                     rep / "table4.csv")
        paths = [rep / "table4.csv"]
        if ev.get("tsne", True):
            tokens, labels, X = tsne_points(E["cbow"], part, ev.get("tsne_max_points", 350))
            try:
                res = tsne_project(X, perplexity=ev.get("perplexity", 30.0), iters=ev.get("tsne_iters", 1000), seed=seed)
                write_tsne_csv(tokens, labels, res.Y, rep / "tsne.csv")
                paths.append(rep / "tsne.csv")
            except TooFewPoints as exc:
                log.warning("skipping t-SNE: %s", exc)
        if "sweep" in ev:
            res = extrinsic_sweep(E["cbow"], E["csg"], part, **_sweep_kwargs(ev["sweep"], seed))
            write_table6(res, rep / "table6.csv")
            paths.append(rep / "table6.csv")
        return paths

    def ner(seed):
        nc = cfg.get("ner", {})
        algo = cfg.get("embeddings", {}).get("ner_algorithm", "cbow")
        E = state["E"][algo]
        train, test = state["docs"]["model_train"], state["docs"]["test"]
        rows, paths = {}, []
        for arch in nc.get("archs", ["cf-ffn", "ca-ffn", "rnn"]):
            ncfg = NerConfig.defaults(arch, **{"m": E.m, **nc.get("overrides", {}).get(arch, {})})
            model = build_model(ncfg, E, E.vocab, seed=seed)
            train_ner(model, train, seed=seed)
            ckpt = out / "checkpoints" / f"ner-{arch}.bin"
            save_model(model, ckpt, seed=seed)
            records = [r for d in test for r in scored_spans(model, d)]
            write_predictions(records, rep / f"predictions-{arch}.jsonl")
            preds: dict[str, list] = {}
            for r in records:
                preds.setdefault(r["doc_id"], []).append(
                    (FieldLabel.from_key(r["label"]), TokenSpan(r["line"], r["start"], r["end"])))
            rows[arch] = score_corpus(test, preds)
            paths += [ckpt, ckpt.with_name(ckpt.name + ".json"), rep / f"predictions-{arch}.jsonl"]
        write_table7(rows, rep / "table7.csv")
        return paths + [rep / "table7.csv"]

    def rel(seed):
        rc = cfg.get("rel", {})
        algo = cfg.get("embeddings", {}).get("ner_algorithm", "cbow")
        E = state["E"][algo]
        train, test = state["docs"]["model_train"], state["docs"]["test"]
        lookup = build_lookup(train)
        rows, paths = {}, []
        variants = []
        for arch in rc.get("archs", ["seq2seq", "encdec"]):
            atts = rc.get("attentions", ["bahdanau", "luong"]) if arch == "encdec" else [None]
            variants += [(arch, a) for a in atts]
        for arch, att in variants:
            over = {"m": E.m, **rc.get("overrides", {}).get(arch, {})}
            if att:
                over["attention"] = att
            rcfg = RelConfig.defaults(arch, **over)
            model = build_rel_model(rcfg, E, E.vocab, seed=seed)
            train_rel(model, make_instances(train, rcfg.lines), seed=seed)
            name = arch if att is None else f"{arch}-{att}"
            ckpt = out / "checkpoints" / f"rel-{name}.bin"
            save_rel_model(model, ckpt, seed=seed, lookup=lookup)
            inst = make_instances(test, rcfg.lines)
            rows[name] = score_relations({x.key: x.entry for x in inst}, extract_relations(model, inst), lookup)
            paths += [ckpt, ckpt.with_name(ckpt.name + ".json")]
        write_relation_table(rows, rep / "relations.csv")
        return paths + [rep / "relations.csv"]

    run.stage("data", data)
    run.stage("preprocess", prep)
    run.stage("embeddings", embeddings)
    run.stage("embed_eval", embed_eval)
    if cfg.get("ner", {}).get("archs", ["x"]):
        run.stage("ner", ner)
    if cfg.get("rel", {}).get("archs", ["x"]):
        run.stage("rel", rel)
    return out


# -- argument parsing --------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="master random seed (default 0)")
    common.add_argument("--threads", type=int, default=None, help="worker threads for compiled kernels")
    common.add_argument("--precision", type=int, choices=(32, 64), default=None, help="float width for training")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="medner", description=__doc__.splitlines()[0], parents=[common])
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, fn, help_):
        sp = sub.add_parser(name, help=help_, parents=[common])
        sp.set_defaults(func=fn)
        return sp

    sp = add("gen-synthetic", cmd_gen_synthetic, "write a synthetic annotated corpus")
    sp.add_argument("--out", required=True)
    sp.add_argument("--config", help="SyntheticConfig JSON (default: bundled lexicon)")
    sp.add_argument("--n-annotated", type=int)
    sp.add_argument("--n-unannotated", type=int)

    sp = add("preprocess", cmd_preprocess, "normalise tokens of a corpus directory")
    sp.add_argument("--in", dest="inp", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--vocab-report")

    sp = add("train-embeddings", cmd_train_embeddings, "train CBOW or skip-gram embeddings")
    sp.add_argument("--in", dest="inp", action="append", required=True, help="corpus directory (repeatable)")
    sp.add_argument("--train", action="append", help="model-training corpus, included in the vocabulary")
    sp.add_argument("--algo", choices=("cbow", "csg"), default="cbow")
    sp.add_argument("--dim", type=int, default=100)
    sp.add_argument("--epochs", type=int, default=5)
    sp.add_argument("--out", required=True)

    sp = add("eval-embeddings", cmd_eval_embeddings, "intrinsic tables, t-SNE and the extrinsic sweep")
    sp.add_argument("--cbow", required=True)
    sp.add_argument("--csg")
    sp.add_argument("--train", required=True, help="annotated corpus defining the word classes")
    sp.add_argument("--intrinsic", action="store_true")
    sp.add_argument("--extrinsic", action="store_true")
    sp.add_argument("--tsne-out")
    sp.add_argument("--tsne-max", type=int, default=350)
    sp.add_argument("--sweep", help="sweep JSON: points ('table6' or a list), n_train, n_test, p")
    sp.add_argument("--report", required=True)

    sp = add("train-ner", cmd_train_ner, "train a term classifier")
    sp.add_argument("--arch", choices=("cf-ffn", "ca-ffn", "rnn"), required=True)
    sp.add_argument("--config", help="JSON of NerConfig overrides")
    sp.add_argument("--embeddings", required=True)
    sp.add_argument("--train", required=True)
    sp.add_argument("--out", required=True)

    sp = add("predict", cmd_predict, "predict field spans")
    sp.add_argument("--model", required=True)
    sp.add_argument("--in", dest="inp", required=True)
    sp.add_argument("--out", required=True)

    sp = add("evaluate", cmd_evaluate, "score predictions against gold annotations")
    sp.add_argument("--gold", required=True)
    sp.add_argument("--pred", required=True)
    sp.add_argument("--report", required=True)
    sp.add_argument("--name", default="model", help="model name for the report rows")

    sp = add("train-rel", cmd_train_rel, "train a relation extractor")
    sp.add_argument("--arch", choices=("seq2seq", "encdec"), required=True)
    sp.add_argument("--attention", choices=("bahdanau", "luong"), default="bahdanau")
    sp.add_argument("--config", help="JSON of RelConfig overrides")
    sp.add_argument("--embeddings", required=True)
    sp.add_argument("--train", required=True)
    sp.add_argument("--out", required=True)

    sp = add("extract-rel", cmd_extract_rel, "extract related tokens per medication")
    sp.add_argument("--model", required=True)
    sp.add_argument("--docs", required=True)
    sp.add_argument("--entries", help="JSONL of {doc_id, medication_span}; default: every annotated entry")
    sp.add_argument("--pred", help="term predictions supplying the known field codes (default: gold)")
    sp.add_argument("--out", required=True)

    sp = add("run-pipeline", cmd_run_pipeline, "run every stage from one JSON config")
    sp.add_argument("--config", required=True)
    sp.add_argument("--out", required=True)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    args.seed_given = args.seed is not None
    args.seed = 0 if args.seed is None else args.seed
    try:
        if args.precision:
            set_precision(args.precision)
        if args.threads:
            import numba

            numba.set_num_threads(min(args.threads, numba.config.NUMBA_NUM_THREADS))
        args.func(args)
    except MednerError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return _exit_code(exc)
    return 0


if __name__ == "__main__":
    sys.exit(main())
