"""Annotated corpus model, file format, pooling, metrics and synthetic data."""

from .i2b2 import parse_i2b2, read_corpus, read_document, serialize_annotations, serialize_document, write_corpus
from .pool import CorpusPool, Split, SplitSizes, YearCounts, content_hash, dedup_pool, split_corpus
from .stats import LabelReport, MetricsReport, corpus_metrics, label_metrics
from .synthetic import SyntheticConfig, default_config, gen_synthetic, gen_two_topic
from .types import FIELDS, RELATED_FIELDS, AnnotatedDocument, Annotation, Entry, FieldLabel, TokenSpan

__all__ = [
    "FIELDS",
    "RELATED_FIELDS",
    "AnnotatedDocument",
    "Annotation",
    "CorpusPool",
    "Entry",
    "FieldLabel",
    "LabelReport",
    "MetricsReport",
    "Split",
    "SplitSizes",
    "SyntheticConfig",
    "TokenSpan",
    "YearCounts",
    "content_hash",
    "corpus_metrics",
    "dedup_pool",
    "default_config",
    "gen_synthetic",
    "gen_two_topic",
    "label_metrics",
    "parse_i2b2",
    "read_corpus",
    "read_document",
    "serialize_annotations",
    "serialize_document",
    "split_corpus",
    "write_corpus",
]
