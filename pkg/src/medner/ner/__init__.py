"""Term classifiers: context-free FFN, context-aware FFN and windowed LSTM."""

from .config import ARCHS, NerConfig
from .data import corpus_windows, doc_windows, runs_to_spans
from .models import (
    FieldFFN,
    RNNClassifier,
    build_context_aware_ffn,
    build_context_free_ffn,
    build_model,
    build_rnn_classifier,
    prepare_table,
)
from .train import TokenPrediction, load_model, predict_corpus, predict_spans, predict_tokens, save_model, train_ner

__all__ = [
    "ARCHS",
    "FieldFFN",
    "NerConfig",
    "RNNClassifier",
    "TokenPrediction",
    "build_context_aware_ffn",
    "build_context_free_ffn",
    "build_model",
    "build_rnn_classifier",
    "corpus_windows",
    "doc_windows",
    "load_model",
    "predict_corpus",
    "predict_spans",
    "predict_tokens",
    "prepare_table",
    "runs_to_spans",
    "save_model",
    "train_ner",
]
