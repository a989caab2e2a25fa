"""Relation extraction: BOW-initialised GRU tagger and attentional encoder-decoder."""

from ..metrics import attribute_fields, build_lookup
from .data import ARCHS, ATTENTIONS, Batch, RelConfig, RelInstance, bow_repr, doc_codes, gold_sequence, make_batch, make_instances
from .models import EncoderDecoder, Seq2SeqTagger, build_encdec, build_rel_model, build_seq2seq_tagger
from .train import extract_relations, load_rel_model, predict_tags, save_rel_model, train_rel

__all__ = [
    "ARCHS",
    "ATTENTIONS",
    "Batch",
    "EncoderDecoder",
    "RelConfig",
    "RelInstance",
    "Seq2SeqTagger",
    "attribute_fields",
    "bow_repr",
    "build_encdec",
    "build_lookup",
    "build_rel_model",
    "build_seq2seq_tagger",
    "doc_codes",
    "extract_relations",
    "gold_sequence",
    "load_rel_model",
    "make_batch",
    "make_instances",
    "predict_tags",
    "save_rel_model",
    "train_rel",
]
