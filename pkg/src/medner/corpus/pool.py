from __future__ import annotations

import hashlib
from dataclasses import dataclass, field, replace

import numpy as np

from ..errors import InsufficientDocuments
from .types import AnnotatedDocument


def content_hash(doc: AnnotatedDocument) -> str:
    """sha1 of the lowercased, whitespace-normalised raw text."""
    norm = " ".join(doc.text.lower().split())
    return hashlib.sha1(norm.encode("utf-8")).hexdigest()


@dataclass
class YearCounts:
    year: int
    total: int = 0
    unique_unannotated: int = 0
    unique_annotated: int = 0


@dataclass
class CorpusPool:
    unannotated: list[AnnotatedDocument] = field(default_factory=list)
    annotated: list[AnnotatedDocument] = field(default_factory=list)
    content_hashes: set[str] = field(default_factory=set)
    counts: list[YearCounts] = field(default_factory=list)

    @property
    def documents(self) -> list[AnnotatedDocument]:
        return self.unannotated + self.annotated

    def __len__(self) -> int:
        return len(self.unannotated) + len(self.annotated)

    def as_corpora(self) -> list[tuple[int | None, list[AnnotatedDocument]]]:
        """Regroup the pooled documents by source year, in year order."""
        by_year: dict[int | None, list[AnnotatedDocument]] = {}
        for d in sorted(self.documents, key=lambda d: (d.source_year is None, d.source_year or 0)):
            by_year.setdefault(d.source_year, []).append(d)
        return list(by_year.items())

    def totals(self) -> YearCounts:
        out = YearCounts(year=0)
        for c in self.counts:
            out.total += c.total
            out.unique_unannotated += c.unique_unannotated
            out.unique_annotated += c.unique_annotated
        return out


def dedup_pool(corpora) -> CorpusPool:
    """Pool ``[(year, docs), ...]`` in order, keeping the first copy of each text."""
    pool = CorpusPool()
    for year, docs in corpora:
        counts = YearCounts(year=year)
        for d in docs:
            counts.total += 1
            h = content_hash(d)
            if h in pool.content_hashes:
                continue
            pool.content_hashes.add(h)
            if d.source_year is None:
                d = replace(d, source_year=year)
            if d.is_annotated:
                pool.annotated.append(d)
                counts.unique_annotated += 1
            else:
                pool.unannotated.append(d)
                counts.unique_unannotated += 1
        pool.counts.append(counts)
    return pool


@dataclass(frozen=True)
class SplitSizes:
    validation: int = 10
    test: int = 10
    # None: every remaining annotated document
    model_train: int | None = 238


@dataclass
class Split:
    embedding_train: list[str]
    model_train: list[str]
    validation: list[str]
    test: list[str]

    def sets(self) -> dict[str, set[str]]:
        return {
            "embedding_train": set(self.embedding_train),
            "model_train": set(self.model_train),
            "validation": set(self.validation),
            "test": set(self.test),
        }

    def to_dict(self) -> dict[str, list[str]]:
        return {
            "embedding_train": list(self.embedding_train),
            "model_train": list(self.model_train),
            "validation": list(self.validation),
            "test": list(self.test),
        }


def split_corpus(pool: CorpusPool, sizes: SplitSizes = SplitSizes(), seed: int = 0) -> Split:
    """Draw validation, test and model-train ids uniformly from annotated docs.

    Annotated documents left over go to embedding training together with all
    unannotated ones, so the four sets partition the pool.
    """
    ids = [d.doc_id for d in pool.annotated]
    n_train = len(ids) - sizes.validation - sizes.test if sizes.model_train is None else sizes.model_train
    need = sizes.validation + sizes.test + n_train
    if min(sizes.validation, sizes.test, n_train) < 0 or need > len(ids):
        raise InsufficientDocuments(f"split needs {need} annotated documents, pool has {len(ids)}")
    order = np.random.default_rng(seed).permutation(len(ids))
    picked = [ids[i] for i in order]
    val = picked[: sizes.validation]
    test = picked[sizes.validation: sizes.validation + sizes.test]
    train = picked[sizes.validation + sizes.test: need]
    rest = picked[need:]
    emb = [d.doc_id for d in pool.unannotated] + sorted(rest)
    return Split(emb, sorted(train), sorted(val), sorted(test))
