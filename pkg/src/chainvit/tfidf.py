"""TF-IDF over opcode "documents".

TF is the raw term count and IDF is ``ln(N / (df + 1))`` where ``N`` is the
number of training documents and ``df`` the number containing the term. The
``+1`` sits in the denominator only, so a term present in every document gets
a small negative weight; that is kept as is.
"""

from __future__ import annotations

import math
import os
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .container import ContainerError, read_container, write_container

FORMAT_VERSION = 1
_KIND = "tfidf"


class TfidfFitError(ValueError):
    pass


@dataclass(frozen=True)
class TfidfModel:
    vocabulary: tuple[str, ...]
    idf: np.ndarray
    corpus_size: int
    log_base: str = "e"

    def __post_init__(self):
        if len(set(self.vocabulary)) != len(self.vocabulary):
            raise ValueError("vocabulary entries must be unique")
        if len(self.idf) != len(self.vocabulary):
            raise ValueError("idf length must equal vocabulary size")
        index = {term: j for j, term in enumerate(self.vocabulary)}
        object.__setattr__(self, "_index", index)
        self.idf.setflags(write=False)

    @property
    def d_op(self) -> int:
        return len(self.vocabulary)

    def transform(self, seq: Iterable[str]) -> np.ndarray:
        """Raw-count TF times IDF, one entry per vocabulary term.

        Out-of-vocabulary terms are ignored.
        """
        counts = np.zeros(self.d_op, dtype=np.float64)
        index = self._index
        for term, c in Counter(seq).items():
            j = index.get(term)
            if j is not None:
                counts[j] = c
        return counts * self.idf

    def transform_many(self, seqs: Iterable[Iterable[str]]) -> np.ndarray:
        rows = [self.transform(s) for s in seqs]
        return np.stack(rows) if rows else np.zeros((0, self.d_op))

    def save(self, path: str | os.PathLike) -> None:
        meta = {
            "format_version": FORMAT_VERSION,
            "log_base": self.log_base,
            "d_op": self.d_op,
            "corpus_size": self.corpus_size,
            "vocabulary": list(self.vocabulary),
        }
        write_container(path, _KIND, FORMAT_VERSION, meta, {"idf": self.idf.astype("<f8")})

    @classmethod
    def load(cls, path: str | os.PathLike) -> TfidfModel:
        meta, blobs = read_container(path, _KIND, FORMAT_VERSION)
        try:
            vocab = tuple(meta["vocabulary"])
            idf = blobs["idf"].astype(np.float64)
            if meta["d_op"] != len(vocab):
                raise ContainerError(f"{path}: d_op does not match vocabulary length")
            return cls(vocab, idf, int(meta["corpus_size"]), meta["log_base"])
        except (KeyError, TypeError) as exc:
            raise ContainerError(f"{path}: missing field {exc}") from exc


def fit(corpus: Sequence[Iterable[str]]) -> TfidfModel:
    """Fit vocabulary (sorted lexicographically) and IDF weights on ``corpus``."""
    if not corpus:
        raise TfidfFitError("cannot fit TF-IDF on an empty corpus")
    doc_freq: Counter[str] = Counter()
    for doc in corpus:
        doc_freq.update(set(doc))
    if not doc_freq:
        raise TfidfFitError("corpus contains no terms")
    vocab = tuple(sorted(doc_freq))
    n = len(corpus)
    idf = np.array([math.log(n / (doc_freq[t] + 1)) for t in vocab], dtype=np.float64)
    return TfidfModel(vocab, idf, n)
