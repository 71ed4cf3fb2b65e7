"""TF-IDF weighting and cosine-similarity retrieval over document collections"""

import logging
import math

from collections import Counter
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from scipy import sparse

from .errors import DomainError

log = logging.getLogger(__name__)


class WeightScheme(str, Enum):
    """How term frequencies are weighted by document frequencies."""

    LINEAR = "paper"
    """`tf × N / n_t`, with no logarithm"""

    LOG_IDF = "log-idf"
    """`tf × ln(N / n_t)`, the conventional variant"""


@dataclass(frozen=True)
class CorpusStats:
    """The collection statistics used for weighting: document frequencies (`n_t`) and the number of documents (`N`)."""

    df: Mapping[str, int] = field(repr=False)
    n_docs: int = 0

    @classmethod
    def of(cls, docs: Iterable[Mapping[str, int]]) -> "CorpusStats":
        """Computes the statistics of a collection of term frequency maps.

        Args:
            docs (Iterable[Mapping[str, int]]): The term frequencies of each document of the collection.

        Returns:
            CorpusStats: The statistics of the collection.
        """
        df = Counter()
        n = 0
        for tf in docs:
            df.update(tf.keys())
            n += 1

        return cls(dict(df), n)


@dataclass(frozen=True)
class WeightedVector:
    """A sparse vector of non-negative TF-IDF weights, with its Euclidean norm precomputed."""

    weights: Mapping[str, float]
    norm: float = 0.0

    @classmethod
    def of(cls, weights: Mapping[str, float]) -> "WeightedVector":
        """Creates a new `WeightedVector`, computing its norm.

        Args:
            weights (Mapping[str, float]): term -> weight.  Weights must be non-negative.

        Returns:
            WeightedVector: The new vector.
        """
        return cls(dict(weights), math.sqrt(math.fsum(w * w for w in weights.values())))


def _idf(n_t: int | np.ndarray, n_docs: int, scheme: WeightScheme) -> float | np.ndarray:
    if scheme == WeightScheme.LOG_IDF:
        return np.log(n_docs / n_t)

    return n_docs / n_t


def tfidf_weight(tf: int, n_t: int, n_docs: int, scheme: WeightScheme = WeightScheme.LINEAR) -> float:
    """Computes the TF-IDF weight of a term in a document.

    Args:
        tf (int): The number of occurrences of the term in the document (`f_{t,d}`), at least 1.
        n_t (int): The number of documents of the collection containing the term, in `[1, n_docs]`.
        n_docs (int): The number of documents in the collection (`N`).
        scheme (WeightScheme, optional): The weighting scheme. Defaults to WeightScheme.LINEAR.

    Raises:
        DomainError: If any argument is outside of its domain.

    Returns:
        float: `tf × N / n_t` for `paper`, `tf × ln(N / n_t)` for `log-idf`.
    """
    if n_docs < 1 or n_t < 1:
        raise DomainError(f"document counts must be positive, got n_t={n_t}, N={n_docs}")
    if n_t > n_docs:
        raise DomainError(f"a term cannot appear in more documents ({n_t}) than there are ({n_docs})")
    if tf < 1:
        raise DomainError(f"term frequency must be at least 1, got {tf}")

    return tf * float(_idf(n_t, n_docs, WeightScheme(scheme)))


def vectorize(term_freqs: Mapping[str, int], stats: CorpusStats, scheme: WeightScheme = WeightScheme.LINEAR) -> WeightedVector:
    """Weights a document (or query) against the statistics of a collection.  Terms which do not occur in the collection are left out of the vector.

    Args:
        term_freqs (Mapping[str, int]): term -> number of occurrences in the document.
        stats (CorpusStats): The statistics of the collection.
        scheme (WeightScheme, optional): The weighting scheme. Defaults to WeightScheme.LINEAR.

    Returns:
        WeightedVector: The weighted vector.
    """
    return WeightedVector.of({t: tfidf_weight(tf, n_t, stats.n_docs, scheme) for t, tf in term_freqs.items() if (n_t := stats.df.get(t, 0))})


def cosine(l: WeightedVector, s: WeightedVector) -> float:
    """Computes the cosine similarity of two vectors.

    Args:
        l (WeightedVector): The first vector (typically the query)
        s (WeightedVector): The second vector (typically a document)

    Returns:
        float: `l·s / (|l||s|)`, in `[0, 1]`.  `0` if either vector has norm `0`.
    """
    if not l.norm or not s.norm:
        return 0.0

    small, large = (l.weights, s.weights) if len(l.weights) <= len(s.weights) else (s.weights, l.weights)
    dot = math.fsum(w * large[t] for t, w in small.items() if t in large)

    return min(1.0, max(0.0, dot / (l.norm * s.norm)))


class SparseIndex:
    """A collection of weighted documents stored as a CSR matrix (one row per document), for computing every similarity to a query at once."""

    def __init__(self, matrix: sparse.csr_matrix, vocabulary: Mapping[str, int]) -> None:
        """Initializer, creates a new `SparseIndex`.  Prefer `build()` or `from_vectors()`.

        Args:
            matrix (sparse.csr_matrix): The weights, documents × terms
            vocabulary (Mapping[str, int]): term -> column of `matrix`
        """
        self.matrix = matrix
        self.vocabulary = vocabulary
        self.norms: np.ndarray = np.sqrt(np.asarray(matrix.multiply(matrix).sum(axis=1), dtype=np.float64).ravel())

    @property
    def n_docs(self) -> int:
        """The number of documents (rows) of this index."""
        return self.matrix.shape[0]

    @classmethod
    def _assemble(cls, rows: list[int], terms: list[str], values: list[float], n_docs: int, vocabulary: Mapping[str, int], idf: np.ndarray | None = None) -> "SparseIndex":
        data = np.asarray(values, dtype=np.float64)
        cols = np.fromiter((vocabulary[t] for t in terms), dtype=np.int64, count=len(terms))
        if idf is not None:
            data = data * idf[cols]

        return cls(sparse.csr_matrix((data, (np.asarray(rows, dtype=np.int64), cols)), shape=(n_docs, len(vocabulary))), vocabulary)

    @classmethod
    def build(cls, docs: Sequence[Mapping[str, int]], stats: CorpusStats, scheme: WeightScheme = WeightScheme.LINEAR) -> "SparseIndex":
        """Weights the term frequencies of a collection and indexes them.

        Args:
            docs (Sequence[Mapping[str, int]]): The term frequencies of each document, in doc_id order.
            stats (CorpusStats): The statistics of the collection `docs` belongs to.
            scheme (WeightScheme, optional): The weighting scheme. Defaults to WeightScheme.LINEAR.

        Returns:
            SparseIndex: The index, with row `i` holding the vector of `docs[i]`.
        """
        vocabulary = {t: i for i, t in enumerate(sorted(stats.df))}
        idf = np.asarray(_idf(np.fromiter((stats.df[t] for t in vocabulary), dtype=np.float64, count=len(vocabulary)), stats.n_docs, WeightScheme(scheme)), dtype=np.float64) if vocabulary else np.zeros(0)

        rows, terms, values = [], [], []
        for i, tf in enumerate(docs):
            rows.extend([i] * len(tf))
            terms.extend(tf.keys())
            values.extend(tf.values())

        return cls._assemble(rows, terms, values, len(docs), vocabulary, idf)

    @classmethod
    def from_vectors(cls, vectors: Sequence[WeightedVector]) -> "SparseIndex":
        """Indexes already weighted vectors.

        Args:
            vectors (Sequence[WeightedVector]): The vectors, row `i` of the index holds `vectors[i]`.

        Returns:
            SparseIndex: The new index.
        """
        vocabulary = {t: i for i, t in enumerate(sorted({t for v in vectors for t in v.weights}))}

        rows, terms, values = [], [], []
        for i, v in enumerate(vectors):
            rows.extend([i] * len(v.weights))
            terms.extend(v.weights.keys())
            values.extend(v.weights.values())

        return cls._assemble(rows, terms, values, len(vectors), vocabulary)

    def similarities(self, query: WeightedVector) -> np.ndarray:
        """Computes the cosine similarity between `query` and every document of this index.

        Args:
            query (WeightedVector): The query vector.

        Returns:
            np.ndarray: The similarities, indexed by doc_id, each in `[0, 1]`.
        """
        scores = np.zeros(self.n_docs, dtype=np.float64)
        if not query.norm or not self.n_docs:
            return scores

        q = np.zeros(len(self.vocabulary), dtype=np.float64)
        for t, w in query.weights.items():
            if (col := self.vocabulary.get(t)) is not None:
                q[col] = w

        denominators = self.norms * query.norm
        np.divide(self.matrix @ q, denominators, out=scores, where=denominators > 0)

        return np.clip(scores, 0.0, 1.0)

    def rank(self, query: WeightedVector) -> list[tuple[int, float]]:
        """Ranks the documents of this index by similarity to `query`.

        Args:
            query (WeightedVector): The query vector.

        Returns:
            list[tuple[int, float]]: (doc_id, score) pairs, by descending score then ascending doc_id.
        """
        scores = self.similarities(query)
        return [(int(i), float(scores[i])) for i in np.lexsort((np.arange(self.n_docs), -scores))]


def rank_by_similarity(query: WeightedVector, docs: Sequence[WeightedVector]) -> list[tuple[int, float]]:
    """Ranks `docs` by cosine similarity to `query`.

    Args:
        query (WeightedVector): The query vector.
        docs (Sequence[WeightedVector]): The document vectors.  The doc_id of a document is its index in this sequence.

    Returns:
        list[tuple[int, float]]: (doc_id, score) pairs, by descending score, ties broken by ascending doc_id.
    """
    return SparseIndex.from_vectors(docs).rank(query)
