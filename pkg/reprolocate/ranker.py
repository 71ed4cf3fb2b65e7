"""query augmentation, score fusion and ranking of a package's source files"""

import logging
import time

from collections import Counter
from collections.abc import Iterable, Iterator, Mapping
from contextlib import contextmanager
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from typing import NamedTuple

import numpy as np

from .corpus import Corpus, tokenize
from .errors import ConfigError, DomainError, EmptyCorpusError
from .logparse import BasicQuery, CommandSegment, extract_basic_query, LogPatterns, segment_build_log
from .rules import builtin_rules, filter_corpus, Rule, RuleHit, RuleMatch
from .vsm import CorpusStats, SparseIndex, vectorize, WeightScheme

log = logging.getLogger(__name__)

DEFAULT_ALPHA = 0.3
DEFAULT_AUGMENT_TOP_K = 1


class Variant(str, Enum):
    """The ways of combining heuristic filtering with file ranking."""

    HF = "hf"
    """heuristic filtering alone: matched files first, ties by path"""

    FR = "fr"
    """file ranking with the basic query alone"""

    FR_QA = "fr+qa"
    """file ranking with the augmented query"""

    FULL = "full"
    """file ranking with the augmented query, fused with heuristic filtering"""


@dataclass(frozen=True)
class LocalizeOptions:
    """Options controlling how a package is localized."""

    variant: Variant = Variant.FULL
    augment_top_k: int = DEFAULT_AUGMENT_TOP_K
    weighting: WeightScheme = WeightScheme.LINEAR
    log_patterns: LogPatterns = LogPatterns()
    rules: tuple[Rule, ...] = field(default_factory=lambda: tuple(builtin_rules()), repr=False)
    workers: int | None = None

    def __post_init__(self) -> None:
        if self.augment_top_k < 0:
            raise ConfigError(f"augment_top_k must not be negative, got {self.augment_top_k}")


@dataclass(frozen=True)
class AugmentedQuery:
    """The basic query, followed by the build commands retrieved with it."""

    basic: BasicQuery
    augmentation: tuple[str, ...] = ()
    terms: tuple[str, ...] = ()
    segment_ids: tuple[int, ...] = ()

    @cached_property
    def term_freqs(self) -> Mapping[str, int]:
        """term -> number of occurrences in the query."""
        return dict(Counter(self.terms))


class RankedEntry(NamedTuple):
    """A ranked source file."""

    path: str
    score: float
    hf_matched: bool
    similarity: float = 0.0


@dataclass(frozen=True)
class RankedList:
    """Every text file of a package, by descending score then ascending path."""

    entries: tuple[RankedEntry, ...]
    alpha: float
    variant: Variant = Variant.FULL
    evidence: Mapping[str, tuple[RuleHit, ...]] = field(default_factory=dict, repr=False)
    timings: Mapping[str, float] = field(default_factory=dict, repr=False)
    query: AugmentedQuery | None = field(default=None, repr=False)

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self) -> Iterator[RankedEntry]:
        return iter(self.entries)

    def paths(self) -> list[str]:
        """Convenience method, gets the paths of the ranked files, in rank order.

        Returns:
            list[str]: The paths.
        """
        return [e.path for e in self.entries]

    def top(self, n: int) -> tuple[RankedEntry, ...]:
        """Gets the first `n` entries of this list.

        Args:
            n (int): The number of entries to get.

        Returns:
            tuple[RankedEntry, ...]: The first `n` entries, fewer if the list is shorter.
        """
        return self.entries[:n]


def augment_query(basic: BasicQuery, segments: list[CommandSegment], k: int = DEFAULT_AUGMENT_TOP_K, scheme: WeightScheme = WeightScheme.LINEAR) -> AugmentedQuery:
    """Retrieves the command segments most similar to `basic`, weighted against the segment collection, and appends their text to it.

    Args:
        basic (BasicQuery): The basic query.
        segments (list[CommandSegment]): The command segments of the build log.
        k (int, optional): The number of segments to append. Defaults to 1.
        scheme (WeightScheme, optional): The weighting scheme. Defaults to WeightScheme.LINEAR.

    Raises:
        DomainError: If `k` is negative.

    Returns:
        AugmentedQuery: The augmented query.  Only segments with a positive similarity are appended, so nothing is appended to an empty basic query.
    """
    if k < 0:
        raise DomainError(f"the number of segments to append must not be negative, got {k}")

    if not k or not basic.terms or not segments:
        return AugmentedQuery(basic, terms=basic.terms)

    stats = CorpusStats.of(s.term_freqs for s in segments)
    index = SparseIndex.build([s.term_freqs for s in segments], stats, scheme)
    retrieved = [i for i, score in index.rank(vectorize(Counter(basic.terms), stats, scheme))[:k] if score > 0]

    if not retrieved:
        log.debug("no build log segment shares a term with the basic query")
        return AugmentedQuery(basic, terms=basic.terms)

    texts = tuple(segments[i].text for i in retrieved)
    log.debug("augmenting the query with segments %s", retrieved)

    return AugmentedQuery(basic, texts, basic.terms + tuple(t for text in texts for t in tokenize(text)), tuple(segments[i].segment_id for i in retrieved))


def score_file(sim: float, hf_matched: bool, alpha: float = DEFAULT_ALPHA) -> float:
    """Fuses the similarity of a file with the outcome of heuristic filtering: `(1 - alpha) * sim + alpha * w`, where `w` is 1 for a matched file and 0 otherwise.

    Args:
        sim (float): The cosine similarity of the file to the query, in `[0, 1]`.
        hf_matched (bool): Whether the file was matched by a heuristic rule.
        alpha (float, optional): The weight of heuristic filtering, in `[0, 1]`. Defaults to 0.3.

    Raises:
        DomainError: If `sim` or `alpha` is outside of `[0, 1]`.

    Returns:
        float: The score of the file, in `[0, 1]`.
    """
    _check_alpha(alpha)
    if not 0.0 <= sim <= 1.0:
        raise DomainError(f"similarity must be in [0, 1], got {sim}")

    return (1.0 - alpha) * sim + alpha * (1.0 if hf_matched else 0.0)


def _check_alpha(alpha: float) -> None:
    if not 0.0 <= alpha <= 1.0:
        raise DomainError(f"alpha must be in [0, 1], got {alpha}")


@contextmanager
def _timed(timings: dict[str, float], phase: str) -> Iterator[None]:
    start = time.perf_counter()
    try:
        yield
    finally:
        timings[phase] = timings.get(phase, 0.0) + time.perf_counter() - start


class Localization:
    """The prepared state of one package: queries, heuristic matches and (lazily) similarities.  Ranks for any alpha and variant without repeating that work."""

    def __init__(self, corpus: Corpus, basic: BasicQuery, segments: list[CommandSegment], augmented: AugmentedQuery, matches: list[RuleMatch], options: LocalizeOptions, timings: dict[str, float]) -> None:
        """Initializer, creates a new `Localization`.  Prefer `prepare()`.

        Args:
            corpus (Corpus): The package's source files.
            basic (BasicQuery): The basic query.
            segments (list[CommandSegment]): The command segments of the build log.
            augmented (AugmentedQuery): The augmented query.
            matches (list[RuleMatch]): The files matched by the heuristic rules.
            options (LocalizeOptions): The options used.
            timings (dict[str, float]): phase -> seconds spent so far.
        """
        self.corpus = corpus
        self.basic = basic
        self.segments = segments
        self.augmented = augmented
        self.matches = matches
        self.options = options
        self.timings = timings

    @classmethod
    def prepare(cls, corpus: Corpus, diff_log: str, build_log: str, options: LocalizeOptions = LocalizeOptions()) -> "Localization":
        """Builds the queries of a package and applies the heuristic rules to its files.

        Args:
            corpus (Corpus): The package's source files.
            diff_log (str): The text of the binary diff log.
            build_log (str): The text of the build log.
            options (LocalizeOptions, optional): The options to use. Defaults to LocalizeOptions().

        Raises:
            EmptyCorpusError: If `corpus` has no text files.

        Returns:
            Localization: The prepared package.
        """
        if not corpus.n_docs:
            raise EmptyCorpusError("The source tree has no text files to rank")

        timings = {}
        with _timed(timings, "query_augmentation"):
            basic = extract_basic_query(diff_log, options.log_patterns)
            segments = segment_build_log(build_log, options.log_patterns)
            augmented = augment_query(basic, segments, options.augment_top_k, options.weighting)

        if not basic.terms:
            log.warning("No file names found in the diff log, ranking by heuristic filtering alone")

        with _timed(timings, "heuristic_filtering"):
            matches = filter_corpus(corpus, options.rules, options.workers)

        return cls(corpus, basic, segments, augmented, matches, options, timings)

    @cached_property
    def index(self) -> SparseIndex:
        """The weighted documents of the corpus."""
        with _timed(self.timings, "indexing"):
            return SparseIndex.build([d.term_freqs for d in self.corpus.documents], self.corpus.stats, self.options.weighting)

    def _similarities(self, term_freqs: Mapping[str, int]) -> np.ndarray:
        if not term_freqs:
            return np.zeros(self.corpus.n_docs)

        return self.index.similarities(vectorize(term_freqs, self.corpus.stats, self.options.weighting))

    @cached_property
    def sims_basic(self) -> np.ndarray:
        """The similarity of every document to the basic query, by doc_id."""
        return self._similarities(Counter(self.basic.terms))

    @cached_property
    def sims_augmented(self) -> np.ndarray:
        """The similarity of every document to the augmented query, by doc_id."""
        return self._similarities(self.augmented.term_freqs)

    def hf_paths(self, restrict_rules: Iterable[int] | None = None) -> dict[str, tuple[RuleHit, ...]]:
        """Gets the files matched by the heuristic rules.

        Args:
            restrict_rules (Iterable[int], optional): Only consider the rules with these ids.  Defaults to None (every rule).

        Returns:
            dict[str, tuple[RuleHit, ...]]: path -> the hits of the considered rules.
        """
        if restrict_rules is None:
            return {m.path: m.lines for m in self.matches}

        ids = frozenset(restrict_rules)
        return {m.path: hits for m in self.matches if (hits := tuple(h for h in m.lines if h.rule_id in ids))}

    def rank(self, alpha: float = DEFAULT_ALPHA, variant: Variant | None = None, restrict_rules: Iterable[int] | None = None) -> RankedList:
        """Scores and sorts every text file of the package.

        Args:
            alpha (float, optional): The weight of heuristic filtering.  Only used by the `full` variant, which is the only one fusing both parts. Defaults to 0.3.
            variant (Variant, optional): The variant to rank with.  Defaults to None (the variant of the options).
            restrict_rules (Iterable[int], optional): Only consider the rules with these ids.  Defaults to None (every rule).

        Raises:
            DomainError: If `alpha` is outside of `[0, 1]`.

        Returns:
            RankedList: Every text file, by descending score then ascending path.
        """
        _check_alpha(alpha)
        variant = Variant(variant or self.options.variant)

        match variant:
            case Variant.HF:
                sims, alpha = np.zeros(self.corpus.n_docs), 1.0
            case Variant.FR:
                sims, alpha = self.sims_basic, 0.0
            case Variant.FR_QA:
                sims, alpha = self.sims_augmented, 0.0
            case _:
                sims = self.sims_augmented

        evidence = self.hf_paths(restrict_rules)

        with _timed(self.timings, "file_ranking"):
            docs = self.corpus.documents
            matched = np.fromiter((d.path in evidence for d in docs), dtype=bool, count=len(docs))
            scores = np.clip((1.0 - alpha) * sims + alpha * matched, 0.0, 1.0)
            order = np.lexsort((np.arange(len(docs)), -scores))
            entries = tuple(RankedEntry(docs[i].path, float(scores[i]), bool(matched[i]), float(sims[i])) for i in order)

        log.debug("ranked %d files (%s, alpha=%s): %s", len(entries), variant.value, alpha, {k: round(v, 4) for k, v in self.timings.items()})
        return RankedList(entries, alpha, variant, evidence, dict(self.timings), self.augmented)


def localize(corpus: Corpus, diff_log: str, build_log: str, alpha: float = DEFAULT_ALPHA, options: LocalizeOptions = LocalizeOptions()) -> RankedList:
    """Ranks the source files of a package by how likely they are to make its build unreproducible.

    Args:
        corpus (Corpus): The package's source files.
        diff_log (str): The text of the diff log of two builds of the package.
        build_log (str): The text of the build log.
        alpha (float, optional): The weight of heuristic filtering. Defaults to 0.3.
        options (LocalizeOptions, optional): The options to use. Defaults to LocalizeOptions().

    Raises:
        EmptyCorpusError: If `corpus` has no text files.
        DomainError: If `alpha` is outside of `[0, 1]`.

    Returns:
        RankedList: Every text file of the package, scored.  Callers truncate to the top-N for display.
    """
    _check_alpha(alpha)
    return Localization.prepare(corpus, diff_log, build_log, options).rank(alpha)
