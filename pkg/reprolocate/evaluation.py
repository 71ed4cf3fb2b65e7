"""ground-truth manifests, ranking metrics, and the evaluation harness"""

import json
import logging
import math
import time

from collections import defaultdict
from collections.abc import Collection, Iterable, Mapping, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np

from scipy import stats

from .corpus import ingest_tree, IngestOptions
from .errors import ConfigError, DomainError, InputError, ReprolocateError
from .logparse import extract_patch_files
from .ranker import DEFAULT_ALPHA, Localization, LocalizeOptions, Variant
from .rules import Rule
from .utils import normalize_relpath

log = logging.getLogger(__name__)

DEPTHS = (1, 5, 10)
METRICS = tuple(f"{m}@{n}" for m in "APR" for n in DEPTHS) + ("AP",)
DEFAULT_ALPHA_GRID = tuple(round(0.1 * i, 1) for i in range(1, 10))
SIGNIFICANCE_LEVEL = 0.05
MIN_WILCOXON_PAIRS = 6
MAX_EXACT_WILCOXON_PAIRS = 25


def _check_depth(n: int) -> None:
    if n < 1:
        raise DomainError(f"list depth must be at least 1, got {n}")


def _check_truth(truth: Collection[str]) -> None:
    if not truth:
        raise DomainError("the set of problematic files must not be empty")


def _hits(ranked: Sequence[str], truth: Collection[str], n: int) -> int:
    return sum(p in truth for p in ranked[:n])


def precision_at(ranked: Sequence[str], truth: Collection[str], n: int) -> float:
    """Computes the share of the first `n` ranked files which are problematic.  The denominator stays `n` when the list is shorter.

    Args:
        ranked (Sequence[str]): The ranked paths.
        truth (Collection[str]): The problematic paths.
        n (int): The depth of the list to consider, at least 1.

    Raises:
        DomainError: If `n` is less than 1.

    Returns:
        float: P@n, in `[0, 1]`
    """
    _check_depth(n)
    return _hits(ranked, truth, n) / n


def recall_at(ranked: Sequence[str], truth: Collection[str], n: int) -> float:
    """Computes the share of the problematic files found among the first `n` ranked files.

    Args:
        ranked (Sequence[str]): The ranked paths.
        truth (Collection[str]): The problematic paths, not empty.
        n (int): The depth of the list to consider, at least 1.

    Raises:
        DomainError: If `n` is less than 1 or `truth` is empty.

    Returns:
        float: R@n, in `[0, 1]`
    """
    _check_depth(n)
    _check_truth(truth)
    return _hits(ranked, truth, n) / len(truth)


def accuracy_at(ranked: Sequence[str], truth: Collection[str], n: int) -> int:
    """Determines whether a problematic file is among the first `n` ranked files.

    Args:
        ranked (Sequence[str]): The ranked paths.
        truth (Collection[str]): The problematic paths.
        n (int): The depth of the list to consider, at least 1.

    Raises:
        DomainError: If `n` is less than 1.

    Returns:
        int: A@n, `1` on a hit and `0` otherwise.
    """
    _check_depth(n)
    return int(_hits(ranked, truth, n) > 0)


def average_precision(ranked: Sequence[str], truth: Collection[str]) -> float:
    """Computes the average precision of a ranking: the sum of P@k over the ranks k holding a problematic file, divided by the number of problematic files.  Problematic files missing from the ranking contribute 0.

    Args:
        ranked (Sequence[str]): The full ranking.
        truth (Collection[str]): The problematic paths, not empty.

    Raises:
        DomainError: If `truth` is empty.

    Returns:
        float: AP, in `[0, 1]`
    """
    _check_truth(truth)

    found = 0
    total = []
    for k, p in enumerate(ranked, 1):
        if p in truth:
            found += 1
            total.append(found / k)

    return math.fsum(total) / len(truth)


def _mean(values: Iterable[float]) -> float:
    values = list(values)
    return math.fsum(values) / len(values) if values else 0.0


@dataclass(frozen=True)
class ManifestEntry:
    """One package of an evaluation dataset."""

    package_id: str
    source_dir: Path
    diff_log: Path
    build_log: Path
    truth: frozenset[str] = frozenset()
    category: str = ""
    patch: Path | None = None

    def resolve_truth(self) -> frozenset[str]:
        """Gets the problematic files of this package: the listed ones plus the ones touched by its fixing patch.

        Raises:
            InputError: If the patch cannot be read, or there are no problematic files.

        Returns:
            frozenset[str]: The normalized paths of the problematic files.
        """
        truth = set(self.truth)
        if self.patch:
            try:
                truth.update(extract_patch_files(self.patch.read_text(encoding="utf-8", errors="replace")))
            except OSError as e:
                raise InputError(f"Unable to read patch '{self.patch}': {e}") from e

        if not truth:
            raise InputError(f"Package '{self.package_id}' has no problematic files")

        return frozenset(truth)


def load_manifest(path: Path) -> list[ManifestEntry]:
    """Reads a JSON Lines manifest, one package per line, e.g. `{"id": "foo", "source": "foo/src", "diff_log": "foo/diff.log", "build_log": "foo/build.log", "truth": ["Makefile"], "category": "timestamps"}`.  A `patch` key may replace or complement `truth`.  Relative paths are resolved against the manifest's directory.

    Args:
        path (Path): The manifest file.

    Raises:
        InputError: If the manifest cannot be read, has a malformed record, or repeats a package id.

    Returns:
        list[ManifestEntry]: The packages, in file order.
    """
    try:
        lines = (path := Path(path)).read_text(encoding="utf-8").splitlines()
    except OSError as e:
        raise InputError(f"Unable to read manifest '{path}': {e}") from e

    base = path.parent
    entries = []
    seen = set()

    for n, line in enumerate(lines, 1):
        if not (line := line.strip()) or line.startswith("#"):
            continue

        try:
            r = json.loads(line)
            if not isinstance(r, dict) or not isinstance(r.get("truth", []), list):
                raise TypeError("expected an object, with truth as a list of paths")

            entry = ManifestEntry(str(r["id"]), base / r["source"], base / r["diff_log"], base / r["build_log"],
                                  frozenset(normalize_relpath(p) for p in r.get("truth", ())), str(r.get("category", "")), base / r["patch"] if r.get("patch") else None)
        except (ValueError, KeyError, TypeError) as e:
            raise InputError(f"{path}:{n}: malformed manifest record: {e}") from e

        if entry.package_id in seen:
            raise InputError(f"{path}:{n}: package '{entry.package_id}' appears more than once")

        seen.add(entry.package_id)
        entries.append(entry)

    log.debug("loaded %d packages from '%s'", len(entries), path)
    return entries


@dataclass(frozen=True)
class PipelineConfig:
    """The settings an evaluation runs the pipeline with."""

    alpha: float = DEFAULT_ALPHA
    localize: LocalizeOptions = LocalizeOptions()
    ingest: IngestOptions = IngestOptions()
    workers: int | None = None

    def __post_init__(self) -> None:
        if not 0.0 <= self.alpha <= 1.0:
            raise ConfigError(f"alpha must be in [0, 1], got {self.alpha}")


@dataclass(frozen=True)
class PackageResult:
    """The metrics of one package."""

    package_id: str
    metrics: Mapping[str, float]
    hit_ranks: tuple[int, ...] = ()
    n_truth: int = 0
    n_ranked: int = 0
    elapsed: float = 0.0
    category: str = ""

    @classmethod
    def of(cls, package_id: str, ranked: Sequence[str], truth: Collection[str], elapsed: float = 0.0, category: str = "") -> "PackageResult":
        """Computes every metric of a ranking.

        Args:
            package_id (str): The id of the package.
            ranked (Sequence[str]): The full ranking of the package's files.
            truth (Collection[str]): The problematic files of the package.
            elapsed (float, optional): Seconds spent localizing. Defaults to 0.0.
            category (str, optional): The category of the package. Defaults to "".

        Returns:
            PackageResult: The metrics.
        """
        metrics = {f"A@{n}": float(accuracy_at(ranked, truth, n)) for n in DEPTHS}
        metrics |= {f"P@{n}": precision_at(ranked, truth, n) for n in DEPTHS}
        metrics |= {f"R@{n}": recall_at(ranked, truth, n) for n in DEPTHS}
        metrics["AP"] = average_precision(ranked, truth)

        return cls(package_id, metrics, tuple(k for k, p in enumerate(ranked, 1) if p in truth), len(truth), len(ranked), elapsed, category)


def _aggregate(results: Sequence[PackageResult]) -> dict[str, float]:
    if not results:
        return {}

    out = {m: _mean(r.metrics[m] for r in results) for m in METRICS}
    out["MAP"] = out.pop("AP")
    return out


@dataclass(frozen=True)
class EvalReport:
    """The metrics of a variant over a dataset: per package, overall, and per category."""

    variant: Variant
    alpha: float
    per_package: tuple[PackageResult, ...]
    failures: Mapping[str, str] = field(default_factory=dict)
    aggregate: Mapping[str, float] = field(default_factory=dict)
    by_category: Mapping[str, Mapping[str, float]] = field(default_factory=dict)

    @classmethod
    def of(cls, variant: Variant, alpha: float, results: Iterable[PackageResult], failures: Mapping[str, str] | None = None) -> "EvalReport":
        """Assembles a report, sorting packages by id and averaging their metrics.

        Args:
            variant (Variant): The variant evaluated.
            alpha (float): The alpha the packages were ranked with.
            results (Iterable[PackageResult]): The packages evaluated successfully.
            failures (Mapping[str, str], optional): package id -> error, for the packages which failed. Defaults to None.

        Returns:
            EvalReport: The report.
        """
        results = tuple(sorted(results, key=lambda r: r.package_id))

        categories = defaultdict(list)
        for r in results:
            if r.category:
                categories[r.category].append(r)

        return cls(variant, alpha, results, dict(sorted((failures or {}).items())), _aggregate(results), {c: _aggregate(l) for c, l in sorted(categories.items())})

    @property
    def n_packages(self) -> int:
        """The number of packages evaluated successfully."""
        return len(self.per_package)

    def metric(self, name: str) -> dict[str, float]:
        """Gets one metric of every package.

        Args:
            name (str): The metric, e.g. `P@10` or `AP`.

        Returns:
            dict[str, float]: package id -> value.
        """
        return {r.package_id: r.metrics[name] for r in self.per_package}


class _Setting(NamedTuple):
    alpha: float
    variant: Variant
    restrict_rules: frozenset[int] | None = None


def _read_log(path: Path) -> str:
    try:
        return path.read_text(encoding="utf-8", errors="replace")
    except OSError as e:
        raise InputError(f"Unable to read '{path}': {e}") from e


def _evaluate_package(entry: ManifestEntry, config: PipelineConfig, settings: Sequence[_Setting]) -> list[PackageResult]:
    """Prepares a package once, then ranks and scores it with every setting."""
    start = time.perf_counter()

    truth = entry.resolve_truth()
    corpus = ingest_tree(entry.source_dir, config.ingest)
    loc = Localization.prepare(corpus, _read_log(entry.diff_log), _read_log(entry.build_log), config.localize)

    prepared = time.perf_counter() - start
    results = []

    for s in settings:
        start = time.perf_counter()
        ranked = loc.rank(s.alpha, s.variant, s.restrict_rules).paths()

        if missing := truth - set(ranked):
            log.debug("%s: problematic files not among the ranked text files: %s", entry.package_id, sorted(missing))

        results.append(PackageResult.of(entry.package_id, ranked, truth, prepared + time.perf_counter() - start, entry.category))

    return results


def _evaluate(manifest: Sequence[ManifestEntry] | Path, config: PipelineConfig, settings: Sequence[_Setting]) -> list[EvalReport]:
    """Evaluates every package with every setting.  Packages run in parallel, and a failing package is reported and left out of every aggregate."""
    entries = load_manifest(manifest) if isinstance(manifest, (str, Path)) else list(manifest)

    def run(entry: ManifestEntry) -> list[PackageResult] | str:
        try:
            return _evaluate_package(entry, config, settings)
        except (ReprolocateError, OSError) as e:
            log.warning("Excluding package '%s': %s", entry.package_id, e)
            return str(e)

    with ThreadPoolExecutor(config.workers) as pool:
        outcomes = dict(zip((e.package_id for e in entries), pool.map(run, entries)))

    failures = {k: v for k, v in outcomes.items() if isinstance(v, str)}
    done = [v for v in outcomes.values() if not isinstance(v, str)]

    return [EvalReport.of(s.variant, s.alpha, (r[i] for r in done), failures) for i, s in enumerate(settings)]


def evaluate_dataset(manifest: Sequence[ManifestEntry] | Path, config: PipelineConfig = PipelineConfig()) -> EvalReport:
    """Localizes every package of a dataset and scores the rankings against the ground truth.

    Args:
        manifest (Sequence[ManifestEntry] | Path): The packages, or the path of a manifest listing them.
        config (PipelineConfig, optional): The pipeline settings, including the variant. Defaults to PipelineConfig().

    Raises:
        InputError: If the manifest cannot be loaded.

    Returns:
        EvalReport: The report.  Packages which failed are listed in `failures` only.
    """
    return _evaluate(manifest, config, [_Setting(config.alpha, config.localize.variant)])[0]


def evaluate_variants(manifest: Sequence[ManifestEntry] | Path, variants: Iterable[Variant], config: PipelineConfig = PipelineConfig()) -> list[EvalReport]:
    """Evaluates several variants, preparing each package once.

    Args:
        manifest (Sequence[ManifestEntry] | Path): The packages, or the path of a manifest listing them.
        variants (Iterable[Variant]): The variants to evaluate.
        config (PipelineConfig, optional): The pipeline settings. Defaults to PipelineConfig().

    Returns:
        list[EvalReport]: One report per variant, in order.
    """
    return _evaluate(manifest, config, [_Setting(config.alpha, Variant(v)) for v in variants])


class SweepRow(NamedTuple):
    """The aggregate metrics of the full pipeline at one alpha."""

    alpha: float
    a10: float
    p10: float
    r10: float
    map: float


def alpha_sweep(manifest: Sequence[ManifestEntry] | Path, alphas: Sequence[float] = DEFAULT_ALPHA_GRID, config: PipelineConfig = PipelineConfig()) -> list[SweepRow]:
    """Evaluates the full pipeline at every alpha of a grid.  Indexing and rule matching are done once per package.

    Args:
        manifest (Sequence[ManifestEntry] | Path): The packages, or the path of a manifest listing them.
        alphas (Sequence[float], optional): The alphas to evaluate. Defaults to 0.1 to 0.9 by 0.1.
        config (PipelineConfig, optional): The pipeline settings.  Its alpha and variant are ignored. Defaults to PipelineConfig().

    Raises:
        DomainError: If an alpha is outside of `[0, 1]`.

    Returns:
        list[SweepRow]: One row per alpha, in order.
    """
    if bad := [a for a in alphas if not 0.0 <= a <= 1.0]:
        raise DomainError(f"alphas must be in [0, 1], got {bad}")

    reports = _evaluate(manifest, config, [_Setting(a, Variant.FULL) for a in alphas])
    return [SweepRow(r.alpha, *(r.aggregate.get(m, 0.0) for m in ("A@10", "P@10", "R@10", "MAP"))) for r in reports]


class AblationRow(NamedTuple):
    """The aggregate metrics of heuristic filtering with a single rule."""

    rule_id: int
    name: str
    a10: float
    p10: float
    r10: float
    map: float


def rule_ablation(manifest: Sequence[ManifestEntry] | Path, config: PipelineConfig = PipelineConfig(), rules: Sequence[Rule] | None = None) -> list[AblationRow]:
    """Evaluates heuristic filtering restricted to each rule in turn.

    Args:
        manifest (Sequence[ManifestEntry] | Path): The packages, or the path of a manifest listing them.
        config (PipelineConfig, optional): The pipeline settings. Defaults to PipelineConfig().
        rules (Sequence[Rule], optional): The rules to evaluate.  Defaults to None (the rules of `config`).

    Returns:
        list[AblationRow]: One row per rule, by rule id.
    """
    rules = sorted(rules or config.localize.rules, key=lambda r: r.id)
    reports = _evaluate(manifest, config, [_Setting(1.0, Variant.HF, frozenset((r.id,))) for r in rules])

    return [AblationRow(rule.id, rule.name, *(r.aggregate.get(m, 0.0) for m in ("A@10", "P@10", "R@10", "MAP"))) for rule, r in zip(rules, reports)]


class TrendRow(NamedTuple):
    """The mean precision, recall and accuracy of a report at one list depth."""

    n: int
    precision: float
    recall: float
    accuracy: float


def precision_recall_trend(report: EvalReport, depth: int = 10) -> list[TrendRow]:
    """Computes how the metrics of a report evolve with the depth of the list examined.

    Args:
        report (EvalReport): The report.
        depth (int, optional): The deepest list to consider. Defaults to 10.

    Raises:
        DomainError: If `depth` is less than 1.

    Returns:
        list[TrendRow]: One row per depth, from 1 to `depth`.
    """
    _check_depth(depth)

    rows = []
    for n in range(1, depth + 1):
        hits = [sum(k <= n for k in r.hit_ranks) for r in report.per_package]
        rows.append(TrendRow(n, _mean(h / n for h in hits), _mean(h / r.n_truth for h, r in zip(hits, report.per_package)), _mean(float(h > 0) for h in hits)))

    return rows


class WilcoxonResult(NamedTuple):
    """The outcome of a two-sided signed-rank test."""

    statistic: float
    p_value: float
    n: int
    method: str
    significant: bool


def wilcoxon_signed_rank(x: Sequence[float], y: Sequence[float]) -> WilcoxonResult:
    """Tests whether paired samples differ, with the two-sided Wilcoxon signed-rank test.  Zero differences are dropped.  The p-value is exact for at most 25 pairs without tied differences, and otherwise from the normal approximation with tie correction and no continuity correction.

    Args:
        x (Sequence[float]): The first sample.
        y (Sequence[float]): The second sample, paired with `x`.

    Raises:
        DomainError: If the samples differ in length, or fewer than 6 pairs differ.

    Returns:
        WilcoxonResult: The smaller of the signed rank sums, the p-value, and whether it is below 0.05.
    """
    if len(x) != len(y):
        raise DomainError(f"samples must be paired, got {len(x)} and {len(y)} values")

    d = np.asarray(x, dtype=np.float64) - np.asarray(y, dtype=np.float64)
    if (n := len(d := d[d != 0])) < MIN_WILCOXON_PAIRS:
        raise DomainError(f"at least {MIN_WILCOXON_PAIRS} pairs must differ, got {n}")

    method = "exact" if n <= MAX_EXACT_WILCOXON_PAIRS and len(np.unique(np.abs(d))) == n else "asymptotic"
    res = stats.wilcoxon(d, zero_method="wilcox", correction=False, alternative="two-sided", method=method)

    return WilcoxonResult(float(res.statistic), float(res.pvalue), n, method, bool(res.pvalue < SIGNIFICANCE_LEVEL))


def compare_reports(a: EvalReport, b: EvalReport, metrics: Sequence[str] = ("P@10", "R@10")) -> dict[str, WilcoxonResult]:
    """Tests whether two reports differ significantly, pairing the packages both cover.

    Args:
        a (EvalReport): The first report.
        b (EvalReport): The second report.
        metrics (Sequence[str], optional): The per-package metrics to compare. Defaults to ("P@10", "R@10").

    Raises:
        DomainError: If fewer than 6 shared packages differ on a metric.

    Returns:
        dict[str, WilcoxonResult]: metric -> test outcome.
    """
    out = {}
    for m in metrics:
        x, y = a.metric(m), b.metric(m)
        shared = sorted(x.keys() & y.keys())
        out[m] = wilcoxon_signed_rank([x[k] for k in shared], [y[k] for k in shared])

    return out
