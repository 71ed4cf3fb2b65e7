"""rendering of rankings, evaluation reports and rule listings as TSV, JSON and rich tables"""

import json
import sys

from collections.abc import Iterable, Mapping, Sequence
from pathlib import Path

from rich.markup import escape
from rich.table import Table

from .evaluation import AblationRow, EvalReport, METRICS, SweepRow, TrendRow, WilcoxonResult
from .ranker import RankedList
from .rules import Rule, RuleHit
from .utils import write_atomic


def _fmt(v: float) -> str:
    return f"{v:.4f}"


def _tsv(header: Sequence[str], rows: Iterable[Sequence[object]]) -> str:
    lines = ["\t".join(header)]
    lines.extend("\t".join(_fmt(v) if isinstance(v, float) else str(v) for v in row) for row in rows)
    return "\n".join(lines) + "\n"


def _evidence(hits: Iterable[RuleHit]) -> list[str]:
    return [f"{h.rule_name}:{h.line_number}" for h in sorted(hits, key=lambda h: (h.line_number, h.rule_id))]


def ranked_to_tsv(ranked: RankedList, top: int) -> str:
    """Renders the first `top` entries of a ranking as TSV, one file per row with its rule evidence as `RULE_NAME:line` items.

    Args:
        ranked (RankedList): The ranking.
        top (int): The number of entries to render.

    Returns:
        str: The TSV document.
    """
    return _tsv(("rank", "path", "score", "similarity", "hf_matched", "evidence"),
                ((i, e.path, e.score, e.similarity, int(e.hf_matched), ",".join(_evidence(ranked.evidence.get(e.path, ())))) for i, e in enumerate(ranked.top(top), 1)))


def ranked_to_json(ranked: RankedList, top: int) -> str:
    """Renders the first `top` entries of a ranking as JSON.  Scores are rounded like in the TSV rendering.

    Args:
        ranked (RankedList): The ranking.
        top (int): The number of entries to render.

    Returns:
        str: The JSON document.
    """
    doc = {
        "alpha": ranked.alpha,
        "variant": ranked.variant.value,
        "query": {
            "file_names": list(ranked.query.basic.file_names) if ranked.query else [],
            "segments": list(ranked.query.segment_ids) if ranked.query else [],
        },
        "entries": [{"rank": i, "path": e.path, "score": round(e.score, 4), "similarity": round(e.similarity, 4), "hf_matched": e.hf_matched,
                     "evidence": _evidence(ranked.evidence.get(e.path, ()))} for i, e in enumerate(ranked.top(top), 1)]
    }

    return json.dumps(doc, indent=2) + "\n"


def render_ranked(ranked: RankedList, top: int, output_format: str = "tsv") -> str:
    """Renders a ranking in `output_format` (`tsv` or `json`).

    Args:
        ranked (RankedList): The ranking.
        top (int): The number of entries to render.
        output_format (str, optional): The format to render in. Defaults to "tsv".

    Returns:
        str: The rendered document.
    """
    return ranked_to_json(ranked, top) if output_format == "json" else ranked_to_tsv(ranked, top)


def report_to_tsv(report: EvalReport) -> str:
    """Renders an evaluation report as TSV: one row per package, then a `MEAN` row (its AP column is the MAP).

    Args:
        report (EvalReport): The report.

    Returns:
        str: The TSV document.
    """
    rows = [(r.package_id, r.category or "-", *(r.metrics[m] for m in METRICS)) for r in report.per_package]
    if report.aggregate:
        rows.append(("MEAN", "-", *(report.aggregate["MAP" if m == "AP" else m] for m in METRICS)))

    return _tsv(("package", "category", *METRICS), rows)


def report_to_json(report: EvalReport) -> str:
    """Renders an evaluation report as JSON, failures included.

    Args:
        report (EvalReport): The report.

    Returns:
        str: The JSON document.
    """
    def rounded(m: Mapping[str, float]) -> dict[str, float]:
        return {k: round(v, 4) for k, v in m.items()}

    doc = {
        "variant": report.variant.value,
        "alpha": report.alpha,
        "n_packages": report.n_packages,
        "aggregate": rounded(report.aggregate),
        "by_category": {c: rounded(m) for c, m in report.by_category.items()},
        "per_package": [{"package": r.package_id, "category": r.category, "metrics": rounded(r.metrics), "hit_ranks": list(r.hit_ranks),
                         "n_truth": r.n_truth, "n_ranked": r.n_ranked, "elapsed": round(r.elapsed, 4)} for r in report.per_package],
        "failures": dict(report.failures)
    }

    return json.dumps(doc, indent=2) + "\n"


def trend_to_tsv(rows: Iterable[TrendRow]) -> str:
    """Renders a precision/recall trend as TSV, one list length per row.

    Args:
        rows (Iterable[TrendRow]): The output of `evaluation.precision_recall_trend`.

    Returns:
        str: The TSV document.
    """
    return _tsv(("N", "P@N", "R@N", "A@N"), rows)


def sweep_to_tsv(rows: Iterable[SweepRow]) -> str:
    """Renders an alpha sweep as TSV, one alpha per row.

    Args:
        rows (Iterable[SweepRow]): The output of `evaluation.alpha_sweep`.

    Returns:
        str: The TSV document.
    """
    return _tsv(("alpha", "A@10", "P@10", "R@10", "MAP"), ((f"{r.alpha:g}", *r[1:]) for r in rows))


def ablation_to_tsv(rows: Iterable[AblationRow]) -> str:
    """Renders a rule ablation as TSV, one rule per row.

    Args:
        rows (Iterable[AblationRow]): The output of `evaluation.rule_ablation`.

    Returns:
        str: The TSV document.
    """
    return _tsv(("rule_id", "rule", "A@10", "P@10", "R@10", "MAP"), rows)


def comparison_to_tsv(results: Mapping[str, WilcoxonResult]) -> str:
    """Renders signed-rank test outcomes as TSV, one metric per row.

    Args:
        results (Mapping[str, WilcoxonResult]): metric -> test outcome.

    Returns:
        str: The TSV document.
    """
    return _tsv(("metric", "statistic", "p_value", "n", "method", "significant"),
                ((m, r.statistic, r.p_value, r.n, r.method, "yes" if r.significant else "no") for m, r in results.items()))


def rules_to_tsv(rules: Iterable[Rule]) -> str:
    """Renders `rules` as TSV, one rule per row.

    Args:
        rules (Iterable[Rule]): The rules to list.

    Returns:
        str: The TSV document.
    """
    return _tsv(("id", "name", "pattern", "description"), ((r.id, r.name, r.pattern, r.description) for r in rules))


def rules_table(rules: Iterable[Rule]) -> Table:
    """Creates a rich `Table` listing `rules`.  Cells are escaped, so that brackets in patterns are not read as console markup.

    Args:
        rules (Iterable[Rule]): The rules to list.

    Returns:
        Table: The table, ready to be printed to a console.
    """
    t = Table(title="Heuristic rules")
    t.add_column("ID", justify="right")
    t.add_column("Name", style="bold")
    t.add_column("Pattern", style="cyan")
    t.add_column("Description")

    for r in rules:
        t.add_row(str(r.id), escape(r.name), escape(r.pattern), escape(r.description))

    return t


def hits_to_tsv(hits: Iterable[tuple[str, RuleHit, str]]) -> str:
    """Renders the output of `rules.check_path` as TSV, one matched line per row.

    Args:
        hits (Iterable[tuple[str, RuleHit, str]]): (file, hit, line text) triples.

    Returns:
        str: The TSV document.  Just the header if there are no hits.
    """
    return _tsv(("path", "line", "rule", "text"), ((p, h.line_number, h.rule_name, text.replace("\t", " ")) for p, h, text in hits))


def emit(text: str, out: Path | None = None) -> None:
    """Writes a rendered document to `out` atomically, or to standard output if `out` is `None`.

    Args:
        text (str): The document.
        out (Path, optional): The destination file. Defaults to None.
    """
    if out:
        write_atomic(Path(out), text)
    else:
        sys.stdout.write(text)
