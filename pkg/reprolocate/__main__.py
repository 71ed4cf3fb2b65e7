"""reprolocate - find the source files which make a package's build unreproducible.  Entry point."""

import logging
import sys

from argparse import ArgumentParser, Namespace
from pathlib import Path

from rich.console import Console
from rich.logging import RichHandler

from . import report
from .build_context import Context
from .corpus import ingest_tree
from .errors import DomainError, InputError
from .evaluation import alpha_sweep, compare_reports, DEFAULT_ALPHA_GRID, evaluate_dataset, evaluate_variants, precision_recall_trend, rule_ablation
from .ranker import localize, Variant
from .rules import check_path
from .vsm import WeightScheme

log = logging.getLogger("reprolocate")

EXIT_OK = 0
EXIT_INTERNAL_ERROR = 1
EXIT_BAD_INPUT = 2


def _read_text(path: Path) -> str:
    try:
        return path.read_text(encoding="utf-8", errors="replace")
    except OSError as e:
        raise InputError(f"Unable to read '{path}': {e}") from e


def _cmd_locate(args: Namespace, c: Context) -> int:
    corpus = ingest_tree(args.source, c.ingest_options())
    ranked = localize(corpus, _read_text(args.diff_log), _read_text(args.build_log), c.alpha, c.localize_options())

    log.debug("phase timings: %s", dict(ranked.timings))
    report.emit(report.render_ranked(ranked, c.top_n, c.output_format), args.o)
    return EXIT_OK


def _cmd_eval(args: Namespace, c: Context) -> int:
    r = evaluate_dataset(args.manifest, c.pipeline_config())

    if args.o:
        report.emit(report.report_to_tsv(r), args.o / "report.tsv")
        report.emit(report.report_to_json(r), args.o / "report.json")
        report.emit(report.trend_to_tsv(precision_recall_trend(r)), args.o / "trend.tsv")
        log.info("Wrote the report of %d packages to '%s'", r.n_packages, args.o)
    else:
        report.emit(report.report_to_json(r) if c.output_format == "json" else report.report_to_tsv(r))

    if not r.n_packages:
        log.error("Every package of '%s' failed", args.manifest)
        return EXIT_BAD_INPUT

    return EXIT_OK


def _cmd_sweep(args: Namespace, c: Context) -> int:
    report.emit(report.sweep_to_tsv(alpha_sweep(args.manifest, args.alphas or DEFAULT_ALPHA_GRID, c.pipeline_config())), args.o)
    return EXIT_OK


def _cmd_compare(args: Namespace, c: Context) -> int:
    a, b = evaluate_variants(args.manifest, (c.variant, Variant(args.against)), c.pipeline_config())
    for r in (a, b):
        log.info("%s: %d packages, MAP %.4f", r.variant.value, r.n_packages, r.aggregate.get("MAP", 0.0))

    report.emit(report.comparison_to_tsv(compare_reports(a, b)), args.o)
    return EXIT_OK


def _cmd_ablation(args: Namespace, c: Context) -> int:
    report.emit(report.ablation_to_tsv(rule_ablation(args.manifest, c.pipeline_config())), args.o)
    return EXIT_OK


def _cmd_rules_list(args: Namespace, c: Context) -> int:
    rules = c.load_rules()

    if args.rules_format == "table":
        Console().print(report.rules_table(rules))
    else:
        report.emit(report.rules_to_tsv(rules))

    return EXIT_OK


def _cmd_rules_check(args: Namespace, c: Context) -> int:
    if not args.path.exists():
        raise InputError(f"'{args.path}' does not exist")

    report.emit(report.hits_to_tsv(check_path(args.path, c.load_rules(), c.ingest_options())))
    return EXIT_OK


def _parser() -> ArgumentParser:
    """Creates the command-line parser.  Flags default to `None` so that unset flags leave lower configuration layers alone.

    Returns:
        ArgumentParser: The parser.
    """
    ingest = ArgumentParser(add_help=False)
    ingest.add_argument("--size-cap", type=int, metavar="bytes", help="skip source files larger than this.  Defaults to 8 MiB")
    ingest.add_argument("--include", nargs="+", metavar="glob", help="only ingest files matching one of these globs")
    ingest.add_argument("--exclude", nargs="+", metavar="glob", help="never ingest files matching one of these globs")
    ingest.add_argument("--follow-symlinks", action="store_true", default=None, help="follow symbolic links in source trees")
    ingest.add_argument("--workers", type=int, metavar="n", help="the number of worker threads")
    ingest.add_argument("--rules-file", type=Path, metavar="rules.jsonl", help="a JSON Lines file of extra rules (ids from 100)")

    ranking = ArgumentParser(add_help=False, parents=[ingest])
    ranking.add_argument("--alpha", type=float, help="weight of heuristic filtering in the final score, in [0, 1].  Defaults to 0.3")
    ranking.add_argument("--top", dest="top_n", type=int, metavar="n", help="the number of ranked files to print.  Defaults to 10")
    ranking.add_argument("--weighting", choices=[w.value for w in WeightScheme], help="the TF-IDF weighting scheme.  Defaults to paper (`tf × N / n_t`)")
    ranking.add_argument("--augment-top-k", type=int, metavar="k", help="the number of build log segments appended to the query.  Defaults to 1")
    ranking.add_argument("--variant", choices=[v.value for v in Variant], help="the variant to rank with.  Defaults to full")
    ranking.add_argument("--format", dest="output_format", choices=["tsv", "json"], help="the output format.  Defaults to tsv")
    ranking.add_argument("--enter-regex", metavar="regex", help="matches build log lines entering a directory, optionally capturing (?P<directory>...)")
    ranking.add_argument("--leave-regex", metavar="regex", help="matches build log lines leaving a directory")
    ranking.add_argument("--diff-header-regex", metavar="regex", help="matches diff log member headers, optionally capturing (?P<member>...)")

    cli_parser = ArgumentParser(description="Locate the source files responsible for unreproducible builds")
    cli_parser.add_argument("--debug", action="store_true", help="Enables debug level logging")
    cli_parser.add_argument("--quiet", action="store_true", help="Only log warnings and errors")
    cli_parser.add_argument("--config", type=Path, metavar="config.json", help="a JSON config file.  Defaults to ./reprolocate.json, if present")
    commands = cli_parser.add_subparsers(dest="command", required=True)

    p = commands.add_parser("locate", parents=[ranking], help="rank the source files of a package")
    p.add_argument("source", type=Path, help="the package's source tree")
    p.add_argument("diff_log", type=Path, help="the diff log of two builds of the package")
    p.add_argument("build_log", type=Path, help="the build log of the package")
    p.add_argument("-o", type=Path, metavar="output_file", help="write the ranking to this file instead of standard output")
    p.set_defaults(func=_cmd_locate)

    p = commands.add_parser("eval", parents=[ranking], help="evaluate a dataset of packages with known problematic files")
    p.add_argument("manifest", type=Path, help="the JSON Lines manifest of the dataset")
    p.add_argument("-o", type=Path, metavar="output_dir", help="write report.tsv, report.json and trend.tsv to this directory")
    p.set_defaults(func=_cmd_eval)

    p = commands.add_parser("sweep", parents=[ranking], help="evaluate a dataset at several alphas")
    p.add_argument("manifest", type=Path, help="the JSON Lines manifest of the dataset")
    p.add_argument("--alphas", nargs="+", type=float, metavar="alpha", help="the alphas to evaluate.  Defaults to 0.1 to 0.9 by 0.1")
    p.add_argument("-o", type=Path, metavar="output_file", help="write the table to this file instead of standard output")
    p.set_defaults(func=_cmd_sweep)

    p = commands.add_parser("compare", parents=[ranking], help="test whether two variants differ significantly on a dataset")
    p.add_argument("manifest", type=Path, help="the JSON Lines manifest of the dataset")
    p.add_argument("--against", choices=[v.value for v in Variant], required=True, help="the variant to compare with")
    p.add_argument("-o", type=Path, metavar="output_file", help="write the table to this file instead of standard output")
    p.set_defaults(func=_cmd_compare)

    p = commands.add_parser("ablation", parents=[ranking], help="evaluate heuristic filtering with each rule alone")
    p.add_argument("manifest", type=Path, help="the JSON Lines manifest of the dataset")
    p.add_argument("-o", type=Path, metavar="output_file", help="write the table to this file instead of standard output")
    p.set_defaults(func=_cmd_ablation)

    rules = commands.add_parser("rules", help="list the heuristic rules or apply them to files").add_subparsers(dest="rules_command", required=True)

    p = rules.add_parser("list", parents=[ingest], help="list the heuristic rules")
    p.add_argument("--format", dest="rules_format", choices=["tsv", "table"], default="table", help="the output format.  Defaults to table")
    p.set_defaults(func=_cmd_rules_list)

    p = rules.add_parser("check", parents=[ingest], help="print every line of a file, or of the files of a directory, matched by a rule")
    p.add_argument("path", type=Path, help="the file or directory to check")
    p.set_defaults(func=_cmd_rules_check)

    return cli_parser


def _main(argv: list[str] | None = None) -> int:
    """Main entry point, runs when this script is invoked directly.

    Args:
        argv (list[str], optional): The command-line arguments.  Defaults to None (`sys.argv[1:]`).

    Returns:
        int: The exit code: 0 on success, 1 on an internal error, 2 on bad input.
    """
    args = _parser().parse_args(argv)

    if not log.handlers:
        log.addHandler(RichHandler(console=Console(stderr=True), rich_tracebacks=True))
    log.setLevel(logging.DEBUG if args.debug else logging.WARNING if args.quiet else logging.INFO)

    try:
        return args.func(args, Context.resolve(vars(args), args.config))
    except (InputError, DomainError) as e:
        log.error("%s", e)
        return EXIT_BAD_INPUT
    except KeyboardInterrupt:
        log.info("Keyboard interrupt - bye")
        return EXIT_INTERNAL_ERROR
    except Exception:
        log.exception("Unexpected error")
        return EXIT_INTERNAL_ERROR


if __name__ == '__main__':
    sys.exit(_main())
