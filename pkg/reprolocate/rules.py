"""the heuristic rules which flag source files likely to make a build unreproducible"""

import json
import logging
import re

from collections.abc import Iterable, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import NamedTuple

from .corpus import Corpus, ingest_tree, IngestOptions, SourceFile
from .errors import InputError, RuleError
from .utils import is_binary, split_lines

log = logging.getLogger(__name__)

USER_RULE_MIN_ID = 100

# whole-text search can miss a line match only if the pattern anchors to the string or looks behind
_PREFILTER_UNSAFE = re.compile(r"\\[AZz]|\(\?<[=!]")


@dataclass(frozen=True)
class Rule:
    """A regular expression which, matched against a single line of a source file, flags the file.  `required` lists literals which every matching line contains, and lines missing one are skipped without running the pattern."""

    id: int
    name: str
    pattern: str
    description: str = ""
    required: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        try:
            re.compile(self.pattern)
        except re.error as e:
            raise RuleError(f"Pattern of rule {self.id} ({self.name}) does not compile: {e}") from e

    @cached_property
    def regex(self) -> re.Pattern:
        """The compiled pattern, for matching single lines."""
        return re.compile(self.pattern)

    @cached_property
    def prefilter(self) -> re.Pattern | None:
        """The pattern compiled for searching a whole file at once, or `None` if that could miss line matches or the rule has `required` literals."""
        return None if self.required or _PREFILTER_UNSAFE.search(self.pattern) else re.compile(self.pattern, re.MULTILINE)


class RuleHit(NamedTuple):
    """A line of a file matched by a rule."""

    rule_id: int
    line_number: int
    rule_name: str = ""


@dataclass(frozen=True)
class RuleMatch:
    """The rules matching a file, with the lines that matched them."""

    path: str
    rule_ids: frozenset[int]
    lines: tuple[RuleHit, ...]

    @property
    def rule_names(self) -> list[str]:
        """The names of the matching rules, in rule id order."""
        return list(dict.fromkeys(h.rule_name for h in sorted(self.lines)))


_BUILTIN_RULES = (
    Rule(1, "TIME_MACRO", r"__TIME__", "C time preprocessing macro embeds the compilation time"),
    Rule(2, "DATE_MACRO", r"__DATE__", "C date preprocessing macro embeds the compilation date"),
    Rule(3, "GZIP_ARG", r"\bgzip\s(?!.*-[a-z9]*n)", "gzip without -n stores a timestamp in the compressed file's header", ("gzip",)),
    Rule(4, "DATE_CMD", r"(\$\(date)|(\$\(shell\s*date)|(\`date)", "current date captured with the date shell command"),
    Rule(5, "PY_DATE", r"datetime\.datetime\.today", "current date and time obtained in a Python script"),
    Rule(6, "PL_LOCALTIME", r"\$.*localtime", "current date and time obtained in a Perl script", ("$", "localtime")),
    Rule(7, "SYSTEM_DATE", r"system.*date", "system time recorded into the compiled output", ("system", "date")),
    Rule(8, "DATE_IN_TEX", r"\\date.*\\today", "date embedded into TeX documents, and the PDFs built from them", ("\\date", "\\today")),
    Rule(9, "SORT_IN_PIPE", r"^.*\|(?!.*LC_ALL=).*\s*\bsort\b", "sort executed in a pipeline without a locale setting", ("|", "sort")),
    Rule(10, "GMTIME", r"gmtime\(", "current date and time obtained with gmtime"),
    Rule(11, "TAR_GZIP_PIPE", r"\btar\b.*\|\s*\bgzip\b", "tar piped into gzip", ("tar", "|", "gzip")),
    Rule(12, "PL_UNSORTED_KEY", r"(^(?!.*sort).*\s*keys\s*%)", "unsorted traversal of Perl hash keys", ("keys", "%")),
    Rule(13, "LS_WITHOUT_LOCALE", r"^.*\$\(.*(?!.*LC_ALL=).*\s*\bls\b", "ls output captured without a locale setting", ("$(", "ls")),
    Rule(14, "UNSORTED_WILDCARD", r"(^(?!.*sort).*\s*\bwildcard\b)", "Makefile wildcard used without sorting", ("wildcard",)),
)


def builtin_rules() -> list[Rule]:
    """Gets the built-in rules.  These are frozen, so that results stay comparable across runs.

    Returns:
        list[Rule]: The 14 built-in rules, by id.
    """
    return list(_BUILTIN_RULES)


def load_rules(path: Path, base: Sequence[Rule] = _BUILTIN_RULES) -> list[Rule]:
    """Loads user rules from a JSON Lines file (one `{"id", "name", "pattern", "description"}` object per line) and appends them to `base`.

    Args:
        path (Path): The rules file.  Blank lines and lines starting with `#` are ignored.
        base (Sequence[Rule], optional): The rules to extend. Defaults to the built-in rules.

    Raises:
        InputError: If the file cannot be read.
        RuleError: If a record is malformed, uses an id below 100, or collides with another rule.

    Returns:
        list[Rule]: `base` followed by the rules of the file.
    """
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as e:
        raise InputError(f"Unable to read rules file '{path}': {e}") from e

    rules = list(base)
    ids, names = {r.id for r in rules}, {r.name for r in rules}

    for n, line in enumerate(lines, 1):
        if not (line := line.strip()) or line.startswith("#"):
            continue

        try:
            record = json.loads(line)
            rule = Rule(int(record["id"]), str(record["name"]), str(record["pattern"]), str(record.get("description", "")))
        except (ValueError, KeyError, TypeError) as e:
            raise RuleError(f"{path}:{n}: malformed rule record: {e}") from e

        if rule.id < USER_RULE_MIN_ID:
            raise RuleError(f"{path}:{n}: user rule ids must be at least {USER_RULE_MIN_ID}, got {rule.id}")
        if rule.id in ids or rule.name in names:
            raise RuleError(f"{path}:{n}: rule id {rule.id} or name {rule.name} is already defined")

        ids.add(rule.id)
        names.add(rule.name)
        rules.append(rule)

    log.debug("loaded %d user rules from '%s'", len(rules) - len(base), path)
    return rules


def match_line(rule: Rule, line: str) -> bool:
    """Determines whether `rule` matches anywhere in `line` (case-sensitive, `^` anchoring to the start of the line).

    Args:
        rule (Rule): The rule to apply.
        line (str): A single line of text.

    Returns:
        bool: `True` if the rule matches.
    """
    return all(s in line for s in rule.required) and rule.regex.search(line) is not None


def scan_text(text: str, rules: Iterable[Rule]) -> list[RuleHit]:
    """Applies `rules` to every line of `text`.

    Args:
        text (str): The text to scan.
        rules (Iterable[Rule]): The rules to apply.

    Returns:
        list[RuleHit]: Every (rule, line) match, by rule id then line number.
    """
    candidates = sorted((r for r in rules if all(s in text for s in r.required) and (r.prefilter is None or r.prefilter.search(text))), key=lambda r: r.id)
    if not candidates:
        return []

    lines = split_lines(text)
    return [RuleHit(r.id, n, r.name) for r in candidates for n, line in enumerate(lines, 1) if match_line(r, line)]


def _match_file(f: SourceFile, rules: Sequence[Rule]) -> RuleMatch | None:
    if not (hits := scan_text(f.text, rules)):
        return None

    return RuleMatch(f.path, frozenset(h.rule_id for h in hits), tuple(hits))


def filter_corpus(corpus: Corpus, rules: Sequence[Rule], workers: int | None = None) -> list[RuleMatch]:
    """Scans every text file of `corpus` with `rules`, as plain text regardless of its type.  Binary files are skipped.

    Args:
        corpus (Corpus): The corpus to scan.
        rules (Sequence[Rule]): The rules to apply.
        workers (int, optional): The number of threads to scan with.  Defaults to None (the library default).

    Returns:
        list[RuleMatch]: One match per file matched by at least one rule, in path order.  The order carries no meaning.
    """
    with ThreadPoolExecutor(workers) as pool:
        matches = [m for m in pool.map(lambda f: _match_file(f, rules), corpus.text_files()) if m]

    log.debug("%d of %d files matched by the heuristic rules", len(matches), corpus.n_docs)
    return matches


def check_path(path: Path, rules: Sequence[Rule], options: IngestOptions = IngestOptions()) -> list[tuple[str, RuleHit, str]]:
    """Scans a single file, or every file of a directory, with `rules`.

    Args:
        path (Path): The file or directory to scan.
        rules (Sequence[Rule]): The rules to apply.
        options (IngestOptions, optional): The ingestion options, if `path` is a directory. Defaults to IngestOptions().

    Raises:
        InputError: If `path` does not exist or cannot be read.

    Returns:
        list[tuple[str, RuleHit, str]]: (file, hit, matched line) for every hit, by file, then line number, then rule id.
    """
    if (path := Path(path)).is_dir():
        files = list(ingest_tree(path, options).text_files())
    else:
        try:
            files = [SourceFile(str(path), content := path.read_bytes(), not is_binary(content))]
        except OSError as e:
            raise InputError(f"Unable to read '{path}': {e}") from e

    out = []
    for f in files:
        if f.is_text and (hits := scan_text(f.text, rules)):
            lines = split_lines(f.text)
            out.extend((f.path, h, lines[h.line_number - 1]) for h in sorted(hits, key=lambda h: (h.line_number, h.rule_id)))

    return out
