"""parsing of binary diff logs, build logs and fixing patches"""

import logging
import re

from collections import Counter
from collections.abc import Mapping
from dataclasses import dataclass, field
from functools import cached_property

from .corpus import tokenize
from .errors import ConfigError
from .utils import looks_like_file_name, normalize_relpath, split_lines

log = logging.getLogger(__name__)

DEFAULT_ENTER_PATTERN = r"Entering directory [`'\"‘](?P<directory>[^'\"’]*)['\"’]"
DEFAULT_LEAVE_PATTERN = r"Leaving directory [`'\"‘](?P<directory>[^'\"’]*)['\"’]"

# `--- a.deb` / `+++ b.deb` at the top level, `├── member` / `└── member` under any number of `│` levels
DEFAULT_DIFF_HEADER_PATTERN = r"^(?:(?:---|\+\+\+)\s+|[│|\s]*[├└]──\s*)(?P<member>\S.*?)\s*$"

_PATCH_HEADER = re.compile(r"^(?:diff --git a/(?P<old>\S+) b/(?P<new>\S+)|(?:---|\+\+\+) (?P<side>[^\t\n]+?))[ \t]*(?:\t.*)?$")
_HUNK_HEADER = re.compile(r"^@@ -\d+(?:,(?P<old>\d+))? \+\d+(?:,(?P<new>\d+))? @@")
_TOKEN_EDGES = "\"'`,;:()[]{}<>"


@dataclass(frozen=True)
class LogPatterns:
    """The regular expressions used to recognize directory markers in build logs and member headers in diff logs."""

    enter: str = DEFAULT_ENTER_PATTERN
    leave: str = DEFAULT_LEAVE_PATTERN
    diff_header: str = DEFAULT_DIFF_HEADER_PATTERN

    def __post_init__(self) -> None:
        for name in ("enter", "leave", "diff_header"):
            try:
                re.compile(getattr(self, name))
            except re.error as e:
                raise ConfigError(f"Invalid {name.replace('_', ' ')} regex '{getattr(self, name)}': {e}") from e

    @cached_property
    def enter_re(self) -> re.Pattern:
        """The compiled enter directory pattern."""
        return re.compile(self.enter)

    @cached_property
    def leave_re(self) -> re.Pattern:
        """The compiled leave directory pattern."""
        return re.compile(self.leave)

    @cached_property
    def diff_header_re(self) -> re.Pattern:
        """The compiled diff log member header pattern."""
        return re.compile(self.diff_header)


@dataclass(frozen=True)
class BasicQuery:
    """The file names of a diff log, and their terms."""

    file_names: tuple[str, ...] = ()
    terms: tuple[str, ...] = ()

    @classmethod
    def of(cls, file_names: list[str]) -> "BasicQuery":
        """Creates a new `BasicQuery`, de-duplicating `file_names` and tokenizing them.

        Args:
            file_names (list[str]): The file names, in order of appearance.

        Returns:
            BasicQuery: The new `BasicQuery`
        """
        names = tuple(dict.fromkeys(file_names))
        return cls(names, tuple(t for name in names for t in tokenize(name)))


@dataclass(frozen=True)
class CommandSegment:
    """The build log lines executed within one directory: a document of the augmentation corpus."""

    segment_id: int
    directory: str
    lines: tuple[str, ...] = field(repr=False)

    @property
    def text(self) -> str:
        """The lines of this segment, joined by newlines."""
        return "\n".join(self.lines)

    @cached_property
    def term_freqs(self) -> Mapping[str, int]:
        """term -> number of occurrences in this segment."""
        return dict(Counter(tokenize(self.text)))


def _path_tokens(member: str) -> list[str]:
    return [t for t in (raw.strip(_TOKEN_EDGES) for raw in member.split()) if looks_like_file_name(t)]


def extract_basic_query(diff_log: str, patterns: LogPatterns = LogPatterns()) -> BasicQuery:
    """Extracts the basic query from a binary diff log: every path-like string found on a member header line.  Hunk bodies are ignored.

    Args:
        diff_log (str): The text of the diff log.
        patterns (LogPatterns, optional): The patterns to use.  Only `diff_header` is used. Defaults to LogPatterns().

    Returns:
        BasicQuery: The basic query.  Empty if there are no header lines.
    """
    names = []
    for line in split_lines(diff_log):
        if m := patterns.diff_header_re.search(line):
            names.extend(_path_tokens(m.groupdict().get("member") or m.group(0)))

    log.debug("basic query has %d file names", len(names))
    return BasicQuery.of(names)


def segment_build_log(build_log: str, patterns: LogPatterns = LogPatterns()) -> list[CommandSegment]:
    """Splits a build log into command segments, at its enter/leave directory markers.  Each enter marker opens a fresh segment, which owns every line until its matching leave marker (inclusive) except the lines of nested segments.  Lines after a leave marker belong to the enclosing segment again.

    Args:
        build_log (str): The text of the build log.
        patterns (LogPatterns, optional): The patterns to use.  Only `enter` and `leave` are used. Defaults to LogPatterns().

    Returns:
        list[CommandSegment]: The segments, numbered from 0 in order of their first line.  Lines before the first marker form the first segment.  An empty log yields no segments.
    """
    segments: list[tuple[str, list[str]]] = [("", [])]
    stack = [0]

    for n, line in enumerate(split_lines(build_log), 1):
        if m := patterns.enter_re.search(line):
            segments.append((m.groupdict().get("directory") or "", [line]))
            stack.append(len(segments) - 1)
            continue

        segments[stack[-1]][1].append(line)

        if patterns.leave_re.search(line):
            if len(stack) > 1:
                stack.pop()
            else:
                log.warning("Line %d of the build log leaves a directory that was never entered", n)

    if len(stack) > 1:
        log.debug("%d directories were never left, closing them at the end of the build log", len(stack) - 1)

    return [CommandSegment(i, directory, tuple(lines)) for i, (directory, lines) in enumerate(s for s in segments if s[1])]


def extract_patch_files(patch: str) -> list[str]:
    """Lists the files touched by a unified diff, from its `diff --git`, `---` and `+++` headers.  The first path component (the `a/`, `b/` or `pkg-1.0/` prefix) is stripped when there is more than one, and `/dev/null` is ignored.  Hunk bodies are skipped using the line counts of their `@@` headers, so removed or added lines starting with `--` or `++` are never read as headers.

    Args:
        patch (str): The text of the patch.

    Returns:
        list[str]: The normalized paths, de-duplicated, in order of first appearance.
    """
    paths = []
    old_left = new_left = 0

    for line in split_lines(patch):
        if old_left > 0 or new_left > 0:
            if line.startswith("-"):
                old_left -= 1
            elif line.startswith("+"):
                new_left -= 1
            elif not line.startswith("\\"):
                old_left -= 1
                new_left -= 1
            continue

        if m := _HUNK_HEADER.match(line):
            old_left, new_left = int(m.group("old") or 1), int(m.group("new") or 1)
            continue

        if not (m := _PATCH_HEADER.match(line)):
            continue

        if side := m.group("side"):
            if side == "/dev/null":
                continue
            candidates = [normalize_relpath(side).split("/", 1)[-1]]
        else:
            candidates = [m.group("old"), m.group("new")]

        paths.extend(p for c in candidates if (p := normalize_relpath(c)))

    return list(dict.fromkeys(paths))
