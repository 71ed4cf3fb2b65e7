"""shared utility methods for reprolocate"""

import os
import re

from collections.abc import Iterable
from fnmatch import fnmatchcase
from pathlib import Path, PurePosixPath
from tempfile import NamedTemporaryFile

BINARY_PROBE_SIZE = 8192

_FILE_NAME = re.compile(r"\w[\w.+~-]*\.[A-Za-z]{1,6}")


def _normalized_ext(name: str) -> str:
    """Convenience method, gets the final extension of `name` (without the dot), if any.

    Args:
        name (str): The file name to get the extension of.

    Returns:
        str: The extension of `name`, or the empty string if it has none.
    """
    return PurePosixPath(name).suffix[1:]


def looks_like_file_name(token: str) -> bool:
    """Determines whether `token` looks like a path or a `name.ext` file name, as found on the header lines of a binary diff.

    Args:
        token (str): The whitespace-free token to check.

    Returns:
        bool: `True` if `token` contains a `/` (and is not a command-line flag), or is a `name.ext` with a 1-6 letter extension.
    """
    if not token or token.startswith("-"):
        return False

    if "/" in token:
        return any(c.isalnum() for c in token)

    return bool(_FILE_NAME.fullmatch(token) and _normalized_ext(token).isalpha())


def normalize_relpath(p: str) -> str:
    """Normalizes a path so that it can be compared against corpus paths: `/`-separated, relative, without `.` components.

    Args:
        p (str): The path to normalize, e.g. `./debian/rules` or `/Makefile`

    Returns:
        str: The normalized path, e.g. `debian/rules` or `Makefile`.  `..` components are kept, since they cannot be resolved without a root.
    """
    return "/".join(part for part in p.replace("\\", "/").split("/") if part not in ("", "."))


def split_lines(text: str) -> list[str]:
    """Splits `text` into lines the way line-oriented tools do: on `\\n` only, with a trailing `\\r` removed and no phantom line after a final newline.

    Args:
        text (str): The text to split

    Returns:
        list[str]: The lines of `text`.  Empty if `text` is empty.
    """
    if not text:
        return []

    lines = text.split("\n")
    if lines[-1] == "":
        lines.pop()

    return [line[:-1] if line.endswith("\r") else line for line in lines]


def is_binary(data: bytes) -> bool:
    """Determines whether `data` is the content of a binary file, i.e. whether a NUL byte occurs in its first 8192 bytes.

    Args:
        data (bytes): The raw content to check.

    Returns:
        bool: `True` if `data` should be treated as binary.
    """
    return b"\0" in data[:BINARY_PROBE_SIZE]


def matches_any(rel_path: str, patterns: Iterable[str]) -> bool:
    """Checks `rel_path` against shell-style glob `patterns`.  A pattern matches either the whole relative path or the file name alone.

    Args:
        rel_path (str): A normalized relative path.
        patterns (Iterable[str]): The glob patterns to check.

    Returns:
        bool: `True` if any pattern matches.
    """
    name = rel_path.rsplit("/", 1)[-1]
    return any(fnmatchcase(rel_path, p) or fnmatchcase(name, p) for p in patterns)


def write_atomic(path: Path, text: str) -> None:
    """Writes `text` to `path` atomically, by writing a sibling temporary file and renaming it into place.

    Args:
        path (Path): The destination file.  Parent directories are created if needed.
        text (str): The content to write.
    """
    path.parent.mkdir(parents=True, exist_ok=True)

    f = NamedTemporaryFile("w", encoding="utf-8", dir=path.parent, prefix=f".{path.name}.", delete=False)
    try:
        with f:
            f.write(text)

        os.replace(f.name, path)
    except BaseException:
        Path(f.name).unlink(missing_ok=True)
        raise
