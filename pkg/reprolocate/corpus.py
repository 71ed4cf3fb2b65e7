"""ingestion of a package's source tree into a tokenized document collection"""

import logging
import os
import re

from collections import Counter, deque
from collections.abc import Iterator, Mapping
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

from .errors import InputError
from .utils import is_binary, matches_any, normalize_relpath
from .vsm import CorpusStats

log = logging.getLogger(__name__)

DEFAULT_SIZE_CAP = 8 * 1024 * 1024
VCS_DIRS = frozenset((".git", ".hg", ".svn", ".bzr", "CVS"))

_WORD = re.compile(r"[a-z0-9_]{2,}")
_WORD_ONLY = re.compile(r"[a-z0-9_]+")
_PATH_CHUNK = re.compile(r"(\S*/\S*)")
_PATH_EDGES = re.compile(r"^[^a-z0-9_]+|[^a-z0-9_]+$")


def _path_terms(chunk: str) -> list[str]:
    """Computes the extra terms emitted for a whitespace-delimited, lowercased chunk containing a `/`.

    Args:
        chunk (str): The chunk, e.g. `./usr/lib/libcompat.a`

    Returns:
        list[str]: The extension-less path, the full path (if different), then every component which is not a plain word.  For the example: `usr/lib/libcompat`, `usr/lib/libcompat.a`, `libcompat.a`
    """
    parts = [p for p in _PATH_EDGES.sub("", chunk).split("/") if p not in ("", ".", "..")]
    terms = []

    if len(parts) > 1:
        base, dot, _ = parts[-1].rpartition(".")
        stem = "/".join(parts[:-1] + [base if base and dot else parts[-1]])
        full = "/".join(parts)

        terms.append(stem)
        if full != stem:
            terms.append(full)

    terms.extend(p for p in parts if len(p) > 1 and not _WORD_ONLY.fullmatch(p))
    return terms


def tokenize(text: str) -> list[str]:
    """Splits `text` into lowercase terms.  Terms are maximal runs of `[A-Za-z0-9_]` at least two characters long.  Each whitespace-delimited chunk containing a `/` additionally contributes its path forms (see `_path_terms`), right after its word terms.

    Args:
        text (str): The text to tokenize.

    Returns:
        list[str]: The terms, in order of appearance.
    """
    text = text.lower()
    if "/" not in text:
        return _WORD.findall(text)

    terms = []
    for i, piece in enumerate(_PATH_CHUNK.split(text)):
        terms.extend(_WORD.findall(piece))
        if i % 2:
            terms.extend(_path_terms(piece))

    return terms


def term_counts(text: str) -> dict[str, int]:
    """Convenience method, tokenizes `text` and counts the occurrences of every term (`f_{t,d}`).

    Args:
        text (str): The text to process

    Returns:
        dict[str, int]: term -> number of occurrences.
    """
    return dict(Counter(tokenize(text)))


@dataclass(frozen=True)
class SourceFile:
    """A file of the package's source tree."""

    path: str
    content: bytes = field(repr=False)
    is_text: bool = True

    @cached_property
    def text(self) -> str:
        """The content of this file, decoded as UTF-8 with undecodable bytes replaced."""
        return self.content.decode("utf-8", errors="replace")


@dataclass(frozen=True)
class Document:
    """A tokenized text file: the `d` of the TF-IDF formula."""

    doc_id: int
    path: str
    term_freqs: Mapping[str, int] = field(repr=False)
    length: int = 0

    @classmethod
    def of(cls, doc_id: int, path: str, text: str) -> "Document":
        """Tokenizes `text` and creates a new `Document` from it.

        Args:
            doc_id (int): The id of the new document.
            path (str): The relative path of the file `text` was read from.
            text (str): The content to tokenize.

        Returns:
            Document: The new `Document`
        """
        tf = term_counts(text)
        return cls(doc_id, path, tf, sum(tf.values()))


@dataclass(frozen=True)
class IngestOptions:
    """Options controlling which files of a tree are ingested."""

    size_cap: int = DEFAULT_SIZE_CAP
    include: tuple[str, ...] = ()
    exclude: tuple[str, ...] = ()
    follow_symlinks: bool = False
    ignore_dirs: frozenset[str] = VCS_DIRS
    workers: int | None = None

    def accepts(self, rel_path: str) -> bool:
        """Determines whether a file should be ingested, according to the include/exclude patterns.

        Args:
            rel_path (str): The normalized path of the file relative to the root of the tree.

        Returns:
            bool: `True` if the file should be ingested.
        """
        return (not self.include or matches_any(rel_path, self.include)) and not matches_any(rel_path, self.exclude)


@dataclass(frozen=True)
class Corpus:
    """A tokenized source tree.  Immutable once built, documents are ordered by path."""

    files: tuple[SourceFile, ...] = field(repr=False)
    documents: tuple[Document, ...] = field(repr=False)
    df: Mapping[str, int] = field(repr=False)

    @classmethod
    def build(cls, files: list[SourceFile], documents: list[Document] | None = None) -> "Corpus":
        """Assembles a `Corpus` from source files, tokenizing the text files among them.

        Args:
            files (list[SourceFile]): The source files, in any order.
            documents (list[Document], optional): Pre-tokenized documents for the text files of `files`, in path order.  Computed if `None`. Defaults to None.

        Returns:
            Corpus: The new `Corpus`
        """
        files = sorted(files, key=lambda f: f.path)
        if documents is None:
            documents = [Document.of(i, f.path, f.text) for i, f in enumerate(f for f in files if f.is_text)]

        df = Counter()
        for d in documents:
            df.update(d.term_freqs.keys())

        return cls(tuple(files), tuple(documents), dict(df))

    @classmethod
    def from_texts(cls, texts: Mapping[str, str]) -> "Corpus":
        """Creates a `Corpus` from in-memory file contents.

        Args:
            texts (Mapping[str, str]): relative path -> file content

        Returns:
            Corpus: The new `Corpus`
        """
        return cls.build([SourceFile(normalize_relpath(p), t.encode("utf-8"), not is_binary(t.encode("utf-8"))) for p, t in texts.items()])

    @property
    def n_docs(self) -> int:
        """The number of text documents (`N`)."""
        return len(self.documents)

    @property
    def n_binary(self) -> int:
        """The number of files excluded from indexing because they are binary."""
        return sum(not f.is_text for f in self.files)

    @property
    def total_bytes(self) -> int:
        """The size of all files of the corpus, text and binary."""
        return sum(len(f.content) for f in self.files)

    @cached_property
    def stats(self) -> CorpusStats:
        """The document frequencies and document count of this corpus, for TF-IDF weighting."""
        return CorpusStats(self.df, self.n_docs)

    def text_files(self) -> Iterator[SourceFile]:
        """Iterates over the text files of this corpus, in path order.

        Returns:
            Iterator[SourceFile]: The text files.
        """
        return (f for f in self.files if f.is_text)


def _find_files(root: Path, options: IngestOptions) -> list[tuple[str, os.DirEntry]]:
    """Breadth-first search of `root` for files which should be ingested.

    Args:
        root (Path): The root of the tree.
        options (IngestOptions): The options to apply.

    Returns:
        list[tuple[str, os.DirEntry]]: (relative path, directory entry) pairs, sorted by relative path.
    """
    l = deque([(root, "")])
    seen = {root.resolve()}
    found = []

    while l:
        directory, prefix = l.popleft()
        try:
            with os.scandir(directory) as it:
                entries = list(it)
        except OSError as e:
            if directory == root:
                raise InputError(f"Unable to read source directory '{root}': {e}") from e

            log.warning("Unable to read directory '%s', skipping: %s", directory, e)
            continue

        for entry in entries:
            rel = f"{prefix}{entry.name}"

            try:
                if entry.is_symlink() and not options.follow_symlinks:
                    log.debug("not following symlink '%s'", rel)
                elif entry.is_dir(follow_symlinks=options.follow_symlinks):
                    if entry.name not in options.ignore_dirs and (real := Path(entry.path).resolve()) not in seen:
                        seen.add(real)
                        l.append((Path(entry.path), f"{rel}/"))
                elif entry.is_file(follow_symlinks=options.follow_symlinks) and options.accepts(rel):
                    found.append((rel, entry))
            except OSError as e:
                log.warning("Unable to stat '%s', skipping: %s", rel, e)

    return sorted(found, key=lambda t: t[0])


def _read(rel: str, entry: os.DirEntry, size_cap: int) -> SourceFile | None:
    """Reads a single file of the tree.  Problems are logged and the file is skipped.

    Args:
        rel (str): The relative path of the file.
        entry (os.DirEntry): The directory entry of the file.
        size_cap (int): Files larger than this many bytes are skipped.

    Returns:
        SourceFile | None: The file that was read, or `None` if it was skipped.
    """
    try:
        if (size := entry.stat().st_size) > size_cap:
            log.warning("Skipping '%s': %d bytes exceeds the size cap of %d bytes", rel, size, size_cap)
            return None

        content = Path(entry.path).read_bytes()
    except OSError as e:
        log.warning("Unable to read '%s', skipping: %s", rel, e)
        return None

    return SourceFile(rel, content, not is_binary(content))


def _load(rel: str, entry: os.DirEntry, size_cap: int) -> tuple[SourceFile, dict[str, int] | None] | None:
    if (f := _read(rel, entry, size_cap)) is None:
        return None

    return f, term_counts(f.text) if f.is_text else None


def ingest_tree(root: Path, options: IngestOptions = IngestOptions()) -> Corpus:
    """Reads and tokenizes every accepted file under `root`.  Files are read in parallel, but the result only depends on the tree's content.

    Args:
        root (Path): The root directory of the package's source tree.
        options (IngestOptions, optional): The ingestion options. Defaults to IngestOptions().

    Raises:
        InputError: If `root` does not exist or cannot be read.

    Returns:
        Corpus: The ingested corpus, one `Document` per text file, in lexicographic path order.
    """
    if not (root := Path(root)).is_dir():
        raise InputError(f"Source directory '{root}' does not exist or is not a directory")

    found = _find_files(root, options)
    log.debug("found %d candidate files under '%s'", len(found), root)

    with ThreadPoolExecutor(options.workers) as pool:
        loaded = [t for t in pool.map(lambda t: _load(*t, options.size_cap), found) if t]

    documents = [Document(i, f.path, tf, sum(tf.values())) for i, (f, tf) in enumerate(t for t in loaded if t[0].is_text)]
    corpus = Corpus.build([f for f, _ in loaded], documents)

    log.debug("ingested '%s': %d text documents, %d binary files, %d bytes", root, corpus.n_docs, corpus.n_binary, corpus.total_bytes)
    return corpus
