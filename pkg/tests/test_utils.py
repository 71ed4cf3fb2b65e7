from pathlib import Path
from tempfile import TemporaryDirectory
from unittest.case import TestCase

from reprolocate.utils import is_binary, looks_like_file_name, matches_any, normalize_relpath, split_lines, write_atomic


class TestUtils(TestCase):
    """Test the shared utility methods"""

    def test_looks_like_file_name(self):
        self.assertTrue(looks_like_file_name("./usr/lib/libcompat.a"))
        self.assertTrue(looks_like_file_name("doc.txt.gz"))
        self.assertTrue(looks_like_file_name("data.tar.xz"))
        self.assertTrue(looks_like_file_name("usr/bin/hello"))
        self.assertFalse(looks_like_file_name("list"))
        self.assertFalse(looks_like_file_name("-1,3"))
        self.assertFalse(looks_like_file_name("0.34"))
        self.assertFalse(looks_like_file_name("@@"))
        self.assertFalse(looks_like_file_name("///"))
        self.assertFalse(looks_like_file_name(""))

    def test_normalize_relpath(self):
        self.assertEqual("debian/rules", normalize_relpath("./debian/rules"))
        self.assertEqual("Makefile", normalize_relpath("/Makefile"))
        self.assertEqual("a/b.c", normalize_relpath("a//./b.c"))
        self.assertEqual("src/x.c", normalize_relpath("src\\x.c"))
        self.assertEqual("", normalize_relpath("."))

    def test_split_lines(self):
        self.assertListEqual([], split_lines(""))
        self.assertListEqual(["a", "b"], split_lines("a\nb\n"))
        self.assertListEqual(["a", "", "b"], split_lines("a\r\n\r\nb"))
        self.assertListEqual([""], split_lines("\n"))

    def test_is_binary(self):
        self.assertTrue(is_binary(b"\x7fELF\0\0\0"))
        self.assertFalse(is_binary(b"plain text\n"))
        self.assertFalse(is_binary(b"a" * 8192 + b"\0"))
        self.assertFalse(is_binary(b""))

    def test_matches_any(self):
        self.assertTrue(matches_any("src/main.c", ["*.c"]))
        self.assertTrue(matches_any("src/main.c", ["src/*"]))
        self.assertTrue(matches_any("debian/rules", ["rules"]))
        self.assertFalse(matches_any("src/main.c", ["*.h", "doc/*"]))
        self.assertFalse(matches_any("Makefile", []))

    def test_write_atomic(self):
        with TemporaryDirectory() as tempdir:
            write_atomic(target := Path(tempdir) / "sub" / "out.tsv", "a\tb\n")
            self.assertEqual("a\tb\n", target.read_text())

            write_atomic(target, "c\n")
            self.assertEqual("c\n", target.read_text())
            self.assertListEqual(["out.tsv"], [p.name for p in target.parent.iterdir()])

    def test_write_atomic_failure(self):
        with TemporaryDirectory() as tempdir:
            write_atomic(target := Path(tempdir) / "out.tsv", "a\n")

            with self.assertRaises(UnicodeEncodeError):
                write_atomic(target, "\ud800")

            self.assertEqual("a\n", target.read_text())
            self.assertListEqual(["out.tsv"], [p.name for p in Path(tempdir).iterdir()])
