import math
import os
import random
import time

from pathlib import Path
from tempfile import TemporaryDirectory
from unittest import skipUnless

from reprolocate.corpus import Corpus, ingest_tree
from reprolocate.errors import ConfigError, DomainError, EmptyCorpusError
from reprolocate.logparse import BasicQuery, extract_basic_query, segment_build_log
from reprolocate.ranker import augment_query, Localization, localize, LocalizeOptions, score_file, Variant

from .base import ReprolocateTestCase


class TestAugmentQuery(ReprolocateTestCase):
    """Test augmenting basic queries with build log segments"""

    @classmethod
    def setUpClass(cls) -> None:
        cls.basic = extract_basic_query((cls.LOGS / "dietlibc_diff.log").read_text())
        cls.segments = segment_build_log((cls.LOGS / "dietlibc_build.log").read_text())

    def test_augment(self):
        q = augment_query(self.basic, self.segments, 1)

        self.assertEqual(3, len(self.segments))
        self.assertTupleEqual((2,), q.segment_ids)
        self.assertIn("ar cru bin-x86_64/libcompat.a bin-x86_64/daemon.o bin-x86_64/getdelim.o", q.augmentation[0])
        self.assertTupleEqual(self.basic.terms, q.terms[:len(self.basic.terms)])
        self.assertGreater(q.term_freqs["libcompat"], self.basic.terms.count("libcompat"))

    def test_no_augmentation(self):
        for q in (augment_query(self.basic, self.segments, 0), augment_query(self.basic, [], 1), augment_query(BasicQuery(), self.segments, 1)):
            self.assertTupleEqual((), q.augmentation)
            self.assertTupleEqual((), q.segment_ids)
            self.assertTupleEqual(q.basic.terms, q.terms)

    def test_negative_k(self):
        with self.assertRaises(DomainError):
            augment_query(self.basic, self.segments, -1)

        with self.assertRaises(ConfigError):
            LocalizeOptions(augment_top_k=-1)


class TestScoreFile(ReprolocateTestCase):
    """Test fusing similarities with heuristic filtering"""

    def test_examples(self):
        self.assertAlmostEqual(0.65, score_file(0.5, True, 0.3))
        self.assertAlmostEqual(0.35, score_file(0.5, False, 0.3))
        self.assertEqual(0.42, score_file(0.42, True, 0.0))
        self.assertEqual(1.0, score_file(0.1, True, 1.0))
        self.assertEqual(0.0, score_file(0.9, False, 1.0))

    def test_domain(self):
        for args in ((0.5, True, -0.1), (0.5, True, 1.5), (1.2, False, 0.3), (-0.2, False, 0.3)):
            with self.subTest(args=args), self.assertRaises(DomainError):
                score_file(*args)

    def test_monotonic_in_alpha(self):
        for sim in (0.0, 0.25, 0.8, 1.0):
            scores = [score_file(sim, True, a / 10) for a in range(11)]
            self.assertListEqual(sorted(scores), scores)


class TestLocalize(ReprolocateTestCase):
    """Test ranking the files of a package"""

    @classmethod
    def setUpClass(cls) -> None:
        cls.corpus, cls.diff_log, cls.build_log = cls.load_package("ts-gzip")

    def test_full(self):
        ranked = localize(self.corpus, self.diff_log, self.build_log)

        self.assertListEqual(["Makefile", "README", "doc.txt", "src/main.c"], ranked.paths())
        self.assertEqual(Variant.FULL, ranked.variant)
        self.assertEqual(0.3, ranked.alpha)
        self.assertTupleEqual((1,), ranked.query.segment_ids)

        makefile, readme = ranked.entries[:2]
        self.assertTrue(makefile.hf_matched)
        self.assertFalse(readme.hf_matched)
        self.assertAlmostEqual(104 / math.sqrt(176 * 248), makefile.similarity)
        self.assertAlmostEqual(116 / math.sqrt(184 * 248), readme.similarity)
        self.assertAlmostEqual(0.7 * 104 / math.sqrt(176 * 248) + 0.3, makefile.score)
        self.assertAlmostEqual(0.7 * 116 / math.sqrt(184 * 248), readme.score)
        self.assertListEqual([0.0, 0.0], [e.score for e in ranked.entries[2:]])

        self.assertListEqual(["Makefile"], list(ranked.evidence))
        self.assertEqual(4, ranked.evidence["Makefile"][0].line_number)

    def test_variants(self):
        loc = Localization.prepare(self.corpus, self.diff_log, self.build_log)

        fr = loc.rank(variant=Variant.FR)
        self.assertListEqual(["README", "Makefile", "doc.txt", "src/main.c"], fr.paths())
        self.assertEqual(0.0, fr.alpha)
        self.assertAlmostEqual(72 / math.sqrt(184 * 72), fr.entries[0].score)
        self.assertAlmostEqual(56 / math.sqrt(176 * 72), fr.entries[1].score)

        self.assertListEqual(["README", "Makefile", "doc.txt", "src/main.c"], loc.rank(variant=Variant.FR_QA).paths())

        hf = loc.rank(variant=Variant.HF)
        self.assertListEqual(["Makefile", "README", "doc.txt", "src/main.c"], hf.paths())
        self.assertEqual(1.0, hf.alpha)
        self.assertListEqual([1.0, 0.0, 0.0, 0.0], [e.score for e in hf])

    def test_alpha_bounds(self):
        for name in self.PACKAGE_IDS:
            loc = Localization.prepare(*self.load_package(name))

            with self.subTest(package=name):
                self.assertEqual(loc.rank(0.3, Variant.FR_QA).entries, loc.rank(0.0, Variant.FULL).entries)

                ranked = loc.rank(1.0)
                matched = [e.hf_matched for e in ranked]
                self.assertListEqual(sorted(matched, reverse=True), matched)
                self.assertTrue(all(0.0 <= e.score <= 1.0 for e in ranked))

    def test_scores_sorted(self):
        for alpha in (0.0, 0.1, 0.3, 0.7, 1.0):
            ranked = localize(self.corpus, self.diff_log, self.build_log, alpha)
            keys = [(-e.score, e.path) for e in ranked]
            self.assertListEqual(sorted(keys), keys)
            self.assertEqual(self.corpus.n_docs, len(ranked))

    def test_matched_file_dominates_tie(self):
        corpus = Corpus.from_texts({"a.c": "foo __TIME__", "b.c": "foo __DATE__"})
        loc = Localization.prepare(corpus, "--- foo.bar\n", "")

        self.assertEqual(loc.sims_augmented[0], loc.sims_augmented[1])
        self.assertListEqual(["a.c", "b.c"], loc.rank(0.3).paths())
        self.assertListEqual(["b.c", "a.c"], loc.rank(0.3, restrict_rules=[2]).paths())
        self.assertDictEqual({}, loc.hf_paths(restrict_rules=[3]))

    def test_empty_query(self):
        with self.assertLogs("reprolocate.ranker", "WARNING"):
            ranked = localize(self.corpus, "", self.build_log)

        self.assertListEqual([("Makefile", 0.3), ("README", 0.0), ("doc.txt", 0.0), ("src/main.c", 0.0)], [(e.path, e.score) for e in ranked])
        self.assertTupleEqual((), ranked.query.segment_ids)

    def test_empty_corpus(self):
        for texts in ({}, {"blob": "\0\1"}):
            with self.subTest(texts=texts), self.assertRaises(EmptyCorpusError):
                localize(Corpus.from_texts(texts), self.diff_log, self.build_log)

    def test_bad_alpha(self):
        with self.assertRaises(DomainError):
            localize(self.corpus, self.diff_log, self.build_log, 1.5)

    def test_deterministic(self):
        a = localize(self.corpus, self.diff_log, self.build_log, options=LocalizeOptions(workers=1))
        b = localize(self.corpus, self.diff_log, self.build_log, options=LocalizeOptions(workers=4))

        self.assertEqual(a.entries, b.entries)

    def test_timings(self):
        loc = Localization.prepare(self.corpus, self.diff_log, self.build_log)
        self.assertSetEqual({"query_augmentation", "heuristic_filtering"}, set(loc.timings))

        ranked = loc.rank()
        self.assertSetEqual({"query_augmentation", "heuristic_filtering", "indexing", "file_ranking"}, set(ranked.timings))
        self.assertTrue(all(t >= 0 for t in ranked.timings.values()))


class TestPerformance(ReprolocateTestCase):
    """Test ingesting and ranking generated trees within the time envelope"""

    @staticmethod
    def generate(root: Path, n_files: int, tokens_per_file: int) -> tuple[str, str]:
        """Convenience method, writes a tree of `n_files` random text files under `root`, 100 per directory.

        Returns:
            tuple[str, str]: A diff log and a build log naming some of the files.
        """
        rng = random.Random(1)
        vocabulary = [f"w{i}" for i in range(50000)]

        for i in range(n_files):
            (d := root / f"dir{i // 100}").mkdir(exist_ok=True)
            (d / f"file{i}.c").write_text(" ".join(rng.choices(vocabulary, k=tokens_per_file)))

        (root / "dir0" / "file0.c").write_text("const char *stamp = __DATE__;\n")

        diff_log = "--- a.deb\n+++ b.deb\n" + "".join(f"├── ./usr/lib/file{i}.o\n" for i in rng.sample(range(n_files), 20))
        build_log = "".join(f"make[1]: Entering directory '/build/dir{i}'\ncc -c file{i * 100}.c\nmake[1]: Leaving directory '/build/dir{i}'\n" for i in range(n_files // 100))

        return diff_log, build_log

    def assert_within(self, n_files: int, tokens_per_file: int, seconds: float):
        with TemporaryDirectory() as tempdir:
            diff_log, build_log = self.generate(root := Path(tempdir), n_files, tokens_per_file)

            start = time.perf_counter()
            ranked = localize(ingest_tree(root), diff_log, build_log)
            elapsed = time.perf_counter() - start

        self.assertEqual(n_files, len(ranked))
        self.assertLess(elapsed, seconds)

    def test_median_scale(self):
        self.assert_within(1000, 500, 10)

    @skipUnless(os.environ.get("REPROLOCATE_LARGE_TESTS"), "set REPROLOCATE_LARGE_TESTS=1 to rank a 20,000 file tree")
    def test_large_scale(self):
        self.assert_within(20000, 500, 60)
