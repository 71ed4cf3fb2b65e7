import itertools
import json
import math
import random

from dataclasses import replace
from pathlib import Path
from tempfile import TemporaryDirectory

from reprolocate.errors import DomainError, InputError
from reprolocate.evaluation import (accuracy_at, alpha_sweep, average_precision, compare_reports, DEFAULT_ALPHA_GRID, EvalReport, evaluate_dataset, evaluate_variants,
                                    load_manifest, METRICS, PackageResult, PipelineConfig, precision_at, precision_recall_trend, recall_at, rule_ablation,
                                    wilcoxon_signed_rank)
from reprolocate.ranker import LocalizeOptions, Variant

from .base import ReprolocateTestCase


def _brute_force_ap(ranked: list[str], truth: set[str]) -> float:
    return sum(len(set(ranked[:k]) & truth) / k for k in range(1, len(ranked) + 1) if ranked[k - 1] in truth) / len(truth)


def _config(variant: Variant, alpha: float = 0.3) -> PipelineConfig:
    return PipelineConfig(alpha, LocalizeOptions(variant))


class TestMetrics(ReprolocateTestCase):
    """Test the ranking metrics"""

    def test_examples(self):
        ranked = ["a", "b", "c"]

        self.assertAlmostEqual((1 + 2 / 3) / 2, average_precision(ranked, {"a", "c"}))
        self.assertEqual(0.5, average_precision(ranked, {"b"}))
        self.assertEqual(0.0, average_precision(ranked, {"z"}))
        self.assertEqual(0.5, recall_at(ranked, {"a", "b"}, 1))
        self.assertEqual(0.2, precision_at(ranked, {"a", "c"}, 10))
        self.assertEqual(0.2, precision_at(["a"], {"a"}, 5))
        self.assertEqual(1, accuracy_at(ranked, {"c"}, 3))
        self.assertEqual(0, accuracy_at(ranked, {"c"}, 2))

    def test_domain(self):
        with self.assertRaises(DomainError):
            precision_at(["a"], {"a"}, 0)
        with self.assertRaises(DomainError):
            accuracy_at(["a"], {"a"}, 0)
        with self.assertRaises(DomainError):
            recall_at(["a"], set(), 1)
        with self.assertRaises(DomainError):
            average_precision(["a"], set())

    def test_brute_force(self):
        rng = random.Random(2016)

        for trial in range(1000):
            files = [f"f{i}" for i in range(rng.randint(1, 30))]
            ranked = rng.sample(files, len(files))
            truth = set(rng.sample(files, rng.randint(1, len(files)))) | ({"missing"} if rng.random() < 0.2 else set())

            with self.subTest(trial=trial):
                self.assertAlmostEqual(_brute_force_ap(ranked, truth), average_precision(ranked, truth), delta=1e-12)

                recalls = [recall_at(ranked, truth, n) for n in range(1, 12)]
                self.assertListEqual(sorted(recalls), recalls)
                self.assertEqual(precision_at(ranked, truth, 1), accuracy_at(ranked, truth, 1))

                for n in (1, 5, 10):
                    hits = len(set(ranked[:n]) & truth)
                    self.assertAlmostEqual(hits / n, precision_at(ranked, truth, n), delta=1e-12)
                    self.assertAlmostEqual(hits / len(truth), recall_at(ranked, truth, n), delta=1e-12)
                    self.assertEqual(int(hits > 0), accuracy_at(ranked, truth, n))

    def test_package_result(self):
        r = PackageResult.of("pkg", ["a", "b", "c"], {"b"}, category="locale")

        self.assertSetEqual(set(METRICS), set(r.metrics))
        self.assertTupleEqual((2,), r.hit_ranks)
        self.assertEqual(0.0, r.metrics["A@1"])
        self.assertEqual(1.0, r.metrics["A@5"])
        self.assertEqual(0.5, r.metrics["AP"])
        self.assertEqual(3, r.n_ranked)


class TestManifest(ReprolocateTestCase):
    """Test loading dataset manifests"""

    def test_load_manifest(self):
        entries = load_manifest(self.MANIFEST)

        self.assertListEqual(["ts-gzip", "ts-datemacro", "ts-datecmd", "fo-wildcard", "lc-sort", "ts-localtime"], [e.package_id for e in entries])
        self.assertEqual(self.PACKAGES / "ts-gzip" / "source", entries[0].source_dir)
        self.assertEqual(frozenset({"Makefile"}), entries[0].resolve_truth())
        self.assertEqual("timestamps", entries[0].category)

        datecmd = entries[2]
        self.assertEqual(frozenset(), datecmd.truth)
        self.assertEqual(frozenset({"gen-version.sh"}), datecmd.resolve_truth())

    def test_malformed(self):
        record = {"id": "p", "source": "src", "diff_log": "d.log", "build_log": "b.log", "truth": ["x"]}
        bad = {
            "not json": "{nope",
            "missing key": json.dumps({k: v for k, v in record.items() if k != "source"}),
            "duplicate id": f"{json.dumps(record)}\n{json.dumps(record)}",
            "truth not a list": json.dumps({**record, "truth": "Makefile"}),
            "not an object": json.dumps([record])
        }

        with TemporaryDirectory() as tempdir:
            for case, content in bad.items():
                (f := Path(tempdir) / "manifest.jsonl").write_text(content)
                with self.subTest(case=case), self.assertRaises(InputError):
                    load_manifest(f)

            with self.assertRaises(InputError):
                load_manifest(Path(tempdir) / "missing.jsonl")

            (f := Path(tempdir) / "manifest.jsonl").write_text(json.dumps(record | {"truth": []}))
            with self.assertRaises(InputError):
                load_manifest(f)[0].resolve_truth()


class TestEvaluate(ReprolocateTestCase):
    """Test the evaluation harness on the fixture dataset"""

    def test_full(self):
        r = evaluate_dataset(self.MANIFEST)

        self.assertEqual(6, r.n_packages)
        self.assertDictEqual({}, dict(r.failures))
        self.assertListEqual(sorted(self.PACKAGE_IDS), [p.package_id for p in r.per_package])
        self.assertEqual(1.0, r.aggregate["A@1"])
        self.assertEqual(1.0, r.aggregate["MAP"])
        self.assertAlmostEqual(0.1, r.aggregate["P@10"])
        self.assertNotIn("AP", r.aggregate)

        self.assertListEqual(["file-ordering", "locale", "timestamps"], list(r.by_category))
        self.assertEqual(1.0, r.by_category["timestamps"]["MAP"])

        for m in METRICS:
            self.assertAlmostEqual(math.fsum(p.metrics[m] for p in r.per_package) / 6, r.aggregate["MAP" if m == "AP" else m], delta=1e-12)

    def test_variants(self):
        hf, fr, fr_qa, full = evaluate_variants(self.MANIFEST, list(Variant))

        self.assertListEqual([Variant.HF, Variant.FR, Variant.FR_QA, Variant.FULL], [r.variant for r in (hf, fr, fr_qa, full)])
        self.assertEqual(1.0, hf.aggregate["MAP"])
        self.assertAlmostEqual(11 / 12, fr.aggregate["MAP"])
        self.assertAlmostEqual(11 / 12, fr_qa.aggregate["MAP"])
        self.assertEqual(1.0, full.aggregate["MAP"])

        self.assertTupleEqual((2,), next(p for p in fr.per_package if p.package_id == "ts-gzip").hit_ranks)
        self.assertAlmostEqual(fr.aggregate["MAP"], evaluate_dataset(self.MANIFEST, _config(Variant.FR)).aggregate["MAP"])

    def test_failures(self):
        entries = load_manifest(self.MANIFEST)[:2]
        broken = replace(entries[1], diff_log=self.PACKAGES / "nope.log")

        with self.assertLogs("reprolocate.evaluation", "WARNING"):
            r = evaluate_dataset([entries[0], broken])

        self.assertEqual(1, r.n_packages)
        self.assertListEqual(["ts-datemacro"], list(r.failures))
        self.assertEqual(1.0, r.aggregate["MAP"])

        with self.assertLogs("reprolocate.evaluation", "WARNING"):
            r = evaluate_dataset([broken])

        self.assertEqual(0, r.n_packages)
        self.assertDictEqual({}, dict(r.aggregate))

    def test_alpha_sweep(self):
        rows = alpha_sweep(self.MANIFEST)

        self.assertListEqual(list(DEFAULT_ALPHA_GRID), [r.alpha for r in rows])
        self.assertEqual(9, len(rows))
        self.assertTrue(all(r.map == 1.0 for r in rows))

        zero, = alpha_sweep(self.MANIFEST, [0.0])
        self.assertAlmostEqual(11 / 12, zero.map)

        with self.assertRaises(DomainError):
            alpha_sweep(self.MANIFEST, [0.5, 1.1])

    def test_rule_ablation(self):
        rows = rule_ablation(self.MANIFEST)

        self.assertListEqual(list(range(1, 15)), [r.rule_id for r in rows])
        self.assertEqual("TIME_MACRO", rows[0].name)
        self.assertAlmostEqual(5 / 9, rows[0].map)
        self.assertAlmostEqual(2 / 3, rows[1].map)
        self.assertTrue(all(r.a10 == 1.0 for r in rows))

    def test_trend(self):
        rows = precision_recall_trend(evaluate_dataset(self.MANIFEST))

        self.assertListEqual(list(range(1, 11)), [r.n for r in rows])
        for r in rows:
            self.assertAlmostEqual(1 / r.n, r.precision)
            self.assertEqual(1.0, r.recall)
            self.assertEqual(1.0, r.accuracy)

        with self.assertRaises(DomainError):
            precision_recall_trend(evaluate_dataset(self.MANIFEST), 0)


class TestWilcoxon(ReprolocateTestCase):
    """Test the signed-rank significance test"""

    X = [2.5, 1.0, 4.1, 5.2, 0.9, 6.0, 3.7, 1.8]
    Y = [1.0, 1.5, 2.0, 2.0, 2.0, 2.0, 1.0, 1.0]

    def test_exact(self):
        r = wilcoxon_signed_rank(self.X, self.Y)

        self.assertEqual("exact", r.method)
        self.assertEqual(8, r.n)
        self.assertEqual(4.0, r.statistic)
        self.assertAlmostEqual(14 / 256, r.p_value)
        self.assertFalse(r.significant)

    def test_exact_enumeration(self):
        rng = random.Random(99)

        for trial in range(20):
            d = [(i + 1) * rng.choice((-1, 1)) * 0.5 for i in range(rng.randint(6, 12))]
            rng.shuffle(d)

            ranks = {abs(v): k for k, v in enumerate(sorted(d, key=abs), 1)}
            w_minus = sum(ranks[abs(v)] for v in d if v < 0)
            w = min(w_minus, len(d) * (len(d) + 1) / 2 - w_minus)
            extreme = sum(1 for signs in itertools.product((0, 1), repeat=len(d)) if sum(k for k, s in zip(range(1, len(d) + 1), signs) if s) <= w)

            with self.subTest(trial=trial):
                r = wilcoxon_signed_rank(d, [0.0] * len(d))
                self.assertEqual(w, r.statistic)
                self.assertAlmostEqual(min(1.0, 2 * extreme / 2 ** len(d)), r.p_value, delta=1e-12)

    def test_asymptotic_with_ties(self):
        d = [1, 1, -1, 2, 2, 2, 3, -3, 4, 4, 5, 6, 6, -2, 7]
        r = wilcoxon_signed_rank(d, [0] * len(d))

        ranked = sorted(abs(v) for v in d)
        ranks = {v: (ranked.index(v) + 1 + len(ranked) - ranked[::-1].index(v)) / 2 for v in set(ranked)}
        w_plus = sum(ranks[abs(v)] for v in d if v > 0)

        n = len(d)
        ties = sum(t ** 3 - t for t in (ranked.count(v) for v in set(ranked)))
        z = (w_plus - n * (n + 1) / 4) / math.sqrt((n * (n + 1) * (2 * n + 1) - ties / 2) / 24)

        self.assertEqual("asymptotic", r.method)
        self.assertEqual(min(w_plus, n * (n + 1) / 2 - w_plus), r.statistic)
        self.assertAlmostEqual(math.erfc(abs(z) / math.sqrt(2)), r.p_value, delta=1e-6)

    def test_zero_differences_dropped(self):
        r = wilcoxon_signed_rank(self.X + [1.0, 2.0], self.Y + [1.0, 2.0])
        self.assertEqual(8, r.n)
        self.assertAlmostEqual(14 / 256, r.p_value)

    def test_domain(self):
        with self.assertRaises(DomainError):
            wilcoxon_signed_rank([1, 2, 3], [1, 2])
        with self.assertRaises(DomainError):
            wilcoxon_signed_rank([1, 2, 3, 4, 5], [0, 0, 0, 0, 0])
        with self.assertRaises(DomainError):
            wilcoxon_signed_rank([1.0] * 10, [1.0] * 10)

    def test_compare_reports(self):
        def report(values: list[float]) -> EvalReport:
            return EvalReport.of(Variant.FULL, 0.3, [PackageResult(f"p{i}", dict.fromkeys(METRICS, v)) for i, v in enumerate(values)])

        a, b = report(self.X), report(self.Y + [0.0])
        out = compare_reports(a, b)

        self.assertListEqual(["P@10", "R@10"], list(out))
        self.assertAlmostEqual(14 / 256, out["P@10"].p_value)
        self.assertEqual(8, out["R@10"].n)
