import json
import tempfile
from io import StringIO
from pathlib import Path

from django.core.management import call_command
from django.core.management.base import CommandError
from django.test import TestCase, tag

from games.exceptions import DataError, DomainError
from games.models import ExperimentRun
from games.services.pipeline import RunConfig
from games.services.stats import CountsDataset


def run_command(command, **options):
    out = StringIO()
    call_command(command, stdout=out, no_color=True, **options)
    return out.getvalue()


class ClassicalValueCommandTests(TestCase):
    def test_colorable_graph(self):
        self.assertEqual(run_command("classical_value", graph="k3.json", colors=3).strip(), "1")

    def test_rational_and_decimal(self):
        self.assertIn("7/9 ≈ 0.77778", run_command("classical_value", graph="k3.json", colors=2))

    def test_size_guard_exit_code(self):
        with self.assertRaises(CommandError) as ctx:
            run_command("classical_value", graph="g14.json", max_bits=20)
        self.assertEqual(ctx.exception.returncode, 2)

    def test_missing_graph_exit_code(self):
        with self.assertRaises(CommandError) as ctx:
            run_command("classical_value", graph="/nonexistent/graph.json")
        self.assertEqual(ctx.exception.returncode, 3)

    @tag("slow")
    def test_g14(self):
        self.assertIn("86/88 ≈ 0.97727", run_command("classical_value", graph="g14.json", colors=4))


class StepCommandTests(TestCase):
    """strategy_fit -> circuits -> simulate -> analyze -> pbr on the 4-color K2 game."""

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.dir = Path(self.tmp.name)

    def tearDown(self):
        self.tmp.cleanup()

    def path(self, name):
        return str(self.dir / name)

    def test_chain(self):
        out = run_command("strategy_fit", graph="k2.json", restarts=1, out=self.path("params.json"),
                          strategy_out=self.path("strategy.json"))
        self.assertIn("one_rxx: value", out)
        self.assertEqual(len(json.loads(Path(self.path("strategy.json")).read_text())), 2)

        out = run_command("circuits", graph="k2.json", params=self.path("params.json"),
                          out=self.path("circuits.json"))
        self.assertIn("3 circuits, 4 rxx gates each", out)

        run_command("simulate", circuits=self.path("circuits.json"), preset="gold", shots=200, seed=3,
                    out=self.path("counts.jsonl"))
        dataset = CountsDataset.read_jsonl(self.path("counts.jsonl"))
        self.assertEqual(sorted(r.label for r in dataset.records), ["e0_1", "v0", "v1"])

        out = run_command("analyze", graph="k2.json", counts=self.path("counts.jsonl"), spam_correct=True,
                          preset="gold", out=self.path("report.json"), frontier=self.path("frontier.csv"),
                          record=True)
        self.assertIn("not above the classical bound 1", out)
        report = json.loads(Path(self.path("report.json")).read_text())
        self.assertIsNotNone(report["winrate_corrected"])
        self.assertIsNone(report["winrate_corrected"]["p_value"])
        self.assertTrue(Path(self.path("frontier.csv")).exists())
        self.assertTrue(ExperimentRun.objects.get().has_corrected_report)

        out = run_command("pbr", graph="k2.json", counts=self.path("counts.jsonl"), folds=2,
                          out=self.path("pbr.json"))
        self.assertIn("min p_U", out)
        self.assertEqual(len(json.loads(Path(self.path("pbr.json")).read_text())["per_fold"]), 2)

    def test_perfect_compilation_needs_valid_representation(self):
        rep = self.dir / "rep.json"
        rep.write_text(json.dumps({"0": [1, 0, 0, 0], "1": [1, 0, 0, 0]}))
        with self.assertRaises(CommandError) as ctx:
            run_command("strategy_fit", graph="k2.json", perfect=True, rep=str(rep), out=self.path("p.json"))
        self.assertEqual(ctx.exception.returncode, 3)

    def test_repfind(self):
        out = run_command("repfind", graph="k3.json", dim=3, restarts=2, out=self.path("rep.json"))
        self.assertIn("(valid)", out)
        self.assertEqual(set(json.loads(Path(self.path("rep.json")).read_text())), {"0", "1", "2"})

    def test_analyze_missing_counts(self):
        with self.assertRaises(CommandError) as ctx:
            run_command("analyze", graph="k2.json", counts=self.path("missing.jsonl"))
        self.assertEqual(ctx.exception.returncode, 3)


class IngestCommandTests(TestCase):
    def test_json_counts_are_recorded(self):
        with tempfile.TemporaryDirectory() as tmp:
            source = Path(tmp) / "hw.json"
            # little-endian strings: the rightmost character is qubit 0
            source.write_text(json.dumps({
                "v0": {"0000": 9, "1000": 1},
                "v1": {"1111": 10},
                "e0_1": {"1000": 10},
            }))
            out = run_command("ingest", graph="k2.json", input=str(source), bit_order="little",
                              out=str(Path(tmp) / "counts.jsonl"), record=True, name="hw")
            dataset = CountsDataset.read_jsonl(Path(tmp) / "counts.jsonl")
        self.assertIn("3 circuits, 30 shots", out)
        self.assertEqual(dataset.by_label()["e0_1"].counts, {"0001": 10})
        run = ExperimentRun.objects.get()
        self.assertEqual((run.name, run.provenance), ("hw", ExperimentRun.INGESTED))
        self.assertEqual(run.records.count(), 3)

    def test_incomplete_dataset(self):
        with tempfile.TemporaryDirectory() as tmp:
            source = Path(tmp) / "hw.csv"
            source.write_text("label,bitstring,count\nv0,0000,5\n")
            with self.assertRaises(CommandError) as ctx:
                run_command("ingest", graph="k2.json", input=str(source), out=str(Path(tmp) / "c.jsonl"))
        self.assertEqual(ctx.exception.returncode, 3)
        self.assertIn("e0_1", str(ctx.exception))
        self.assertFalse(ExperimentRun.objects.exists())


class RunCommandTests(TestCase):
    def run_pipeline(self, out_dir, **options):
        defaults = dict(graph="k2.json", preset="ideal", shots=60, seed=7, restarts=1, folds=2,
                        output_dir=str(out_dir))
        defaults.update(options)
        return run_command("run", **defaults)

    def test_artifacts_and_determinism(self):
        with tempfile.TemporaryDirectory() as tmp:
            first, second = Path(tmp) / "a", Path(tmp) / "b"
            out = self.run_pipeline(first, record=True)
            self.run_pipeline(second)
            for name in ("report.json", "pbr.json", "frontier.csv", "circuits.json", "counts.jsonl",
                         "params.json"):
                self.assertTrue((first / name).exists(), name)
            reports = [json.loads((d / "report.json").read_text()) for d in (first, second)]
            pbrs = [json.loads((d / "pbr.json").read_text()) for d in (first, second)]
            counts = [(d / "counts.jsonl").read_text() for d in (first, second)]

        self.assertIn("omega =", out)
        for data in reports + pbrs:
            self.assertEqual(data["meta"]["seed"], 7)
            self.assertEqual(len(data["meta"]["graph_hash"]), 64)
            data["meta"].pop("created_at")
        self.assertEqual(reports[0], reports[1])
        self.assertEqual(pbrs[0], pbrs[1])
        self.assertEqual(counts[0], counts[1])
        self.assertEqual(reports[0]["classical_value"], "1")
        self.assertEqual(reports[0]["provenance"], "simulated")
        self.assertTrue(reports[0]["notes"])
        self.assertEqual(ExperimentRun.objects.get().seed, 7)

    def test_partial_counts_are_reported(self):
        with tempfile.TemporaryDirectory() as tmp:
            counts = Path(tmp) / "partial.jsonl"
            counts.write_text(json.dumps({"label": "v0", "kind": "vertex", "shots": 1,
                                          "counts": {"0000": 1}}) + "\n")
            with self.assertRaises(CommandError) as ctx:
                self.run_pipeline(Path(tmp) / "out", counts=str(counts), preset="")
        self.assertEqual(ctx.exception.returncode, 3)
        self.assertIn("v1", str(ctx.exception))


class RunConfigTests(TestCase):
    def test_validation(self):
        with self.assertRaises(DomainError):
            RunConfig(shots=0).validate()
        with self.assertRaises(DomainError):
            RunConfig(delta=1.0).validate()
        with self.assertRaises(DomainError):
            RunConfig(preset="blue", noise_path="noise.json").validate()
        with self.assertRaises(DataError):
            RunConfig(counts_path="/nonexistent/counts.jsonl").validate()
        self.assertEqual(RunConfig(preset="blue").validate().noise().name, "blue")
