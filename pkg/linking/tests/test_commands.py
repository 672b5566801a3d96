import json
import tempfile
from io import StringIO
from pathlib import Path

from django.core.management import call_command
from django.core.management.base import CommandError
from django.test import TestCase, tag

from linking import models, synthetic
from linking.management.commands.link import Command as LinkCommand


def entity_record(entity):
    return {"id": entity.id, "title": entity.title, "description": entity.description}


def document_record(document):
    return {
        "doc_id": document.doc_id,
        "text": document.text,
        "annotations": [{"start": a.start, "end": a.end, "entity_id": a.entity_id} for a in document.annotations],
    }


class CommandTestCase(TestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)
        self.dir = Path(self.tmp.name)
        self.checkpoint = str(self.dir / "checkpoints")

    def write_jsonl(self, name, records):
        path = self.dir / name
        path.write_text("".join(json.dumps(r) + "\n" for r in records), encoding="utf-8")
        return str(path)

    def write_fixture(self, store, candidate_map=None, corpus=None):
        paths = {"kb": self.write_jsonl("kb.jsonl", [entity_record(e) for e in store])}
        if candidate_map is not None:
            paths["candidates"] = self.write_jsonl(
                "candidates.jsonl", [{"mention": m, "candidates": list(ids)} for m, ids in candidate_map.items()]
            )
        if corpus is not None:
            paths["corpus"] = self.write_jsonl("corpus.jsonl", [document_record(d) for d in corpus])
        return paths

    def call(self, name, **options):
        out = StringIO()
        call_command(name, stdout=out, **options)
        return out.getvalue()

    def assertExitCode(self, code, name, **options):
        with self.assertRaises(CommandError) as ctx:
            self.call(name, **options)
        self.assertEqual(ctx.exception.returncode, code)
        return str(ctx.exception)


class IngestCommandTests(CommandTestCase):
    def test_stores_kb_and_reports_candidate_recall(self):
        paths = self.write_fixture(synthetic.charlton_store(), synthetic.charlton_candidates(),
                                   [synthetic.charlton_document()])
        output = self.call("ingest", checkpoint=self.checkpoint, **paths)

        self.assertEqual(models.Entity.objects.count(), 4)
        self.assertEqual(models.CandidateEntry.objects.count(), 4)
        self.assertIn("CL-RECALL@200: 1.0000", output)
        self.assertTrue((Path(self.checkpoint) / "vocab.txt").exists())

    def test_reingest_replaces_the_kb(self):
        paths = self.write_fixture(synthetic.charlton_store(), synthetic.charlton_candidates())
        self.call("ingest", checkpoint=self.checkpoint, **paths)
        self.call("ingest", checkpoint=self.checkpoint, kb=paths["kb"])
        self.assertEqual(models.Entity.objects.count(), 4)
        self.assertEqual(models.CandidateEntry.objects.count(), 0)

    def test_duplicate_title_is_a_runtime_error(self):
        kb = self.write_jsonl("kb.jsonl", [{"id": "a", "title": "Same"}, {"id": "b", "title": "Same"}])
        message = self.assertExitCode(2, "ingest", kb=kb, checkpoint=self.checkpoint)
        self.assertTrue(message.startswith("DuplicateTitleError"))
        self.assertIn("line 2", message)
        self.assertEqual(models.Entity.objects.count(), 0)

    def test_build_index_needs_a_trained_retriever(self):
        paths = self.write_fixture(synthetic.charlton_store(), corpus=[synthetic.charlton_document()])
        self.call("ingest", checkpoint=self.checkpoint, **paths)
        message = self.assertExitCode(1, "build_index", checkpoint=self.checkpoint)
        self.assertIn("train_retriever", message)


class ConfigurationTests(CommandTestCase):
    def test_missing_required_setting(self):
        message = self.assertExitCode(1, "evaluate")
        self.assertIn("--pred", message)
        self.assertIn("--gold", message)

    def test_nonexistent_path(self):
        gold = self.write_jsonl("gold.jsonl", [{"doc_id": "d"}])
        message = self.assertExitCode(1, "evaluate", pred=str(self.dir / "missing.jsonl"), gold=gold)
        self.assertIn("does not exist", message)

    def test_stride_larger_than_window(self):
        documents = self.write_jsonl("docs.jsonl", [{"doc_id": "d", "text": "x"}])
        message = self.assertExitCode(1, "link", input=documents, out=str(self.dir / "out.jsonl"),
                                      window="5", stride="10")
        self.assertIn("stride", message)

    def test_non_numeric_flag(self):
        self.assertExitCode(1, "gradcheck", d_model="eight")

    def test_config_file_then_flags(self):
        path = self.dir / "run.env"
        path.write_text("WINDOW=40\nstride=30\nk=7\n", encoding="utf-8")
        config = LinkCommand().load_config({"config": str(path), "window": "50"})
        self.assertEqual((config.window, config.stride, config.k), (50, 30, 7))
        self.assertEqual(config.n_cand, 16)

    def test_unknown_config_key(self):
        path = self.dir / "run.env"
        path.write_text("windw=40\n", encoding="utf-8")
        with self.assertRaises(CommandError) as ctx:
            LinkCommand().load_config({"config": str(path)})
        self.assertEqual(ctx.exception.returncode, 1)

    def test_missing_config_file(self):
        with self.assertRaises(CommandError) as ctx:
            LinkCommand().load_config({"config": str(self.dir / "absent.env")})
        self.assertEqual(ctx.exception.returncode, 1)


class GradcheckCommandTests(CommandTestCase):
    def test_passes_on_a_toy_model(self):
        output = self.call("gradcheck", d_model="8", seed="7")
        self.assertIn("max relative error", output)
        self.assertIn("Gradient check passed", output)

    def test_coarse_step_fails_with_a_toolkit_error(self):
        message = self.assertExitCode(2, "gradcheck", d_model="8", seed="7", epsilon=10.0)
        self.assertTrue(message.startswith("GradientCheckError"))


class EvaluateCommandTests(CommandTestCase):
    def test_hand_counted_report(self):
        kb = self.write_jsonl("kb.jsonl", [{"id": "A", "title": "Alpha"}, {"id": "B", "title": "Beta"},
                                           {"id": "C", "title": "Gamma"}])
        pred = self.write_jsonl("pred.jsonl", [{"doc_id": "d", "annotations": [
            {"start": 0, "end": 8, "entity_id": "A"}, {"start": 10, "end": 14, "entity_id": "B"}]}])
        gold = self.write_jsonl("gold.jsonl", [{"doc_id": "d", "annotations": [
            {"start": 0, "end": 8, "entity_id": "A"}, {"start": 20, "end": 24, "entity_id": "C"}]}])
        out = self.dir / "report.json"

        output = self.call("evaluate", pred=pred, gold=gold, kb=kb, out=str(out))

        report = json.loads(out.read_text(encoding="utf-8"))
        self.assertEqual(report["dataset"], "gold")
        self.assertEqual(report["metric"], "inkb_micro_f1")
        self.assertEqual(report["value"], 0.5)
        self.assertEqual((report["counts"]["tp"], report["counts"]["fp"], report["counts"]["fn"]), (1, 1, 1))
        self.assertIn("gold  inkb_micro_f1 = 0.5000", output)

    def test_document_mismatch(self):
        kb = self.write_jsonl("kb.jsonl", [{"id": "A", "title": "Alpha"}])
        pred = self.write_jsonl("pred.jsonl", [{"doc_id": "d1"}])
        gold = self.write_jsonl("gold.jsonl", [{"doc_id": "d2"}])
        message = self.assertExitCode(2, "evaluate", pred=pred, gold=gold, kb=kb)
        self.assertTrue(message.startswith("DocMismatchError"))


class DisambiguateCommandTests(CommandTestCase):
    def test_prior_baseline(self):
        store, candidate_map, corpus = synthetic.ed_fixture(n_examples=20)
        paths = self.write_fixture(store, candidate_map, corpus)
        out = self.dir / "ed.jsonl"

        output = self.call("disambiguate", corpus=paths["corpus"], method="prior", out=str(out))

        report = json.loads(output.strip().splitlines()[-1])
        self.assertEqual(report["metric"], "ed_accuracy_prior")
        self.assertEqual(report["counts"]["mentions"], 20)
        self.assertGreater(report["value"], 0.0)
        self.assertEqual(sum(row["count"] for row in report["brackets"].values()), 20)
        lines = out.read_text(encoding="utf-8").splitlines()
        self.assertEqual([json.loads(line)["doc_id"] for line in lines], [d.doc_id for d in corpus])

    def test_reader_needs_a_checkpoint(self):
        paths = self.write_fixture(synthetic.charlton_store(), synthetic.charlton_candidates(),
                                   [synthetic.charlton_document()])
        self.call("ingest", checkpoint=self.checkpoint, **paths)
        message = self.assertExitCode(1, "disambiguate", corpus=paths["corpus"], checkpoint=self.checkpoint)
        self.assertIn("train_reader --task ed", message)


@tag("slow")
class PipelineTests(CommandTestCase):
    def test_train_link_and_evaluate(self):
        store, candidate_map, corpus = synthetic.linking_corpus(n_docs=4, n_entities=12, mentions_per_doc=2)
        paths = self.write_fixture(store, candidate_map, corpus)
        shape = {"d_model": "8", "ff_width": "16", "layers": "1", "heads": "2", "n_cand": "4"}
        common = {"kb": paths["kb"], "checkpoint": self.checkpoint, "window": "20", "stride": "10", "k": "12"}

        self.call("train_retriever", corpus=paths["corpus"], steps="5", batch_size="2", negatives="4",
                  **shape, **common)
        self.assertTrue((Path(self.checkpoint) / "index" / "index.bin").exists())

        output = self.call("train_reader", corpus=paths["corpus"], task="el", steps="5", batch_size="2",
                           max_target_len="24", **shape, **common)
        self.assertIn("Reader (el) trained", output)

        single, pooled = self.dir / "single.jsonl", self.dir / "pooled.jsonl"
        self.call("link", input=paths["corpus"], out=str(single), threads="1", **common)
        self.call("link", input=paths["corpus"], out=str(pooled), threads="4", **common)
        self.assertEqual(single.read_bytes(), pooled.read_bytes())
        self.assertEqual(len(single.read_text(encoding="utf-8").splitlines()), 4)

        report_path = self.dir / "report.json"
        self.call("evaluate", pred=str(single), gold=paths["corpus"], kb=paths["kb"], out=str(report_path))
        report = json.loads(report_path.read_text(encoding="utf-8"))
        self.assertGreaterEqual(report["value"], 0.0)
        self.assertLessEqual(report["value"], 1.0)
