from pathlib import Path

from linking.evaluation import EdPrediction, bracket_report, build_report, ed_accuracy, format_table, report_json
from linking.exceptions import NoCandidatesError
from linking.kb import compute_prior
from linking.linker import LinkedSpan, LinkResult, disambiguate, prior_disambiguate
from linking.runtime import ordered_map

from ._base import LinkingCommand


class Command(LinkingCommand):
    help = 'Disambiguates every annotated mention and reports accuracy per difficulty bracket'
    config_fields = ("kb", "candidates", "corpus", "input", "out", "checkpoint", "method", "ed_k", "constrained")
    required = ("corpus",)

    def run(self, config, rng):
        corpus = self.load_corpus(config.corpus)
        documents = self.load_corpus(config.input) if config.input else corpus
        prior_table = compute_prior(corpus)
        mentions = [(d, a) for d in documents for a in d.annotations]

        if config.method == "prior":
            def predict(item):
                document, annotation = item
                return prior_disambiguate(document.surface(annotation), prior_table)
        else:
            store = self.load_store(config)
            candidate_map = self.load_candidates(config, store)
            reader = self.load_reader(config, self.load_tokenizer(config), "ed")

            def predict(item):
                document, annotation = item
                try:
                    return disambiguate(document, (annotation.start, annotation.end), store,
                                        candidate_map, reader, config.ed_k)
                except NoCandidatesError:
                    return None

        predicted = ordered_map(predict, mentions, config.threads)
        predictions = [
            EdPrediction(document.surface(annotation), annotation.entity_id, entity_id)
            for (document, annotation), entity_id in zip(mentions, predicted)
        ]
        accuracy = ed_accuracy(predictions)
        correct = sum(1 for p in predictions if p.predicted == p.gold)
        report = build_report(
            Path(config.input or config.corpus).stem, f"ed_accuracy_{config.method}", accuracy,
            {"mentions": len(predictions), "correct": correct},
            bracket_report(predictions, prior_table),
        )

        if config.out:
            self.write_predictions(config.out, documents, mentions, predicted)
        self.stdout.write(format_table(report))
        self.stdout.write(report_json(report))

    def write_predictions(self, path, documents, mentions, predicted):
        spans = {d.doc_id: [] for d in documents}
        for (document, annotation), entity_id in zip(mentions, predicted):
            if entity_id is not None:
                spans[document.doc_id].append(LinkedSpan(annotation.start, annotation.end, entity_id))
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8") as handle:
            for document in documents:
                handle.write(LinkResult(document.doc_id, tuple(spans[document.doc_id])).to_json() + "\n")
