from pathlib import Path

from linking.evaluation import format_table, micro_prf, prf_report, report_json
from linking.linker import LinkResult

from ._base import LinkingCommand


class Command(LinkingCommand):
    help = 'Scores predicted annotations against gold with InKB micro precision, recall and F1'
    config_fields = ("pred", "gold", "kb", "out")
    required = ("pred", "gold")

    def run(self, config, rng):
        store = self.load_store(config)
        pred = [LinkResult.from_document(d) for d in self.load_corpus(config.pred, require_text=False)]
        gold = [LinkResult.from_document(d) for d in self.load_corpus(config.gold, require_text=False)]

        report = prf_report(Path(config.gold).stem, micro_prf(pred, gold, store))
        if config.out:
            Path(config.out).parent.mkdir(parents=True, exist_ok=True)
            Path(config.out).write_text(report_json(report) + "\n", encoding="utf-8")
        self.stdout.write(format_table(report))
        self.stdout.write(report_json(report))
