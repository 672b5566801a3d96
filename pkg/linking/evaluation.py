"""Accuracy, InKB micro precision/recall/F1 and difficulty-bracket reports."""
import json
import logging
from collections import Counter
from dataclasses import asdict, dataclass

from .exceptions import DocMismatchError, EmptyInputError
from .kb import BRACKET_LABELS, difficulty_bracket

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class MicroPRF:
    precision: float
    recall: float
    f1: float
    tp: int
    fp: int
    fn: int

    @classmethod
    def from_counts(cls, tp, fp, fn):
        precision = tp / (tp + fp) if tp + fp else 0.0
        recall = tp / (tp + fn) if tp + fn else 0.0
        f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
        return cls(precision, recall, f1, tp, fp, fn)


@dataclass(frozen=True)
class EdPrediction:
    """One disambiguated mention: its surface form, gold entity and prediction (or None)."""
    surface: str
    gold: str
    predicted: str = None


def ed_accuracy(predictions):
    """Share of (gold, predicted) pairs that agree; None predictions count as wrong."""
    pairs = [(p.gold, p.predicted) if isinstance(p, EdPrediction) else tuple(p) for p in predictions]
    if not pairs:
        raise EmptyInputError("no predictions to score")
    return sum(1 for gold, predicted in pairs if predicted is not None and gold == predicted) / len(pairs)


def micro_prf(pred, gold, in_kb):
    """Exact (start, end, entity) matching pooled over documents.

    Gold annotations whose entity is not in ``in_kb`` are removed before counting.
    """
    pred_by_doc = {result.doc_id: result for result in pred}
    gold_by_doc = {result.doc_id: result for result in gold}
    if set(pred_by_doc) != set(gold_by_doc):
        missing = sorted(set(gold_by_doc) ^ set(pred_by_doc))
        raise DocMismatchError(f"prediction and gold documents differ: {missing[:5]}")
    tp = fp = fn = 0
    for doc_id in sorted(gold_by_doc):
        gold_keys = {(a.start, a.end, a.entity_id) for a in gold_by_doc[doc_id].annotations if a.entity_id in in_kb}
        pred_keys = {(a.start, a.end, a.entity_id) for a in pred_by_doc[doc_id].annotations}
        tp += len(pred_keys & gold_keys)
        fp += len(pred_keys - gold_keys)
        fn += len(gold_keys - pred_keys)
    return MicroPRF.from_counts(tp, fp, fn)


@dataclass(frozen=True)
class BracketRow:
    count: int
    correct: int

    @property
    def accuracy(self):
        return self.correct / self.count if self.count else None


def bracket_report(predictions, prior_table):
    """Accuracy per difficulty bracket of the gold entity's prior."""
    counts = Counter()
    correct = Counter()
    for prediction in predictions:
        label = difficulty_bracket(prior_table.prior(prediction.surface, prediction.gold))
        counts[label] += 1
        if prediction.predicted is not None and prediction.predicted == prediction.gold:
            correct[label] += 1
    return {label: BracketRow(counts[label], correct[label]) for label in BRACKET_LABELS}


# ============================================
# REPORTS
# ============================================

def build_report(dataset, metric, value, counts=None, brackets=None):
    report = {"dataset": dataset, "metric": metric, "value": value, "counts": counts or {}, "brackets": {}}
    for label, row in (brackets or {}).items():
        entry = {"count": row.count}
        if row.count:
            entry["accuracy"] = row.accuracy
        report["brackets"][label] = entry
    return report


def prf_report(dataset, scores):
    counts = {k: v for k, v in asdict(scores).items() if k in ("tp", "fp", "fn")}
    counts.update(precision=scores.precision, recall=scores.recall)
    return build_report(dataset, "inkb_micro_f1", scores.f1, counts)


def report_json(report):
    return json.dumps(report, sort_keys=True)


def format_table(report):
    """Plain-text rendering of a report for the terminal."""
    lines = [f"{report['dataset']}  {report['metric']} = {report['value']:.4f}"]
    for key, value in sorted(report["counts"].items()):
        lines.append(f"  {key:<10} {value:.4f}" if isinstance(value, float) else f"  {key:<10} {value}")
    if report["brackets"]:
        lines.append(f"  {'bracket':<14} {'count':>6} {'accuracy':>9}")
        for label, entry in report["brackets"].items():
            accuracy = f"{entry['accuracy']:.4f}" if "accuracy" in entry else "-"
            lines.append(f"  {label:<14} {entry['count']:>6} {accuracy:>9}")
    return "\n".join(lines)
