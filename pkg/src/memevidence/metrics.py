"""Per-case precision/recall/F1/accuracy/exact-match and corpus aggregation.

Scores are computed separately for each case (one meme plus its sentence
labels) on the positive class, then averaged arithmetically across cases.
Conventions for degenerate cases: a prediction with no positives against a
gold set with positives scores P = R = F1 = 0; if both sides are empty the
case scores P = R = F1 = 1; spurious positives against an empty gold set
score 0. Accuracy is the per-case fraction of correctly labeled sentences;
its corpus mean is the primary "accuracy" figure, with the sentence-pooled
(micro) variant reported alongside.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError


@dataclass(frozen=True)
class CaseMetrics:
    precision: float
    recall: float
    f1: float
    accuracy: float
    exact_match: float  # 0.0 or 1.0
    n: int
    correct: int


@dataclass(frozen=True)
class MetricsReport:
    accuracy: float
    f1: float
    precision: float
    recall: float
    exact_match: float
    case_count: int
    sentence_accuracy_micro: float
    cases: tuple[CaseMetrics, ...]

    def summary(self) -> dict[str, float]:
        return {"accuracy": self.accuracy, "f1": self.f1,
                "precision": self.precision, "recall": self.recall,
                "exact_match": self.exact_match}

    def to_dict(self) -> dict:
        return {**self.summary(), "case_count": self.case_count,
                "sentence_accuracy_micro": self.sentence_accuracy_micro}

    def to_text(self) -> str:
        lines = [f"cases              {self.case_count}"]
        for name in ("accuracy", "f1", "precision", "recall", "exact_match"):
            lines.append(f"{name:<18} {getattr(self, name):.4f}")
        lines.append(f"sentence_acc_micro {self.sentence_accuracy_micro:.4f}")
        return "\n".join(lines)


def case_metrics(pred, gold) -> CaseMetrics:
    """Positive-class P/R/F1 plus accuracy and exact match for one case."""
    pred = np.asarray(pred, dtype=np.int64).reshape(-1)
    gold = np.asarray(gold, dtype=np.int64).reshape(-1)
    if pred.shape != gold.shape:
        raise ValidationError(
            f"case_metrics: {pred.size} predictions vs {gold.size} gold labels")
    if pred.size == 0:
        raise ValidationError("case_metrics: empty case")
    tp = int(np.sum((pred == 1) & (gold == 1)))
    fp = int(np.sum((pred == 1) & (gold == 0)))
    fn = int(np.sum((pred == 0) & (gold == 1)))
    if tp + fp == 0 and tp + fn == 0:
        precision = recall = f1 = 1.0
    else:
        precision = tp / (tp + fp) if tp + fp > 0 else 0.0
        recall = tp / (tp + fn) if tp + fn > 0 else 0.0
        denom = precision + recall
        f1 = 2.0 * precision * recall / denom if denom > 0 else 0.0
    correct = int(np.sum(pred == gold))
    return CaseMetrics(precision=precision, recall=recall, f1=f1,
                       accuracy=correct / pred.size,
                       exact_match=1.0 if correct == pred.size else 0.0,
                       n=int(pred.size), correct=correct)


def aggregate(cases: list[CaseMetrics]) -> MetricsReport:
    """Arithmetic mean of each per-case field across the corpus."""
    if not cases:
        raise ValidationError("aggregate: no cases")
    count = len(cases)
    total_sentences = sum(c.n for c in cases)
    total_correct = sum(c.correct for c in cases)
    return MetricsReport(
        accuracy=sum(c.accuracy for c in cases) / count,
        f1=sum(c.f1 for c in cases) / count,
        precision=sum(c.precision for c in cases) / count,
        recall=sum(c.recall for c in cases) / count,
        exact_match=sum(c.exact_match for c in cases) / count,
        case_count=count,
        sentence_accuracy_micro=total_correct / total_sentences,
        cases=tuple(cases))
