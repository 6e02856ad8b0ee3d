"""Chain-quality statistics and ordered-vs-unordered comparison."""

from __future__ import annotations

import json
from dataclasses import dataclass

from .graph import find_answer_sentences

_REPORT_KEYS = (
    "avg_chain_length",
    "answer_found_rate",
    "supp_precision",
    "supp_recall",
    "supp_f1",
    "qa_accuracy",
    "n_evaluated",
    "n_skipped",
)


@dataclass(frozen=True)
class StatsReport:
    avg_chain_length: float
    answer_found_rate: float
    supp_precision: float | None
    supp_recall: float | None
    supp_f1: float | None
    qa_accuracy: float | None
    n_evaluated: int
    n_skipped: int

    def to_dict(self) -> dict:
        # fixed key order for diff-ability
        return {key: getattr(self, key) for key in _REPORT_KEYS}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"


def supp_f1(predicted: set, gold: set) -> tuple[float, float, float]:
    """Set precision/recall/F1 of predicted evidence against gold sentences."""
    if not gold:
        raise ValueError("gold set must be non-empty")
    if not predicted:
        return 0.0, 0.0, 0.0
    overlap = len(set(predicted) & set(gold))
    precision = overlap / len(predicted)
    recall = overlap / len(gold)
    f1 = 0.0 if precision + recall == 0 else 2 * precision * recall / (precision + recall)
    return precision, recall, f1


def chain_stats(evidences, examples, predictions=None) -> StatsReport:
    """Aggregate evidence quality over aligned (evidence, example) pairs.

    evidences[i] is an ordered list of sentence indices, or None to mark the
    example skipped (e.g. unreachable oracle).  predictions, when given, is an
    aligned list of candidate indices (or None) for QA accuracy.
    """
    if len(evidences) != len(examples):
        raise ValueError("evidences and examples must be aligned")
    if predictions is not None and len(predictions) != len(examples):
        raise ValueError("predictions and examples must be aligned")

    lengths: list[int] = []
    found = 0
    supp: list[tuple[float, float, float]] = []
    correct = 0
    n_predicted = 0
    n_skipped = 0
    for i, (evidence, example) in enumerate(zip(evidences, examples)):
        if evidence is None:
            n_skipped += 1
            continue
        evidence = list(evidence)
        lengths.append(len(evidence))
        answers = find_answer_sentences(example)
        if any(g in answers for g in evidence):
            found += 1
        gold = example.supporting_facts if example.supporting_facts is not None else example.gold_chain
        if gold:
            supp.append(supp_f1(set(evidence), set(gold)))
        if predictions is not None and predictions[i] is not None and example.candidates:
            n_predicted += 1
            predicted = example.candidates[predictions[i]]
            answer = tuple(t.lower for t in example.answer_tokens)
            if tuple(t.lower for t in predicted) == answer:
                correct += 1

    n_evaluated = len(lengths)
    avg_len = sum(lengths) / n_evaluated if n_evaluated else 0.0
    found_rate = found / n_evaluated if n_evaluated else 0.0
    if supp:
        supp_p = sum(x[0] for x in supp) / len(supp)
        supp_r = sum(x[1] for x in supp) / len(supp)
        supp_f = sum(x[2] for x in supp) / len(supp)
    else:
        supp_p = supp_r = supp_f = None
    qa_accuracy = correct / n_predicted if n_predicted else None
    return StatsReport(
        avg_chain_length=avg_len,
        answer_found_rate=found_rate,
        supp_precision=supp_p,
        supp_recall=supp_r,
        supp_f1=supp_f,
        qa_accuracy=qa_accuracy,
        n_evaluated=n_evaluated,
        n_skipped=n_skipped,
    )


def compare_ordered_unordered(extractor: StatsReport, baseline: StatsReport) -> dict:
    """Per-metric deltas, extractor minus baseline, for reports computed over
    identical example sets."""
    if (extractor.n_evaluated, extractor.n_skipped) != (baseline.n_evaluated, baseline.n_skipped):
        raise ValueError("reports cover different example sets")
    deltas: dict = {}
    for key in _REPORT_KEYS[:6]:
        a = getattr(extractor, key)
        b = getattr(baseline, key)
        deltas[key] = None if a is None or b is None else a - b
    return deltas
