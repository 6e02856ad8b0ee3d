import json

import pytest

from chainex.corpus import parse_record
from chainex.metrics import StatsReport, chain_stats, compare_ordered_unordered, supp_f1


class TestSuppF1:
    def test_perfect(self):
        assert supp_f1({1, 2}, {1, 2}) == (1.0, 1.0, 1.0)

    def test_hand_counted(self):
        p, r, f1 = supp_f1({1, 2}, {2, 3, 4})
        assert (p, r) == (0.5, pytest.approx(1 / 3))
        assert f1 == pytest.approx(0.4)

    def test_disjoint(self):
        assert supp_f1({1}, {2}) == (0.0, 0.0, 0.0)

    def test_empty_predicted(self):
        assert supp_f1(set(), {1}) == (0.0, 0.0, 0.0)

    def test_empty_gold_rejected(self):
        with pytest.raises(ValueError):
            supp_f1({1}, set())

    def test_swap_symmetry(self):
        p, r, f1 = supp_f1({1, 2}, {2, 3, 4})
        p2, r2, f2 = supp_f1({2, 3, 4}, {1, 2})
        assert (p, r, f1) == (r2, p2, f2)


def _example(gold=None, supporting=None, candidates=None):
    return parse_record({
        "id": "m",
        "question": "who made the Widget Prize ?",
        "answer": "Widget Prize",
        **({"candidates": candidates} if candidates else {}),
        "paragraphs": [{"sentences": [
            "the Widget Prize was made .",
            "some other sentence sits here .",
            "a third sentence exists .",
        ]}],
        **({"gold_chain": gold} if gold is not None else {}),
        **({"supporting_facts": supporting} if supporting is not None else {}),
    })


class TestChainStats:
    def test_perfect_evidence(self):
        examples = [_example(gold=[0, 1]), _example(gold=[0])]
        report = chain_stats([[0, 1], [0]], examples)
        assert report.supp_f1 == 1.0
        assert report.answer_found_rate == 1.0
        assert report.avg_chain_length == 1.5
        assert report.n_evaluated == 2 and report.n_skipped == 0

    def test_supporting_facts_preferred_over_gold(self):
        example = _example(gold=[1], supporting=[0])
        report = chain_stats([[0]], [example])
        assert report.supp_f1 == 1.0

    def test_skipped_entries(self):
        examples = [_example(gold=[0]), _example(gold=[0])]
        report = chain_stats([None, [1]], examples)
        assert report.n_skipped == 1 and report.n_evaluated == 1
        assert report.answer_found_rate == 0.0

    def test_qa_accuracy(self):
        candidates = ["Widget Prize", "Other Thing"]
        examples = [_example(gold=[0], candidates=candidates) for _ in range(2)]
        report = chain_stats([[0], [0]], examples, predictions=[0, 1])
        assert report.qa_accuracy == 0.5

    def test_qa_accuracy_none_without_predictions(self):
        report = chain_stats([[0]], [_example(gold=[0])])
        assert report.qa_accuracy is None

    def test_no_gold_reference_yields_null_supp(self):
        report = chain_stats([[0]], [_example()])
        assert report.supp_f1 is None and report.supp_precision is None

    def test_alignment_enforced(self):
        with pytest.raises(ValueError):
            chain_stats([[0]], [])

    def test_fixed_key_order(self):
        report = chain_stats([[0]], [_example(gold=[0])])
        assert list(json.loads(report.to_json())) == [
            "avg_chain_length", "answer_found_rate", "supp_precision",
            "supp_recall", "supp_f1", "qa_accuracy", "n_evaluated", "n_skipped",
        ]


class TestCompare:
    def _report(self, found, supp=1.0):
        return StatsReport(2.0, found, supp, supp, supp, None, 10, 0)

    def test_identical_reports_zero_deltas(self):
        deltas = compare_ordered_unordered(self._report(0.8), self._report(0.8))
        assert deltas["answer_found_rate"] == 0.0
        assert deltas["qa_accuracy"] is None

    def test_antisymmetry(self):
        a, b = self._report(0.9, 0.7), self._report(0.6, 0.5)
        forward = compare_ordered_unordered(a, b)
        backward = compare_ordered_unordered(b, a)
        for key, value in forward.items():
            if value is not None:
                assert backward[key] == pytest.approx(-value)

    def test_mismatched_sets_rejected(self):
        a = self._report(0.9)
        b = StatsReport(2.0, 0.9, 1.0, 1.0, 1.0, None, 9, 1)
        with pytest.raises(ValueError):
            compare_ordered_unordered(a, b)


def test_union_answer_found_monotone_over_top1():
    # supersets cannot lose answer containment: checked end to end on a
    # synthetic corpus with randomly initialized weights
    import numpy as np

    from chainex import model
    from chainex.syngen import GenConfig, generate_corpus

    corpus = generate_corpus(GenConfig(num_examples=12, seed=31))
    params = model.init_params(model.build_vocab(corpus), 8, 6, seed=31)
    rng = np.random.default_rng(31)
    params.tensors["ptr_w"][:] = rng.uniform(-0.5, 0.5, params.tensors["ptr_w"].shape)
    top1, union = [], []
    for example in corpus:
        enc = model.encode_example(params, example, "para")
        chains = model.beam_search(params, enc, beam_size=5, max_steps=4)
        top1.append(list(chains[0].indices))
        union.append(model.union_top_k(chains, k=5, cap=5))
        assert set(top1[-1]) <= set(union[-1])
    rep_top1 = chain_stats(top1, corpus)
    rep_union = chain_stats(union, corpus)
    assert rep_union.answer_found_rate >= rep_top1.answer_found_rate
