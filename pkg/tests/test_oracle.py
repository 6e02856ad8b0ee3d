from fractions import Fraction

import numpy as np
import pytest

from chainex.corpus import parse_record
from chainex.graph import Chain, enumerate_chains
from chainex.oracle import (
    Q_OVERLAP,
    SHORTEST,
    OracleConfig,
    derive_oracle,
    rouge1_f1,
    select_oracle,
)
from helpers import bfs_distance, random_graph


def counting_f1(chain_tokens, question_tokens):
    """Independent hand-counting oracle built on plain dict arithmetic."""
    chain, question = {}, {}
    for t in chain_tokens:
        chain[t] = chain.get(t, 0) + 1
    for t in question_tokens:
        question[t] = question.get(t, 0) + 1
    overlap = sum(min(c, question.get(t, 0)) for t, c in chain.items())
    if not chain_tokens:
        return 0.0
    p = Fraction(overlap, len(chain_tokens))
    r = Fraction(overlap, len(question_tokens))
    if p + r == 0:
        return 0.0
    return float(2 * p * r / (p + r))


class TestRouge1F1:
    def test_identical_multisets(self):
        assert rouge1_f1(["a", "b", "c"], ["a", "b", "c"]) == 1.0

    def test_hand_counted_value(self):
        # question {a,b,c}, chain {a,b,d,e}: P=1/2, R=2/3, F1=4/7
        assert rouge1_f1(["a", "b", "d", "e"], ["a", "b", "c"]) == pytest.approx(4 / 7, abs=1e-15)

    def test_disjoint(self):
        assert rouge1_f1(["x", "y"], ["a", "b"]) == 0.0

    def test_empty_chain(self):
        assert rouge1_f1([], ["a"]) == 0.0

    def test_empty_question_rejected(self):
        with pytest.raises(ValueError):
            rouge1_f1(["a"], [])

    def test_twenty_fixtures_match_counting_oracle(self):
        rng = np.random.default_rng(40)
        alphabet = list("abcdefg")
        for _ in range(20):
            chain = [alphabet[i] for i in rng.integers(0, len(alphabet), size=rng.integers(0, 12))]
            question = [alphabet[i] for i in rng.integers(0, len(alphabet), size=rng.integers(1, 8))]
            assert rouge1_f1(chain, question) == pytest.approx(
                counting_f1(chain, question), abs=1e-12)

    def test_clipped_counts(self):
        # repeated chain token only counts up to its question multiplicity
        assert rouge1_f1(["a", "a", "a"], ["a"]) == pytest.approx(0.5, abs=1e-15)


def _overlap_example():
    """Two chains: [0] covers one question entity, [1, 2] covers both."""
    return parse_record({
        "id": "sel",
        "question": "alpha beta gamma delta",
        "answer": "whatever",
        "paragraphs": [{"sentences": ["alpha beta", "alpha beta", "gamma delta x y"]}],
    })


class TestSelectOracle:
    def test_shortest_prefers_short(self):
        example = _overlap_example()
        config = OracleConfig(criterion=SHORTEST)
        chain = select_oracle([Chain((0, 3, 5)), Chain((2, 5))], example, config)
        assert chain.indices == (2, 5)

    def test_shortest_tie_breaks_lexicographically(self):
        example = _overlap_example()
        config = OracleConfig(criterion=SHORTEST)
        chain = select_oracle([Chain((1, 5)), Chain((0, 5))], example, config)
        assert chain.indices == (0, 5)

    def test_q_overlap_prefers_complete_coverage(self):
        example = _overlap_example()
        config = OracleConfig(criterion=Q_OVERLAP)
        # F1([0]) = 2*(1*(1/2))/(3/2) = 2/3; F1([1,2]) = 2*(2/3*1)/(5/3) = 4/5
        chain = select_oracle([Chain((0,)), Chain((1, 2))], example, config)
        assert chain.indices == (1, 2)

    def test_q_overlap_tie_prefers_shorter_then_lexicographic(self):
        example = _overlap_example()
        config = OracleConfig(criterion=Q_OVERLAP)
        assert select_oracle([Chain((1,)), Chain((0,))], example, config).indices == (0,)

    def test_empty_set_returns_none(self):
        assert select_oracle([], _overlap_example(), OracleConfig()) is None

    def test_returns_member_and_deterministic(self):
        example = _overlap_example()
        chains = [Chain((0,)), Chain((1, 2)), Chain((2,))]
        for criterion in (SHORTEST, Q_OVERLAP):
            config = OracleConfig(criterion=criterion)
            first = select_oracle(chains, example, config)
            assert first in chains
            assert select_oracle(list(chains), example, config) == first


class TestShortestMatchesBfs:
    def test_length_equals_bfs_distance(self):
        example = _overlap_example()
        config = OracleConfig(criterion=SHORTEST, max_len=8)
        rng = np.random.default_rng(77)
        for _ in range(200):
            graph = random_graph(rng, max_nodes=8)
            chains = enumerate_chains(graph, max_len=8)
            chain = select_oracle(chains, example, config)
            distance = bfs_distance(graph)
            if distance is None:
                assert chain is None
            else:
                assert chain is not None and len(chain) == distance


class TestOracleConfig:
    def test_validation(self):
        with pytest.raises(ValueError):
            OracleConfig(criterion="longest")
        with pytest.raises(ValueError):
            OracleConfig(max_len=0)
        with pytest.raises(ValueError):
            OracleConfig(threshold=0)


class TestDeriveOracle:
    def test_reachable(self):
        example = parse_record({
            "id": "d",
            "question": "what did Alpha Corp reveal ?",
            "answer": "Zeta Prize",
            "paragraphs": [{"sentences": [
                "Alpha Corp bought Beta Labs .",
                "Beta Labs won the Zeta Prize .",
                "unrelated words fill space .",
            ]}],
        })
        chain, status = derive_oracle(example, OracleConfig())
        assert status == "ok"
        assert chain.indices[-1] == 1

    def test_unreachable(self):
        example = parse_record({
            "id": "u",
            "question": "what about Alpha Corp ?",
            "answer": "missing answer",
            "paragraphs": [{"sentences": ["Alpha Corp exists ."]}],
        })
        chain, status = derive_oracle(example, OracleConfig())
        assert chain is None and status == "unreachable"
