"""Pseudogold chain selection from the enumerated chain set.

Two criteria: SHORTEST takes the minimum-length chain; Q_OVERLAP takes the
chain whose concatenated sentence tokens maximize unigram F1 (clipped counts,
ROUGE-1 style) against the question.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass

from .corpus import Example
from .entities import DEFAULT_COMMON_ENTITY_THRESHOLD, build_entity_index
from .graph import (
    DEFAULT_MAX_CHAIN_LEN,
    Chain,
    build_graph,
    enumerate_chains_with_info,
)

SHORTEST = "shortest"
Q_OVERLAP = "q_overlap"
CRITERIA = (SHORTEST, Q_OVERLAP)

STATUS_OK = "ok"
STATUS_UNREACHABLE = "unreachable"


@dataclass(frozen=True)
class OracleConfig:
    criterion: str = SHORTEST
    max_len: int = DEFAULT_MAX_CHAIN_LEN
    threshold: int = DEFAULT_COMMON_ENTITY_THRESHOLD

    def __post_init__(self):
        if self.criterion not in CRITERIA:
            raise ValueError(f"criterion must be one of {CRITERIA}, got {self.criterion!r}")
        if self.max_len < 1:
            raise ValueError(f"max_len must be >= 1, got {self.max_len}")
        if self.threshold < 1:
            raise ValueError(f"threshold must be >= 1, got {self.threshold}")


def rouge1_f1(chain_tokens, question_tokens) -> float:
    """Unigram F1 with clipped counts between two lowercased token multisets."""
    chain_counts = Counter(chain_tokens)
    question_counts = Counter(question_tokens)
    if not question_counts:
        raise ValueError("question tokens must be non-empty")
    total_chain = sum(chain_counts.values())
    if total_chain == 0:
        return 0.0
    overlap = sum(min(count, question_counts[token]) for token, count in chain_counts.items())
    precision = overlap / total_chain
    recall = overlap / sum(question_counts.values())
    if precision + recall == 0.0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


def _chain_lower_tokens(chain: Chain, example: Example) -> list[str]:
    sentences = example.sentences
    tokens: list[str] = []
    for g in chain.indices:
        tokens.extend(t.lower for t in sentences[g].tokens)
    return tokens


def select_oracle(chains, example: Example, config: OracleConfig) -> Chain | None:
    """Pick the pseudogold chain, or None when the chain set is empty.

    SHORTEST breaks ties by lexicographically smallest index sequence;
    Q_OVERLAP breaks score ties by shorter length, then lexicographically.
    """
    chains = list(chains)
    if not chains:
        return None
    if config.criterion == SHORTEST:
        return min(chains, key=lambda c: (len(c), c.indices))
    question = [t.lower for t in example.question_tokens]
    scored = [(rouge1_f1(_chain_lower_tokens(c, example), question), c) for c in chains]
    return min(scored, key=lambda sc: (-sc[0], len(sc[1]), sc[1].indices))[1]


def derive_oracle(example: Example, config: OracleConfig) -> tuple[Chain | None, str]:
    """Full pipeline for one example: index, graph, enumerate, select."""
    chain, _truncated = derive_oracle_with_info(example, config)
    return chain, (STATUS_OK if chain is not None else STATUS_UNREACHABLE)


def derive_oracle_with_info(example: Example, config: OracleConfig):
    """derive_oracle plus the enumeration's cap-pruning flag."""
    index = build_entity_index(example, threshold=config.threshold)
    graph = build_graph(example, index)
    chains, truncated = enumerate_chains_with_info(graph, max_len=config.max_len)
    return select_oracle(chains, example, config), truncated
