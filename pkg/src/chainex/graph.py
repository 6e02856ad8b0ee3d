"""Sentence graph construction and exhaustive chain enumeration.

Nodes are sentences plus one question pseudo-node.  Edges come from shared
indexed entities, same-paragraph cliques, and question links; chains are
simple paths from the question node to an answer-bearing sentence.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .corpus import Example
from .entities import EntityIndex

SHARED_ENTITY = "shared_entity"
SAME_PARAGRAPH = "same_paragraph"
QUESTION_LINK = "question_link"

QUESTION_NODE = -1
DEFAULT_MAX_CHAIN_LEN = 4

# Fixed 52-word function-word list used only by the question-link fallback.
STOPWORDS = frozenset(
    """a an the and or but if then than that this these those it its as is are
    was were be been do does did has have had not no so at by for with into
    before after to from in on of what which who when where can will s t""".split()
)


@dataclass(frozen=True)
class Chain:
    """Ordered sequence of global sentence indices (question node excluded)."""

    indices: tuple[int, ...]
    score: float | None = field(default=None, compare=False)

    def __post_init__(self):
        if len(self.indices) == 0:
            raise ValueError("a chain must contain at least one sentence")
        if len(set(self.indices)) != len(self.indices):
            raise ValueError(f"chain indices must be distinct, got {self.indices}")

    def __len__(self) -> int:
        return len(self.indices)


@dataclass
class SentenceGraph:
    num_sentences: int
    neighbors: list[set[int]]
    edge_labels: dict[tuple[int, int], set[str]]
    question_neighbors: set[int]
    answer_nodes: set[int]

    @classmethod
    def empty(cls, num_sentences: int) -> "SentenceGraph":
        return cls(
            num_sentences=num_sentences,
            neighbors=[set() for _ in range(num_sentences)],
            edge_labels={},
            question_neighbors=set(),
            answer_nodes=set(),
        )

    def add_edge(self, i: int, j: int, label: str) -> None:
        if i == j:
            raise ValueError("self-loops are not allowed")
        self.neighbors[i].add(j)
        self.neighbors[j].add(i)
        self.edge_labels.setdefault((min(i, j), max(i, j)), set()).add(label)

    def add_question_link(self, j: int) -> None:
        self.question_neighbors.add(j)
        self.edge_labels.setdefault((QUESTION_NODE, j), set()).add(QUESTION_LINK)


def find_answer_sentences(example: Example) -> set[int]:
    """Sentences containing the lowercased answer tokens contiguously."""
    answer = [t.lower for t in example.answer_tokens]
    if not answer:
        raise ValueError("answer tokens must be non-empty")
    found = set()
    for sentence in example.sentences:
        lower = [t.lower for t in sentence.tokens]
        n, m = len(lower), len(answer)
        if any(lower[i : i + m] == answer for i in range(n - m + 1)):
            found.add(sentence.global_index)
    return found


def build_graph(example: Example, index: EntityIndex) -> SentenceGraph:
    graph = SentenceGraph.empty(example.num_sentences)

    for sentences in index.sentences_by_entity.values():
        members = sorted(sentences)
        for a in range(len(members)):
            for b in range(a + 1, len(members)):
                graph.add_edge(members[a], members[b], SHARED_ENTITY)

    for para in example.paragraphs:
        indices = [s.global_index for s in para]
        for a in range(len(indices)):
            for b in range(a + 1, len(indices)):
                graph.add_edge(indices[a], indices[b], SAME_PARAGRAPH)

    if index.question_entities:
        for entity in index.question_entities:
            for g in index.sentences_by_entity.get(entity, ()):
                graph.add_question_link(g)
    else:
        # Entity-free question: fall back to non-stopword token overlap.
        question_words = {
            t.lower for t in example.question_tokens
            if t.lower not in STOPWORDS and any(ch.isalnum() for ch in t.lower)
        }
        for sentence in example.sentences:
            if any(t.lower in question_words for t in sentence.tokens):
                graph.add_question_link(sentence.global_index)

    graph.answer_nodes = find_answer_sentences(example)
    return graph


def enumerate_chains(graph: SentenceGraph, max_len: int = DEFAULT_MAX_CHAIN_LEN) -> list[Chain]:
    """All simple paths question -> ... -> answer node with 1..max_len
    sentences, in lexicographic order of their index sequences."""
    return enumerate_chains_with_info(graph, max_len)[0]


def enumerate_chains_with_info(graph: SentenceGraph, max_len: int = DEFAULT_MAX_CHAIN_LEN):
    """Like enumerate_chains, also reporting whether the length cap pruned
    any unexplored continuation (the cap is an engineering bound, so callers
    can surface when it was binding)."""
    if max_len < 1:
        raise ValueError(f"max_len must be >= 1, got {max_len}")

    chains: list[Chain] = []
    path: list[int] = []
    on_path: set[int] = set()
    truncated = False

    def visit(node: int) -> None:
        nonlocal truncated
        path.append(node)
        on_path.add(node)
        if node in graph.answer_nodes:
            chains.append(Chain(tuple(path)))
        if len(path) < max_len:
            for neighbor in sorted(graph.neighbors[node]):
                if neighbor not in on_path:
                    visit(neighbor)
        elif any(n not in on_path for n in graph.neighbors[node]):
            truncated = True
        on_path.discard(node)
        path.pop()

    for start in sorted(graph.question_neighbors):
        visit(start)
    return chains, truncated


def graph_to_json(graph: SentenceGraph) -> dict:
    """Debug dump: {"edges": [[i, j, label]], "answers": [int]}; the question
    node appears as index -1."""
    edges = []
    for (i, j), labels in sorted(graph.edge_labels.items()):
        for label in sorted(labels):
            edges.append([i, j, label])
    return {"edges": edges, "answers": sorted(graph.answer_nodes)}
