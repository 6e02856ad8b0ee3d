"""Heuristic entity-mention extraction and the entity -> sentences index.

Mentions are maximal runs of capitalized tokens (runs may pass through
stretches of lowercase connector words when capitalized tokens flank the
stretch) plus 4-digit number tokens.  External annotations supplied via the
corpus `entities` field override the heuristic per sentence.  Entities that
occur in more than `threshold` distinct sentences are dropped from the index
entirely (common-entity filtering).
"""

from __future__ import annotations

from dataclasses import dataclass

from .corpus import Example, Sentence, Token, _is_word_char

QUESTION_NODE = -1
DEFAULT_COMMON_ENTITY_THRESHOLD = 5

CONNECTOR_TOKENS = frozenset({"of", "the", "and", "de", "di", "van", "von"})


def normalize_mention(text: str) -> str:
    """Lowercase, strip affix punctuation, collapse whitespace."""
    text = " ".join(text.lower().split())
    start, end = 0, len(text)
    while start < end and not _is_word_char(text[start]):
        start += 1
    while end > start and not _is_word_char(text[end - 1]):
        end -= 1
    return text[start:end]


@dataclass(frozen=True)
class Mention:
    normalized: str
    sentence: int  # global sentence index, or QUESTION_NODE


@dataclass(frozen=True)
class EntityIndex:
    sentences_by_entity: dict[str, frozenset[int]]
    question_entities: frozenset[str]


def _is_capitalized(token: Token) -> bool:
    return bool(token.surface) and token.surface[0].isupper()


def _is_year_like(token: Token) -> bool:
    return len(token.surface) == 4 and token.surface.isdigit()


def _is_connector(token: Token) -> bool:
    return token.surface in CONNECTOR_TOKENS


def extract_mentions(sentence_or_tokens) -> list[Mention]:
    """Extract heuristic mentions from a Sentence or a raw token sequence.

    Raw token sequences (the question) report QUESTION_NODE as the location.
    """
    if isinstance(sentence_or_tokens, Sentence):
        tokens = sentence_or_tokens.tokens
        location = sentence_or_tokens.global_index
    else:
        tokens = tuple(sentence_or_tokens)
        location = QUESTION_NODE

    mentions: list[Mention] = []
    n = len(tokens)
    i = 0
    while i < n:
        if _is_capitalized(tokens[i]):
            last_cap = i
            j = i + 1
            while j < n:
                if _is_capitalized(tokens[j]):
                    last_cap = j
                    j += 1
                elif _is_connector(tokens[j]):
                    j += 1
                else:
                    break
            surface = " ".join(t.surface for t in tokens[i : last_cap + 1])
            normalized = normalize_mention(surface)
            if normalized:
                mentions.append(Mention(normalized, location))
            i = last_cap + 1
        elif _is_year_like(tokens[i]):
            mentions.append(Mention(tokens[i].surface, location))
            i += 1
        else:
            i += 1
    return mentions


def build_entity_index(example: Example, threshold: int = DEFAULT_COMMON_ENTITY_THRESHOLD) -> EntityIndex:
    """Map each entity to the distinct sentences mentioning it, then drop
    entities spanning more than `threshold` distinct sentences."""
    if threshold < 1:
        raise ValueError(f"threshold must be >= 1, got {threshold}")

    occurrences: dict[str, set[int]] = {}
    if example.entities is not None:
        for g, mention_surfaces in enumerate(example.entities):
            for surface in mention_surfaces:
                normalized = normalize_mention(surface)
                if normalized:
                    occurrences.setdefault(normalized, set()).add(g)
    else:
        for sentence in example.sentences:
            for mention in extract_mentions(sentence):
                occurrences.setdefault(mention.normalized, set()).add(mention.sentence)

    question_entities = frozenset(m.normalized for m in extract_mentions(example.question_tokens))

    kept = {
        entity: frozenset(sentences)
        for entity, sentences in occurrences.items()
        if len(sentences) <= threshold
    }
    return EntityIndex(sentences_by_entity=kept, question_entities=question_entities)
