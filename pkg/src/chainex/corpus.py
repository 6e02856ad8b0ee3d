"""Data model, tokenization, and JSONL ingestion for multi-paragraph QA examples.

The JSONL schema (one UTF-8 object per line):

    {"id": str, "question": str, "answer": str, "candidates": [str]?,
     "paragraphs": [{"title": str?, "sentences": [str]}],
     "entities": [[str]]?, "gold_chain": [int]?, "supporting_facts": [int]?}

`entities`, when present, is aligned to global sentence order (entry g lists
mention surface strings for sentence g). `gold_chain` and `supporting_facts`
use global sentence indices.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterator


class SchemaError(ValueError):
    """An input record violates the corpus schema."""


def _is_word_char(ch: str) -> bool:
    return ch.isalnum() or ch == "_"


@dataclass(frozen=True)
class Token:
    surface: str
    lower: str


def _make_token(surface: str) -> Token:
    return Token(surface, surface.lower())


def _split_word(word: str) -> list[str]:
    """Split one whitespace-delimited word into token surfaces.

    Every maximal run of punctuation becomes its own token, except interior
    runs consisting solely of periods (acronym dots), which stay glued to the
    surrounding word characters: "U.S." -> ["U.S", "."], "Temple's" ->
    ["Temple", "'", "s"].
    """
    runs: list[list] = []  # [is_word, chars]
    for ch in word:
        w = _is_word_char(ch)
        if runs and runs[-1][0] == w:
            runs[-1][1] += ch
        else:
            runs.append([w, ch])
    pieces: list[str] = []
    current = ""
    for i, (is_word, chars) in enumerate(runs):
        if is_word:
            current += chars
        elif current and set(chars) == {"."} and i + 1 < len(runs):
            current += chars
        else:
            if current:
                pieces.append(current)
                current = ""
            pieces.append(chars)
    if current:
        pieces.append(current)
    return pieces


def tokenize(text: str) -> list[Token]:
    """Deterministic whitespace + affix-punctuation tokenizer."""
    tokens: list[Token] = []
    for word in text.split():
        tokens.extend(_make_token(piece) for piece in _split_word(word))
    return tokens


def detokenize(tokens) -> str:
    return " ".join(t.surface for t in tokens)


@dataclass(frozen=True)
class Sentence:
    global_index: int
    paragraph_index: int
    index_in_paragraph: int
    tokens: tuple[Token, ...]

    @property
    def lower_tokens(self) -> tuple[str, ...]:
        return tuple(t.lower for t in self.tokens)


@dataclass(frozen=True)
class Example:
    """One QA instance: question, answer, optional candidates, paragraphs of
    sentences, optional entity annotations and reference chains."""

    id: str
    question_tokens: tuple[Token, ...]
    answer_tokens: tuple[Token, ...]
    candidates: tuple[tuple[Token, ...], ...] | None
    paragraphs: tuple[tuple[Sentence, ...], ...]
    titles: tuple[str | None, ...]
    entities: tuple[tuple[str, ...], ...] | None = None
    gold_chain: tuple[int, ...] | None = None
    supporting_facts: tuple[int, ...] | None = None

    @property
    def sentences(self) -> list[Sentence]:
        return [s for para in self.paragraphs for s in para]

    @property
    def num_sentences(self) -> int:
        return sum(len(p) for p in self.paragraphs)

    def sentence(self, global_index: int) -> Sentence:
        return self.sentences[global_index]


def _require(condition: bool, line_no: int, field: str, message: str) -> None:
    if not condition:
        raise SchemaError(f"line {line_no}: field '{field}': {message}")


def _check_index_list(values, line_no: int, field: str, n_sentences: int) -> tuple[int, ...]:
    _require(isinstance(values, list), line_no, field, "expected a list of ints")
    out = []
    for v in values:
        _require(isinstance(v, int) and not isinstance(v, bool), line_no, field, "expected int indices")
        _require(0 <= v < n_sentences, line_no, field, f"index {v} out of range for {n_sentences} sentences")
        out.append(v)
    return tuple(out)


def parse_record(obj: dict, line_no: int = 0) -> Example:
    """Validate one decoded JSONL record and build an Example."""
    _require(isinstance(obj, dict), line_no, "<record>", "expected a JSON object")
    _require(isinstance(obj.get("id"), str) and obj["id"], line_no, "id", "expected a non-empty string")
    _require(isinstance(obj.get("question"), str), line_no, "question", "expected a string")
    _require(isinstance(obj.get("answer"), str), line_no, "answer", "expected a string")

    question_tokens = tuple(tokenize(obj["question"]))
    _require(len(question_tokens) > 0, line_no, "question", "question tokenizes to nothing")
    answer_tokens = tuple(tokenize(obj["answer"]))
    _require(len(answer_tokens) > 0, line_no, "answer", "answer tokenizes to nothing")

    raw_paragraphs = obj.get("paragraphs")
    _require(isinstance(raw_paragraphs, list) and raw_paragraphs, line_no, "paragraphs", "expected a non-empty list")
    paragraphs: list[tuple[Sentence, ...]] = []
    titles: list[str | None] = []
    g = 0
    for p_idx, para in enumerate(raw_paragraphs):
        _require(isinstance(para, dict), line_no, "paragraphs", f"paragraph {p_idx} is not an object")
        title = para.get("title")
        _require(title is None or isinstance(title, str), line_no, "paragraphs", f"paragraph {p_idx} title must be a string")
        raw_sentences = para.get("sentences")
        _require(
            isinstance(raw_sentences, list) and raw_sentences,
            line_no, "paragraphs", f"paragraph {p_idx} has no sentences",
        )
        sentences = []
        for s_idx, text in enumerate(raw_sentences):
            _require(isinstance(text, str), line_no, "paragraphs", f"sentence ({p_idx},{s_idx}) is not a string")
            toks = tuple(tokenize(text))
            _require(len(toks) > 0, line_no, "paragraphs", f"sentence ({p_idx},{s_idx}) tokenizes to nothing")
            sentences.append(Sentence(g, p_idx, s_idx, toks))
            g += 1
        paragraphs.append(tuple(sentences))
        titles.append(title)
    n_sentences = g

    candidates = None
    if obj.get("candidates") is not None:
        raw = obj["candidates"]
        _require(isinstance(raw, list) and raw, line_no, "candidates", "expected a non-empty list of strings")
        cand_tokens = []
        for c_idx, text in enumerate(raw):
            _require(isinstance(text, str), line_no, "candidates", f"candidate {c_idx} is not a string")
            toks = tuple(tokenize(text))
            _require(len(toks) > 0, line_no, "candidates", f"candidate {c_idx} tokenizes to nothing")
            cand_tokens.append(toks)
        candidates = tuple(cand_tokens)
        answer_lower = tuple(t.lower for t in answer_tokens)
        matches = sum(1 for c in candidates if tuple(t.lower for t in c) == answer_lower)
        _require(matches == 1, line_no, "candidates", f"answer matches {matches} candidates, expected exactly 1")

    entities = None
    if obj.get("entities") is not None:
        raw = obj["entities"]
        _require(isinstance(raw, list), line_no, "entities", "expected a list of lists of strings")
        _require(
            len(raw) == n_sentences,
            line_no, "entities", f"expected one entry per sentence ({n_sentences}), got {len(raw)}",
        )
        per_sentence = []
        for s_idx, mentions in enumerate(raw):
            _require(isinstance(mentions, list), line_no, "entities", f"entry {s_idx} is not a list")
            for m in mentions:
                _require(isinstance(m, str), line_no, "entities", f"entry {s_idx} contains a non-string")
            per_sentence.append(tuple(mentions))
        entities = tuple(per_sentence)

    gold_chain = None
    if obj.get("gold_chain") is not None:
        gold_chain = _check_index_list(obj["gold_chain"], line_no, "gold_chain", n_sentences)
        _require(len(set(gold_chain)) == len(gold_chain), line_no, "gold_chain", "indices must be distinct")
        _require(len(gold_chain) > 0, line_no, "gold_chain", "must be non-empty when present")

    supporting_facts = None
    if obj.get("supporting_facts") is not None:
        supporting_facts = _check_index_list(obj["supporting_facts"], line_no, "supporting_facts", n_sentences)

    return Example(
        id=obj["id"],
        question_tokens=question_tokens,
        answer_tokens=answer_tokens,
        candidates=candidates,
        paragraphs=tuple(paragraphs),
        titles=tuple(titles),
        entities=entities,
        gold_chain=gold_chain,
        supporting_facts=supporting_facts,
    )


def to_record(example: Example) -> dict:
    """Regenerate the JSONL record form of an Example.

    Token surfaces are joined with single spaces; because tokenize is
    idempotent on that form, load(to_record(load(x))) == load(x).
    """
    record: dict = {
        "id": example.id,
        "question": detokenize(example.question_tokens),
        "answer": detokenize(example.answer_tokens),
    }
    if example.candidates is not None:
        record["candidates"] = [detokenize(c) for c in example.candidates]
    record["paragraphs"] = [
        {
            **({"title": title} if title is not None else {}),
            "sentences": [detokenize(s.tokens) for s in para],
        }
        for title, para in zip(example.titles, example.paragraphs)
    ]
    if example.entities is not None:
        record["entities"] = [list(ms) for ms in example.entities]
    if example.gold_chain is not None:
        record["gold_chain"] = list(example.gold_chain)
    if example.supporting_facts is not None:
        record["supporting_facts"] = list(example.supporting_facts)
    return record


def iter_records(path) -> Iterator[tuple[dict, Example]]:
    """Yield (raw record, parsed Example) per line; blank lines are skipped."""
    with open(path, "r", encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise SchemaError(f"line {line_no}: field '<json>': {exc}") from exc
            yield obj, parse_record(obj, line_no)


def load_examples(path) -> list[Example]:
    return [example for _, example in iter_records(path)]


def write_records(path, records) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        for record in records:
            handle.write(json.dumps(record, ensure_ascii=False) + "\n")


def save_examples(path, examples) -> None:
    write_records(path, (to_record(e) for e in examples))
