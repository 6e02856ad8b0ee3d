"""Deterministic synthetic multi-hop corpus with planted reasoning chains.

Each example plants a bridge-entity chain e_0 -> e_1 -> ... -> e_L: sentence k
contains (e_{k-1}, e_k), the question names e_0, and the final planted
sentence states the answer e_L.  Planted sentences are scattered into
distinct paragraphs; remaining slots hold distractor sentences, a configured
fraction of which spuriously reuse interior bridge entities.

Entity names are two capitalized pseudo-words so the heuristic mention
extractor finds them without annotations; first-name and second-name token
pools are disjoint (different lengths), which makes answer-token matches
unambiguous.  With the default safe placement, entity-reusing distractors go
to paragraphs holding no planted sentence and reuse is capped at 3 sentences
per entity, so the planted chain is always the unique shortest path and never
hits the common-entity filter.  The hard preset lifts the placement rule,
raises the reuse rate, writes reusing distractors with the planted sentence
template, and plants a first-hop decoy sharing the question entity.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .corpus import Example, parse_record
from .graph import DEFAULT_MAX_CHAIN_LEN

_SYLLABLES = [c + v for c in "bdfgklmnprstvz" for v in "aeiou"]

# Sentence templates: the chain opener, interior hops, the answer-bearing
# closer, and background distractors.  Distinct verb sets keep the roles
# recognizable; entity-reusing distractors borrow the interior template so
# following a chain still requires matching the bridge entity.
_FIRST_TEMPLATE = ("started", "with")
_MID_TEMPLATE = ("was", "linked", "to")
_FINAL_TEMPLATE = ("finally", "revealed")
_DISTRACTOR_TEMPLATE = ("sat", "near")


@dataclass(frozen=True)
class GenConfig:
    num_examples: int
    num_paragraphs: int = 4
    sentences_per_paragraph: int = 4
    chain_min: int = 2
    chain_max: int = 3
    num_candidates: int = 8
    entity_vocab: int = 120
    filler_vocab: int = 200
    distractor_entity_rate: float = 0.3
    seed: int = 0
    emit_entities: bool = False
    safe_placement: bool = True
    decoy_first_hop: bool = False

    def __post_init__(self):
        if self.num_examples < 1:
            raise ValueError("num_examples must be >= 1")
        if self.chain_min < 1 or self.chain_min > self.chain_max:
            raise ValueError("need 1 <= chain_min <= chain_max")
        if self.chain_max > DEFAULT_MAX_CHAIN_LEN:
            raise ValueError(f"chain_max must stay <= the enumeration cap ({DEFAULT_MAX_CHAIN_LEN})")
        if self.chain_max > self.num_paragraphs:
            raise ValueError("chain_max cannot exceed num_paragraphs (planted sentences use distinct paragraphs)")
        if self.chain_max > self.num_paragraphs * self.sentences_per_paragraph:
            raise ValueError("chain is longer than the total sentence count")
        if self.num_candidates < 2:
            raise ValueError("num_candidates must be >= 2")
        if self.entity_vocab < self.chain_max + self.num_candidates:
            raise ValueError("entity_vocab too small for chains plus candidate decoys")
        if not 0.0 <= self.distractor_entity_rate <= 1.0:
            raise ValueError("distractor_entity_rate must lie in [0, 1]")


def hard_preset(num_examples: int, seed: int = 0, **overrides) -> GenConfig:
    """Harder variant: more entity reuse, planted-template distractors, and a
    same-entity first-hop decoy off the gold path.  Explicit overrides win."""
    fields = dict(distractor_entity_rate=0.7, safe_placement=False, decoy_first_hop=True)
    fields.update(overrides)
    return replace(GenConfig(num_examples=num_examples, seed=seed), **fields)


def _sample_words(rng, count: int, n_syllables: int, suffix: str = "") -> list[str]:
    words: list[str] = []
    seen: set[str] = set()
    while len(words) < count:
        word = "".join(_SYLLABLES[rng.integers(len(_SYLLABLES))] for _ in range(n_syllables)) + suffix
        if word not in seen:
            seen.add(word)
            words.append(word)
    return words


def _build_vocabularies(config: GenConfig):
    rng = np.random.default_rng(np.random.SeedSequence([config.seed, 0]))
    # 4-letter first tokens, 6-letter second tokens, 5-letter fillers:
    # disjoint pools by length, so no accidental mention or answer collisions.
    firsts = _sample_words(rng, config.entity_vocab, 2)
    seconds = _sample_words(rng, config.entity_vocab, 3)
    names = [f"{a.capitalize()} {b.capitalize()}" for a, b in zip(firsts, seconds)]
    fillers = _sample_words(rng, config.filler_vocab, 2, suffix="u")
    return names, fillers


def _fill(rng, fillers, low=0, high=2) -> list[str]:
    count = int(rng.integers(low, high + 1))
    return [fillers[int(rng.integers(len(fillers)))] for _ in range(count)]


@dataclass
class _Spec:
    tokens: list[str]
    entities: list[str]
    planted_step: int | None = None  # 1-based position in the chain


def _entity_pair_sentence(rng, fillers, left: str, right: str, template) -> list[str]:
    tokens = _fill(rng, fillers) + left.split() + list(template) + right.split() + _fill(rng, fillers)
    return tokens + ["."]


def _generate_record(config: GenConfig, names: list[str], fillers: list[str], index: int) -> dict:
    rng = np.random.default_rng(np.random.SeedSequence([config.seed, 1, index]))
    n_paragraphs = config.num_paragraphs
    per_para = config.sentences_per_paragraph
    total = n_paragraphs * per_para

    length = int(rng.integers(config.chain_min, config.chain_max + 1))
    chain_ids = rng.choice(len(names), size=length + 1, replace=False)
    chain_names = [names[int(i)] for i in chain_ids]
    decoy_pool = [n for n in names if n not in chain_names]

    planted: list[_Spec] = []
    for k in range(1, length + 1):
        if k == length:
            template = _FINAL_TEMPLATE
        elif k == 1:
            template = _FIRST_TEMPLATE
        else:
            template = _MID_TEMPLATE
        tokens = _entity_pair_sentence(rng, fillers, chain_names[k - 1], chain_names[k], template)
        planted.append(_Spec(tokens, [chain_names[k - 1], chain_names[k]], planted_step=k))

    n_distractors = total - length
    n_decoy = 1 if config.decoy_first_hop and n_distractors >= 1 else 0
    # Reusable bridge entities: interior names only, never e_0 (that would
    # add question links) or the answer.
    reusable = chain_names[1:length]
    n_reuse = int(round(config.distractor_entity_rate * n_distractors))
    n_reuse = min(n_reuse, 3 * len(reusable))  # keep entities under the common-entity filter
    n_reuse = min(n_reuse, n_distractors - n_decoy)

    planted_paras = [int(p) for p in rng.choice(n_paragraphs, size=length, replace=False)]
    free_paras = [p for p in range(n_paragraphs) if p not in planted_paras]
    if config.safe_placement:
        n_reuse = min(n_reuse, len(free_paras) * per_para)

    reuse_entities: list[str] = []
    if reusable:
        order = list(reusable)
        rng.shuffle(order)
        for i in range(n_reuse):
            reuse_entities.append(order[i % len(order)])

    # Safe placement writes reusing distractors with the background template
    # (spurious entity overlap, no template ambiguity); the hard preset makes
    # them look like genuine interior hops.
    reuse_template = _MID_TEMPLATE if not config.safe_placement else _DISTRACTOR_TEMPLATE
    reusing: list[_Spec] = []
    for entity in reuse_entities:
        decoy = decoy_pool[int(rng.integers(len(decoy_pool)))]
        left, right = (entity, decoy) if rng.integers(2) == 0 else (decoy, entity)
        tokens = _entity_pair_sentence(rng, fillers, left, right, reuse_template)
        reusing.append(_Spec(tokens, [left, right]))

    extras: list[_Spec] = []
    if n_decoy:
        decoy = decoy_pool[int(rng.integers(len(decoy_pool)))]
        tokens = _entity_pair_sentence(rng, fillers, chain_names[0], decoy, _FIRST_TEMPLATE)
        extras.append(_Spec(tokens, [chain_names[0], decoy]))

    n_plain = n_distractors - len(reusing) - len(extras)
    plain: list[_Spec] = []
    for _ in range(n_plain):
        a, b = (decoy_pool[int(i)] for i in rng.choice(len(decoy_pool), size=2, replace=False))
        plain.append(_Spec(_entity_pair_sentence(rng, fillers, a, b, _DISTRACTOR_TEMPLATE), [a, b]))

    # Paragraph layout: planted sentences claim their distinct paragraphs;
    # reusing distractors stay out of planted paragraphs under safe placement.
    capacity = [per_para] * n_paragraphs
    paragraphs: list[list[_Spec]] = [[] for _ in range(n_paragraphs)]
    for spec, para in zip(planted, planted_paras):
        paragraphs[para].append(spec)
        capacity[para] -= 1

    def place(spec: _Spec, allowed: list[int]) -> None:
        open_paras = [p for p in allowed if capacity[p] > 0]
        para = open_paras[int(rng.integers(len(open_paras)))]
        paragraphs[para].append(spec)
        capacity[para] -= 1

    for spec in reusing:
        place(spec, free_paras if config.safe_placement else list(range(n_paragraphs)))
    for spec in extras + plain:
        place(spec, list(range(n_paragraphs)))

    for para in paragraphs:
        rng.shuffle(para)

    flat = [spec for para in paragraphs for spec in para]
    step_to_global = {spec.planted_step: g for g, spec in enumerate(flat) if spec.planted_step}
    gold_chain = [step_to_global[k] for k in range(1, length + 1)]

    answer = chain_names[length]
    decoy_candidates = [decoy_pool[int(i)] for i in
                        rng.choice(len(decoy_pool), size=config.num_candidates - 1, replace=False)]
    answer_slot = int(rng.integers(config.num_candidates))
    candidates = decoy_candidates[:answer_slot] + [answer] + decoy_candidates[answer_slot:]

    question = ["which", "thing", "does"] + chain_names[0].split() + ["start", "?"]
    record = {
        "id": f"syn-{config.seed}-{index:05d}",
        "question": " ".join(question),
        "answer": answer,
        "candidates": candidates,
        "paragraphs": [{"sentences": [" ".join(s.tokens) for s in para]} for para in paragraphs],
        "gold_chain": gold_chain,
        "supporting_facts": sorted(gold_chain),
    }
    if config.emit_entities:
        record["entities"] = [list(spec.entities) for spec in flat]
    return record


def generate_records(config: GenConfig, workers: int = 1) -> list[dict]:
    """Raw JSONL records; per-example seed substreams make parallel generation
    identical to sequential."""
    names, fillers = _build_vocabularies(config)
    if workers > 1:
        from functools import partial
        from multiprocessing import Pool

        with Pool(workers) as pool:
            return pool.map(partial(_generate_record, config, names, fillers),
                            range(config.num_examples))
    return [_generate_record(config, names, fillers, i) for i in range(config.num_examples)]


def generate_corpus(config: GenConfig, workers: int = 1) -> list[Example]:
    return [parse_record(r, i) for i, r in enumerate(generate_records(config, workers), start=1)]
