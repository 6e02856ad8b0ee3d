"""Neural chain extractor.

Learned token embeddings feed a bidirectional LSTM encoder; sentence
representations are max-pooled over each sentence's contextual token states
(PARA mode encodes [question; SEP; paragraph] per paragraph, SENT mode
encodes [question; SEP; sentence] per sentence).  An LSTM pointer decoder,
initialized from the max-pooled question encoding, selects sentences one at a
time by scoring ptr_w @ [h; s_i; h*s_i]; beam search produces ranked chains.
The same encoder backs an unordered per-sentence relevance baseline and a
dot-product multiple-choice answer scorer.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .corpus import Example
from .graph import Chain
from .kernels.reference import _sigmoid

UNK = 0
SEP = 1
SPECIALS = ("<unk>", "<sep>")

PARA = "para"
SENT = "sent"
MODES = (PARA, SENT)

TENSOR_NAMES = (
    "embed",
    "enc_fwd_wx", "enc_fwd_wh", "enc_fwd_b",
    "enc_bwd_wx", "enc_bwd_wh", "enc_bwd_b",
    "dec_wx", "dec_wh", "dec_b",
    "ptr_w", "sos", "eos", "unordered_u",
)

# Tensors initialized to zero so training starts from indifferent scores.
_ZERO_INIT = ("ptr_w", "unordered_u")


class ModelParams:
    """All learned tensors plus the vocabulary that indexes the embeddings."""

    def __init__(self, tensors: dict, embed_dim: int, hidden_dim: int, vocab):
        self.tensors = tensors
        self.embed_dim = embed_dim
        self.hidden_dim = hidden_dim  # encoder hidden size per direction
        self.vocab = list(vocab)
        self.vocab_index = {w: i for i, w in enumerate(self.vocab)}

    @property
    def state_dim(self) -> int:
        # encoder output size == decoder hidden size
        return 2 * self.hidden_dim

    def token_id(self, lower: str) -> int:
        return self.vocab_index.get(lower, UNK)

    def ids(self, tokens) -> list[int]:
        return [self.vocab_index.get(t.lower, UNK) for t in tokens]

    def copy(self) -> "ModelParams":
        return ModelParams(
            {name: arr.copy() for name, arr in self.tensors.items()},
            self.embed_dim, self.hidden_dim, self.vocab,
        )


def _tensor_shapes(vocab_size: int, embed_dim: int, hidden_dim: int) -> dict:
    h = hidden_dim
    s = 2 * h
    return {
        "embed": (vocab_size, embed_dim),
        "enc_fwd_wx": (embed_dim, 4 * h), "enc_fwd_wh": (h, 4 * h), "enc_fwd_b": (4 * h,),
        "enc_bwd_wx": (embed_dim, 4 * h), "enc_bwd_wh": (h, 4 * h), "enc_bwd_b": (4 * h,),
        "dec_wx": (s, 4 * s), "dec_wh": (s, 4 * s), "dec_b": (4 * s,),
        "ptr_w": (3 * s,), "sos": (s,), "eos": (s,), "unordered_u": (3 * s,),
    }


def build_vocab(examples) -> list[str]:
    """Sorted lowercased token vocabulary (questions, sentences, answers,
    candidates) behind the reserved <unk> and <sep> symbols."""
    seen: set[str] = set()
    for ex in examples:
        for t in ex.question_tokens:
            seen.add(t.lower)
        for t in ex.answer_tokens:
            seen.add(t.lower)
        if ex.candidates:
            for cand in ex.candidates:
                for t in cand:
                    seen.add(t.lower)
        for sentence in ex.sentences:
            for t in sentence.tokens:
                seen.add(t.lower)
    return list(SPECIALS) + sorted(seen - set(SPECIALS))


def init_params(vocab, embed_dim: int = 64, hidden_dim: int = 64, seed: int = 0) -> ModelParams:
    """uniform(-0.1, 0.1) everywhere except the zero-initialized scorers."""
    rng = np.random.default_rng(seed)
    shapes = _tensor_shapes(len(vocab), embed_dim, hidden_dim)
    tensors = {}
    for name in TENSOR_NAMES:
        if name in _ZERO_INIT:
            tensors[name] = np.zeros(shapes[name])
        else:
            tensors[name] = rng.uniform(-0.1, 0.1, size=shapes[name])
    return ModelParams(tensors, embed_dim, hidden_dim, vocab)


def save_params(params: ModelParams, path) -> None:
    """Single JSON checkpoint; byte-stable for identical params."""
    doc = {
        "embed_dim": params.embed_dim,
        "hidden_dim": params.hidden_dim,
        "vocab": params.vocab,
        "tensors": {
            name: {"shape": list(arr.shape), "data": arr.ravel().tolist()}
            for name, arr in sorted(params.tensors.items())
        },
    }
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(doc, handle, ensure_ascii=False)
        handle.write("\n")


def load_params(path) -> ModelParams:
    with open(path, "r", encoding="utf-8") as handle:
        doc = json.load(handle)
    expected = _tensor_shapes(len(doc["vocab"]), doc["embed_dim"], doc["hidden_dim"])
    tensors = {}
    for name in TENSOR_NAMES:
        entry = doc["tensors"][name]
        arr = np.array(entry["data"], dtype=np.float64).reshape(entry["shape"])
        if tuple(arr.shape) != expected[name]:
            raise ValueError(f"checkpoint tensor {name} has shape {arr.shape}, expected {expected[name]}")
        tensors[name] = arr
    return ModelParams(tensors, doc["embed_dim"], doc["hidden_dim"], doc["vocab"])


# ---------------------------------------------------------------------------
# Encoding


@dataclass
class _Unit:
    """One encoder input sequence: a question run, or question+SEP+context."""

    example_index: int
    ids: list[int]
    spans: list[tuple[int, int, int]]  # (global sentence index, start, end)
    q_span: tuple[int, int] | None = None


@dataclass
class EncoderOutput:
    sentence_reps: np.ndarray          # (num_sentences, 2h)
    question_rep: np.ndarray           # (2h,)
    token_states: list | None = None   # per encoder unit, (length, 2h)

    @property
    def num_sentences(self) -> int:
        return self.sentence_reps.shape[0]


def _unit_plans(params: ModelParams, examples, mode: str) -> list[_Unit]:
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
    units: list[_Unit] = []
    for ei, ex in enumerate(examples):
        q_ids = params.ids(ex.question_tokens)
        units.append(_Unit(ei, q_ids, [], q_span=(0, len(q_ids))))
        if mode == PARA:
            for para in ex.paragraphs:
                ids = list(q_ids) + [SEP]
                spans = []
                for sentence in para:
                    a = len(ids)
                    ids.extend(params.ids(sentence.tokens))
                    spans.append((sentence.global_index, a, len(ids)))
                units.append(_Unit(ei, ids, spans))
        else:
            for sentence in ex.sentences:
                ids = list(q_ids) + [SEP]
                a = len(ids)
                ids.extend(params.ids(sentence.tokens))
                units.append(_Unit(ei, ids, [(sentence.global_index, a, len(ids))]))
    return units


def _run_bidi(params: ModelParams, ids_list: list[list[int]]) -> dict:
    """Run the bidirectional encoder over padded sequences.

    The reverse direction runs on sequences reversed within their true
    lengths, so padded positions never feed real ones and the result is
    exactly equivalent to encoding each sequence separately.
    """
    t_max = max(len(ids) for ids in ids_list)
    n = len(ids_list)
    ids = np.zeros((t_max, n), dtype=np.int64)
    lengths = np.empty(n, dtype=np.int64)
    for u, seq in enumerate(ids_list):
        ids[: len(seq), u] = seq
        lengths[u] = len(seq)

    t_range = np.arange(t_max)[:, None]
    rev = np.where(t_range < lengths[None, :], lengths[None, :] - 1 - t_range, t_range)
    cols = np.arange(n)[None, :]

    tensors = params.tensors
    x = tensors["embed"][ids]
    zeros = np.zeros((n, params.hidden_dim))
    hf, cf, gf = kernels.lstm_forward(
        x, tensors["enc_fwd_wx"], tensors["enc_fwd_wh"], tensors["enc_fwd_b"], zeros, zeros)
    x_rev = x[rev, cols]
    hbr, cbr, gbr = kernels.lstm_forward(
        x_rev, tensors["enc_bwd_wx"], tensors["enc_bwd_wh"], tensors["enc_bwd_b"], zeros, zeros)
    token_states = np.concatenate([hf, hbr[rev, cols]], axis=2)
    return {
        "ids": ids, "lengths": lengths, "rev": rev, "cols": cols,
        "x": x, "x_rev": x_rev,
        "hf": hf, "cf": cf, "gf": gf,
        "hbr": hbr, "cbr": cbr, "gbr": gbr,
        "token_states": token_states,
    }


def _bidi_backward(params: ModelParams, run: dict, d_ts: np.ndarray, grads: dict) -> None:
    """Accumulate encoder and embedding gradients for one _run_bidi call."""
    tensors = params.tensors
    h = params.hidden_dim
    rev, cols = run["rev"], run["cols"]
    zeros = np.zeros((run["ids"].shape[1], h))
    dh_f = np.ascontiguousarray(d_ts[:, :, :h])
    dh_br = np.ascontiguousarray(d_ts[:, :, h:][rev, cols])
    dx_f, dwx_f, dwh_f, db_f, _, _ = kernels.lstm_backward(
        run["x"], tensors["enc_fwd_wx"], tensors["enc_fwd_wh"],
        run["hf"], run["cf"], run["gf"], zeros, zeros, dh_f)
    dx_br, dwx_b, dwh_b, db_b, _, _ = kernels.lstm_backward(
        run["x_rev"], tensors["enc_bwd_wx"], tensors["enc_bwd_wh"],
        run["hbr"], run["cbr"], run["gbr"], zeros, zeros, dh_br)
    grads["enc_fwd_wx"] += dwx_f
    grads["enc_fwd_wh"] += dwh_f
    grads["enc_fwd_b"] += db_f
    grads["enc_bwd_wx"] += dwx_b
    grads["enc_bwd_wh"] += dwh_b
    grads["enc_bwd_b"] += db_b
    dx = dx_f + dx_br[rev, cols]
    np.add.at(grads["embed"], run["ids"].ravel(), dx.reshape(-1, params.embed_dim))


def _pool(token_states: np.ndarray, unit: int, a: int, b: int):
    """Elementwise max over positions a..b-1 of one unit; returns the pooled
    vector and the absolute argmax position per dimension."""
    block = token_states[a:b, unit, :]
    arg = np.argmax(block, axis=0)
    dims = np.arange(block.shape[1])
    return block[arg, dims], arg + a


def encode_batch(params: ModelParams, examples, mode: str = PARA, keep_cache: bool = False):
    """Encode a list of examples; returns EncoderOutputs (and a backward cache
    when keep_cache is set)."""
    units = _unit_plans(params, examples, mode)
    run = _run_bidi(params, [u.ids for u in units])
    ts = run["token_states"]
    state_dim = params.state_dim

    q_meta: list = [None] * len(examples)
    sent_meta: list[dict] = [dict() for _ in examples]
    reps = [np.zeros((ex.num_sentences, state_dim)) for ex in examples]
    q_reps = [None] * len(examples)
    for ui, unit in enumerate(units):
        if unit.q_span is not None:
            vec, pos = _pool(ts, ui, unit.q_span[0], unit.q_span[1])
            q_reps[unit.example_index] = vec
            q_meta[unit.example_index] = (ui, pos)
        for g, a, b in unit.spans:
            vec, pos = _pool(ts, ui, a, b)
            reps[unit.example_index][g] = vec
            sent_meta[unit.example_index][g] = (ui, pos)

    outputs = []
    for ei, ex in enumerate(examples):
        token_states = None
        if not keep_cache:
            token_states = [
                ts[: len(units[ui].ids), ui, :].copy()
                for ui in range(len(units)) if units[ui].example_index == ei
            ]
        outputs.append(EncoderOutput(reps[ei], q_reps[ei], token_states))

    if keep_cache:
        cache = {"run": run, "units": units, "q_meta": q_meta, "sent_meta": sent_meta}
        return outputs, cache
    return outputs


def encode_example(params: ModelParams, example: Example, mode: str = PARA) -> EncoderOutput:
    return encode_batch(params, [example], mode)[0]


def encoder_backward(params: ModelParams, cache: dict, d_reps: list, d_qs: list, grads: dict) -> None:
    """Backpropagate pooled-representation gradients through the encoder.

    d_reps[e] is (num_sentences_e, 2h) or None; d_qs[e] is (2h,) or None.
    """
    run = cache["run"]
    d_ts = np.zeros_like(run["token_states"])
    dims = np.arange(params.state_dim)
    for ei, meta in enumerate(cache["q_meta"]):
        if d_qs[ei] is None:
            continue
        ui, pos = meta
        d_ts[pos, ui, dims] += d_qs[ei]
    for ei, by_sentence in enumerate(cache["sent_meta"]):
        if d_reps[ei] is None:
            continue
        for g, (ui, pos) in by_sentence.items():
            d_ts[pos, ui, dims] += d_reps[ei][g]
    _bidi_backward(params, run, d_ts, grads)


# ---------------------------------------------------------------------------
# Pointer decoder


@dataclass
class DecoderState:
    h: np.ndarray
    c: np.ndarray
    mask: np.ndarray  # bool per sentence, True = already selected

    def with_selected(self, index: int) -> "DecoderState":
        mask = self.mask.copy()
        mask[index] = True
        return DecoderState(self.h, self.c, mask)


def _lstm_cell(wx, wh, b, x_vec, h_vec, c_vec):
    s = wh.shape[0]
    z = x_vec @ wx + h_vec @ wh + b
    i = _sigmoid(z[0 * s : 1 * s])
    f = _sigmoid(z[1 * s : 2 * s])
    g = np.tanh(z[2 * s : 3 * s])
    o = _sigmoid(z[3 * s : 4 * s])
    c_new = f * c_vec + i * g
    return o * np.tanh(c_new), c_new


def _pointer_logits(params: ModelParams, h: np.ndarray, cands: np.ndarray) -> np.ndarray:
    s = params.state_dim
    w = params.tensors["ptr_w"]
    w1, w2, w3 = w[:s], w[s : 2 * s], w[2 * s :]
    return (w1 @ h) + cands @ (w2 + w3 * h)


def _softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max()
    e = np.exp(z)
    return e / e.sum()


def initial_decoder_state(params: ModelParams, enc: EncoderOutput) -> DecoderState:
    return DecoderState(
        h=enc.question_rep.copy(),
        c=np.zeros(params.state_dim),
        mask=np.zeros(enc.num_sentences, dtype=bool),
    )


def decoder_step(params: ModelParams, state: DecoderState, prev_input: np.ndarray,
                 sentence_reps: np.ndarray, allow_eos: bool = True):
    """Advance the decoder cell and return the next-selection distribution.

    The distribution has num_sentences + 1 slots; the last one is the EOS
    candidate.  Masked sentences (and EOS, when disallowed) get exactly 0.
    """
    tensors = params.tensors
    h, c = _lstm_cell(tensors["dec_wx"], tensors["dec_wh"], tensors["dec_b"],
                      prev_input, state.h, state.c)
    n = sentence_reps.shape[0]
    open_idx = np.flatnonzero(~state.mask)
    cands = [sentence_reps[open_idx]]
    if allow_eos:
        cands.append(tensors["eos"][None, :])
    cand_matrix = np.concatenate(cands, axis=0)
    if cand_matrix.shape[0] == 0:
        raise ValueError("no candidates: all sentences masked and EOS disallowed")
    p = _softmax(_pointer_logits(params, h, cand_matrix))
    probs = np.zeros(n + 1)
    probs[open_idx] = p[: len(open_idx)]
    if allow_eos:
        probs[n] = p[-1]
    return probs, DecoderState(h, c, state.mask)


@dataclass
class Hypothesis:
    indices: tuple[int, ...]
    logp: float
    state: DecoderState
    finished: bool = field(default=False, compare=False)


def _rank_score(hyp: Hypothesis, length_normalize: bool) -> float:
    if length_normalize and hyp.indices:
        return hyp.logp / len(hyp.indices)
    return hyp.logp


def beam_search(params: ModelParams, enc: EncoderOutput, beam_size: int = 5,
                max_steps: int = 4, length_normalize: bool = False) -> list[Chain]:
    """Ranked chains (<= beam_size) by cumulative log-probability.

    A hypothesis terminates on selecting EOS or on reaching max_steps
    sentences; max_steps-terminated chains carry no EOS factor.  EOS is not
    offered at the first step, so chains are never empty.  Finished
    hypotheses compete with active ones for beam slots.
    """
    if beam_size < 1:
        raise ValueError(f"beam_size must be >= 1, got {beam_size}")
    if max_steps < 1:
        raise ValueError(f"max_steps must be >= 1, got {max_steps}")
    n = enc.num_sentences
    if n == 0:
        raise ValueError("cannot decode an example with zero sentences")

    reps = enc.sentence_reps
    sos = params.tensors["sos"]
    eos_slot = n
    beam = [Hypothesis((), 0.0, initial_decoder_state(params, enc), False)]
    for step in range(1, max_steps + 1):
        if all(h.finished for h in beam):
            break
        pool: list[Hypothesis] = []
        for hyp in beam:
            if hyp.finished:
                pool.append(hyp)
                continue
            prev = sos if not hyp.indices else reps[hyp.indices[-1]]
            probs, new_state = decoder_step(params, hyp.state, prev, reps, allow_eos=step > 1)
            for idx in np.flatnonzero(probs > 0.0):
                logp = hyp.logp + float(np.log(probs[idx]))
                if idx == eos_slot:
                    pool.append(Hypothesis(hyp.indices, logp, new_state, True))
                else:
                    done = len(hyp.indices) + 1 >= max_steps
                    pool.append(Hypothesis(hyp.indices + (int(idx),), logp,
                                           new_state.with_selected(int(idx)), done))
        pool.sort(key=lambda hh: (-_rank_score(hh, length_normalize), hh.indices))
        beam = pool[:beam_size]

    beam.sort(key=lambda hh: (-_rank_score(hh, length_normalize), hh.indices))
    return [Chain(h.indices, score=_rank_score(h, length_normalize)) for h in beam]


def union_top_k(chains, k: int = 5, cap: int = 5) -> list[int]:
    """Union the top-k chains' sentences in rank order, truncate to cap, and
    return the retained indices in document order."""
    if k < 1 or cap < 1:
        raise ValueError(f"k and cap must be >= 1, got k={k}, cap={cap}")
    retained: list[int] = []
    seen: set[int] = set()
    for chain in list(chains)[:k]:
        for idx in chain.indices:
            if idx not in seen:
                seen.add(idx)
                retained.append(idx)
                if len(retained) >= cap:
                    return sorted(retained)
    return sorted(retained)


# ---------------------------------------------------------------------------
# Heads sharing the encoder


def score_sentences_unordered(params: ModelParams, enc: EncoderOutput) -> np.ndarray:
    """Independent per-sentence relevance: sigmoid(u @ [s_i; q; s_i*q])."""
    s = params.state_dim
    u = params.tensors["unordered_u"]
    u1, u2, u3 = u[:s], u[s : 2 * s], u[2 * s :]
    q = enc.question_rep
    logits = enc.sentence_reps @ u1 + (u2 @ q) + (enc.sentence_reps * q) @ u3
    return _sigmoid(logits)


def _candidate_unit_ids(params: ModelParams, example: Example, evidence) -> list[list[int]]:
    """Encoder inputs for candidate scoring: [question; SEP; evidence...] then
    one standalone unit per candidate."""
    q_ids = params.ids(example.question_tokens)
    context = list(q_ids) + [SEP]
    sentences = example.sentences
    for g in evidence:
        context.extend(params.ids(sentences[g].tokens))
    units = [context]
    for cand in example.candidates:
        units.append(params.ids(cand))
    return units


def score_candidates(params: ModelParams, example: Example, evidence) -> np.ndarray:
    """Dot product between the pooled evidence encoding and each candidate's
    pooled standalone encoding."""
    if not example.candidates:
        raise ValueError("example has no candidates to score")
    run = _run_bidi(params, _candidate_unit_ids(params, example, evidence))
    ts = run["token_states"]
    pooled = [
        _pool(ts, u, 0, int(run["lengths"][u]))[0]
        for u in range(ts.shape[1])
    ]
    a = pooled[0]
    cands = np.stack(pooled[1:], axis=0)
    return cands @ a


def predict_candidate(params: ModelParams, example: Example, evidence) -> int:
    """Argmax candidate; ties resolve to the earliest candidate."""
    return int(np.argmax(score_candidates(params, example, evidence)))
