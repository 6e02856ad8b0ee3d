"""Training for the chain extractor and the auxiliary heads.

Teacher-forced negative log likelihood for the pointer decoder (EOS appended
as the final target), per-sentence binary cross-entropy for the unordered
baseline, and candidate cross-entropy for the answer scorer.  Gradients are
exact reverse accumulation through the whole computation (embeddings,
bidirectional encoder, max-pooling, decoder, scoring heads); optimization is
Adam with bias correction plus a global-norm gradient clip.  All randomness
flows from named seeded streams, so runs are bit-deterministic for a fixed
seed and floating-point environment.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels, model
from .corpus import Example
from .graph import Chain, find_answer_sentences
from .model import MODES, PARA, ModelParams, TENSOR_NAMES
from .oracle import CRITERIA, SHORTEST, OracleConfig, derive_oracle

OBJECTIVE_CHAIN = "chain"
OBJECTIVE_UNORDERED = "unordered"
OBJECTIVE_ANSWER = "answer"
OBJECTIVES = (OBJECTIVE_CHAIN, OBJECTIVE_UNORDERED, OBJECTIVE_ANSWER)


class GradientError(RuntimeError):
    """A non-finite value appeared during gradient computation."""


@dataclass
class TrainConfig:
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    epochs: int = 10
    batch_size: int = 8
    seed: int = 0
    criterion: str = SHORTEST
    mode: str = PARA
    beam_size: int = 5
    max_steps: int = 4
    grad_clip: float = 5.0
    embed_dim: int = 64
    hidden_dim: int = 64
    length_normalize: bool = False

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be > 0")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if not (0 < self.beta1 < 1 and 0 < self.beta2 < 1):
            raise ValueError("beta1 and beta2 must lie in (0, 1)")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.criterion not in CRITERIA:
            raise ValueError(f"criterion must be one of {CRITERIA}")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")


@dataclass
class OptState:
    m: dict
    v: dict
    step: int = 0


def init_opt(params: ModelParams) -> OptState:
    return OptState(
        m={name: np.zeros_like(arr) for name, arr in params.tensors.items()},
        v={name: np.zeros_like(arr) for name, arr in params.tensors.items()},
    )


def zero_grads(params: ModelParams) -> dict:
    return {name: np.zeros_like(arr) for name, arr in params.tensors.items()}


# ---------------------------------------------------------------------------
# Chain objective


def _check_targets(example: Example, targets) -> list[int]:
    n = example.num_sentences
    targets = [int(t) for t in targets]
    if not targets:
        raise ValueError(f"example {example.id}: empty target chain")
    if len(set(targets)) != len(targets):
        raise ValueError(f"example {example.id}: target chain repeats a sentence")
    for t in targets:
        if not 0 <= t < n:
            raise ValueError(f"example {example.id}: chain references sentence {t} of {n}")
    return targets


def _chain_batch(params: ModelParams, items, mode: str, want_grads: bool):
    """Summed teacher-forced NLL over (example, target chain) items, with
    unscaled summed gradients when requested (compute_gradients divides by
    the batch size)."""
    examples = [ex for ex, _ in items]
    encs, cache = model.encode_batch(params, examples, mode, keep_cache=True)
    tensors = params.tensors
    s = params.state_dim
    grads = zero_grads(params) if want_grads else None
    d_reps = [np.zeros_like(e.sentence_reps) for e in encs] if want_grads else None
    d_qs = [np.zeros_like(e.question_rep) for e in encs] if want_grads else None

    total_loss = 0.0
    for bi, (example, oracle) in enumerate(items):
        targets = _check_targets(example, oracle.indices if isinstance(oracle, Chain) else oracle)
        reps = encs[bi].sentence_reps
        n = reps.shape[0]
        steps = len(targets) + 1  # final step targets EOS

        x = np.empty((steps, 1, s))
        x[0, 0] = tensors["sos"]
        for t in range(1, steps):
            x[t, 0] = reps[targets[t - 1]]
        h0 = encs[bi].question_rep[None, :]
        c0 = np.zeros((1, s))
        h, c, gates = kernels.lstm_forward(
            x, tensors["dec_wx"], tensors["dec_wh"], tensors["dec_b"], h0, c0)

        dh = np.zeros_like(h) if want_grads else None
        mask = np.zeros(n, dtype=bool)
        w = tensors["ptr_w"]
        w1, w3 = w[:s], w[2 * s :]
        for t in range(steps):
            open_idx = np.flatnonzero(~mask)
            cand = np.concatenate([reps[open_idx], tensors["eos"][None, :]], axis=0)
            h_t = h[t, 0]
            alpha = model._pointer_logits(params, h_t, cand)
            zs = alpha - alpha.max()
            log_z = math.log(np.exp(zs).sum())
            if t < len(targets):
                pos = int(np.searchsorted(open_idx, targets[t]))
            else:
                pos = len(cand) - 1
            total_loss += log_z - float(zs[pos])
            if want_grads:
                d_alpha = np.exp(zs - log_z)
                d_alpha[pos] -= 1.0
                cand_sum = cand.T @ d_alpha
                grads["ptr_w"][:s] += d_alpha.sum() * h_t
                grads["ptr_w"][s : 2 * s] += cand_sum
                grads["ptr_w"][2 * s :] += h_t * cand_sum
                dh[t, 0] += d_alpha.sum() * w1 + w3 * cand_sum
                d_cand = np.outer(d_alpha, w[s : 2 * s] + w3 * h_t)
                d_reps[bi][open_idx] += d_cand[:-1]
                grads["eos"] += d_cand[-1]
            if t < len(targets):
                mask[targets[t]] = True

        if want_grads:
            dx, dwx, dwh, db, dh0, _ = kernels.lstm_backward(
                x, tensors["dec_wx"], tensors["dec_wh"], h, c, gates, h0, c0, dh)
            grads["dec_wx"] += dwx
            grads["dec_wh"] += dwh
            grads["dec_b"] += db
            grads["sos"] += dx[0, 0]
            for t in range(1, steps):
                d_reps[bi][targets[t - 1]] += dx[t, 0]
            d_qs[bi] += dh0[0]

    if want_grads:
        model.encoder_backward(params, cache, d_reps, d_qs, grads)
    return total_loss, grads


def chain_nll_loss(params: ModelParams, example: Example, oracle_chain, mode: str = PARA) -> float:
    """Sum over steps of -log P(target | prefix), EOS step included."""
    loss, _ = _chain_batch(params, [(example, oracle_chain)], mode, want_grads=False)
    return loss


# ---------------------------------------------------------------------------
# Unordered baseline objective


def _unordered_batch(params: ModelParams, items, mode: str, want_grads: bool):
    """Per-sentence BCE; positives are chain members."""
    examples = [ex for ex, _ in items]
    encs, cache = model.encode_batch(params, examples, mode, keep_cache=True)
    s = params.state_dim
    u = params.tensors["unordered_u"]
    u1, u2, u3 = u[:s], u[s : 2 * s], u[2 * s :]
    grads = zero_grads(params) if want_grads else None
    d_reps = [None] * len(items) if want_grads else None
    d_qs = [None] * len(items) if want_grads else None

    total_loss = 0.0
    for bi, (example, chain) in enumerate(items):
        targets = _check_targets(example, chain.indices if isinstance(chain, Chain) else chain)
        reps = encs[bi].sentence_reps
        q = encs[bi].question_rep
        y = np.zeros(reps.shape[0])
        y[targets] = 1.0
        logits = reps @ u1 + (u2 @ q) + (reps * q) @ u3
        # BCE via softplus: -y log sig(z) - (1-y) log(1-sig(z)) = softplus(z) - y z
        total_loss += float((np.logaddexp(0.0, logits) - y * logits).sum())
        if want_grads:
            d_logit = _sigmoid_np(logits) - y
            grads["unordered_u"][:s] += reps.T @ d_logit
            grads["unordered_u"][s : 2 * s] += d_logit.sum() * q
            grads["unordered_u"][2 * s :] += (reps * q).T @ d_logit
            d_reps[bi] = np.outer(d_logit, u1 + u3 * q)
            d_qs[bi] = d_logit.sum() * u2 + u3 * (reps.T @ d_logit)

    if want_grads:
        model.encoder_backward(params, cache, d_reps, d_qs, grads)
    return total_loss, grads


def _sigmoid_np(z):
    return np.exp(-np.logaddexp(0.0, -z))


# ---------------------------------------------------------------------------
# Answer scorer objective


def gold_candidate_index(example: Example) -> int:
    answer = tuple(t.lower for t in example.answer_tokens)
    for i, cand in enumerate(example.candidates):
        if tuple(t.lower for t in cand) == answer:
            return i
    raise ValueError(f"example {example.id}: answer matches no candidate")


def _answer_batch(params: ModelParams, items, want_grads: bool):
    """Cross-entropy over candidates scored against the pooled evidence run.

    Items are (example, evidence sentence indices); evidence comes frozen
    from the chain extractor.
    """
    grads = zero_grads(params) if want_grads else None
    total_loss = 0.0
    for example, evidence in items:
        if not example.candidates:
            raise ValueError(f"example {example.id}: answer objective needs candidates")
        run = model._run_bidi(params, model._candidate_unit_ids(params, example, evidence))
        ts = run["token_states"]
        n_units = ts.shape[1]
        pooled = []
        positions = []
        for uidx in range(n_units):
            vec, pos = model._pool(ts, uidx, 0, int(run["lengths"][uidx]))
            pooled.append(vec)
            positions.append(pos)
        a = pooled[0]
        cands = np.stack(pooled[1:], axis=0)
        z = cands @ a
        zs = z - z.max()
        log_z = math.log(np.exp(zs).sum())
        gold = gold_candidate_index(example)
        total_loss += log_z - float(zs[gold])
        if want_grads:
            dz = np.exp(zs - log_z)
            dz[gold] -= 1.0
            da = cands.T @ dz
            d_cands = np.outer(dz, a)
            d_ts = np.zeros_like(ts)
            dims = np.arange(params.state_dim)
            d_ts[positions[0], 0, dims] += da
            for ci in range(cands.shape[0]):
                d_ts[positions[ci + 1], ci + 1, dims] += d_cands[ci]
            model._bidi_backward(params, run, d_ts, grads)
    return total_loss, grads


# ---------------------------------------------------------------------------
# Gradients, Adam, finite differences


def compute_loss(params: ModelParams, items, mode: str = PARA, objective: str = OBJECTIVE_CHAIN) -> float:
    """Mean per-example loss over a batch of items."""
    if objective == OBJECTIVE_CHAIN:
        total, _ = _chain_batch(params, items, mode, want_grads=False)
    elif objective == OBJECTIVE_UNORDERED:
        total, _ = _unordered_batch(params, items, mode, want_grads=False)
    elif objective == OBJECTIVE_ANSWER:
        total, _ = _answer_batch(params, items, want_grads=False)
    else:
        raise ValueError(f"objective must be one of {OBJECTIVES}")
    return total / len(items)


def compute_gradients(params: ModelParams, items, mode: str = PARA,
                      objective: str = OBJECTIVE_CHAIN):
    """Exact gradients of the mean batch loss; returns (loss, grads)."""
    if not items:
        raise ValueError("cannot compute gradients for an empty batch")
    if objective == OBJECTIVE_CHAIN:
        total, grads = _chain_batch(params, items, mode, want_grads=True)
    elif objective == OBJECTIVE_UNORDERED:
        total, grads = _unordered_batch(params, items, mode, want_grads=True)
    elif objective == OBJECTIVE_ANSWER:
        total, grads = _answer_batch(params, items, want_grads=True)
    else:
        raise ValueError(f"objective must be one of {OBJECTIVES}")
    scale = 1.0 / len(items)
    for name in grads:
        grads[name] *= scale
    loss = total * scale
    if not math.isfinite(loss):
        raise GradientError("loss is not finite")
    for name, g in grads.items():
        if not np.isfinite(g).all():
            raise GradientError(f"non-finite gradient in tensor '{name}'")
    return loss, grads


def finite_difference(params: ModelParams, loss_fn, tensor_name: str, flat_index: int,
                      eps: float = 1e-4) -> float:
    """Central-difference derivative of loss_fn at one parameter coordinate."""
    arr = params.tensors[tensor_name]
    original = arr.flat[flat_index]
    arr.flat[flat_index] = original + eps
    loss_plus = loss_fn()
    arr.flat[flat_index] = original - eps
    loss_minus = loss_fn()
    arr.flat[flat_index] = original
    return (loss_plus - loss_minus) / (2.0 * eps)


def clip_gradients(grads: dict, max_norm: float) -> float:
    """Global-norm clip in place; returns the pre-clip norm."""
    total = math.sqrt(sum(float((g * g).sum()) for g in grads.values()))
    if max_norm > 0 and total > max_norm:
        scale = max_norm / total
        for g in grads.values():
            g *= scale
    return total


def adam_step(params: ModelParams, grads: dict, opt: OptState, config: TrainConfig):
    """Bias-corrected Adam update, in place; returns (params, opt)."""
    opt.step += 1
    t = opt.step
    lr, b1, b2 = config.learning_rate, config.beta1, config.beta2
    for name in TENSOR_NAMES:
        g = grads[name]
        opt.m[name] = b1 * opt.m[name] + (1.0 - b1) * g
        opt.v[name] = b2 * opt.v[name] + (1.0 - b2) * g * g
        m_hat = opt.m[name] / (1.0 - b1 ** t)
        v_hat = opt.v[name] / (1.0 - b2 ** t)
        params.tensors[name] -= lr * m_hat / (np.sqrt(v_hat) + config.eps)
    return params, opt


# ---------------------------------------------------------------------------
# Corpus -> training items


def oracle_items(pairs, config: OracleConfig):
    """(example, oracle chain) items for training; unreachable examples are
    dropped and counted.  `pairs` holds (raw record, Example); records that
    already carry an oracle_chain are used as-is."""
    items = []
    skipped = 0
    for record, example in pairs:
        if record.get("oracle_chain") is not None:
            chain = Chain(tuple(int(i) for i in record["oracle_chain"]))
            _check_targets(example, chain.indices)
        elif record.get("oracle_status") == "unreachable":
            skipped += 1
            continue
        else:
            chain, _status = derive_oracle(example, config)
            if chain is None:
                skipped += 1
                continue
        items.append((example, chain))
    return items, skipped


def reference_items(pairs, config: OracleConfig):
    """(example, reference chain) items for evaluation: the gold chain when
    present, else the derived oracle."""
    items = []
    skipped = 0
    for record, example in pairs:
        if example.gold_chain is not None:
            items.append((example, Chain(tuple(example.gold_chain))))
            continue
        sub, sub_skipped = oracle_items([(record, example)], config)
        items.extend(sub)
        skipped += sub_skipped
    return items, skipped


# ---------------------------------------------------------------------------
# Training loop


def _batched(sequence, size):
    for start in range(0, len(sequence), size):
        yield sequence[start : start + size]


def evaluate_chain_dev(params: ModelParams, dev_items, config: TrainConfig):
    """(exact top-1 match rate, top-1 answer-found rate) on dev items."""
    exact = 0
    found = 0
    examples = [ex for ex, _ in dev_items]
    for chunk_start in range(0, len(dev_items), 32):
        chunk = dev_items[chunk_start : chunk_start + 32]
        encs = model.encode_batch(params, [ex for ex, _ in chunk], config.mode)
        for (example, reference), enc in zip(chunk, encs):
            chains = model.beam_search(params, enc, config.beam_size, config.max_steps,
                                       config.length_normalize)
            top1 = chains[0]
            ref = reference.indices if isinstance(reference, Chain) else tuple(reference)
            if top1.indices == ref:
                exact += 1
            answers = find_answer_sentences(example)
            if any(i in answers for i in top1.indices):
                found += 1
    n = max(1, len(examples))
    return exact / n, found / n


def evaluate_unordered_dev(params: ModelParams, dev_items, config: TrainConfig):
    """Exact = top-|reference| score set equals the reference set."""
    exact = 0
    found = 0
    for chunk_start in range(0, len(dev_items), 32):
        chunk = dev_items[chunk_start : chunk_start + 32]
        encs = model.encode_batch(params, [ex for ex, _ in chunk], config.mode)
        for (example, reference), enc in zip(chunk, encs):
            ref = set(reference.indices if isinstance(reference, Chain) else reference)
            scores = model.score_sentences_unordered(params, enc)
            picked = select_top_sentences(scores, len(ref))
            if set(picked) == ref:
                exact += 1
            answers = find_answer_sentences(example)
            if any(i in answers for i in picked):
                found += 1
    n = max(1, len(dev_items))
    return exact / n, found / n


def select_top_sentences(scores: np.ndarray, k: int) -> list[int]:
    """Top-k sentence indices by relevance, ties resolved by document order."""
    order = sorted(range(len(scores)), key=lambda i: (-scores[i], i))
    return sorted(order[:k])


def evaluate_answer_dev(params: ModelParams, dev_items, _config: TrainConfig):
    correct = 0
    found = 0
    for example, evidence in dev_items:
        pred = model.predict_candidate(params, example, evidence)
        if pred == gold_candidate_index(example):
            correct += 1
        answers = find_answer_sentences(example)
        if any(i in answers for i in evidence):
            found += 1
    n = max(1, len(dev_items))
    return correct / n, found / n


def train(config: TrainConfig, train_items, dev_items, objective: str = OBJECTIVE_CHAIN,
          init: ModelParams | None = None, log_callback=None):
    """Train and return (best-dev params, per-epoch logs).

    Per-epoch log entries: {"epoch", "train_loss", "dev_exact",
    "dev_answer_found"}.  dev_exact is top-1 exact chain match for the chain
    objective, top-k set match for the unordered baseline, and candidate
    accuracy for the answer scorer.
    """
    if objective not in OBJECTIVES:
        raise ValueError(f"objective must be one of {OBJECTIVES}")
    if not train_items:
        raise ValueError("training set is empty")

    if init is not None:
        params = init.copy()
    else:
        vocab = model.build_vocab([ex for ex, _ in train_items])
        params = model.init_params(vocab, config.embed_dim, config.hidden_dim, seed=config.seed)
    opt = init_opt(params)
    shuffle_rng = np.random.default_rng(np.random.SeedSequence([config.seed, 1]))

    evaluators = {
        OBJECTIVE_CHAIN: evaluate_chain_dev,
        OBJECTIVE_UNORDERED: evaluate_unordered_dev,
        OBJECTIVE_ANSWER: evaluate_answer_dev,
    }
    evaluate = evaluators[objective]

    logs: list[dict] = []
    best_exact = -1.0
    best_params = params.copy()
    for epoch in range(1, config.epochs + 1):
        order = shuffle_rng.permutation(len(train_items))
        losses = []
        for batch_index in _batched(order, config.batch_size):
            batch = [train_items[i] for i in batch_index]
            loss, grads = compute_gradients(params, batch, config.mode, objective)
            clip_gradients(grads, config.grad_clip)
            adam_step(params, grads, opt, config)
            losses.append(loss)
        dev_exact, dev_found = evaluate(params, dev_items, config) if dev_items else (0.0, 0.0)
        entry = {
            "epoch": epoch,
            "train_loss": float(np.mean(losses)),
            "dev_exact": dev_exact,
            "dev_answer_found": dev_found,
        }
        logs.append(entry)
        if log_callback is not None:
            log_callback(entry)
        if dev_exact > best_exact:
            best_exact = dev_exact
            best_params = params.copy()
    return best_params, logs
