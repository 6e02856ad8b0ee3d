"""Shared independent oracles and instance builders for the test suite.

Everything here deliberately avoids the library's own traversal/decoding
code paths so it can serve as a second route for verification.
"""

from itertools import permutations

import numpy as np

from chainex.corpus import parse_record
from chainex.graph import SentenceGraph


def random_graph(rng, max_nodes=8):
    """Random SentenceGraph: undirected edges, question links, answers."""
    n = int(rng.integers(2, max_nodes + 1))
    graph = SentenceGraph.empty(n)
    for i in range(n):
        for j in range(i + 1, n):
            if rng.random() < 0.35:
                graph.add_edge(i, j, "shared_entity")
    for i in range(n):
        if rng.random() < 0.4:
            graph.add_question_link(i)
    graph.answer_nodes = {i for i in range(n) if rng.random() < 0.3}
    return graph


def brute_force_chains(graph, max_len):
    """All question->answer simple paths by filtering ordered tuples.

    Independent of enumerate_chains: checks adjacency over permutations of
    node subsets instead of traversing.
    """
    found = []
    nodes = range(graph.num_sentences)
    for length in range(1, max_len + 1):
        for path in permutations(nodes, length):
            if path[0] not in graph.question_neighbors:
                continue
            if path[-1] not in graph.answer_nodes:
                continue
            if all(path[i + 1] in graph.neighbors[path[i]] for i in range(length - 1)):
                found.append(tuple(path))
    return sorted(found)


def bfs_distance(graph):
    """Breadth-first distance (in sentences) from the question node to the
    nearest answer node; None when unreachable."""
    frontier = sorted(graph.question_neighbors)
    seen = set(frontier)
    depth = 1
    while frontier:
        if any(node in graph.answer_nodes for node in frontier):
            return depth
        nxt = []
        for node in frontier:
            for neighbor in sorted(graph.neighbors[node]):
                if neighbor not in seen:
                    seen.add(neighbor)
                    nxt.append(neighbor)
        frontier = nxt
        depth += 1
    return None


def naive_bidi_states(params, ids):
    """Per-sequence bidirectional LSTM token states, written with plain loops
    independently of the kernel/batching machinery."""
    t = params.tensors
    hd = params.hidden_dim
    x = t["embed"][np.array(ids)]

    def run(xs, wx, wh, b):
        states = []
        h = np.zeros(hd)
        c = np.zeros(hd)
        for xt in xs:
            z = xt @ wx + h @ wh + b
            i = 1.0 / (1.0 + np.exp(-z[:hd]))
            f = 1.0 / (1.0 + np.exp(-z[hd : 2 * hd]))
            g = np.tanh(z[2 * hd : 3 * hd])
            o = 1.0 / (1.0 + np.exp(-z[3 * hd :]))
            c = f * c + i * g
            h = o * np.tanh(c)
            states.append(h)
        return np.stack(states)

    fwd = run(x, t["enc_fwd_wx"], t["enc_fwd_wh"], t["enc_fwd_b"])
    bwd = run(x[::-1], t["enc_bwd_wx"], t["enc_bwd_wh"], t["enc_bwd_b"])[::-1]
    return np.concatenate([fwd, bwd], axis=1)


def exhaustive_chains(params, enc, max_steps):
    """Every terminated pointer sequence with its cumulative log score.

    Recomputes the decoder cell and pointer softmax from the update
    equations, independently of decoder_step/beam_search.
    """
    t = params.tensors
    s = params.state_dim
    reps = enc.sentence_reps
    n = reps.shape[0]
    w = t["ptr_w"]
    w1, w2, w3 = w[:s], w[s : 2 * s], w[2 * s :]

    def cell(x, h, c):
        z = x @ t["dec_wx"] + h @ t["dec_wh"] + t["dec_b"]
        i = 1.0 / (1.0 + np.exp(-z[:s]))
        f = 1.0 / (1.0 + np.exp(-z[s : 2 * s]))
        g = np.tanh(z[2 * s : 3 * s])
        o = 1.0 / (1.0 + np.exp(-z[3 * s :]))
        c2 = f * c + i * g
        return o * np.tanh(c2), c2

    out = []

    def expand(h, c, chosen, logp, step):
        x = t["sos"] if not chosen else reps[chosen[-1]]
        h2, c2 = cell(x, h, c)
        allow_eos = step > 1
        open_idx = [i for i in range(n) if i not in chosen]
        rows = [reps[i] for i in open_idx]
        if allow_eos:
            rows.append(t["eos"])
        logits = np.array([w1 @ h2 + w2 @ r + w3 @ (h2 * r) for r in rows])
        e = np.exp(logits - logits.max())
        p = e / e.sum()
        for k, idx in enumerate(open_idx):
            lp = logp + float(np.log(p[k]))
            seq = chosen + (idx,)
            if len(seq) >= max_steps:
                out.append((seq, lp))
            else:
                expand(h2, c2, seq, lp, step + 1)
        if allow_eos:
            out.append((chosen, logp + float(np.log(p[-1]))))

    expand(enc.question_rep, np.zeros(s), (), 0.0, 1)
    return out


def toy_example(n_sentences=4, n_paragraphs=2, seed=0, candidates=None):
    """Small random-word example for model-level tests."""
    rng = np.random.default_rng(seed)
    words = ["alpha", "bravo", "cedar", "delta", "ember", "fjord", "grove", "haven"]
    paragraphs = []
    remaining = n_sentences
    for p in range(n_paragraphs):
        take = remaining if p == n_paragraphs - 1 else max(1, remaining // (n_paragraphs - p))
        sentences = [
            " ".join(words[int(i)] for i in rng.integers(0, len(words), size=int(rng.integers(2, 5))))
            for _ in range(take)
        ]
        paragraphs.append({"sentences": sentences})
        remaining -= take
    record = {
        "id": f"toy-{seed}",
        "question": "where is the alpha thing ?",
        "answer": "alpha",
        "paragraphs": paragraphs,
    }
    if candidates is not None:
        record["candidates"] = candidates
    return parse_record(record)
