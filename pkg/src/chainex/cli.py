"""Command-line pipeline: gen, oracle, stats, train, extract, eval.

Exit codes: 0 success, 1 usage error, 2 data/schema error.  Every flag
mirrors a config-file key one-to-one; a JSON document passed via --config
supplies values that explicit flags override.  --workers enables per-example
multiprocessing for gen/oracle/extract/eval with deterministic output order.
"""

from __future__ import annotations

import argparse
import json
import sys
from multiprocessing import Pool

from . import model as model_mod
from . import train as train_mod
from .corpus import SchemaError, iter_records, write_records
from .graph import build_graph, find_answer_sentences, graph_to_json
from .entities import build_entity_index
from .metrics import chain_stats, supp_f1
from .oracle import (
    CRITERIA,
    STATUS_OK,
    STATUS_UNREACHABLE,
    OracleConfig,
    derive_oracle_with_info,
)
from .syngen import GenConfig, generate_records, hard_preset


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="chainex", description=__doc__)
    sub = parser.add_subparsers(dest="command")

    def add(name, help_text):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", help="JSON config file; flags override its keys")
        p.add_argument("--workers", type=int, help="per-example parallelism (default 1)")
        return p

    p = add("gen", "generate a synthetic planted-chain corpus")
    p.add_argument("--out")
    p.add_argument("--num", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--paragraphs", type=int)
    p.add_argument("--sentences-per-paragraph", dest="sentences_per_paragraph", type=int)
    p.add_argument("--chain-min", dest="chain_min", type=int)
    p.add_argument("--chain-max", dest="chain_max", type=int)
    p.add_argument("--candidates", type=int)
    p.add_argument("--entity-vocab", dest="entity_vocab", type=int)
    p.add_argument("--filler-vocab", dest="filler_vocab", type=int)
    p.add_argument("--distractor-rate", dest="distractor_rate", type=float)
    p.add_argument("--hard", action="store_const", const=True)
    p.add_argument("--emit-entities", dest="emit_entities", action="store_const", const=True)

    p = add("oracle", "derive pseudogold chains and write augmented JSONL")
    p.add_argument("--in", dest="in_path")
    p.add_argument("--out")
    p.add_argument("--criterion", choices=CRITERIA)
    p.add_argument("--max-len", dest="max_len", type=int)
    p.add_argument("--threshold", type=int)
    p.add_argument("--dump-graph", dest="dump_graph")

    p = add("stats", "aggregate oracle-chain statistics from augmented JSONL")
    p.add_argument("--in", dest="in_path")
    p.add_argument("--out")

    p = add("train", "train the chain extractor (or a baseline head)")
    p.add_argument("--train", dest="train_path")
    p.add_argument("--dev", dest="dev_path")
    p.add_argument("--out")
    p.add_argument("--log")
    p.add_argument("--objective", choices=train_mod.OBJECTIVES)
    p.add_argument("--extractor", help="extractor checkpoint (answer objective)")
    p.add_argument("--criterion", choices=CRITERIA)
    p.add_argument("--mode", choices=model_mod.MODES)
    p.add_argument("--epochs", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--batch-size", dest="batch_size", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--beam", type=int)
    p.add_argument("--max-steps", dest="max_steps", type=int)
    p.add_argument("--max-len", dest="max_len", type=int)
    p.add_argument("--threshold", type=int)
    p.add_argument("--embed-dim", dest="embed_dim", type=int)
    p.add_argument("--hidden-dim", dest="hidden_dim", type=int)
    p.add_argument("--grad-clip", dest="grad_clip", type=float)
    p.add_argument("--union-cap", dest="union_cap", type=int)
    p.add_argument("--length-normalize", dest="length_normalize", action="store_const", const=True)

    p = add("extract", "decode chains with a trained checkpoint")
    p.add_argument("--in", dest="in_path")
    p.add_argument("--ckpt")
    p.add_argument("--out")
    p.add_argument("--mode", choices=model_mod.MODES)
    p.add_argument("--beam", type=int)
    p.add_argument("--max-steps", dest="max_steps", type=int)
    p.add_argument("--union-cap", dest="union_cap", type=int)
    p.add_argument("--length-normalize", dest="length_normalize", action="store_const", const=True)

    p = add("eval", "score extracted evidence against a corpus")
    p.add_argument("--data")
    p.add_argument("--extract", dest="extract_path")
    p.add_argument("--out")
    p.add_argument("--ckpt", help="scorer checkpoint for QA predictions")
    p.add_argument("--per-example", dest="per_example")
    p.add_argument("--top1", action="store_const", const=True)

    return parser


def _resolve(args, defaults: dict, required=()) -> dict:
    """Merge defaults <- config file <- explicit flags."""
    values = dict(defaults)
    explicit = {}
    if getattr(args, "config", None):
        try:
            with open(args.config, "r", encoding="utf-8") as handle:
                file_values = json.load(handle)
        except (OSError, json.JSONDecodeError) as exc:
            raise DataError(f"cannot read config file: {exc}") from exc
        if not isinstance(file_values, dict):
            raise DataError("config file must hold a JSON object")
        for key, value in file_values.items():
            if key not in defaults:
                raise DataError(f"unknown config key: {key}")
            explicit[key] = value
    for key in defaults:
        flag_value = getattr(args, key, None)
        if flag_value is not None:
            explicit[key] = flag_value
    values.update(explicit)
    for key in required:
        if values[key] is None:
            raise UsageError(f"missing required option --{key.replace('_', '-')}")
    values["_explicit"] = explicit
    return values


def _parallel_map(fn, items, workers, initializer=None, initargs=()):
    if workers and workers > 1:
        with Pool(workers, initializer=initializer, initargs=initargs) as pool:
            return pool.map(fn, list(items))
    if initializer is not None:
        initializer(*initargs)
    return [fn(item) for item in items]


# ---------------------------------------------------------------------------
# gen


def _cmd_gen(args) -> int:
    values = _resolve(args, {
        "out": None, "num": None, "seed": 0, "paragraphs": 4,
        "sentences_per_paragraph": 4, "chain_min": 2, "chain_max": 3,
        "candidates": 8, "entity_vocab": 120, "filler_vocab": 200,
        "distractor_rate": 0.3, "hard": False, "emit_entities": False,
        "workers": 1,
    }, required=("out", "num"))
    explicit = values["_explicit"]
    kwargs = dict(
        num_examples=values["num"],
        num_paragraphs=values["paragraphs"],
        sentences_per_paragraph=values["sentences_per_paragraph"],
        chain_min=values["chain_min"],
        chain_max=values["chain_max"],
        num_candidates=values["candidates"],
        entity_vocab=values["entity_vocab"],
        filler_vocab=values["filler_vocab"],
        seed=values["seed"],
        emit_entities=values["emit_entities"],
    )
    try:
        if values["hard"]:
            # the preset's rate wins unless the rate was given explicitly
            if "distractor_rate" in explicit:
                kwargs["distractor_entity_rate"] = values["distractor_rate"]
            config = hard_preset(**{k: v for k, v in kwargs.items() if k != "num_examples"},
                                 num_examples=values["num"])
        else:
            config = GenConfig(distractor_entity_rate=values["distractor_rate"], **kwargs)
        records = generate_records(config, workers=values["workers"])
    except ValueError as exc:
        raise DataError(str(exc)) from exc
    write_records(values["out"], records)
    return 0


# ---------------------------------------------------------------------------
# oracle


def _oracle_one(task):
    record, example, config, want_dump = task
    chain, truncated = derive_oracle_with_info(example, config)
    row = dict(record)
    row["oracle_status"] = STATUS_OK if chain is not None else STATUS_UNREACHABLE
    if chain is not None:
        row["oracle_chain"] = list(chain.indices)
    if truncated:
        row["oracle_truncated"] = True
    dump = None
    if want_dump:
        graph = build_graph(example, build_entity_index(example, threshold=config.threshold))
        dump = {"id": example.id, **graph_to_json(graph)}
    return row, dump


def _cmd_oracle(args) -> int:
    values = _resolve(args, {
        "in_path": None, "out": None, "criterion": "shortest",
        "max_len": 4, "threshold": 5, "dump_graph": None, "workers": 1,
    }, required=("in_path", "out"))
    config = OracleConfig(criterion=values["criterion"], max_len=values["max_len"],
                          threshold=values["threshold"])
    pairs = list(iter_records(values["in_path"]))
    tasks = [(record, example, config, values["dump_graph"] is not None)
             for record, example in pairs]
    results = _parallel_map(_oracle_one, tasks, values["workers"])
    write_records(values["out"], (row for row, _ in results))
    if values["dump_graph"] is not None:
        write_records(values["dump_graph"], (dump for _, dump in results))
    return 0


# ---------------------------------------------------------------------------
# stats


def _validate_evidence(evidence, example, source: str):
    if evidence is None:
        return None
    cleaned = []
    for g in evidence:
        if not isinstance(g, int) or not 0 <= g < example.num_sentences:
            raise DataError(
                f"{source}: example {example.id!r} references sentence {g!r} "
                f"out of {example.num_sentences}")
        cleaned.append(g)
    return cleaned


def _cmd_stats(args) -> int:
    values = _resolve(args, {"in_path": None, "out": None, "workers": 1},
                      required=("in_path",))
    evidences = []
    examples = []
    for record, example in iter_records(values["in_path"]):
        examples.append(example)
        evidences.append(_validate_evidence(record.get("oracle_chain"), example, "oracle_chain"))
    report = chain_stats(evidences, examples)
    _write_report(report, values["out"])
    return 0


def _write_report(report, out_path) -> None:
    text = report.to_json()
    if out_path:
        with open(out_path, "w", encoding="utf-8") as handle:
            handle.write(text)
    else:
        sys.stdout.write(text)


# ---------------------------------------------------------------------------
# train


def _evidence_items(params, pairs, mode, beam, max_steps, cap, length_normalize):
    items = []
    skipped = 0
    for _record, example in pairs:
        if not example.candidates:
            skipped += 1
            continue
        enc = model_mod.encode_example(params, example, mode)
        chains = model_mod.beam_search(params, enc, beam, max_steps, length_normalize)
        items.append((example, model_mod.union_top_k(chains, k=beam, cap=cap)))
    return items, skipped


def _cmd_train(args) -> int:
    values = _resolve(args, {
        "train_path": None, "dev_path": None, "out": None, "log": None,
        "objective": "chain", "extractor": None, "criterion": "shortest",
        "mode": "para", "epochs": 10, "lr": 1e-3, "batch_size": 8, "seed": 0,
        "beam": 5, "max_steps": 4, "max_len": 4, "threshold": 5,
        "embed_dim": 64, "hidden_dim": 64, "grad_clip": 5.0, "union_cap": 5,
        "length_normalize": False, "workers": 1,
    }, required=("train_path", "dev_path", "out"))
    config = train_mod.TrainConfig(
        learning_rate=values["lr"], epochs=values["epochs"],
        batch_size=values["batch_size"], seed=values["seed"],
        criterion=values["criterion"], mode=values["mode"],
        beam_size=values["beam"], max_steps=values["max_steps"],
        grad_clip=values["grad_clip"], embed_dim=values["embed_dim"],
        hidden_dim=values["hidden_dim"], length_normalize=values["length_normalize"],
    )
    oracle_config = OracleConfig(criterion=values["criterion"],
                                 max_len=values["max_len"], threshold=values["threshold"])
    train_pairs = list(iter_records(values["train_path"]))
    dev_pairs = list(iter_records(values["dev_path"]))

    objective = values["objective"]
    init = None
    if objective == train_mod.OBJECTIVE_ANSWER:
        if values["extractor"] is None:
            raise UsageError("--extractor is required for the answer objective")
        init = model_mod.load_params(values["extractor"])
        train_items, skipped = _evidence_items(
            init, train_pairs, config.mode, config.beam_size, config.max_steps,
            values["union_cap"], config.length_normalize)
        dev_items, dev_skipped = _evidence_items(
            init, dev_pairs, config.mode, config.beam_size, config.max_steps,
            values["union_cap"], config.length_normalize)
    else:
        train_items, skipped = train_mod.oracle_items(train_pairs, oracle_config)
        dev_items, dev_skipped = train_mod.reference_items(dev_pairs, oracle_config)
    if skipped or dev_skipped:
        print(f"skipped {skipped} train / {dev_skipped} dev examples without usable chains",
              file=sys.stderr)
    if not train_items:
        raise DataError("no trainable examples remain after filtering")

    log_lines: list[str] = []

    def on_epoch(entry):
        line = json.dumps(entry)
        log_lines.append(line)
        print(line, file=sys.stderr)

    params, _logs = train_mod.train(config, train_items, dev_items, objective,
                                    init=init, log_callback=on_epoch)
    model_mod.save_params(params, values["out"])
    if values["log"]:
        with open(values["log"], "w", encoding="utf-8") as handle:
            handle.write("\n".join(log_lines) + ("\n" if log_lines else ""))
    return 0


# ---------------------------------------------------------------------------
# extract

_EXTRACT_STATE: dict = {}


def _extract_init(ckpt, mode, beam, max_steps, union_cap, length_normalize):
    _EXTRACT_STATE.update(
        params=model_mod.load_params(ckpt), mode=mode, beam=beam,
        max_steps=max_steps, union_cap=union_cap, length_normalize=length_normalize,
    )


def _extract_one(example):
    state = _EXTRACT_STATE
    params = state["params"]
    enc = model_mod.encode_example(params, example, state["mode"])
    chains = model_mod.beam_search(params, enc, state["beam"], state["max_steps"],
                                   state["length_normalize"])
    union = model_mod.union_top_k(chains, k=state["beam"], cap=state["union_cap"])
    return {
        "id": example.id,
        "chains": [{"sentences": list(c.indices), "score": float(c.score)} for c in chains],
        "union": union,
    }


def _cmd_extract(args) -> int:
    values = _resolve(args, {
        "in_path": None, "ckpt": None, "out": None, "mode": "para",
        "beam": 5, "max_steps": 4, "union_cap": 5, "length_normalize": False,
        "workers": 1,
    }, required=("in_path", "ckpt", "out"))
    examples = [example for _, example in iter_records(values["in_path"])]
    rows = _parallel_map(
        _extract_one, examples, values["workers"],
        initializer=_extract_init,
        initargs=(values["ckpt"], values["mode"], values["beam"],
                  values["max_steps"], values["union_cap"], values["length_normalize"]),
    )
    write_records(values["out"], rows)
    return 0


# ---------------------------------------------------------------------------
# eval

_EVAL_STATE: dict = {}


def _eval_init(ckpt):
    _EVAL_STATE["params"] = model_mod.load_params(ckpt) if ckpt else None


def _eval_one(task):
    example, evidence = task
    params = _EVAL_STATE.get("params")
    if params is None or not example.candidates or evidence is None:
        return None
    return model_mod.predict_candidate(params, example, evidence)


def _cmd_eval(args) -> int:
    values = _resolve(args, {
        "data": None, "extract_path": None, "out": None, "ckpt": None,
        "per_example": None, "top1": False, "workers": 1,
    }, required=("data", "extract_path"))
    examples = [example for _, example in iter_records(values["data"])]
    rows_by_id = {}
    with open(values["extract_path"], "r", encoding="utf-8") as handle:
        for line in handle:
            if line.strip():
                row = json.loads(line)
                rows_by_id[row["id"]] = row

    evidences = []
    for example in examples:
        row = rows_by_id.get(example.id)
        if row is None:
            raise DataError(f"extract file has no row for example id {example.id!r}")
        if values["top1"]:
            evidence = row["chains"][0]["sentences"] if row["chains"] else []
        else:
            evidence = row["union"]
        evidences.append(_validate_evidence(evidence, example, "extract file"))

    predictions = None
    if values["ckpt"]:
        predictions = _parallel_map(
            _eval_one, list(zip(examples, evidences)), values["workers"],
            initializer=_eval_init, initargs=(values["ckpt"],),
        )
    report = chain_stats(evidences, examples, predictions)
    _write_report(report, values["out"])

    if values["per_example"]:
        per_rows = []
        for i, (example, evidence) in enumerate(zip(examples, evidences)):
            answers = find_answer_sentences(example)
            gold = example.supporting_facts if example.supporting_facts is not None else example.gold_chain
            row = {
                "id": example.id,
                "evidence": list(evidence),
                "length": len(evidence),
                "answer_found": bool(any(g in answers for g in evidence)),
                "supp_f1": (supp_f1(set(evidence), set(gold))[2] if gold else None),
            }
            if predictions is not None and predictions[i] is not None:
                answer = tuple(t.lower for t in example.answer_tokens)
                predicted = example.candidates[predictions[i]]
                row["correct"] = tuple(t.lower for t in predicted) == answer
            per_rows.append(row)
        write_records(values["per_example"], per_rows)
    return 0


# ---------------------------------------------------------------------------


_COMMANDS = {
    "gen": _cmd_gen,
    "oracle": _cmd_oracle,
    "stats": _cmd_stats,
    "train": _cmd_train,
    "extract": _cmd_extract,
    "eval": _cmd_eval,
}


def dispatch(argv) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError("a subcommand is required (gen, oracle, stats, train, extract, eval)")
        return _COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except (SchemaError, DataError, OSError, ValueError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def main(argv=None) -> int:
    return dispatch(sys.argv[1:] if argv is None else list(argv))


if __name__ == "__main__":
    sys.exit(main())
