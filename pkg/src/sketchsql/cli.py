"""Command-line entry point: synthetic data generation, training,
prediction, evaluation and direct sketch execution.

Exit codes: 0 success, 2 usage/validation, 3 I/O, 4 internal invariant
violation.  Every flag can also be supplied via a JSON config file
(--config); explicit command-line flags take precedence.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import torch

from .data import DataError, Example, SqlSketch, parse_examples, parse_tables
from .encoder import ShapeError
from .eg import EgConfig, decode_eg
from .nl2sql import DecodeConfig, ScoredSketch, decode_greedy
from .tokenizer import Vocabulary, tokenize_question
from .training import (
    ModelConfig,
    OptimConfig,
    SqlModel,
    load_model,
    prepare_examples,
    save_model,
    train,
)
from .metrics import evaluate
from .executor import execute
from . import synth

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_IO = 3
EXIT_INTERNAL = 4


def _load_tables(path: str):
    with open(path, encoding="utf-8") as f:
        return parse_tables(f)


def _load_examples(path: str):
    with open(path, encoding="utf-8") as f:
        return parse_examples(f)


def _add_model_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--layer", choices=["nl2sql", "shallow"], default="nl2sql")
    p.add_argument("--d-model", type=int, default=64)
    p.add_argument("--n-layers", type=int, default=4)
    p.add_argument("--n-heads", type=int, default=4)
    p.add_argument("--d-ff", type=int, default=256)
    p.add_argument("--max-len", type=int, default=222)
    p.add_argument("--max-conds", type=int, default=4)
    p.add_argument("--value-end-offset", type=int, default=100)
    p.add_argument("--max-headers", type=int, default=44)


def _add_eg_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--eg", choices=["on", "off"], default="off")
    p.add_argument("--max-span", type=int, default=12)
    p.add_argument("--n-agg-pairs", type=int, default=4)
    p.add_argument("--n-wc", type=int, default=6)
    p.add_argument("--n-ops", type=int, default=3)
    p.add_argument("--n-spans", type=int, default=2)
    p.add_argument("--n-wn", type=int, default=3)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sketchsql")
    parser.add_argument("--config", help="JSON file of flag defaults")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="write the bundled synthetic dataset")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n-tables", type=int, default=10)
    p.add_argument("--n-train", type=int, default=200)
    p.add_argument("--n-dev", type=int, default=60)

    p = sub.add_parser("train", help="train a model")
    p.add_argument("--tables", required=True)
    p.add_argument("--examples", required=True)
    p.add_argument("--vocab", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--metrics-log", help="per-epoch JSONL metrics file")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--epochs", type=int, default=50)
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--lr-encoder", type=float, default=1e-5)
    p.add_argument("--lr-head", type=float, default=1e-3)
    p.add_argument("--stop-at-lf", type=float)
    _add_model_flags(p)

    p = sub.add_parser("predict", help="decode sketches for every example")
    p.add_argument("--tables", required=True)
    p.add_argument("--examples", required=True)
    p.add_argument("--vocab", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--out", required=True)
    _add_eg_flags(p)

    p = sub.add_parser("evaluate", help="score a prediction file against gold")
    p.add_argument("--pred", required=True)
    p.add_argument("--gold", required=True)
    p.add_argument("--tables", required=True)
    p.add_argument("--out", help="write the report JSON here too")
    p.add_argument("--pr-csv", help="write the precision-recall curve as CSV")

    p = sub.add_parser("exec-sql", help="run one sketch against a table")
    p.add_argument("--tables", required=True)
    p.add_argument("--table", required=True, help="table id")
    p.add_argument("--sketch", required=True, help="sketch as JSON")
    return parser


def cmd_gen_data(args) -> int:
    ds = synth.generate(
        seed=args.seed,
        n_tables=args.n_tables,
        n_train=args.n_train,
        n_dev=args.n_dev,
    )
    synth.write_dataset(ds, args.out_dir)
    print(f"wrote {len(ds.train)} train / {len(ds.dev)} dev examples, "
          f"{len(ds.tables)} tables to {args.out_dir}")
    return EXIT_OK


def cmd_train(args) -> int:
    tables = _load_tables(args.tables)
    examples = _load_examples(args.examples)
    vocab = Vocabulary.from_file(args.vocab)
    torch.manual_seed(args.seed)
    config = ModelConfig(
        vocab_size=vocab.size,
        layer=args.layer,
        d_model=args.d_model,
        n_layers=args.n_layers,
        n_heads=args.n_heads,
        d_ff=args.d_ff,
        max_conds=args.max_conds,
        max_len=args.max_len,
        value_end_offset=args.value_end_offset,
        max_headers=args.max_headers,
    )
    model = SqlModel(config)
    cfg = OptimConfig(
        lr_encoder=args.lr_encoder,
        lr_head=args.lr_head,
        batch_size=args.batch_size,
        epochs=args.epochs,
    )
    log_f = open(args.metrics_log, "w", encoding="utf-8") if args.metrics_log else None
    try:
        def log_fn(record):
            line = json.dumps(record, sort_keys=True)
            print(line)
            if log_f:
                log_f.write(line + "\n")

        train(
            examples,
            tables,
            vocab,
            model,
            cfg,
            seed=args.seed,
            stop_at_lf=args.stop_at_lf,
            log_fn=log_fn,
        )
    finally:
        if log_f:
            log_f.close()
    save_model(args.checkpoint, model)
    print(f"checkpoint written to {args.checkpoint}")
    return EXIT_OK


def predict_one(
    model: SqlModel,
    example: Example,
    tables,
    vocab: Vocabulary,
    use_eg: bool,
    eg_cfg: EgConfig,
    decode_cfg: DecodeConfig,
) -> dict:
    table = tables[example.table_id]
    tok = tokenize_question(example.question, vocab)
    from .encoder import assemble_input

    inp = assemble_input(tok, table, vocab, max_len=model.config.max_len)
    with torch.no_grad():
        out = model(inp)
    if use_eg:
        scored, info = decode_eg(out, tok, example.question, table, eg_cfg, decode_cfg)
        eg_used, fallback = True, info.fallback
    else:
        scored = decode_greedy(out, tok, example.question, table, decode_cfg)
        eg_used, fallback = False, False
    return {
        "sketch": scored.sketch.to_dict(),
        "log_prob": scored.log_prob,
        "parts": scored.parts,
        "eg_used": eg_used,
        "fallback": fallback,
    }


def cmd_predict(args) -> int:
    tables = _load_tables(args.tables)
    examples = _load_examples(args.examples)
    vocab = Vocabulary.from_file(args.vocab)
    model = load_model(args.checkpoint)
    eg_cfg = EgConfig(
        n_agg_pairs=args.n_agg_pairs,
        n_wc=args.n_wc,
        n_ops=args.n_ops,
        n_spans=args.n_spans,
        n_wn=args.n_wn,
    )
    decode_cfg = DecodeConfig(max_conds=model.config.max_conds, max_span=args.max_span)
    with open(args.out, "w", encoding="utf-8") as f:
        for ex in examples:
            record = predict_one(
                model, ex, tables, vocab, args.eg == "on", eg_cfg, decode_cfg
            )
            f.write(json.dumps(record) + "\n")
    print(f"{len(examples)} predictions written to {args.out}")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    tables = _load_tables(args.tables)
    golds = _load_examples(args.gold)
    preds = []
    with open(args.pred, encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if not line:
                continue
            record = json.loads(line)
            preds.append(
                ScoredSketch(
                    sketch=SqlSketch.from_dict(record["sketch"]),
                    log_prob=record["log_prob"],
                    parts=record.get("parts", {}),
                )
            )
    report = evaluate(preds, golds, tables)
    print(report.to_json())
    if args.out:
        Path(args.out).write_text(report.to_json(), encoding="utf-8")
    if args.pr_csv:
        with open(args.pr_csv, "w", encoding="utf-8", newline="") as f:
            report.write_pr_csv(f)
    return EXIT_OK


def cmd_exec_sql(args) -> int:
    tables = _load_tables(args.tables)
    if args.table not in tables:
        raise DataError(f"unknown table id {args.table!r}")
    sketch = SqlSketch.from_dict(json.loads(args.sketch))
    result = execute(sketch, tables[args.table])
    print(json.dumps(result.to_dict()))
    return EXIT_OK


_COMMANDS = {
    "gen-data": cmd_gen_data,
    "train": cmd_train,
    "predict": cmd_predict,
    "evaluate": cmd_evaluate,
    "exec-sql": cmd_exec_sql,
}


def main(argv=None) -> int:
    parser = build_parser()
    args, _ = parser.parse_known_args(argv)
    if args.config:
        try:
            defaults = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except OSError as e:
            print(f"error: cannot read config: {e}", file=sys.stderr)
            return EXIT_IO
        for sub_action in parser._subparsers._group_actions:
            for sub_parser in sub_action.choices.values():
                known = {a.dest for a in sub_parser._actions}
                sub_parser.set_defaults(
                    **{k: v for k, v in defaults.items() if k in known}
                )
        args = parser.parse_args(argv)
    else:
        args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (DataError, ValueError, KeyError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as e:
        print(f"I/O error: {e}", file=sys.stderr)
        return EXIT_IO
    except (ShapeError, RuntimeError, AssertionError) as e:
        print(f"internal error: {e}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
