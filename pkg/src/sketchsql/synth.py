"""Templated synthetic dataset generator: small random tables plus
questions whose wording determines the gold sketch, so the whole
pipeline can be trained and evaluated without external downloads.
Templates cover all six aggregations, all three operators and 0..4
conditions; every condition value appears verbatim in the question.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .data import AggOp, ColumnType, CondOp, Condition, Example, SqlSketch, Table
from .tokenizer import Vocabulary

AGG_WORDS = {
    AggOp.NONE: "list",
    AggOp.MAX: "largest",
    AggOp.MIN: "smallest",
    AggOp.COUNT: "count",
    AggOp.SUM: "total",
    AggOp.AVG: "average",
}
OP_WORDS = {CondOp.EQ: "equals", CondOp.GT: "above", CondOp.LT: "below"}

COLUMN_NAMES = [
    "alpha", "bravo", "charlie", "delta", "echo", "foxtrot",
    "golf", "hotel", "india", "juliet", "kilo", "lima",
]
TEXT_VALUES = ["ann", "bob", "cara", "dan", "eve", "finn", "gail", "hugo"]
MAX_NUMBER = 61

NUMERIC_AGGS = (AggOp.MAX, AggOp.MIN, AggOp.SUM, AggOp.AVG)


@dataclass
class SynthDataset:
    tables: dict[str, Table]
    train: list[Example]
    dev: list[Example]
    vocab: Vocabulary


def _make_table(rng: np.random.Generator, idx: int) -> Table:
    n_cols = 4
    names = list(rng.choice(COLUMN_NAMES, size=n_cols, replace=False))
    n_text = int(rng.integers(1, 3))
    types = [ColumnType.TEXT] * n_text + [ColumnType.REAL] * (n_cols - n_text)
    rng.shuffle(types)
    n_rows = int(rng.integers(6, 11))
    rows = []
    for _ in range(n_rows):
        row = []
        for ctype in types:
            if ctype is ColumnType.TEXT:
                row.append(str(rng.choice(TEXT_VALUES)))
            else:
                row.append(float(rng.integers(2, MAX_NUMBER - 1)))
        rows.append(tuple(row))
    return Table(
        id=f"synth{idx}", headers=tuple(zip(names, types)), rows=tuple(rows)
    )


def _pick_cond(
    rng: np.random.Generator, table: Table, col: int, row: tuple
) -> Condition:
    """Condition on ``col`` that the anchor ``row`` satisfies, so that a
    full conjunction of conditions always keeps at least that row (gold
    queries therefore never execute to an empty result)."""
    if table.column_type(col) is ColumnType.TEXT:
        return Condition(col, CondOp.EQ, str(row[col]))
    anchor = int(row[col])
    op = CondOp(int(rng.integers(0, 3)))
    if op is CondOp.EQ:
        value = anchor
    elif op is CondOp.GT:
        value = anchor - 1  # at least the anchor row matches
    else:
        value = anchor + 1
    return Condition(col, op, str(value))


def _make_example(rng: np.random.Generator, table: Table) -> Example:
    n_conds = int(rng.choice(5, p=[0.15, 0.35, 0.25, 0.15, 0.10]))
    agg = AggOp(int(rng.integers(0, len(AggOp))))
    real_cols = [
        i for i in range(table.n_columns)
        if table.column_type(i) is ColumnType.REAL
    ]
    if agg in NUMERIC_AGGS:
        sel = int(rng.choice(real_cols))
    else:
        sel = int(rng.integers(0, table.n_columns))
    cond_cols = rng.choice(table.n_columns, size=n_conds, replace=False)
    anchor = table.rows[int(rng.integers(0, len(table.rows)))]
    conds = []
    used_values: set[str] = set()
    for col in sorted(int(c) for c in cond_cols):
        for _ in range(10):
            cond = _pick_cond(rng, table, col, anchor)
            if cond.value not in used_values:
                break
        used_values.add(cond.value)
        conds.append(cond)
    words = [AGG_WORDS[agg], table.headers[sel][0]]
    for i, cond in enumerate(conds):
        words.append("where" if i == 0 else "and")
        words.extend([table.headers[cond.column][0], OP_WORDS[cond.op], cond.value])
    return Example(
        question=" ".join(words),
        table_id=table.id,
        gold=SqlSketch(sel=sel, agg=agg, conds=tuple(conds)),
    )


def build_vocab() -> Vocabulary:
    tokens = (
        sorted(AGG_WORDS.values())
        + sorted(OP_WORDS.values())
        + ["where", "and"]
        + COLUMN_NAMES
        + TEXT_VALUES
        + [str(i) for i in range(MAX_NUMBER + 1)]
    )
    return Vocabulary.from_tokens(tokens)


def generate(
    seed: int = 0, n_tables: int = 10, n_train: int = 200, n_dev: int = 60
) -> SynthDataset:
    rng = np.random.default_rng(seed)
    tables = {}
    table_list = []
    for i in range(n_tables):
        t = _make_table(rng, i)
        tables[t.id] = t
        table_list.append(t)
    train = [
        _make_example(rng, table_list[int(rng.integers(0, n_tables))])
        for _ in range(n_train)
    ]
    dev = [
        _make_example(rng, table_list[int(rng.integers(0, n_tables))])
        for _ in range(n_dev)
    ]
    return SynthDataset(tables=tables, train=train, dev=dev, vocab=build_vocab())


def write_jsonl(path: str | Path, records: list[dict]) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for record in records:
            f.write(json.dumps(record) + "\n")


def write_dataset(ds: SynthDataset, out_dir: str | Path) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_jsonl(out / "tables.jsonl", [t.to_dict() for t in ds.tables.values()])
    write_jsonl(out / "train.jsonl", [e.to_dict() for e in ds.train])
    write_jsonl(out / "dev.jsonl", [e.to_dict() for e in ds.dev])
    ds.vocab.save(out / "vocab.txt")
