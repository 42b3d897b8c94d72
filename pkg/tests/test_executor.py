"""Executor tests, including an independent naive scan oracle."""

import numpy as np
import pytest

from sketchsql.data import AggOp, ColumnType, CondOp, Condition, SqlSketch, Table
from sketchsql.executor import ExecResult, execute, results_equal, row_matches


def sketch(sel, agg, conds=()):
    return SqlSketch(sel=sel, agg=agg, conds=tuple(Condition(*c) for c in conds))


# --- independent oracle: straight-line per-row scan, no shared helpers ---

def oracle_execute(sk: SqlSketch, table: Table) -> ExecResult:
    def to_num(v):
        try:
            return float(str(v).replace(",", ""))
        except ValueError:
            return None

    matched = []
    for row in table.rows:
        ok = True
        for cond in sk.conds:
            cell = row[cond.column]
            if cond.op is CondOp.EQ:
                if table.column_type(cond.column) is ColumnType.REAL:
                    t = to_num(cond.value)
                    ok = t is not None and abs(float(cell) - t) <= 1e-6 * max(
                        1.0, abs(t)
                    )
                else:
                    ok = str(cell).strip().lower() == cond.value.strip().lower()
            else:
                c, t = to_num(cell), to_num(cond.value)
                if c is None or t is None:
                    ok = False
                elif cond.op is CondOp.GT:
                    ok = c > t
                else:
                    ok = c < t
            if not ok:
                break
        if ok:
            matched.append(row)
    if sk.agg is AggOp.COUNT:
        return ExecResult.of_scalar(len(matched))
    vals = [r[sk.sel] for r in matched]
    if sk.agg is AggOp.NONE:
        return ExecResult.of_rows(vals) if vals else ExecResult.empty()
    if table.column_type(sk.sel) is not ColumnType.REAL or not vals:
        return ExecResult.empty()
    nums = [float(v) for v in vals]
    if sk.agg is AggOp.MAX:
        return ExecResult.of_scalar(max(nums))
    if sk.agg is AggOp.MIN:
        return ExecResult.of_scalar(min(nums))
    if sk.agg is AggOp.SUM:
        return ExecResult.of_scalar(sum(nums))
    return ExecResult.of_scalar(sum(nums) / len(nums))


def random_table(rng, tid):
    n_cols = int(rng.integers(1, 9))
    types = [
        ColumnType.TEXT if rng.random() < 0.5 else ColumnType.REAL
        for _ in range(n_cols)
    ]
    headers = tuple((f"c{i}", t) for i, t in enumerate(types))
    n_rows = int(rng.integers(0, 21))
    words = ["ann", "bob", "cara", "dan", ""]
    rows = []
    for _ in range(n_rows):
        row = []
        for t in types:
            if t is ColumnType.TEXT:
                row.append(str(rng.choice(words)))
            else:
                row.append(float(rng.integers(-5, 15)))
        rows.append(tuple(row))
    return Table(id=tid, headers=headers, rows=tuple(rows))


def random_sketch(rng, table):
    conds = []
    for _ in range(int(rng.integers(0, 4))):
        col = int(rng.integers(0, table.n_columns))
        op = CondOp(int(rng.integers(0, 3)))
        value = str(
            rng.choice(["ann", "bob", "3", "7", "-2", "x", "", "1,000"])
        )
        conds.append(Condition(col, op, value))
    return SqlSketch(
        sel=int(rng.integers(0, table.n_columns)),
        agg=AggOp(int(rng.integers(0, 6))),
        conds=tuple(conds),
    )


def test_row_matches_cases(f1_table):
    assert row_matches(("ann", 3), Condition(0, CondOp.EQ, "Ann"), f1_table)
    assert not row_matches(("ann", 3), Condition(1, CondOp.GT, "4"), f1_table)
    assert row_matches(("bob", 5), Condition(1, CondOp.GT, "4"), f1_table)
    assert not row_matches(("ann", 3), Condition(0, CondOp.GT, "4"), f1_table)


def test_execute_hand_cases(f1_table):
    assert execute(sketch(0, AggOp.COUNT, [(0, CondOp.EQ, "ann")]), f1_table) == (
        ExecResult.of_scalar(2)
    )
    assert execute(sketch(1, AggOp.MAX), f1_table) == ExecResult.of_scalar(5)
    assert execute(
        sketch(1, AggOp.SUM, [(0, CondOp.EQ, "zed")]), f1_table
    ).is_empty
    r = execute(sketch(0, AggOp.NONE, [(1, CondOp.GT, "4")]), f1_table)
    assert r == ExecResult.of_rows(["bob"])
    assert execute(sketch(1, AggOp.SUM), f1_table) == ExecResult.of_scalar(10)
    assert execute(sketch(1, AggOp.AVG), f1_table) == ExecResult.of_scalar(10 / 3)
    assert execute(sketch(1, AggOp.MIN), f1_table) == ExecResult.of_scalar(2)
    # numeric agg over a text column yields Empty, not an error
    assert execute(sketch(0, AggOp.SUM), f1_table).is_empty
    # count over no survivors is Scalar 0, not Empty
    assert execute(
        sketch(0, AggOp.COUNT, [(0, CondOp.EQ, "zed")]), f1_table
    ) == ExecResult.of_scalar(0)


def test_results_equal_rules():
    assert results_equal(ExecResult.of_scalar(2.0), ExecResult.of_scalar(2.0000000001))
    assert results_equal(ExecResult.of_rows(["a", "b"]), ExecResult.of_rows(["B", "a"]))
    assert not results_equal(ExecResult.of_scalar(0), ExecResult.empty())
    assert not results_equal(ExecResult.of_rows(["a"]), ExecResult.of_rows(["a", "a"]))
    assert results_equal(ExecResult.of_rows([3.0, "x"]), ExecResult.of_rows(["X", 3.0]))


def test_condition_order_irrelevant(f1_table):
    a = sketch(1, AggOp.SUM, [(0, CondOp.EQ, "ann"), (1, CondOp.GT, "1")])
    b = sketch(1, AggOp.SUM, [(1, CondOp.GT, "1"), (0, CondOp.EQ, "ann")])
    assert results_equal(execute(a, f1_table), execute(b, f1_table))


def test_adding_condition_monotone(f1_table):
    base = sketch(0, AggOp.COUNT)
    narrowed = sketch(0, AggOp.COUNT, [(0, CondOp.EQ, "ann")])
    assert execute(narrowed, f1_table).scalar <= execute(base, f1_table).scalar


def test_count_matches_none_rows():
    rng = np.random.default_rng(3)
    for i in range(50):
        table = random_table(rng, f"t{i}")
        sk = random_sketch(rng, table)
        count = execute(SqlSketch(sk.sel, AggOp.COUNT, sk.conds), table)
        rows = execute(SqlSketch(sk.sel, AggOp.NONE, sk.conds), table)
        n_rows = len(rows.rows) if rows.kind == "rows" else 0
        assert count.scalar == n_rows


def test_execute_agrees_with_oracle_randomized():
    rng = np.random.default_rng(11)
    for i in range(500):
        table = random_table(rng, f"t{i}")
        sk = random_sketch(rng, table)
        assert results_equal(execute(sk, table), oracle_execute(sk, table))
