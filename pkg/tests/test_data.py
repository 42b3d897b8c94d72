import json

import pytest
from hypothesis import given, strategies as st

from sketchsql.data import (
    AggOp,
    CodeError,
    ColumnType,
    ColumnTypeError,
    CondOp,
    Condition,
    Example,
    ParseError,
    SchemaError,
    SqlSketch,
    Table,
    parse_examples,
    parse_tables,
    parse_number,
    sketch_equal,
)


def test_parse_tables_basic():
    line = json.dumps(
        {
            "id": "t1",
            "header": ["Player", "Score"],
            "types": ["text", "real"],
            "rows": [["ann", 3], ["bob", 5], ["ann", 2]],
        }
    )
    tables = parse_tables([line])
    t = tables["t1"]
    assert t.n_columns == 2
    assert len(t.rows) == 3
    assert t.rows[0] == ("ann", 3.0)


def test_parse_tables_empty_rows_legal():
    line = '{"id":"t0","header":["A"],"types":["text"],"rows":[]}'
    assert parse_tables([line])["t0"].rows == ()


def test_parse_tables_bad_real_value():
    line = '{"id":"tX","header":["A"],"types":["real"],"rows":[["abc"]]}'
    with pytest.raises(ColumnTypeError):
        parse_tables([line])


def test_parse_tables_arity_mismatch():
    line = '{"id":"tY","header":["A","B"],"types":["text","text"],"rows":[["x"]]}'
    with pytest.raises(SchemaError):
        parse_tables([line])


def test_parse_tables_malformed_line_reports_lineno():
    with pytest.raises(ParseError, match="line 2"):
        parse_tables(['{"id":"a","header":["A"],"types":["text"],"rows":[]}', "{oops"])


def test_parse_examples_basic():
    line = json.dumps(
        {
            "question": "how many players scored more than 4",
            "table_id": "t1",
            "sql": {"sel": 0, "agg": 3, "conds": [[1, 1, "4"]]},
        }
    )
    (ex,) = parse_examples([line])
    assert ex.gold == SqlSketch(
        sel=0, agg=AggOp.COUNT, conds=(Condition(1, CondOp.GT, "4"),)
    )


def test_parse_examples_empty_conds():
    line = '{"question":"q","table_id":"t","sql":{"sel":0,"agg":0,"conds":[]}}'
    (ex,) = parse_examples([line])
    assert ex.gold.conds == ()


def test_parse_examples_bad_agg_code():
    line = '{"question":"q","table_id":"t","sql":{"sel":0,"agg":7,"conds":[]}}'
    with pytest.raises(CodeError):
        parse_examples([line])


def test_parse_examples_missing_field():
    with pytest.raises(ParseError):
        parse_examples(['{"question":"q","sql":{"sel":0,"agg":0,"conds":[]}}'])


def test_parse_number():
    assert parse_number("1,234.5") == 1234.5
    assert parse_number("-3") == -3.0
    assert parse_number(" 4 ") == 4.0
    assert parse_number("abc") is None
    assert parse_number("1,23") is None


def test_sketch_equal_order_and_case_insensitive():
    a = SqlSketch(0, AggOp.COUNT, (Condition(1, CondOp.GT, "4"), Condition(0, CondOp.EQ, "ann")))
    b = SqlSketch(0, AggOp.COUNT, (Condition(0, CondOp.EQ, "Ann"), Condition(1, CondOp.GT, "4")))
    assert sketch_equal(a, b)


def test_sketch_equal_empty_and_agg_mismatch():
    assert sketch_equal(SqlSketch(0, AggOp.COUNT), SqlSketch(0, AggOp.COUNT))
    a = SqlSketch(0, AggOp.COUNT, (Condition(1, CondOp.GT, "4"),))
    b = SqlSketch(0, AggOp.SUM, (Condition(1, CondOp.GT, "4"),))
    assert not sketch_equal(a, b)


conditions = st.builds(
    Condition,
    column=st.integers(0, 5),
    op=st.sampled_from(list(CondOp)),
    value=st.text(min_size=1, max_size=8),
)
sketches = st.builds(
    SqlSketch,
    sel=st.integers(0, 5),
    agg=st.sampled_from(list(AggOp)),
    conds=st.lists(conditions, max_size=4).map(tuple),
)


@given(sketches)
def test_sketch_equal_reflexive(a):
    assert sketch_equal(a, a)


@given(sketches, sketches)
def test_sketch_equal_symmetric(a, b):
    assert sketch_equal(a, b) == sketch_equal(b, a)


@given(sketches, st.randoms())
def test_sketch_equal_permutation_invariant(a, rnd):
    conds = list(a.conds)
    rnd.shuffle(conds)
    assert sketch_equal(a, SqlSketch(a.sel, a.agg, tuple(conds)))


@given(sketches)
def test_sketch_roundtrip(a):
    assert SqlSketch.from_dict(a.to_dict()) == a


def test_table_roundtrip(f1_table):
    assert Table.from_dict(f1_table.to_dict()) == f1_table


def test_example_roundtrip():
    ex = Example("q", "t1", SqlSketch(0, AggOp.NONE, (Condition(0, CondOp.EQ, "x"),)))
    assert Example.from_dict(ex.to_dict()) == ex
