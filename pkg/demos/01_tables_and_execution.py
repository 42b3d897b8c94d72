"""Tables, SQL sketches and the embedded executor.

Every query in this library is a *sketch*: a select column, one of six
aggregation operators, and up to four (column, op, value) conditions
joined by AND.  This demo builds a small table by hand, runs a few
sketches against it, and shows the three result kinds (rows, scalar,
empty) plus the tolerant result comparison used for execution accuracy.

Run:  python3 demos/01_tables_and_execution.py
"""

from sketchsql import (
    AggOp,
    ColumnType,
    CondOp,
    Condition,
    ExecResult,
    SqlSketch,
    Table,
    execute,
    results_equal,
)

table = Table(
    id="players",
    headers=(("Player", ColumnType.TEXT), ("Score", ColumnType.REAL)),
    rows=(("ann", 3), ("bob", 5), ("ann", 2)),
)
print(f"table {table.id!r}: {table.n_columns} columns, {len(table.rows)} rows")

queries = [
    ("SELECT Player WHERE Score > 4",
     SqlSketch(0, AggOp.NONE, (Condition(1, CondOp.GT, "4"),))),
    ("SELECT COUNT(Player) WHERE Player = 'ann'",
     SqlSketch(0, AggOp.COUNT, (Condition(0, CondOp.EQ, "ann"),))),
    ("SELECT MAX(Score)",
     SqlSketch(1, AggOp.MAX)),
    ("SELECT AVG(Score) WHERE Player = 'ann'",
     SqlSketch(1, AggOp.AVG, (Condition(0, CondOp.EQ, "ann"),))),
    # numeric aggregation over a text column: defined to be empty, not an error
    ("SELECT SUM(Player)",
     SqlSketch(0, AggOp.SUM)),
    # no matching rows under a numeric aggregate: also empty
    ("SELECT MIN(Score) WHERE Player = 'zed'",
     SqlSketch(1, AggOp.MIN, (Condition(0, CondOp.EQ, "zed"),))),
    # ...but COUNT of nothing is a real answer, 0
    ("SELECT COUNT(Player) WHERE Player = 'zed'",
     SqlSketch(0, AggOp.COUNT, (Condition(0, CondOp.EQ, "zed"),))),
]

for sql, sketch in queries:
    result = execute(sketch, table)
    print(f"  {sql:48s} -> {result.to_dict()}")

# Result comparison is tolerant: scalars match to relative 1e-6, row
# results are compared as case-insensitive multisets.
print()
print("results_equal(2.0, 2.0000000001) ->",
      results_equal(ExecResult.of_scalar(2.0), ExecResult.of_scalar(2.0000000001)))
print("results_equal([a, b], [B, a])    ->",
      results_equal(ExecResult.of_rows(["a", "b"]), ExecResult.of_rows(["B", "a"])))
print("results_equal(scalar 0, empty)   ->",
      results_equal(ExecResult.of_scalar(0), ExecResult.empty()))
