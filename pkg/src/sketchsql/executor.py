"""In-memory execution of the supported query subset:
SELECT agg(col) with a conjunction of (col, op, value) conditions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .data import (
    AggOp,
    ColumnType,
    CondOp,
    Condition,
    SqlSketch,
    Table,
    normalize_value,
    parse_number,
)

_REL_TOL = 1e-6
_ABS_TOL = 1e-9


@dataclass(frozen=True)
class ExecResult:
    """Tagged result: Rows for agg=NONE, Scalar for numeric aggs, or Empty."""

    kind: str  # "rows" | "scalar" | "empty"
    rows: tuple = ()
    scalar: float = 0.0

    @classmethod
    def of_rows(cls, values) -> "ExecResult":
        return cls(kind="rows", rows=tuple(values))

    @classmethod
    def of_scalar(cls, value: float) -> "ExecResult":
        return cls(kind="scalar", scalar=float(value))

    @classmethod
    def empty(cls) -> "ExecResult":
        return cls(kind="empty")

    @property
    def is_empty(self) -> bool:
        return self.kind == "empty"

    def to_dict(self) -> dict:
        if self.kind == "rows":
            return {"rows": list(self.rows)}
        if self.kind == "scalar":
            return {"scalar": self.scalar}
        return {"empty": True}


def row_matches(row: tuple, cond: Condition, table: Table) -> bool:
    """Whether a row satisfies one condition.

    '=' compares case-insensitively on text columns and numerically on
    real columns; '>'/'<' require both sides to parse as numbers and are
    false otherwise.
    """
    cell = row[cond.column]
    if cond.op is CondOp.EQ:
        if table.column_type(cond.column) is ColumnType.REAL:
            target = parse_number(cond.value)
            if target is None:
                return False
            return math.isclose(float(cell), target, rel_tol=_REL_TOL, abs_tol=_ABS_TOL)
        return normalize_value(str(cell)) == normalize_value(cond.value)
    cell_num = parse_number(cell)
    target = parse_number(cond.value)
    if cell_num is None or target is None:
        return False
    return cell_num > target if cond.op is CondOp.GT else cell_num < target


_NUMERIC_AGGS = (AggOp.MAX, AggOp.MIN, AggOp.SUM, AggOp.AVG)


def execute(sketch: SqlSketch, table: Table) -> ExecResult:
    """Run a sketch on a table.

    Type-incompatible aggregation (numeric agg over a text column) and
    aggregation over zero matching rows both yield Empty, not an error.
    """
    sketch.validate(table, max_conds=max(len(sketch.conds), 4))
    survivors = [
        row
        for row in table.rows
        if all(row_matches(row, cond, table) for cond in sketch.conds)
    ]
    if sketch.agg is AggOp.COUNT:
        return ExecResult.of_scalar(len(survivors))
    values = [row[sketch.sel] for row in survivors]
    if sketch.agg is AggOp.NONE:
        return ExecResult.of_rows(values) if values else ExecResult.empty()
    if table.column_type(sketch.sel) is not ColumnType.REAL or not values:
        return ExecResult.empty()
    nums = [float(v) for v in values]
    if sketch.agg is AggOp.MAX:
        return ExecResult.of_scalar(max(nums))
    if sketch.agg is AggOp.MIN:
        return ExecResult.of_scalar(min(nums))
    if sketch.agg is AggOp.SUM:
        return ExecResult.of_scalar(sum(nums))
    return ExecResult.of_scalar(sum(nums) / len(nums))


def _value_sort_key(v) -> tuple:
    num = parse_number(v)
    if num is not None:
        return (0, num, "")
    return (1, 0.0, normalize_value(str(v)))


def _values_equal(a, b) -> bool:
    na, nb = parse_number(a), parse_number(b)
    if na is not None and nb is not None:
        return math.isclose(na, nb, rel_tol=_REL_TOL, abs_tol=_ABS_TOL)
    if (na is None) != (nb is None):
        return False
    return normalize_value(str(a)) == normalize_value(str(b))


def results_equal(a: ExecResult, b: ExecResult) -> bool:
    """Compare results: scalars within relative tolerance, row sets as
    multisets with case-insensitive text and tolerant numbers."""
    if a.kind != b.kind:
        return False
    if a.kind == "empty":
        return True
    if a.kind == "scalar":
        return math.isclose(a.scalar, b.scalar, rel_tol=_REL_TOL, abs_tol=_ABS_TOL)
    if len(a.rows) != len(b.rows):
        return False
    sa = sorted(a.rows, key=_value_sort_key)
    sb = sorted(b.rows, key=_value_sort_key)
    return all(_values_equal(x, y) for x, y in zip(sa, sb))
