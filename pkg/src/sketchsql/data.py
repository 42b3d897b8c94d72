"""Domain types for tables, questions and SQL sketches, plus the
line-delimited JSON file format used for tables and examples.

The file format follows the public WikiSQL convention: one JSON object
per line, tables keyed by ``id`` with ``header``/``types``/``rows``,
examples carrying ``question``/``table_id``/``sql`` where ``sql`` is
``{"sel": int, "agg": int, "conds": [[col, op, "value"], ...]}``.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from enum import Enum, IntEnum
from typing import IO, Iterable, Iterator

MAX_CONDS = 4


class DataError(ValueError):
    """Base for data ingestion and validation failures."""


class ParseError(DataError):
    """Malformed record or missing field."""


class SchemaError(DataError):
    """Row/header arity mismatch or empty schema."""


class ColumnTypeError(DataError):
    """Value incompatible with its declared column type."""


class CodeError(DataError):
    """Enum code outside its legal range."""


class ColumnType(Enum):
    TEXT = "text"
    REAL = "real"


class AggOp(IntEnum):
    NONE = 0
    MAX = 1
    MIN = 2
    COUNT = 3
    SUM = 4
    AVG = 5


class CondOp(IntEnum):
    EQ = 0
    GT = 1
    LT = 2


COND_SYMBOL = {CondOp.EQ: "=", CondOp.GT: ">", CondOp.LT: "<"}

# Optional sign, optional comma thousands groups, optional decimals.
_NUMBER_RE = re.compile(r"[+-]?(\d{1,3}(,\d{3})+|\d+)(\.\d*)?|[+-]?\.\d+")


def parse_number(value: object) -> float | None:
    """Parse a cell or condition value as a finite decimal number.

    Accepts ints/floats directly and strings with an optional sign,
    decimals and comma thousands separators ("1,234.5").  Returns None
    when the value does not parse.
    """
    if isinstance(value, bool):
        return None
    if isinstance(value, (int, float)):
        return float(value)
    if not isinstance(value, str):
        return None
    s = value.strip()
    if not _NUMBER_RE.fullmatch(s):
        return None
    return float(s.replace(",", ""))


@dataclass(frozen=True)
class Table:
    id: str
    headers: tuple[tuple[str, ColumnType], ...]
    rows: tuple[tuple[object, ...], ...]

    def __post_init__(self) -> None:
        if len(self.headers) < 1:
            raise SchemaError(f"table {self.id!r}: at least one header required")
        n = len(self.headers)
        norm_rows = []
        for i, row in enumerate(self.rows):
            if len(row) != n:
                raise SchemaError(
                    f"table {self.id!r} row {i}: {len(row)} values for {n} headers"
                )
            cells = []
            for (name, ctype), cell in zip(self.headers, row):
                if ctype is ColumnType.REAL:
                    num = parse_number(cell)
                    if num is None:
                        raise ColumnTypeError(
                            f"table {self.id!r} row {i}, column {name!r}: "
                            f"{cell!r} is not a number"
                        )
                    cells.append(num)
                else:
                    cells.append(str(cell))
            norm_rows.append(tuple(cells))
        object.__setattr__(self, "rows", tuple(norm_rows))

    @property
    def n_columns(self) -> int:
        return len(self.headers)

    def column_type(self, col: int) -> ColumnType:
        return self.headers[col][1]

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "header": [name for name, _ in self.headers],
            "types": [ctype.value for _, ctype in self.headers],
            "rows": [list(row) for row in self.rows],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Table":
        try:
            header = d["header"]
            types = d["types"]
            rows = d["rows"]
            tid = d["id"]
        except KeyError as e:
            raise ParseError(f"table record missing field {e.args[0]!r}") from e
        if len(header) != len(types):
            raise SchemaError(
                f"table {tid!r}: {len(header)} headers but {len(types)} types"
            )
        try:
            ctypes = tuple(ColumnType(t) for t in types)
        except ValueError as e:
            raise ParseError(f"table {tid!r}: unknown column type ({e})") from e
        return cls(
            id=tid,
            headers=tuple(zip(header, ctypes)),
            rows=tuple(tuple(row) for row in rows),
        )


@dataclass(frozen=True)
class Condition:
    column: int
    op: CondOp
    value: str

    def to_list(self) -> list:
        return [self.column, int(self.op), self.value]


@dataclass(frozen=True)
class SqlSketch:
    """One WikiSQL query: SELECT agg(sel) WHERE cond AND cond ..."""

    sel: int
    agg: AggOp
    conds: tuple[Condition, ...] = ()

    def validate(self, table: Table, max_conds: int = MAX_CONDS) -> None:
        if not 0 <= self.sel < table.n_columns:
            raise SchemaError(f"sel {self.sel} out of range for table {table.id!r}")
        if len(self.conds) > max_conds:
            raise SchemaError(f"{len(self.conds)} conditions exceed max {max_conds}")
        for cond in self.conds:
            if not 0 <= cond.column < table.n_columns:
                raise SchemaError(
                    f"condition column {cond.column} out of range for {table.id!r}"
                )

    def to_dict(self) -> dict:
        return {
            "sel": self.sel,
            "agg": int(self.agg),
            "conds": [c.to_list() for c in self.conds],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SqlSketch":
        try:
            sel = d["sel"]
            agg = d["agg"]
            conds = d["conds"]
        except KeyError as e:
            raise ParseError(f"sql record missing field {e.args[0]!r}") from e
        if not isinstance(agg, int) or not 0 <= agg <= 5:
            raise CodeError(f"aggregation code {agg!r} outside 0..5")
        parsed = []
        for c in conds:
            if len(c) != 3:
                raise ParseError(f"condition {c!r} must be [col, op, value]")
            col, op, val = c
            if not isinstance(op, int) or not 0 <= op <= 2:
                raise CodeError(f"operator code {op!r} outside 0..2")
            parsed.append(Condition(column=col, op=CondOp(op), value=str(val)))
        return cls(sel=sel, agg=AggOp(agg), conds=tuple(parsed))


@dataclass(frozen=True)
class Example:
    question: str
    table_id: str
    gold: SqlSketch

    def to_dict(self) -> dict:
        return {
            "question": self.question,
            "table_id": self.table_id,
            "sql": self.gold.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Example":
        try:
            question = d["question"]
            table_id = d["table_id"]
            sql = d["sql"]
        except KeyError as e:
            raise ParseError(f"example record missing field {e.args[0]!r}") from e
        return cls(question=question, table_id=table_id, gold=SqlSketch.from_dict(sql))


def _iter_records(stream: IO[str] | Iterable[str]) -> Iterator[tuple[int, dict]]:
    for lineno, line in enumerate(stream, start=1):
        line = line.strip()
        if not line:
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as e:
            raise ParseError(f"line {lineno}: invalid JSON ({e.msg})") from e
        yield lineno, record


def parse_tables(stream: IO[str] | Iterable[str]) -> dict[str, Table]:
    """Parse line-delimited table records into a map id -> Table."""
    tables: dict[str, Table] = {}
    for lineno, record in _iter_records(stream):
        try:
            table = Table.from_dict(record)
        except DataError as e:
            raise type(e)(f"line {lineno}: {e}") from e
        tables[table.id] = table
    return tables


def parse_examples(stream: IO[str] | Iterable[str]) -> list[Example]:
    """Parse line-delimited example records."""
    examples = []
    for lineno, record in _iter_records(stream):
        try:
            examples.append(Example.from_dict(record))
        except DataError as e:
            raise type(e)(f"line {lineno}: {e}") from e
    return examples


def normalize_value(value: str) -> str:
    return value.strip().casefold()


def _cond_key(c: Condition) -> tuple:
    return (c.column, int(c.op), normalize_value(c.value))


def cond_multiset(conds: Iterable[Condition]) -> list[tuple]:
    return sorted(_cond_key(c) for c in conds)


def sketch_equal(a: SqlSketch, b: SqlSketch) -> bool:
    """Exact sketch match, ignoring where-condition order.

    Condition values compare case-insensitively after whitespace trimming.
    """
    return (
        a.sel == b.sel
        and a.agg == b.agg
        and cond_multiset(a.conds) == cond_multiset(b.conds)
    )
