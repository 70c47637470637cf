"""Embedded tabular engine over CSV-backed datasets.

Stands in for external data platforms: loads typed tables from CSV plus a
schema sidecar and executes validated queries with pinned, deterministic
semantics:

    1. form the FROM/JOIN row stream (inner equi-join, left-then-right
       input order preserved)
    2. apply WHERE
    3. group by the GROUP BY keys in first-appearance order
    4. compute aggregates (count counts rows; sum/min/max exact; avg is
       half-up to two places, ties away from zero)
    5. ORDER BY as a stable sort: numeric by value, text bytewise on
       UTF-8, dates lexically, false < true
    6. clamp to the effective limit, flagging truncation

The data model has no NULLs, so aggregation of an empty row stream yields
an empty result rather than inventing a placeholder value.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from decimal import Decimal, localcontext
from pathlib import Path
from typing import Callable, Mapping

from .catalog import ColumnDef
from .model import canonical_json, parse_typed_value, round_half_up_2, sha256_hex
from .sqlguard import Aggregate, BooleanOp, ColumnRef, Comparison, Predicate, ValidatedQuery


class DatasetError(Exception):
    pass


class SchemaMismatch(DatasetError):
    def __init__(self, row: int, col: int, message: str):
        super().__init__(f"schema mismatch at row {row}, column {col}: {message}")
        self.row = row
        self.col = col


class ValueParseError(DatasetError):
    def __init__(self, row: int, col: int, message: str):
        super().__init__(f"bad value at row {row}, column {col}: {message}")
        self.row = row
        self.col = col


@dataclass(frozen=True)
class Table:
    name: str
    columns: tuple[ColumnDef, ...]
    rows: tuple[tuple, ...]

    def column_index(self, name: str) -> int:
        for i, col in enumerate(self.columns):
            if col.name == name:
                return i
        raise KeyError(name)


def load_schema(schema_path: Path) -> tuple[ColumnDef, ...]:
    """Sidecar format: one "name:value_type:classification" line per column,
    in CSV header order. Blank lines and #-comments are ignored."""
    columns = []
    for lineno, raw in enumerate(schema_path.read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split(":")
        if len(parts) != 3:
            raise SchemaMismatch(lineno, 0, f"expected name:value_type:classification, got {raw!r}")
        name, value_type, classification = (p.strip() for p in parts)
        columns.append(ColumnDef(name=name, value_type=value_type, classification=classification))
    if not columns:
        raise SchemaMismatch(0, 0, "schema file lists no columns")
    return tuple(columns)


def load_dataset(csv_path: Path | str, schema_path: Path | str) -> Table:
    """Load a typed table; the CSV header must equal the schema column order.

    The file must be UTF-8 (a leading BOM is tolerated); undecodable bytes
    and structurally broken CSV surface as dataset errors, never as raw
    codec or csv-module exceptions.
    """
    csv_path = Path(csv_path)
    columns = load_schema(Path(schema_path))
    with open(csv_path, newline="", encoding="utf-8-sig") as fh:
        reader = csv.reader(fh)
        try:
            try:
                header = next(reader)
            except StopIteration:
                raise SchemaMismatch(0, 0, "CSV has no header row") from None
            expected = [c.name for c in columns]
            if header != expected:
                raise SchemaMismatch(0, 0, f"header {header!r} != schema columns {expected!r}")
            rows = []
            for row_num, raw in enumerate(reader, start=1):
                if len(raw) != len(columns):
                    raise SchemaMismatch(row_num, len(raw), f"expected {len(columns)} fields")
                values = []
                for col_num, (cell, col) in enumerate(zip(raw, columns), start=1):
                    try:
                        values.append(parse_typed_value(cell, col.value_type))
                    except ValueError as exc:
                        raise ValueParseError(row_num, col_num, str(exc)) from exc
                rows.append(tuple(values))
        except UnicodeDecodeError as exc:
            raise ValueParseError(reader.line_num, 0, f"not valid UTF-8: {exc}") from exc
        except csv.Error as exc:
            raise ValueParseError(reader.line_num, 0, f"malformed CSV: {exc}") from exc
    return Table(name=csv_path.stem, columns=columns, rows=tuple(rows))


@dataclass(frozen=True)
class ResultSet:
    columns: tuple[str, ...]
    rows: tuple[tuple, ...]
    row_count: int
    truncated: bool

    def canonical(self) -> str:
        return canonical_json(
            {
                "columns": list(self.columns),
                "rows": [list(r) for r in self.rows],
                "row_count": self.row_count,
                "truncated": self.truncated,
            }
        )

    def digest(self) -> str:
        return sha256_hex(self.canonical())

    def to_json(self) -> dict:
        from .model import jsonable

        return {
            "columns": list(self.columns),
            "rows": [jsonable(list(r)) for r in self.rows],
            "row_count": self.row_count,
            "truncated": self.truncated,
        }


class _Frame:
    """Column access over the combined FROM/JOIN row, mirroring the
    validator's resolution rules; a ValidatedQuery can never miss here."""

    def __init__(self, tables: list[tuple[str, Table]], recorder: Callable | None):
        self.slots: dict[tuple[str, str], tuple[int, int]] = {}
        self.by_name: dict[str, list[tuple[int, int, str]]] = {}
        self.recorder = recorder
        for t_idx, (name, table) in enumerate(tables):
            for c_idx, col in enumerate(table.columns):
                self.slots[(name, col.name)] = (t_idx, c_idx)
                self.by_name.setdefault(col.name, []).append((t_idx, c_idx, name))

    def value(self, row: tuple[tuple, ...], ref: ColumnRef):
        if ref.table is not None:
            t_idx, c_idx = self.slots[(ref.table, ref.name)]
            table_name = ref.table
        else:
            t_idx, c_idx, table_name = self.by_name[ref.name][0]
        if self.recorder is not None:
            self.recorder(table_name, ref.name)
        return row[t_idx][c_idx]


_CMP = {
    "<": lambda a, b: a < b,
    "<=": lambda a, b: a <= b,
    "=": lambda a, b: a == b,
    "!=": lambda a, b: a != b,
    ">=": lambda a, b: a >= b,
    ">": lambda a, b: a > b,
}


def _eval_predicate(pred: Predicate, frame: _Frame, row) -> bool:
    if isinstance(pred, Comparison):
        return _CMP[pred.op](frame.value(row, pred.column), pred.value.value)
    if pred.op == "and":
        return all(_eval_predicate(p, frame, row) for p in pred.operands)
    return any(_eval_predicate(p, frame, row) for p in pred.operands)


def _aggregate(agg: Aggregate, frame: _Frame, rows: list) -> object:
    if agg.arg is None:
        return len(rows)
    values = [frame.value(row, agg.arg) for row in rows]
    if agg.fn == "count":
        return len(values)
    if agg.fn == "sum":
        if values and isinstance(values[0], Decimal):
            total = Decimal("0.00")
            for v in values:
                total += v
            return total
        return sum(values)
    if agg.fn == "avg":
        with localcontext() as ctx:
            ctx.prec = 50
            total = Decimal(0)
            for v in values:
                total += Decimal(v) if not isinstance(v, Decimal) else v
            return round_half_up_2(total / len(values))
    if agg.fn == "min":
        return min(values)
    if agg.fn == "max":
        return max(values)
    raise ValueError(f"unknown aggregate {agg.fn!r}")


def execute(vq: ValidatedQuery, tables: Mapping[str, Table],
            read_recorder: Callable[[str, str], None] | None = None) -> ResultSet:
    """Run a validated query; never raises for a ValidatedQuery whose tables
    are present (validation soundness).

    read_recorder, when given, is invoked as (table, column) for every cell
    access; tests use it to prove referenced_columns is complete.
    """
    ast = vq.ast
    scope: list[tuple[str, Table]] = [(ast.from_table.name, tables[ast.from_table.name])]
    if ast.join:
        scope.append((ast.join.table.name, tables[ast.join.table.name]))
    frame = _Frame(scope, read_recorder)

    # 1. row stream
    if ast.join:
        left_rows = scope[0][1].rows
        right_rows = scope[1][1].rows
        stream = []
        for lrow in left_rows:
            for rrow in right_rows:
                combined = (lrow, rrow)
                if frame.value(combined, ast.join.left) == frame.value(combined, ast.join.right):
                    stream.append(combined)
    else:
        stream = [(row,) for row in scope[0][1].rows]

    # 2. filter
    if ast.where:
        stream = [row for row in stream if _eval_predicate(ast.where, frame, row)]

    # 3+4. group and project
    output: list[tuple]
    carriers: list  # per output row: a source row usable for ORDER BY columns
    if ast.is_aggregated():
        groups: dict[tuple, list] = {}
        for row in stream:
            key = tuple(frame.value(row, ref) for ref in ast.group_by)
            groups.setdefault(key, []).append(row)
        output = []
        carriers = []
        for rows in groups.values():
            first = rows[0]
            out_row = []
            for item in ast.select_items:
                if isinstance(item.expr, ColumnRef):
                    out_row.append(frame.value(first, item.expr))
                else:
                    out_row.append(_aggregate(item.expr, frame, rows))
            output.append(tuple(out_row))
            carriers.append(first)
    else:
        output = []
        carriers = []
        for row in stream:
            output.append(tuple(frame.value(row, item.expr) for item in ast.select_items))
            carriers.append(row)

    # 5. stable sort, applied last key first
    if ast.order_by:
        alias_slots = {item.alias: i for i, item in enumerate(ast.select_items) if item.alias}
        paired = list(zip(output, carriers))
        for item in reversed(ast.order_by):
            if isinstance(item.expr, str):
                idx = alias_slots[item.expr]
                keyfn = lambda pair, i=idx: pair[0][i]
            else:
                keyfn = lambda pair, ref=item.expr: frame.value(pair[1], ref)
            paired.sort(key=keyfn, reverse=(item.direction == "desc"))
        output = [row for row, _ in paired]

    # 6. limit
    truncated = len(output) > vq.effective_limit
    output = output[: vq.effective_limit]
    return ResultSet(
        columns=vq.ast.output_names(),
        rows=tuple(output),
        row_count=len(output),
        truncated=truncated,
    )
