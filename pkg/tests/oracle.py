"""Independent brute-force query oracle.

Implements the documented query semantics from scratch - nested loops,
Fraction arithmetic, a comparator-based sort - sharing only the AST data
classes and the canonical JSON helper with the engine, never its
execution code. Expected values for engine tests are computed here, not
typed by hand.
"""

from __future__ import annotations

from fractions import Fraction
from functools import cmp_to_key
from decimal import Decimal

from dataproduct_gateway.model import canonical_json
from dataproduct_gateway.sqlguard import Aggregate, BooleanOp, ColumnRef, Comparison, QueryAst


def _resolve(ref: ColumnRef, tables: dict) -> tuple[str, int]:
    if ref.table is not None:
        table = tables[ref.table]
        for i, col in enumerate(table.columns):
            if col.name == ref.name:
                return ref.table, i
        raise AssertionError(f"oracle: no column {ref}")
    hits = []
    for name, table in tables.items():
        for i, col in enumerate(table.columns):
            if col.name == ref.name:
                hits.append((name, i))
    assert len(hits) == 1, f"oracle: ambiguous or missing {ref}"
    return hits[0]


def _value(env: dict, ref: ColumnRef, tables: dict):
    return env[_resolve(ref, tables)]


def _eval_where(pred, env, tables) -> bool:
    if isinstance(pred, BooleanOp):
        results = [_eval_where(p, env, tables) for p in pred.operands]
        return all(results) if pred.op == "and" else any(results)
    assert isinstance(pred, Comparison)
    left = _value(env, pred.column, tables)
    right = pred.value.value
    if pred.op == "<":
        return left < right
    if pred.op == "<=":
        return left <= right
    if pred.op == "=":
        return left == right
    if pred.op == "!=":
        return left != right
    if pred.op == ">=":
        return left >= right
    return left > right


def _round_half_up_2(frac: Fraction) -> Decimal:
    sign = -1 if frac < 0 else 1
    scaled = abs(frac) * 100
    whole = scaled.numerator // scaled.denominator
    remainder = scaled - whole
    if remainder >= Fraction(1, 2):
        whole += 1
    return Decimal(sign * whole) / Decimal(100)


def _aggregate(agg: Aggregate, envs: list[dict], tables: dict):
    if agg.arg is None:
        return len(envs)
    values = [_value(env, agg.arg, tables) for env in envs]
    if agg.fn == "count":
        return len(values)
    if agg.fn == "min":
        return min(values)
    if agg.fn == "max":
        return max(values)
    fracs = [Fraction(v) for v in values]
    total = sum(fracs, Fraction(0))
    if agg.fn == "sum":
        if isinstance(values[0], Decimal):
            result = Decimal(total.numerator) / Decimal(total.denominator)
            return result.quantize(Decimal("0.01"))
        return int(total)
    assert agg.fn == "avg"
    return _round_half_up_2(total / len(values))


def _compare(a, b) -> int:
    if a == b:
        return 0
    return -1 if a < b else 1


def _output_name(item) -> str:
    if item.alias:
        return item.alias
    if isinstance(item.expr, ColumnRef):
        return item.expr.name
    if item.expr.arg is None:
        return "count(*)"
    return f"{item.expr.fn}({item.expr.arg.name})"


def naive_execute(ast: QueryAst, tables: dict, row_limit: int) -> dict:
    """Run the query by exhaustive enumeration; returns the canonical result
    structure (columns, rows, row_count, truncated)."""
    # FROM / JOIN stream as environments keyed by (table, column index)
    def env_for(table_name: str, row: tuple) -> dict:
        return {(table_name, i): v for i, v in enumerate(row)}

    from_name = ast.from_table.name
    stream: list[dict] = []
    if ast.join is None:
        for row in tables[from_name].rows:
            stream.append(env_for(from_name, row))
    else:
        join_name = ast.join.table.name
        for lrow in tables[from_name].rows:
            for rrow in tables[join_name].rows:
                env = env_for(from_name, lrow)
                env.update(env_for(join_name, rrow))
                if _value(env, ast.join.left, tables) == _value(env, ast.join.right, tables):
                    stream.append(env)

    if ast.where is not None:
        stream = [env for env in stream if _eval_where(ast.where, env, tables)]

    aggregated = bool(ast.group_by) or any(
        isinstance(i.expr, Aggregate) for i in ast.select_items
    )
    rows_out: list[tuple] = []
    carriers: list[dict] = []
    if aggregated:
        group_order: list[tuple] = []
        groups: dict[tuple, list[dict]] = {}
        for env in stream:
            key = tuple(_value(env, ref, tables) for ref in ast.group_by)
            if key not in groups:
                groups[key] = []
                group_order.append(key)
            groups[key].append(env)
        for key in group_order:
            envs = groups[key]
            out = []
            for item in ast.select_items:
                if isinstance(item.expr, ColumnRef):
                    out.append(_value(envs[0], item.expr, tables))
                else:
                    out.append(_aggregate(item.expr, envs, tables))
            rows_out.append(tuple(out))
            carriers.append(envs[0])
    else:
        for env in stream:
            rows_out.append(tuple(_value(env, item.expr, tables) for item in ast.select_items))
            carriers.append(env)

    if ast.order_by:
        alias_index = {item.alias: i for i, item in enumerate(ast.select_items) if item.alias}

        def key_values(pos: int) -> list:
            values = []
            for item in ast.order_by:
                if isinstance(item.expr, str):
                    values.append((rows_out[pos][alias_index[item.expr]], item.direction))
                else:
                    values.append((_value(carriers[pos], item.expr, tables), item.direction))
            return values

        decorated = [(key_values(i), i) for i in range(len(rows_out))]

        def cmp(a, b) -> int:
            for (va, da), (vb, _) in zip(a[0], b[0]):
                c = _compare(va, vb)
                if c:
                    return -c if da == "desc" else c
            return 0

        decorated.sort(key=cmp_to_key(cmp))
        rows_out = [rows_out[i] for _, i in decorated]

    effective = min(ast.limit if ast.limit is not None else row_limit, row_limit)
    truncated = len(rows_out) > effective
    rows_out = rows_out[:effective]
    return {
        "columns": [_output_name(i) for i in ast.select_items],
        "rows": [list(r) for r in rows_out],
        "row_count": len(rows_out),
        "truncated": truncated,
    }


def naive_canonical(ast: QueryAst, tables: dict, row_limit: int) -> str:
    return canonical_json(naive_execute(ast, tables, row_limit))
