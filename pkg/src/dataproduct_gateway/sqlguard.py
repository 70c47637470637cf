"""SQL subset parser and contract validator.

The contract clauses become executable guards here: a query is parsed into
a small AST, then validated against a data contract before anything runs.
The accepted grammar is deliberately narrow:

    query      := SELECT item ("," item)* FROM table [join] [WHERE pred]
                  [GROUP BY colref ("," colref)*]
                  [ORDER BY okey ("," okey)*] [LIMIT posint]
    item       := colref [AS alias]
                | fn "(" colref ")" [AS alias]
                | COUNT "(" "*" ")" [AS alias]
    fn         := COUNT | SUM | AVG | MIN | MAX
    join       := [INNER] JOIN table ON colref "=" colref
    pred       := andp (OR andp)*
    andp       := prim (AND prim)*
    prim       := "(" pred ")" | colref cmp literal
    cmp        := "<" | "<=" | "=" | "!=" | ">=" | ">"
    literal    := ["-"] integer | ["-"] decimal(<=2 places)
                | "'" text "'" ("''" escapes a quote) | TRUE | FALSE
    colref     := ident | ident "." ident
    okey       := (colref | alias) [ASC | DESC]

Everything else (star projection, window functions, subqueries, HAVING,
outer joins, DDL/DML, multiple statements) is a ParseError. Keywords are
case-insensitive; identifiers are bare [a-zA-Z_][a-zA-Z0-9_]*. Positions
in errors are 1-based (line, column).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from decimal import Decimal
from typing import Union

from .model import TWO_PLACES, parse_decimal2

AGGREGATE_FNS = ("count", "sum", "avg", "min", "max")
COMPARISON_OPS = ("<", "<=", "=", "!=", ">=", ">")

# Parenthesis nesting cap in WHERE: plenty for the subset, and it keeps a
# hostile input from overflowing the recursive-descent stack.
MAX_PREDICATE_DEPTH = 32

_KEYWORDS = {
    "SELECT", "FROM", "JOIN", "INNER", "ON", "WHERE", "AND", "OR",
    "GROUP", "BY", "ORDER", "ASC", "DESC", "LIMIT", "AS", "TRUE", "FALSE",
}
# Recognized so they cannot silently pass as identifiers; using one is an error.
_REJECTED_KEYWORDS = {
    "HAVING", "OVER", "PARTITION", "LEFT", "RIGHT", "OUTER", "FULL", "CROSS",
    "UNION", "DISTINCT", "NOT", "NULL", "IN", "LIKE", "BETWEEN", "IS",
    "INSERT", "UPDATE", "DELETE", "CREATE", "DROP", "ALTER", "OFFSET",
}


class ParseError(Exception):
    """Rejects any input outside the subset; carries a 1-based position."""

    def __init__(self, message: str, line: int, column: int, expected: str | None = None):
        detail = f"{message} at line {line}, column {column}"
        if expected:
            detail += f" (expected {expected})"
        super().__init__(detail)
        self.line = line
        self.column = column
        self.expected = expected


# --- AST ---------------------------------------------------------------
# Source positions ride along for error spans but are excluded from
# equality so parse(render(ast)) == ast holds structurally.


@dataclass(frozen=True)
class TableRef:
    name: str
    line: int = field(default=0, compare=False)
    col: int = field(default=0, compare=False)


@dataclass(frozen=True)
class ColumnRef:
    name: str
    table: str | None = None
    line: int = field(default=0, compare=False)
    col: int = field(default=0, compare=False)

    def display(self) -> str:
        return f"{self.table}.{self.name}" if self.table else self.name


@dataclass(frozen=True)
class Aggregate:
    fn: str
    arg: ColumnRef | None  # None means count(*)


@dataclass(frozen=True)
class SelectItem:
    expr: Union[ColumnRef, Aggregate]
    alias: str | None = None


@dataclass(frozen=True)
class Literal:
    kind: str  # integer | decimal | string | boolean
    value: object


@dataclass(frozen=True)
class Comparison:
    column: ColumnRef
    op: str
    value: Literal


@dataclass(frozen=True)
class BooleanOp:
    op: str  # "and" | "or"
    operands: tuple["Predicate", ...]


Predicate = Union[Comparison, BooleanOp]


@dataclass(frozen=True)
class OrderItem:
    # A plain string is a reference to a select-item alias; a ColumnRef
    # names a source column directly.
    expr: Union[ColumnRef, str]
    direction: str = "asc"


@dataclass(frozen=True)
class Join:
    table: TableRef
    left: ColumnRef
    right: ColumnRef
    kind: str = "inner"


@dataclass(frozen=True)
class QueryAst:
    select_items: tuple[SelectItem, ...]
    from_table: TableRef
    join: Join | None = None
    where: Predicate | None = None
    group_by: tuple[ColumnRef, ...] = ()
    order_by: tuple[OrderItem, ...] = ()
    limit: int | None = None

    def aggregates(self) -> tuple[Aggregate, ...]:
        return tuple(i.expr for i in self.select_items if isinstance(i.expr, Aggregate))

    def is_aggregated(self) -> bool:
        return bool(self.aggregates()) or bool(self.group_by)

    def output_names(self) -> tuple[str, ...]:
        names = []
        for item in self.select_items:
            if item.alias:
                names.append(item.alias)
            elif isinstance(item.expr, ColumnRef):
                names.append(item.expr.name)
            elif item.expr.arg is None:
                names.append("count(*)")
            else:
                names.append(f"{item.expr.fn}({item.expr.arg.name})")
        return tuple(names)


# --- Lexer -------------------------------------------------------------

_TT_IDENT = "ident"
_TT_KEYWORD = "keyword"
_TT_INT = "integer"
_TT_DECIMAL = "decimal"
_TT_STRING = "string"
_TT_OP = "op"
_TT_PUNCT = "punct"
_TT_EOF = "eof"


@dataclass(frozen=True)
class _Token:
    type: str
    value: str
    line: int
    col: int


def _lex(text: str) -> list[_Token]:
    tokens: list[_Token] = []
    i, line, col = 0, 1, 1
    n = len(text)
    while i < n:
        ch = text[i]
        if ch == "\n":
            i, line, col = i + 1, line + 1, 1
            continue
        if ch in " \t\r":
            i, col = i + 1, col + 1
            continue
        start_line, start_col = line, col
        if ch.isalpha() or ch == "_":
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            word = text[i:j]
            upper = word.upper()
            if upper in _KEYWORDS or upper in _REJECTED_KEYWORDS:
                tokens.append(_Token(_TT_KEYWORD, upper, start_line, start_col))
            else:
                tokens.append(_Token(_TT_IDENT, word, start_line, start_col))
            col += j - i
            i = j
            continue
        if ch.isdigit():
            j = i
            while j < n and text[j].isdigit():
                j += 1
            if j < n and text[j] == ".":
                j += 1
                frac_start = j
                while j < n and text[j].isdigit():
                    j += 1
                frac = j - frac_start
                if frac == 0:
                    raise ParseError("malformed decimal literal", start_line, start_col,
                                     expected="digits after '.'")
                if frac > 2:
                    raise ParseError("decimal literal has more than 2 fraction digits",
                                     start_line, start_col)
                tokens.append(_Token(_TT_DECIMAL, text[i:j], start_line, start_col))
            else:
                tokens.append(_Token(_TT_INT, text[i:j], start_line, start_col))
            col += j - i
            i = j
            continue
        if ch == "'":
            j = i + 1
            parts: list[str] = []
            while True:
                if j >= n:
                    raise ParseError("unterminated string literal", start_line, start_col)
                if text[j] == "'":
                    if j + 1 < n and text[j + 1] == "'":
                        parts.append("'")
                        j += 2
                        continue
                    j += 1
                    break
                if text[j] == "\n":
                    raise ParseError("unterminated string literal", start_line, start_col)
                parts.append(text[j])
                j += 1
            tokens.append(_Token(_TT_STRING, "".join(parts), start_line, start_col))
            col += j - i
            i = j
            continue
        if ch in "<>!=":
            if text[i:i + 2] in ("<=", ">=", "!="):
                tokens.append(_Token(_TT_OP, text[i:i + 2], start_line, start_col))
                i, col = i + 2, col + 2
                continue
            if ch == "!":
                raise ParseError("unexpected character '!'", start_line, start_col, expected="'!='")
            tokens.append(_Token(_TT_OP, ch, start_line, start_col))
            i, col = i + 1, col + 1
            continue
        if ch in "(),.*-":
            tokens.append(_Token(_TT_PUNCT, ch, start_line, start_col))
            i, col = i + 1, col + 1
            continue
        raise ParseError(f"unexpected character {ch!r}", start_line, start_col)
    tokens.append(_Token(_TT_EOF, "", line, col))
    return tokens


# --- Parser ------------------------------------------------------------


class _Parser:
    def __init__(self, tokens: list[_Token]):
        self.tokens = tokens
        self.pos = 0
        self.depth = 0

    def peek(self, ahead: int = 0) -> _Token:
        return self.tokens[min(self.pos + ahead, len(self.tokens) - 1)]

    def next(self) -> _Token:
        tok = self.tokens[self.pos]
        if tok.type != _TT_EOF:
            self.pos += 1
        return tok

    def error(self, tok: _Token, expected: str) -> ParseError:
        found = tok.value if tok.type != _TT_EOF else "end of input"
        return ParseError(f"unexpected {found!r}", tok.line, tok.col, expected=expected)

    def expect_keyword(self, word: str) -> _Token:
        tok = self.next()
        if tok.type != _TT_KEYWORD or tok.value != word:
            raise self.error(tok, word)
        return tok

    def expect_punct(self, ch: str) -> _Token:
        tok = self.next()
        if tok.type != _TT_PUNCT or tok.value != ch:
            raise self.error(tok, f"'{ch}'")
        return tok

    def at_keyword(self, *words: str) -> bool:
        tok = self.peek()
        return tok.type == _TT_KEYWORD and tok.value in words

    def ident(self, what: str) -> _Token:
        tok = self.next()
        if tok.type != _TT_IDENT:
            raise self.error(tok, what)
        return tok

    # colref := ident [ "." ident ]
    def column_ref(self) -> ColumnRef:
        first = self.ident("column name")
        if self.peek().type == _TT_PUNCT and self.peek().value == ".":
            self.next()
            second = self.ident("column name after '.'")
            return ColumnRef(name=second.value, table=first.value, line=first.line, col=first.col)
        return ColumnRef(name=first.value, line=first.line, col=first.col)

    def select_item(self) -> SelectItem:
        tok = self.peek()
        if tok.type == _TT_PUNCT and tok.value == "*":
            raise ParseError("star projection is only supported inside count(*)",
                             tok.line, tok.col, expected="column or aggregate")
        if tok.type != _TT_IDENT:
            raise self.error(tok, "column or aggregate")
        if self.peek(1).type == _TT_PUNCT and self.peek(1).value == "(":
            fn_tok = self.next()
            fn = fn_tok.value.lower()
            if fn not in AGGREGATE_FNS:
                raise ParseError(f"unsupported function {fn_tok.value!r}", fn_tok.line, fn_tok.col,
                                 expected="one of count, sum, avg, min, max")
            self.expect_punct("(")
            inner = self.peek()
            if inner.type == _TT_PUNCT and inner.value == "*":
                if fn != "count":
                    raise ParseError("'*' argument is only valid for count", inner.line, inner.col,
                                     expected="column name")
                self.next()
                arg = None
            else:
                arg = self.column_ref()
            self.expect_punct(")")
            expr: ColumnRef | Aggregate = Aggregate(fn=fn, arg=arg)
        else:
            expr = self.column_ref()
        alias = None
        if self.at_keyword("AS"):
            self.next()
            alias = self.ident("alias").value
        return SelectItem(expr=expr, alias=alias)

    def literal(self) -> Literal:
        tok = self.next()
        negative = False
        if tok.type == _TT_PUNCT and tok.value == "-":
            negative = True
            tok = self.next()
        if tok.type == _TT_INT:
            value = int(tok.value)
            return Literal("integer", -value if negative else value)
        if tok.type == _TT_DECIMAL:
            value = parse_decimal2(tok.value)
            return Literal("decimal", -value if negative else value)
        if negative:
            raise self.error(tok, "numeric literal after '-'")
        if tok.type == _TT_STRING:
            return Literal("string", tok.value)
        if tok.type == _TT_KEYWORD and tok.value in ("TRUE", "FALSE"):
            return Literal("boolean", tok.value == "TRUE")
        raise self.error(tok, "literal value")

    def comparison(self) -> Comparison:
        column = self.column_ref()
        tok = self.next()
        if tok.type != _TT_OP or tok.value not in COMPARISON_OPS:
            raise self.error(tok, "comparison operator")
        return Comparison(column=column, op=tok.value, value=self.literal())

    def primary(self) -> Predicate:
        tok = self.peek()
        if tok.type == _TT_PUNCT and tok.value == "(":
            if self.depth >= MAX_PREDICATE_DEPTH:
                raise ParseError(
                    f"predicate nesting deeper than {MAX_PREDICATE_DEPTH}",
                    tok.line, tok.col,
                )
            self.next()
            self.depth += 1
            try:
                pred = self.predicate()
            finally:
                self.depth -= 1
            self.expect_punct(")")
            return pred
        return self.comparison()

    def and_expr(self) -> Predicate:
        operands = [self.primary()]
        while self.at_keyword("AND"):
            self.next()
            operands.append(self.primary())
        if len(operands) == 1:
            return operands[0]
        return BooleanOp(op="and", operands=tuple(operands))

    def predicate(self) -> Predicate:
        operands = [self.and_expr()]
        while self.at_keyword("OR"):
            self.next()
            operands.append(self.and_expr())
        if len(operands) == 1:
            return operands[0]
        return BooleanOp(op="or", operands=tuple(operands))

    def table_ref(self) -> TableRef:
        tok = self.ident("table name")
        return TableRef(name=tok.value, line=tok.line, col=tok.col)

    def order_item(self, aliases: set[str]) -> OrderItem:
        tok = self.peek()
        if tok.type != _TT_IDENT:
            raise self.error(tok, "column or alias")
        qualified = self.peek(1).type == _TT_PUNCT and self.peek(1).value == "."
        if not qualified and tok.value in aliases:
            self.next()
            expr: ColumnRef | str = tok.value
        else:
            expr = self.column_ref()
        direction = "asc"
        if self.at_keyword("ASC", "DESC"):
            direction = self.next().value.lower()
        return OrderItem(expr=expr, direction=direction)

    def query(self) -> QueryAst:
        select_tok = self.next()
        if select_tok.type != _TT_KEYWORD or select_tok.value != "SELECT":
            raise self.error(select_tok, "SELECT")
        items = [self.select_item()]
        while self.peek().type == _TT_PUNCT and self.peek().value == ",":
            self.next()
            items.append(self.select_item())
        self.expect_keyword("FROM")
        from_table = self.table_ref()

        join = None
        if self.at_keyword("INNER", "JOIN"):
            if self.at_keyword("INNER"):
                self.next()
            self.expect_keyword("JOIN")
            join_table = self.table_ref()
            self.expect_keyword("ON")
            left = self.column_ref()
            op_tok = self.next()
            if op_tok.type != _TT_OP or op_tok.value != "=":
                raise self.error(op_tok, "'=' in join condition")
            right = self.column_ref()
            join = Join(table=join_table, left=left, right=right)

        where = None
        if self.at_keyword("WHERE"):
            self.next()
            where = self.predicate()

        group_by: list[ColumnRef] = []
        if self.at_keyword("GROUP"):
            self.next()
            self.expect_keyword("BY")
            group_by.append(self.column_ref())
            while self.peek().type == _TT_PUNCT and self.peek().value == ",":
                self.next()
                group_by.append(self.column_ref())

        aliases = {i.alias for i in items if i.alias}
        order_by: list[OrderItem] = []
        if self.at_keyword("ORDER"):
            self.next()
            self.expect_keyword("BY")
            order_by.append(self.order_item(aliases))
            while self.peek().type == _TT_PUNCT and self.peek().value == ",":
                self.next()
                order_by.append(self.order_item(aliases))

        limit = None
        if self.at_keyword("LIMIT"):
            limit_tok = self.next()
            tok = self.next()
            if tok.type != _TT_INT:
                raise self.error(tok, "positive integer")
            limit = int(tok.value)
            if limit < 1:
                raise ParseError("LIMIT must be a positive integer", tok.line, tok.col)
            del limit_tok

        tail = self.peek()
        if tail.type != _TT_EOF:
            raise self.error(tail, "end of query")

        ast = QueryAst(
            select_items=tuple(items),
            from_table=from_table,
            join=join,
            where=where,
            group_by=tuple(group_by),
            order_by=tuple(order_by),
            limit=limit,
        )
        self._check_shape(ast)
        return ast

    def _check_shape(self, ast: QueryAst) -> None:
        """Structural invariants every QueryAst must satisfy."""
        aliases = [i.alias for i in ast.select_items if i.alias]
        if len(set(aliases)) != len(aliases):
            dup = next(a for a in aliases if aliases.count(a) > 1)
            raise ParseError(f"duplicate alias {dup!r}", 1, 1)
        plain = [i.expr for i in ast.select_items if isinstance(i.expr, ColumnRef)]
        has_agg = any(isinstance(i.expr, Aggregate) for i in ast.select_items)
        if ast.group_by:
            group_keys = {(c.table, c.name) for c in ast.group_by}
            for ref in plain:
                if (ref.table, ref.name) not in group_keys:
                    raise ParseError(
                        f"column {ref.display()!r} must appear in GROUP BY",
                        ref.line, ref.col,
                    )
        elif has_agg and plain:
            ref = plain[0]
            raise ParseError(
                f"column {ref.display()!r} cannot be mixed with aggregates without GROUP BY",
                ref.line, ref.col,
            )


def parse_sql(text: str) -> QueryAst:
    """Parse one SELECT statement of the supported subset into an AST."""
    return _Parser(_lex(text)).query()


# --- Rendering ---------------------------------------------------------


def _render_literal(lit: Literal) -> str:
    if lit.kind == "integer":
        return str(lit.value)
    if lit.kind == "decimal":
        return str(lit.value.quantize(TWO_PLACES))
    if lit.kind == "string":
        return "'" + str(lit.value).replace("'", "''") + "'"
    if lit.kind == "boolean":
        return "TRUE" if lit.value else "FALSE"
    raise ValueError(f"unknown literal kind {lit.kind!r}")


def _render_predicate(pred: Predicate) -> str:
    if isinstance(pred, Comparison):
        return f"{pred.column.display()} {pred.op} {_render_literal(pred.value)}"
    joiner = f" {pred.op.upper()} "
    parts = []
    for operand in pred.operands:
        rendered = _render_predicate(operand)
        # Nested boolean operands always take parentheses so precedence
        # survives the round trip exactly.
        if isinstance(operand, BooleanOp):
            rendered = f"({rendered})"
        parts.append(rendered)
    return joiner.join(parts)


def _render_select_item(item: SelectItem) -> str:
    if isinstance(item.expr, ColumnRef):
        rendered = item.expr.display()
    elif item.expr.arg is None:
        rendered = "COUNT(*)"
    else:
        rendered = f"{item.expr.fn.upper()}({item.expr.arg.display()})"
    if item.alias:
        rendered += f" AS {item.alias}"
    return rendered


def render_sql(ast: QueryAst) -> str:
    """Canonical single-line rendering; parse_sql(render_sql(a)) == a."""
    parts = ["SELECT ", ", ".join(_render_select_item(i) for i in ast.select_items)]
    parts.append(f" FROM {ast.from_table.name}")
    if ast.join:
        parts.append(
            f" JOIN {ast.join.table.name} ON "
            f"{ast.join.left.display()} = {ast.join.right.display()}"
        )
    if ast.where:
        parts.append(f" WHERE {_render_predicate(ast.where)}")
    if ast.group_by:
        parts.append(" GROUP BY " + ", ".join(c.display() for c in ast.group_by))
    if ast.order_by:
        keys = []
        for item in ast.order_by:
            name = item.expr if isinstance(item.expr, str) else item.expr.display()
            keys.append(f"{name} {item.direction.upper()}")
        parts.append(" ORDER BY " + ", ".join(keys))
    if ast.limit is not None:
        parts.append(f" LIMIT {ast.limit}")
    return "".join(parts)


# --- Contract validation -----------------------------------------------


class ContractViolation(Exception):
    """A parsed query conflicts with the governing data contract."""

    def __init__(self, message: str, line: int = 0, col: int = 0):
        suffix = f" at line {line}, column {col}" if line else ""
        super().__init__(message + suffix)
        self.line = line
        self.col = col

    @property
    def kind(self) -> str:
        return type(self).__name__


class UnknownTable(ContractViolation):
    def __init__(self, name: str, line: int = 0, col: int = 0):
        super().__init__(f"unknown table {name!r}", line, col)
        self.table = name


class UnknownColumn(ContractViolation):
    def __init__(self, table: str | None, name: str, line: int = 0, col: int = 0):
        where = f"table {table!r}" if table else "any table in scope"
        super().__init__(f"unknown column {name!r} in {where}", line, col)
        self.table = table
        self.column = name


class AmbiguousColumn(ContractViolation):
    def __init__(self, name: str, line: int = 0, col: int = 0):
        super().__init__(f"column {name!r} is ambiguous; qualify it with a table name", line, col)
        self.column = name


class TypeMismatch(ContractViolation):
    def __init__(self, context: str, line: int = 0, col: int = 0):
        super().__init__(f"type mismatch: {context}", line, col)
        self.context = context


@dataclass(frozen=True)
class ValidatedQuery:
    ast: QueryAst
    # (table, column, classification) for every column any clause touches.
    referenced_columns: frozenset[tuple[str, str, str]]
    effective_limit: int
    tables: tuple[str, ...]


class _Scope:
    def __init__(self, contract, ast: QueryAst):
        self.columns: dict[str, dict[str, object]] = {}
        self.tables: list[str] = []
        for ref in filter(None, (ast.from_table, ast.join.table if ast.join else None)):
            if ref.name not in contract.tables:
                raise UnknownTable(ref.name, ref.line, ref.col)
            if ref.name not in self.tables:
                self.tables.append(ref.name)
            self.columns[ref.name] = {c.name: c for c in contract.tables[ref.name]}

    def resolve(self, ref: ColumnRef):
        """-> (table_name, ColumnDef); raises the precise violation."""
        if ref.table is not None:
            if ref.table not in self.columns:
                raise UnknownTable(ref.table, ref.line, ref.col)
            col = self.columns[ref.table].get(ref.name)
            if col is None:
                raise UnknownColumn(ref.table, ref.name, ref.line, ref.col)
            return ref.table, col
        hits = [(t, cols[ref.name]) for t, cols in self.columns.items() if ref.name in cols]
        if not hits:
            only = self.tables[0] if len(self.tables) == 1 else None
            raise UnknownColumn(only, ref.name, ref.line, ref.col)
        if len(hits) > 1:
            raise AmbiguousColumn(ref.name, ref.line, ref.col)
        return hits[0]


_NUMERIC = ("integer", "decimal2")
_LITERAL_FOR_TYPE = {
    "integer": ("integer", "decimal"),
    "decimal2": ("integer", "decimal"),
    "text": ("string",),
    "date": ("string",),
    "boolean": ("boolean",),
}


def validate(ast: QueryAst, contract) -> ValidatedQuery:
    """Resolve and type-check a parsed query against a contract.

    Collects every referenced column with its classification and computes
    the effective row limit: min(query LIMIT, contract row_limit); a query
    without LIMIT is clamped to the contract row_limit.
    """
    scope = _Scope(contract, ast)
    referenced: set[tuple[str, str, str]] = set()

    def touch(ref: ColumnRef):
        table, col = scope.resolve(ref)
        referenced.add((table, col.name, col.classification))
        return table, col

    for item in ast.select_items:
        if isinstance(item.expr, ColumnRef):
            touch(item.expr)
        elif item.expr.arg is not None:
            _, col = touch(item.expr.arg)
            if item.expr.fn in ("sum", "avg") and col.value_type not in _NUMERIC:
                raise TypeMismatch(
                    f"{item.expr.fn}() needs a numeric column, got {col.value_type} "
                    f"column {item.expr.arg.display()!r}",
                    item.expr.arg.line, item.expr.arg.col,
                )

    if ast.join:
        _, left_col = touch(ast.join.left)
        _, right_col = touch(ast.join.right)
        if left_col.value_type != right_col.value_type:
            raise TypeMismatch(
                f"join compares {left_col.value_type} with {right_col.value_type}",
                ast.join.left.line, ast.join.left.col,
            )

    def check_predicate(pred: Predicate):
        if isinstance(pred, BooleanOp):
            for operand in pred.operands:
                check_predicate(operand)
            return
        _, col = touch(pred.column)
        if pred.value.kind not in _LITERAL_FOR_TYPE[col.value_type]:
            raise TypeMismatch(
                f"cannot compare {col.value_type} column {pred.column.display()!r} "
                f"with a {pred.value.kind} literal",
                pred.column.line, pred.column.col,
            )

    if ast.where:
        check_predicate(ast.where)

    group_keys = set()
    for ref in ast.group_by:
        table, col = touch(ref)
        group_keys.add((table, col.name))

    for item in ast.order_by:
        if isinstance(item.expr, str):
            continue  # alias refs point at select items already resolved
        table, col = touch(item.expr)
        if ast.is_aggregated() and (table, col.name) not in group_keys:
            raise TypeMismatch(
                f"ORDER BY column {item.expr.display()!r} is neither grouped nor aliased output",
                item.expr.line, item.expr.col,
            )

    row_limit = contract.terms.row_limit
    effective = min(ast.limit if ast.limit is not None else row_limit, row_limit)
    return ValidatedQuery(
        ast=ast,
        referenced_columns=frozenset(referenced),
        effective_limit=effective,
        tables=tuple(scope.tables),
    )
