"""Logical algebra for query batches and its s-expression syntax.

Grammar (one query per ``;``)::

    batch     := { annotation* expr ";" }
    annotation:= "@weight=" INT | "@nomaterialize=" COL {"," COL}
    expr      := "(scan" REL ")"
               | "(select" pred expr ")"
               | "(project" "(" COL* ")" expr ")"
               | "(join" (pred | "()") expr expr ")"
               | "(aggregate" "(" COL* ")" "(" ("(" FN COL ")")* ")" expr ")"
    pred      := "(" CMP COL value ")" | "(and" pred+ ")" | "(or" pred+ ")"
    CMP       := = | < | <= | > | >= | !=
    FN        := min | max | sum | count

Columns may be written unqualified when the name is unambiguous in the
input schema; the parser stores them qualified (``R.a``).
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Union

from .catalog import Catalog
from .predicates import (COMPARATORS, And, Atom, Or, Predicate, atom, conjuncts,
                         make_and, make_or, render)

AGG_FUNCS = ("min", "max", "sum", "count")


class QueryError(ValueError):
    pass


class ParseError(QueryError):
    def __init__(self, msg: str, line: int, col: int):
        super().__init__(f"{line}:{col}: {msg}")
        self.line = line
        self.col = col


@dataclass(frozen=True)
class Scan:
    relation: str


@dataclass(frozen=True)
class Select:
    pred: Predicate
    input: "LogicalExpr"


@dataclass(frozen=True)
class Project:
    columns: tuple[str, ...]
    input: "LogicalExpr"


@dataclass(frozen=True)
class Join:
    pred: Predicate | None  # None is a cross product
    left: "LogicalExpr"
    right: "LogicalExpr"


@dataclass(frozen=True)
class Aggregate:
    group_by: tuple[str, ...]
    aggregates: tuple[tuple[str, str], ...]  # (fn, column)
    input: "LogicalExpr"


LogicalExpr = Union[Scan, Select, Project, Join, Aggregate]


@dataclass(frozen=True)
class Query:
    expr: LogicalExpr
    weight: int = 1
    no_materialize: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        if self.weight < 1:
            raise QueryError("query weight must be >= 1")


@dataclass(frozen=True)
class QueryBatch:
    queries: tuple[Query, ...]

    def __len__(self) -> int:
        return len(self.queries)

    def reversed(self) -> "QueryBatch":
        return QueryBatch(tuple(reversed(self.queries)))


def agg_column(fn: str, col: str) -> str:
    """Output column name of an aggregate: ``sum(R.b)`` -> ``sum_b``."""
    return f"{fn}_{col.rsplit('.', 1)[-1]}"


def schema_of(expr: LogicalExpr, catalog: Catalog) -> tuple[str, ...]:
    if isinstance(expr, Scan):
        return catalog.relation(expr.relation).column_names
    if isinstance(expr, Select):
        return schema_of(expr.input, catalog)
    if isinstance(expr, Project):
        return expr.columns
    if isinstance(expr, Join):
        return schema_of(expr.left, catalog) + schema_of(expr.right, catalog)
    if isinstance(expr, Aggregate):
        return expr.group_by + tuple(agg_column(f, c) for f, c in expr.aggregates)
    raise TypeError(f"not an expression: {expr!r}")


def relations_of(expr: LogicalExpr) -> list[str]:
    if isinstance(expr, Scan):
        return [expr.relation]
    if isinstance(expr, Join):
        return relations_of(expr.left) + relations_of(expr.right)
    return relations_of(expr.input)


def validate(expr: LogicalExpr, catalog: Catalog) -> tuple[str, ...]:
    """Schema-check ``expr`` bottom-up and return its schema."""
    if isinstance(expr, Scan):
        return catalog.relation(expr.relation).column_names
    if isinstance(expr, Select):
        cols = validate(expr.input, catalog)
        _check_cols(expr.pred.columns(), cols)
        return cols
    if isinstance(expr, Project):
        cols = validate(expr.input, catalog)
        if not expr.columns:
            raise QueryError("project needs at least one column")
        _check_cols(expr.columns, cols)
        if len(set(expr.columns)) != len(expr.columns):
            raise QueryError("project lists a column twice")
        return expr.columns
    if isinstance(expr, Join):
        lc = validate(expr.left, catalog)
        rc = validate(expr.right, catalog)
        both = set(lc) & set(rc)
        if both:
            raise QueryError(f"join inputs share column {sorted(both)[0]} "
                             "(self-joins are not supported)")
        if expr.pred is not None:
            for a in conjuncts(expr.pred):
                if not (isinstance(a, Atom) and a.is_col):
                    raise QueryError("join predicates must be conjunctions of column equalities")
                x, y = a.col, str(a.value)
                if not ((x in lc and y in rc) or (x in rc and y in lc)):
                    raise QueryError(f"join atom {render(a)} must compare one column of each input")
        return lc + rc
    if isinstance(expr, Aggregate):
        cols = validate(expr.input, catalog)
        _check_cols(expr.group_by, cols)
        if len(set(expr.group_by)) != len(expr.group_by):
            raise QueryError("group-by lists a column twice")
        for fn, c in expr.aggregates:
            if fn not in AGG_FUNCS:
                raise QueryError(f"unknown aggregate function {fn}")
            _check_cols((c,), cols)
        out = schema_of(expr, catalog)
        if len(set(out)) != len(out):
            raise QueryError("aggregate output columns collide")
        return out
    raise TypeError(f"not an expression: {expr!r}")


def _check_cols(used, available):
    avail = set(available)
    for c in used:
        if c not in avail:
            raise QueryError(f"unknown column {c}")


# -------------------------------------------------------------------- tokenizer

_TOKEN = re.compile(r"""
    (?P<ws>\s+|\#[^\n]*)
  | (?P<lp>\()
  | (?P<rp>\))
  | (?P<semi>;)
  | (?P<ann>@[A-Za-z_]+=[^\s;()]*)
  | (?P<str>"[^"\n]*")
  | (?P<word>[^\s()";@]+)
""", re.VERBOSE)

_NUM = re.compile(r"^[+-]?(\d+(\.\d*)?|\.\d+)([eE][+-]?\d+)?$")


@dataclass
class _Tok:
    kind: str
    text: str
    line: int
    col: int


def _tokenize(text: str) -> list[_Tok]:
    out = []
    pos, line, line_start = 0, 1, 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m:
            raise ParseError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        if kind != "ws":
            out.append(_Tok(kind, m.group(), line, pos - line_start + 1))
        chunk = m.group()
        nl = chunk.count("\n")
        if nl:
            line += nl
            line_start = pos + chunk.rfind("\n") + 1
        pos = m.end()
    out.append(_Tok("eof", "", line, pos - line_start + 1))
    return out


class _Parser:
    def __init__(self, text: str, catalog: Catalog):
        self.toks = _tokenize(text)
        self.i = 0
        self.catalog = catalog

    def peek(self) -> _Tok:
        return self.toks[self.i]

    def next(self) -> _Tok:
        t = self.toks[self.i]
        self.i += 1
        return t

    def fail(self, msg: str, tok: _Tok | None = None):
        tok = tok or self.peek()
        raise ParseError(msg, tok.line, tok.col)

    def expect(self, kind: str, what: str) -> _Tok:
        t = self.next()
        if t.kind != kind:
            self.fail(f"expected {what}, got {t.text or 'end of input'!r}", t)
        return t

    def word(self, what: str) -> str:
        return self.expect("word", what).text

    # ---------------------------------------------------------------- batch

    def batch(self) -> QueryBatch:
        queries = []
        while self.peek().kind != "eof":
            weight, nomat = 1, set()
            while self.peek().kind == "ann":
                t = self.next()
                key, _, val = t.text[1:].partition("=")
                if key == "weight":
                    if not val.isdigit() or int(val) < 1:
                        self.fail(f"weight must be a positive integer, got {val!r}", t)
                    weight = int(val)
                elif key == "nomaterialize":
                    nomat.update(v for v in val.split(",") if v)
                else:
                    self.fail(f"unknown annotation @{key}", t)
            start = self.peek()
            expr, _ = self.expr()
            self.expect("semi", "';' after query")
            try:
                validate(expr, self.catalog)
            except QueryError as e:
                raise ParseError(str(e), start.line, start.col) from None
            queries.append(Query(expr, weight, frozenset(nomat)))
        if not queries:
            self.fail("empty batch")
        return QueryBatch(tuple(queries))

    # ---------------------------------------------------------------- exprs

    def expr(self) -> tuple[LogicalExpr, tuple[str, ...]]:
        self.expect("lp", "'('")
        head = self.peek()
        op = self.word("operator")
        if op == "scan":
            name = self.word("relation name")
            if name not in self.catalog.relations:
                self.fail(f"unknown relation {name}", head)
            e = Scan(name)
            cols = self.catalog.relations[name].column_names
        elif op == "select":
            # the predicate precedes its input but resolves against its schema
            pred_at = self.i
            self._skip_group()
            inp, cols = self.expr()
            here = self.i
            self.i = pred_at
            pred = self.pred(cols)
            self.i = here
            e = Select(pred, inp)
        elif op == "project":
            names = self.word_list()
            inp, icols = self.expr()
            out = tuple(self.resolve(n, icols) for n in names)
            e, cols = Project(out, inp), out
        elif op == "join":
            pred_at = self.i
            self._skip_group()
            left, lc = self.expr()
            right, rc = self.expr()
            here = self.i
            self.i = pred_at
            if self.toks[self.i].kind == "lp" and self.toks[self.i + 1].kind == "rp":
                pred = None
                self.i += 2
            else:
                pred = self.pred(lc + rc)
            self.i = here
            e, cols = Join(pred, left, right), lc + rc
        elif op == "aggregate":
            gb_names = self.word_list()
            self.expect("lp", "'(' before aggregate list")
            specs = []
            while self.peek().kind == "lp":
                self.next()
                fn_tok = self.peek()
                fn = self.word("aggregate function")
                if fn not in AGG_FUNCS:
                    self.fail(f"unknown aggregate function {fn}", fn_tok)
                specs.append((fn, self.word("column"), fn_tok))
                self.expect("rp", "')'")
            self.expect("rp", "')'")
            inp, icols = self.expr()
            gb = tuple(self.resolve(n, icols) for n in gb_names)
            aggs = tuple((fn, self.resolve(c, icols, tok)) for fn, c, tok in specs)
            e = Aggregate(gb, aggs, inp)
            cols = schema_of(e, self.catalog)
        else:
            self.fail(f"unknown operator {op!r}", head)
        self.expect("rp", f"')' closing {op}")
        return e, cols

    def _skip_group(self) -> None:
        depth = 0
        while True:
            t = self.next()
            if t.kind == "lp":
                depth += 1
            elif t.kind == "rp":
                depth -= 1
            elif t.kind == "eof":
                self.fail("unbalanced parentheses", t)
            if depth == 0:
                return

    def word_list(self) -> list[str]:
        self.expect("lp", "'(' before column list")
        out = []
        while self.peek().kind == "word":
            out.append(self.next().text)
        self.expect("rp", "')' after column list")
        return out

    def resolve(self, name: str, cols, tok: _Tok | None = None) -> str:
        if name in cols:
            return name
        hits = [c for c in cols if c.rsplit(".", 1)[-1] == name]
        if len(hits) == 1:
            return hits[0]
        tok = tok or self.toks[self.i - 1]
        if not hits:
            self.fail(f"unknown column {name}", tok)
        self.fail(f"ambiguous column {name}", tok)

    def pred(self, cols) -> Predicate:
        self.expect("lp", "'(' starting a predicate")
        head = self.peek()
        op = self.next().text
        if op in ("and", "or"):
            parts = []
            while self.peek().kind == "lp":
                parts.append(self.pred(cols))
            if not parts:
                self.fail(f"empty ({op})", head)
            self.expect("rp", f"')' closing {op}")
            return make_and(parts) if op == "and" else make_or(parts)
        if op not in COMPARATORS:
            self.fail(f"unknown comparator {op!r}", head)
        ctok = self.peek()
        col = self.resolve(self.word("column"), cols, ctok)
        vt = self.next()
        if vt.kind == "str":
            value, is_col = vt.text[1:-1], False
        elif vt.kind == "word" and _NUM.match(vt.text):
            is_int = re.fullmatch(r"[+-]?\d+", vt.text)
            value, is_col = (int(vt.text) if is_int else float(vt.text)), False
        elif vt.kind == "word":
            value, is_col = self.resolve(vt.text, cols, vt), True
            if op != "=":
                self.fail("column comparisons must be equalities", vt)
        else:
            self.fail("expected a constant or column", vt)
        self.expect("rp", "')' closing comparison")
        return atom(col, op, value, is_col)


def parse_batch(text: str, catalog: Catalog) -> QueryBatch:
    return _Parser(text, catalog).batch()


def parse_expr(text: str, catalog: Catalog) -> LogicalExpr:
    b = parse_batch(text.rstrip().rstrip(";") + ";", catalog)
    return b.queries[0].expr


# ---------------------------------------------------------------------- printer

def format_expr(expr: LogicalExpr) -> str:
    if isinstance(expr, Scan):
        return f"(scan {expr.relation})"
    if isinstance(expr, Select):
        return f"(select {render(expr.pred)} {format_expr(expr.input)})"
    if isinstance(expr, Project):
        return f"(project ({' '.join(expr.columns)}) {format_expr(expr.input)})"
    if isinstance(expr, Join):
        p = "()" if expr.pred is None else render(expr.pred)
        return f"(join {p} {format_expr(expr.left)} {format_expr(expr.right)})"
    if isinstance(expr, Aggregate):
        aggs = " ".join(f"({f} {c})" for f, c in expr.aggregates)
        return f"(aggregate ({' '.join(expr.group_by)}) ({aggs}) {format_expr(expr.input)})"
    raise TypeError(f"not an expression: {expr!r}")


def format_batch(batch: QueryBatch) -> str:
    lines = []
    for q in batch.queries:
        ann = []
        if q.weight != 1:
            ann.append(f"@weight={q.weight}")
        if q.no_materialize:
            ann.append("@nomaterialize=" + ",".join(sorted(q.no_materialize)))
        lines.append(" ".join(ann + [format_expr(q.expr)]) + ";")
    return "\n".join(lines) + "\n"


__all__ = [
    "AGG_FUNCS", "Aggregate", "And", "Atom", "Join", "LogicalExpr", "Or",
    "ParseError", "Predicate", "Project", "Query", "QueryBatch", "QueryError",
    "Scan", "Select", "agg_column", "format_batch", "format_expr", "parse_batch",
    "parse_expr", "relations_of", "schema_of", "validate",
]
