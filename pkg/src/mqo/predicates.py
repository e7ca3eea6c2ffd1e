"""Boolean predicates over qualified columns, with canonical forms and a
sound (but incomplete) implication test."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

COMPARATORS = ("=", "<", "<=", ">", ">=", "!=")

Constant = Union[int, float, str]


@dataclass(frozen=True)
class Atom:
    """``col op value``; when ``is_col`` is set, ``value`` names a column."""

    col: str
    op: str
    value: Constant
    is_col: bool = False

    def __post_init__(self):
        if self.op not in COMPARATORS:
            raise ValueError(f"unknown comparator {self.op!r}")
        if self.is_col and self.op != "=":
            raise ValueError("column-to-column atoms must be equalities")

    def columns(self) -> frozenset[str]:
        if self.is_col:
            return frozenset((self.col, str(self.value)))
        return frozenset((self.col,))

    def sort_key(self) -> tuple:
        return (0, self.col, self.op, _const_key(self.value), self.is_col)


@dataclass(frozen=True)
class And:
    parts: tuple  # canonical: flattened, deduplicated, sorted, len >= 2

    def columns(self) -> frozenset[str]:
        return frozenset().union(*(p.columns() for p in self.parts))

    def sort_key(self) -> tuple:
        return (1, tuple(p.sort_key() for p in self.parts))


@dataclass(frozen=True)
class Or:
    parts: tuple

    def columns(self) -> frozenset[str]:
        return frozenset().union(*(p.columns() for p in self.parts))

    def sort_key(self) -> tuple:
        return (2, tuple(p.sort_key() for p in self.parts))


Predicate = Union[Atom, And, Or]


def _const_key(v: Constant) -> tuple:
    if isinstance(v, str):
        return (1, 0, v)
    return (0, v, "")


def atom(col: str, op: str, value: Constant, is_col: bool = False) -> Atom:
    """Build an atom, ordering the two sides of a column equality."""
    if is_col:
        other = str(value)
        if other < col:
            col, other = other, col
        return Atom(col, "=", other, True)
    return Atom(col, op, value, False)


def conjuncts(p: Predicate | None) -> tuple:
    if p is None:
        return ()
    if isinstance(p, And):
        return p.parts
    return (p,)


def _combine(cls, parts) -> Predicate:
    flat = []
    for p in parts:
        if isinstance(p, cls):
            flat.extend(p.parts)
        else:
            flat.append(p)
    uniq = sorted(set(flat), key=lambda q: q.sort_key())
    if not uniq:
        raise ValueError(f"empty {cls.__name__}")
    if len(uniq) == 1:
        return uniq[0]
    return cls(tuple(uniq))


def make_and(parts) -> Predicate:
    return _combine(And, parts)


def make_or(parts) -> Predicate:
    return _combine(Or, parts)


def and_or_none(parts) -> Predicate | None:
    parts = list(parts)
    return make_and(parts) if parts else None


# ---------------------------------------------------------------- implication

_INF = float("inf")


def _interval(a: Atom):
    """(lo, lo_closed, hi, hi_closed) for a numeric comparison, else None."""
    v = a.value
    if a.is_col or isinstance(v, str) or a.op == "!=":
        return None
    if a.op == "=":
        return (v, True, v, True)
    if a.op == "<":
        return (-_INF, False, v, False)
    if a.op == "<=":
        return (-_INF, False, v, True)
    if a.op == ">":
        return (v, False, _INF, False)
    return (v, True, _INF, False)


def _within(inner, outer) -> bool:
    ilo, ilc, ihi, ihc = inner
    olo, olc, ohi, ohc = outer
    if ilo < olo or (ilo == olo and ilc and not olc):
        return False
    if ihi > ohi or (ihi == ohi and ihc and not ohc):
        return False
    return True


def atom_implies(p: Atom, q: Atom) -> bool:
    if p == q:
        return True
    if p.is_col or q.is_col or p.col != q.col:
        return False
    if isinstance(p.value, str) != isinstance(q.value, str):
        return False
    if q.op == "!=":
        # p excludes q's value
        if p.op == "=":
            return p.value != q.value
        ip = _interval(p)
        if ip is None or isinstance(q.value, str):
            return False
        lo, lc, hi, hc = ip
        v = q.value
        return v < lo or v > hi or (v == lo and not lc) or (v == hi and not hc)
    ip, iq = _interval(p), _interval(q)
    if ip is None or iq is None:
        if p.op == "=" and q.op == "=":
            return p.value == q.value
        return False
    return _within(ip, iq)


def implies(p: Predicate, q: Predicate) -> bool:
    """True only if every row satisfying ``p`` satisfies ``q``."""
    if p == q:
        return True
    if isinstance(q, And):
        return all(implies(p, part) for part in q.parts)
    if isinstance(p, Or):
        return all(implies(part, q) for part in p.parts)
    if isinstance(p, And):
        if any(implies(part, q) for part in p.parts):
            return True
        if isinstance(q, Or):
            return any(implies(p, part) for part in q.parts)
        return False
    if isinstance(q, Or):
        return any(implies(p, part) for part in q.parts)
    return atom_implies(p, q)


def normalize_conjuncts(parts) -> frozenset:
    """Drop duplicate conjuncts and those implied by the remaining ones."""
    keep = sorted(set(parts), key=lambda q: q.sort_key())
    i = 0
    while i < len(keep):
        c = keep[i]
        others = keep[:i] + keep[i + 1:]
        if others and implies(_as_pred(others), c):
            keep.pop(i)
        else:
            i += 1
    return frozenset(keep)


def _as_pred(parts) -> Predicate:
    return parts[0] if len(parts) == 1 else And(tuple(parts))


# ---------------------------------------------------------------- evaluation

_OPS = {
    "=": lambda a, b: a == b,
    "!=": lambda a, b: a != b,
    "<": lambda a, b: a < b,
    "<=": lambda a, b: a <= b,
    ">": lambda a, b: a > b,
    ">=": lambda a, b: a >= b,
}


def evaluate(p: Predicate, row: dict) -> bool:
    """Evaluate against a mapping from column name to value."""
    if isinstance(p, And):
        return all(evaluate(x, row) for x in p.parts)
    if isinstance(p, Or):
        return any(evaluate(x, row) for x in p.parts)
    rhs = row[p.value] if p.is_col else p.value
    return _OPS[p.op](row[p.col], rhs)


def render(p: Predicate) -> str:
    """S-expression text, the same syntax the query parser accepts."""
    if isinstance(p, And):
        return "(and " + " ".join(render(x) for x in p.parts) + ")"
    if isinstance(p, Or):
        return "(or " + " ".join(render(x) for x in p.parts) + ")"
    if p.is_col:
        rhs = str(p.value)
    elif isinstance(p.value, str):
        rhs = '"' + p.value + '"'
    else:
        rhs = repr(p.value)
    return f"({p.op} {p.col} {rhs})"
