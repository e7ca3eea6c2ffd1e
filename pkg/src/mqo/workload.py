"""Workload generators: the chain-query scaleup batches, a no-overlap
variant of any batch, a hand-built two-query sharing example, and small
random instances for testing."""

from __future__ import annotations

import random

from .catalog import Catalog, RelationStats
from .predicates import And, Atom, atom, conjuncts, make_and, make_or
from .query_ir import (Aggregate, Join, Project, Query, QueryBatch, Scan, Select,
                       relations_of)

PSP_COLUMNS = ("P", "SP", "NUM")
NUM_DISTINCT = 1000
# selection bounds come from the top of the NUM domain, so each selection
# keeps at most a fifth of its relation
BOUND_LOW = 800
PSP_PER_BLOCK = 25


def scaleup_relation_count(i: int) -> int:
    return 4 * i + 2


def scaleup_pair_count(i: int) -> int:
    return 4 * i - 2


def _chain(j: int, sel_col: str, bound: int) -> str:
    """PSP_j .. PSP_{j+4} joined on SP = next P, with NUM >= bound on PSP_j."""
    expr = f"(select (>= PSP_{j}.{sel_col} {bound}) (scan PSP_{j}))"
    for m in range(j + 1, j + 5):
        expr = f"(join (= PSP_{m - 1}.SP PSP_{m}.P) {expr} (scan PSP_{m}))"
    return expr


def generate_scaleup(i: int, seed: int = 0) -> tuple[str, str]:
    """Catalog and query texts of composite batch ``i`` (1 <= i <= 5).

    Batch ``i`` holds ``4i - 2`` pairs of five-relation chain queries over
    ``4i + 2`` relations; the two queries of pair ``j`` differ only in the
    bound of their selection on ``PSP_j.NUM``.
    """
    if not 1 <= i <= 5:
        raise ValueError(f"scaleup index must be in 1..5, got {i}")
    rng = random.Random(seed)
    n = scaleup_relation_count(i)
    tuples = [rng.randint(20000, 40000) for _ in range(n)]
    lines = []
    for m in range(1, n + 1):
        t = tuples[m - 1]
        nxt = tuples[m] if m < n else t
        lines.append(f"relation PSP_{m} tuples={t} perblock={PSP_PER_BLOCK}")
        lines.append(f"column P distinct={t}")
        lines.append(f"column SP distinct={min(t, nxt)}")
        lines.append(f"column NUM distinct={NUM_DISTINCT} min=0 max={NUM_DISTINCT - 1}")
    queries = []
    for j in range(1, scaleup_pair_count(i) + 1):
        a = rng.randrange(BOUND_LOW, NUM_DISTINCT)
        b = rng.randrange(BOUND_LOW, NUM_DISTINCT - 1)
        if b >= a:
            b += 1
        queries.append(_chain(j, "NUM", a) + ";")
        queries.append(_chain(j, "NUM", b) + ";")
    return "\n".join(lines) + "\n", "\n".join(queries) + "\n"


def count_predicates(batch: QueryBatch) -> tuple[int, int]:
    """(join predicate atoms, selection predicate atoms) over all queries."""
    joins = sels = 0

    def walk(e):
        nonlocal joins, sels
        if isinstance(e, Join):
            joins += len(conjuncts(e.pred)) if e.pred is not None else 0
            walk(e.left)
            walk(e.right)
        elif isinstance(e, Select):
            sels += len(conjuncts(e.pred))
            walk(e.input)
        elif isinstance(e, (Project, Aggregate)):
            walk(e.input)

    for q in batch.queries:
        walk(q.expr)
    return joins, sels


# ------------------------------------------------------------------ no overlap

def _rename_pred(p, f):
    if isinstance(p, Atom):
        return atom(f(p.col), p.op, f(p.value) if p.is_col else p.value, p.is_col)
    parts = [_rename_pred(x, f) for x in p.parts]
    return make_and(parts) if isinstance(p, And) else make_or(parts)


def _rename_expr(e, f, rel):
    if isinstance(e, Scan):
        return Scan(rel(e.relation))
    if isinstance(e, Select):
        return Select(_rename_pred(e.pred, f), _rename_expr(e.input, f, rel))
    if isinstance(e, Project):
        return Project(tuple(map(f, e.columns)), _rename_expr(e.input, f, rel))
    if isinstance(e, Join):
        pred = None if e.pred is None else _rename_pred(e.pred, f)
        return Join(pred, _rename_expr(e.left, f, rel), _rename_expr(e.right, f, rel))
    if isinstance(e, Aggregate):
        return Aggregate(tuple(map(f, e.group_by)), tuple((fn, f(c)) for fn, c in e.aggregates),
                         _rename_expr(e.input, f, rel))
    raise TypeError(f"not an expression: {e!r}")


def no_overlap(catalog: Catalog, batch: QueryBatch) -> tuple[Catalog, QueryBatch]:
    """Give every query private copies of the relations it reads, so no two
    queries share anything while each keeps its own plan space."""
    rels: dict[str, RelationStats] = {}
    queries = []
    for k, q in enumerate(batch.queries):
        def rel(name, k=k):
            return f"{name}_q{k}"

        def col(c, k=k):
            r, _, name = c.partition(".")
            return f"{rel(r)}.{name}"

        for name in sorted(set(relations_of(q.expr))):
            r = catalog.relation(name)
            rels[rel(name)] = RelationStats(rel(name), r.tuple_count, r.tuples_per_block,
                                            r.columns, r.clustered_index_on, r.bounds)
        queries.append(Query(_rename_expr(q.expr, col, rel), q.weight,
                             frozenset(map(col, q.no_materialize))))
    return Catalog(rels, catalog.params), QueryBatch(tuple(queries))


# --------------------------------------------------------------- two queries

SHARED_JOIN_CATALOG = """\
# R and S join on two columns into a tiny result, but both are too large
# for the operator memory, so computing R join S is expensive.
relation R tuples=80000 perblock=20
column a distinct=1000
column b distinct=80000
column c distinct=1000
relation S tuples=160000 perblock=20
column b distinct=160000
column c distinct=1000
column d distinct=5000
relation P tuples=5000 perblock=25
column d distinct=5000
column e distinct=100
relation T tuples=8000 perblock=25
column d distinct=5000
column f distinct=50
"""

SHARED_JOIN_QUERIES = """\
(join (= S.d P.d) (join (and (= R.b S.b) (= R.c S.c)) (scan R) (scan S)) (scan P));
(join (= S.d T.d) (join (and (= R.b S.b) (= R.c S.c)) (scan R) (scan S)) (scan T));
"""


# --------------------------------------------------------------------- random

def random_instance(seed: int, relations: int = 4, queries: int = 3,
                    max_join: int = 3, selections: bool = True) -> tuple[str, str]:
    """A small random catalog and a batch of chain joins over it.

    Queries draw overlapping windows of the same relation chain, so
    subexpressions recur; relation sizes straddle the operator memory so
    that recomputation is sometimes expensive.
    """
    rng = random.Random(seed)
    names = [f"R{k}" for k in range(relations)]
    lines = []
    for name in names:
        t = rng.choice([500, 2000, 8000, 30000, 60000, 120000])
        lines.append(f"relation {name} tuples={t} perblock={rng.choice([10, 20, 40])}")
        lines.append(f"column k distinct={max(1, t // rng.choice([1, 2, 10]))}")
        lines.append(f"column j distinct={min(t, rng.choice([10, 100, 1000]))}")
        lines.append(f"column v distinct={min(t, 100)} min=0 max=99")
    join_cols = {(a, b): rng.choice(["k", "j"]) for a, b in zip(names, names[1:])}
    qs = []
    for _ in range(queries):
        size = rng.randint(2, max_join)
        start = rng.randrange(relations - size + 1)
        chain = names[start:start + size]
        expr = f"(scan {chain[0]})"
        if selections and rng.random() < 0.5:
            op = rng.choice(["=", "<", ">="])
            expr = f"(select ({op} {chain[0]}.v {rng.randrange(100)}) {expr})"
        for prev, cur in zip(chain, chain[1:]):
            col = join_cols[(prev, cur)] if rng.random() < 0.8 else rng.choice(["k", "j"])
            expr = f"(join (= {prev}.{col} {cur}.{col}) {expr} (scan {cur}))"
        qs.append(expr + ";")
    return "\n".join(lines) + "\n", "\n".join(qs) + "\n"


def core_instance(seed: int, queries: int = 3) -> tuple[str, str]:
    """Random instances of the two-query example: every query joins the same
    expensive but tiny core result A join B with its own small relation."""
    rng = random.Random(seed)
    ta, tb = rng.choice([40000, 80000]), rng.choice([80000, 160000])
    lines = [
        f"relation A tuples={ta} perblock=20",
        f"column x distinct={ta}",
        f"column y distinct=1000",
        f"column v distinct=100 min=0 max=99",
        f"relation B tuples={tb} perblock=20",
        f"column x distinct={tb}",
        f"column y distinct=1000",
        f"column z distinct=5000",
    ]
    qs = []
    for q in range(queries):
        t = rng.choice([2000, 5000, 10000])
        lines += [f"relation C{q} tuples={t} perblock=25",
                  f"column z distinct={min(t, 5000)}",
                  f"column w distinct=50"]
        a = "(scan A)"
        if rng.random() < 0.3:
            a = f"(select (>= A.v {rng.randrange(100)}) {a})"
        core = f"(join (and (= A.x B.x) (= A.y B.y)) {a} (scan B))"
        qs.append(f"(join (= B.z C{q}.z) {core} (scan C{q}));")
    return "\n".join(lines) + "\n", "\n".join(qs) + "\n"
