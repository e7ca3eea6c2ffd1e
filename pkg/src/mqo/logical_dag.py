"""The AND-OR DAG memo.

Equivalence nodes (OR) hold alternative operation nodes (AND) that compute
the same result.  Every equivalence node carries a *fingerprint*: a
canonical description of its result that is independent of how it was
derived.  Select/join trees flatten to ``('spj', leaves, conjuncts)`` so
that any join order or predicate placement over the same inputs lands on
the same fingerprint; this is what drives unification during expansion.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

from .catalog import Catalog, DerivedStats, base_stats, combine, selectivity, with_rows
from .predicates import Predicate, conjuncts, make_and, normalize_conjuncts, render
from .query_ir import (Aggregate, Join, LogicalExpr, Project, QueryBatch, Scan, Select,
                       agg_column)

ROOT_FP = ("root",)

# how each aggregate is recomputed from partial results of itself
REAGGREGATE = {"sum": "sum", "count": "sum", "min": "min", "max": "max"}


class DagError(RuntimeError):
    """Internal inconsistency (a bad transformation, or a cycle)."""


# ------------------------------------------------------------------ fingerprints

def spj_parts(fp) -> tuple[frozenset, frozenset]:
    if fp[0] == "spj":
        return fp[1], fp[2]
    return frozenset((fp,)), frozenset()


def make_spj(leaves: frozenset, conj) -> tuple:
    conj = normalize_conjuncts(conj)
    if len(leaves) == 1 and not conj:
        return next(iter(leaves))
    return ("spj", frozenset(leaves), conj)


def derive_fp(kind: str, params, input_fps) -> tuple:
    """Fingerprint of the result of applying an operator."""
    if kind == "scan":
        return ("rel", params)
    if kind == "select":
        leaves, conj = spj_parts(input_fps[0])
        return make_spj(leaves, conj | set(conjuncts(params)))
    if kind == "join":
        l1, c1 = spj_parts(input_fps[0])
        l2, c2 = spj_parts(input_fps[1])
        return make_spj(l1 | l2, c1 | c2 | set(conjuncts(params)))
    if kind == "project":
        return ("proj", params, input_fps[0])
    if kind == "aggregate":
        gb, aggs = params
        return ("agg", gb, aggs, input_fps[0])
    if kind == "regroup":
        gb, aggs = params
        src = input_fps[0]
        if src[0] != "agg":
            raise DagError("regroup over a non-aggregate")
        return ("agg", gb, aggs, src[3])
    if kind == "noop":
        return ROOT_FP
    raise DagError(f"unknown operator kind {kind}")


def fp_pred_columns(fp) -> frozenset:
    """Columns referenced by any predicate inside the result definition."""
    tag = fp[0]
    if tag == "rel" or tag == "root":
        return frozenset()
    if tag == "spj":
        out = set()
        for c in fp[2]:
            out |= c.columns()
        for leaf in fp[1]:
            out |= fp_pred_columns(leaf)
        return frozenset(out)
    return fp_pred_columns(fp[-1])


def describe_fp(fp) -> str:
    tag = fp[0]
    if tag == "rel":
        return fp[1]
    if tag == "root":
        return "ROOT"
    if tag == "spj":
        leaves = sorted(describe_fp(x) for x in fp[1])
        s = "join{" + ",".join(leaves) + "}" if len(leaves) > 1 else leaves[0]
        sels = [render(c) for c in sorted(fp[2], key=lambda c: c.sort_key())]
        if sels:
            s += " where " + " ".join(sels)
        return s
    if tag == "proj":
        return f"project[{','.join(fp[1])}]({describe_fp(fp[2])})"
    if tag == "agg":
        aggs = ",".join(f"{f}({c})" for f, c in fp[2])
        return f"groupby[{','.join(fp[1])}:{aggs}]({describe_fp(fp[3])})"
    return repr(fp)


def describe_params(kind: str, params) -> str:
    if kind in ("select", "join"):
        return "()" if params is None else render(params)
    if kind == "scan":
        return params
    if kind == "project":
        return ",".join(params)
    if kind in ("aggregate", "regroup"):
        gb, aggs = params
        return f"[{','.join(gb)}] " + ",".join(f"{f}({c})" for f, c in aggs)
    return ""


# ------------------------------------------------------------------- structures

@dataclass
class EquivNode:
    id: int
    fp: tuple
    stats: DerivedStats | None
    child_ops: dict = field(default_factory=dict)  # ordered set of op ids
    parent_ops: dict = field(default_factory=dict)
    topo: int = -1
    materializable: bool = True
    introduced: bool = False

    @property
    def columns(self) -> tuple[str, ...]:
        return self.stats.columns if self.stats else ()

    def label(self) -> str:
        return describe_fp(self.fp)


@dataclass
class OpNode:
    id: int
    kind: str
    params: object
    inputs: tuple[int, ...]
    parent: int
    subsumption: bool = False
    weights: tuple[int, ...] | None = None  # only for the no-op root


class LogicalDag:
    def __init__(self, catalog: Catalog, commutative_joins: bool = True):
        self.catalog = catalog
        self.commutative_joins = commutative_joins
        self.nodes: dict[int, EquivNode] = {}
        self.ops: dict[int, OpNode] = {}
        self.memo: dict[tuple, int] = {}
        self.by_fp: dict[tuple, int] = {}
        self.forward: dict[int, int] = {}
        self.root: int | None = None
        self._next = 0
        self._stats_cache: dict[tuple, DerivedStats] = {}
        self.no_materialize: frozenset = frozenset()
        self.topo_order: list[int] = []
        self.unifications = 0

    # ---------------------------------------------------------------- basics

    def _new_id(self) -> int:
        self._next += 1
        return self._next

    def find(self, i: int) -> int:
        root = i
        while root in self.forward:
            root = self.forward[root]
        while i != root:
            nxt = self.forward[i]
            self.forward[i] = root
            i = nxt
        return root

    def node(self, i: int) -> EquivNode:
        return self.nodes[self.find(i)]

    def key_of(self, kind: str, params, inputs, weights=None) -> tuple:
        if kind == "join" and self.commutative_joins:
            ikey = tuple(sorted(inputs))
        else:
            ikey = tuple(inputs)
        return (kind, params, ikey, weights)

    def stats_for(self, fp) -> DerivedStats | None:
        if fp == ROOT_FP:
            return None
        s = self._stats_cache.get(fp)
        if s is None:
            s = self._compute_stats(fp)
            self._stats_cache[fp] = s
        return s

    def _compute_stats(self, fp) -> DerivedStats:
        params = self.catalog.params
        tag = fp[0]
        if tag == "rel":
            return base_stats(self.catalog.relation(fp[1]), params)
        if tag == "spj":
            leaves = sorted(fp[1], key=repr)
            whole = combine([self.stats_for(x) for x in leaves])
            conj = sorted(fp[2], key=lambda c: c.sort_key())
            sel = selectivity(make_and(conj), whole) if conj else Fraction(1)
            return with_rows(whole, whole.rows * sel, params)
        if tag == "proj":
            inner = self.stats_for(fp[2])
            return with_rows(inner, inner.rows, params, columns=fp[1])
        if tag == "agg":
            _, gb, aggs, src = fp
            inner = self.stats_for(src)
            if gb:
                groups = math.prod((inner.v(g) for g in gb), start=Fraction(1))
                rows = min(inner.rows, groups)
            else:
                rows = Fraction(1) if inner.rows > 0 else Fraction(0)
            cols = list(gb)
            widths = {g: inner.widths[g] for g in gb}
            distinct = {g: min(inner.distinct[g], max(rows, Fraction(1))) for g in gb}
            for f, c in aggs:
                name = agg_column(f, c)
                cols.append(name)
                widths[name] = inner.widths[c]
                distinct[name] = max(rows, Fraction(1))
            tmp = DerivedStats(tuple(cols), rows, distinct, widths, 1)
            return with_rows(tmp, rows, params)
        raise DagError(f"no statistics for {fp!r}")

    def _new_node(self, fp, introduced=False) -> EquivNode:
        n = EquivNode(self._new_id(), fp, self.stats_for(fp), introduced=introduced)
        if fp != ROOT_FP and self.no_materialize and (fp_pred_columns(fp) & self.no_materialize):
            n.materializable = False
        self.nodes[n.id] = n
        self.by_fp.setdefault(fp, n.id)
        return n

    def lookup_fp(self, fp) -> int | None:
        i = self.by_fp.get(fp)
        if i is None:
            return None
        i = self.find(i)
        if i not in self.nodes:
            return None
        return i

    # --------------------------------------------------------------- mutation

    def add_op(self, kind: str, params, inputs, parent: int | None = None, *,
               subsumption: bool = False, weights=None, use_fp: bool = True,
               introduced: bool = False) -> tuple[int | None, int, bool]:
        """Insert an operation node unless its memo key already exists.

        Returns ``(op_id, equiv_id, created)``.  ``op_id`` is None when the
        operator is an identity on its input (the input's node is returned).
        If ``parent`` is given the caller asserts the op computes that node;
        otherwise the node is found by fingerprint (when ``use_fp``) or created.
        """
        inputs = tuple(self.find(i) for i in inputs)
        key = self.key_of(kind, params, inputs, weights)
        existing = self.memo.get(key)
        if existing is not None:
            op = self.ops[existing]
            if parent is not None:
                parent = self.find(parent)
                if parent != op.parent:
                    self.unify(op.parent, parent)
            return existing, self.find(op.parent), False
        fp = derive_fp(kind, params, [self.nodes[i].fp for i in inputs])
        if parent is None:
            for i in inputs:
                if self.nodes[i].fp == fp:
                    return None, i, False
            found = self.lookup_fp(fp) if use_fp else None
            if found is None:
                parent = self._new_node(fp, introduced=introduced).id
            else:
                parent = found
        else:
            parent = self.find(parent)
        if parent in inputs:
            return None, parent, False
        op = OpNode(self._new_id(), kind, params, inputs, parent, subsumption, weights)
        self.ops[op.id] = op
        self.memo[key] = op.id
        self.nodes[parent].child_ops[op.id] = None
        for i in inputs:
            self.nodes[i].parent_ops[op.id] = None
        return op.id, parent, True

    def _delete_op(self, oid: int) -> None:
        op = self.ops.pop(oid)
        key = self.key_of(op.kind, op.params, op.inputs, op.weights)
        if self.memo.get(key) == oid:
            del self.memo[key]
        p = self.nodes.get(op.parent)
        if p is not None:
            p.child_ops.pop(oid, None)
        for i in op.inputs:
            n = self.nodes.get(i)
            if n is not None:
                n.parent_ops.pop(oid, None)

    def unify(self, winner: int, loser: int) -> int:
        """Merge ``loser`` into ``winner``; cascades through duplicate parents."""
        winner, loser = self.find(winner), self.find(loser)
        if winner == loser:
            raise ValueError("cannot unify a node with itself")
        pending = [(winner, loser)]
        while pending:
            w, l = pending.pop()
            w, l = self.find(w), self.find(l)
            if w == l:
                continue
            self._merge(w, l, pending)
        winner = self.find(winner)
        if self._reaches(winner, winner):
            raise DagError(f"unification created a cycle through node {winner}")
        return winner

    def _merge(self, w: int, l: int, pending: list) -> None:
        self.unifications += 1
        W, L = self.nodes[w], self.nodes[l]
        touched = list(L.child_ops) + list(L.parent_ops)
        for oid in touched:
            op = self.ops[oid]
            key = self.key_of(op.kind, op.params, op.inputs, op.weights)
            if self.memo.get(key) == oid:
                del self.memo[key]
        for oid in L.child_ops:
            self.ops[oid].parent = w
            W.child_ops[oid] = None
        for oid in L.parent_ops:
            op = self.ops[oid]
            op.inputs = tuple(w if i == l else i for i in op.inputs)
            W.parent_ops[oid] = None
        self.forward[l] = w
        del self.nodes[l]
        self.by_fp[L.fp] = w
        W.materializable = W.materializable and L.materializable
        W.introduced = W.introduced and L.introduced
        if l == self.root:
            self.root = w
        for oid in dict.fromkeys(touched):
            op = self.ops.get(oid)
            if op is None:
                continue
            if op.parent in op.inputs:
                self._delete_op(oid)
                continue
            key = self.key_of(op.kind, op.params, op.inputs, op.weights)
            other = self.memo.get(key)
            if other is None or other == oid:
                self.memo[key] = oid
                continue
            dup_parent = op.parent
            self._delete_op(oid)
            keep_parent = self.ops[other].parent
            if keep_parent != dup_parent:
                pending.append((keep_parent, dup_parent))

    def _reaches(self, start: int, target: int) -> bool:
        """True if ``target`` is a proper descendant of ``start``."""
        seen = set()
        stack = [i for o in self.nodes[start].child_ops for i in self.ops[o].inputs]
        while stack:
            n = stack.pop()
            if n == target:
                return True
            if n in seen:
                continue
            seen.add(n)
            stack.extend(i for o in self.nodes[n].child_ops for i in self.ops[o].inputs)
        return False

    def unify_by_fingerprint(self) -> int:
        """Merge all nodes that share a fingerprint; returns merges done."""
        groups: dict[tuple, list[int]] = {}
        for nid in sorted(self.nodes):
            groups.setdefault(self.nodes[nid].fp, []).append(nid)
        merged = 0
        for fp, ids in groups.items():
            ids = [self.find(i) for i in ids]
            w = ids[0]
            for l in ids[1:]:
                w, l = self.find(w), self.find(l)
                if w != l:
                    self.unify(min(w, l), max(w, l))
                    merged += 1
            self.by_fp[fp] = self.find(w)
        return merged

    # ----------------------------------------------------------------- shape

    def install_root(self, query_nodes: list[int], weights: list[int]) -> int:
        root = self._new_node(ROOT_FP)
        root.materializable = False
        self.root = root.id
        self.add_op("noop", None, query_nodes, parent=root.id, weights=tuple(weights))
        return root.id

    def root_op(self) -> OpNode:
        (oid,) = self.nodes[self.find(self.root)].child_ops
        return self.ops[oid]

    def query_roots(self) -> list[tuple[int, int]]:
        op = self.root_op()
        return list(zip(op.inputs, op.weights))

    def children(self, nid: int) -> list[int]:
        """Distinct equivalence-node children (through any op)."""
        out = {}
        for o in self.nodes[nid].child_ops:
            for i in self.ops[o].inputs:
                out[i] = None
        return list(out)

    def prune(self) -> int:
        """Drop nodes unreachable from the root; returns how many."""
        reach = set()
        stack = [self.find(self.root)]
        while stack:
            n = stack.pop()
            if n in reach:
                continue
            reach.add(n)
            stack.extend(self.children(n))
        dead = [n for n in self.nodes if n not in reach]
        for n in dead:
            for oid in list(self.nodes[n].child_ops):
                self._delete_op(oid)
        for n in dead:
            del self.nodes[n]
        return len(dead)

    def assign_topo_numbers(self) -> None:
        """Number nodes so every descendant precedes its ancestors."""
        order: list[int] = []
        state: dict[int, int] = {}  # 1 = on stack, 2 = done
        root = self.find(self.root)
        stack = [(root, iter(self._sorted_children(root)))]
        state[root] = 1
        while stack:
            n, it = stack[-1]
            for c in it:
                s = state.get(c)
                if s == 1:
                    raise DagError(f"cycle through node {c}")
                if s is None:
                    state[c] = 1
                    stack.append((c, iter(self._sorted_children(c))))
                    break
            else:
                stack.pop()
                state[n] = 2
                order.append(n)
        for t, n in enumerate(order):
            self.nodes[n].topo = t
        for n in self.nodes:
            if n not in state:
                self.nodes[n].topo = -1
        self.topo_order = order

    def _sorted_children(self, n: int) -> list[int]:
        out = {}
        for o in sorted(self.nodes[n].child_ops):
            for i in self.ops[o].inputs:
                out[i] = None
        return list(out)

    # -------------------------------------------------------------- checking

    def check_invariants(self) -> None:
        seen = {}
        for oid, op in self.ops.items():
            key = self.key_of(op.kind, op.params, op.inputs, op.weights)
            if key in seen:
                raise DagError(f"ops {seen[key]} and {oid} share a memo key")
            seen[key] = oid
            if self.memo.get(key) != oid:
                raise DagError(f"op {oid} missing from the memo index")
            if op.parent not in self.nodes or oid not in self.nodes[op.parent].child_ops:
                raise DagError(f"op {oid} has a dangling parent")
            for i in op.inputs:
                if i not in self.nodes or oid not in self.nodes[i].parent_ops:
                    raise DagError(f"op {oid} has a dangling input {i}")
        if len(self.memo) != len(self.ops):
            raise DagError("memo index holds stale keys")
        for nid, n in self.nodes.items():
            for o in n.child_ops:
                if self.ops[o].parent != nid:
                    raise DagError(f"node {nid} lists foreign child op {o}")
            if n.topo >= 0:
                for c in self.children(nid):
                    if self.nodes[c].topo >= n.topo:
                        raise DagError(f"topological order violated at {nid}")

    def stats_summary(self) -> dict:
        return {
            "equivalence_nodes": len(self.nodes),
            "operation_nodes": len(self.ops),
        }

    def dump(self) -> str:
        lines = []
        for nid in sorted(self.nodes):
            n = self.nodes[nid]
            flags = []
            if nid == self.root:
                flags.append("root")
            if not n.materializable:
                flags.append("nomat")
            if n.introduced:
                flags.append("introduced")
            size = "" if n.stats is None else f" rows={n.stats.tuple_count} blocks={n.stats.blocks}"
            extra = (" [" + ",".join(flags) + "]") if flags else ""
            lines.append(f"e{nid} topo={n.topo}{size}{extra} {n.label()}")
            for oid in sorted(n.child_ops):
                op = self.ops[oid]
                ins = ", ".join(f"e{i}" for i in op.inputs)
                p = describe_params(op.kind, op.params)
                w = f" weights={list(op.weights)}" if op.weights else ""
                sub = " (subsumption)" if op.subsumption else ""
                lines.append(f"  o{oid} {op.kind} {p}{w} <- {ins}{sub}".replace("  <-", " <-"))
        return "\n".join(lines) + "\n"


# ------------------------------------------------------------------ construction

def _add_expr(dag: LogicalDag, expr: LogicalExpr) -> int:
    if isinstance(expr, Scan):
        return dag.add_op("scan", expr.relation, (), use_fp=False)[1]
    if isinstance(expr, Select):
        x = _add_expr(dag, expr.input)
        return dag.add_op("select", expr.pred, (x,), use_fp=False)[1]
    if isinstance(expr, Project):
        x = _add_expr(dag, expr.input)
        return dag.add_op("project", expr.columns, (x,), use_fp=False)[1]
    if isinstance(expr, Join):
        l = _add_expr(dag, expr.left)
        r = _add_expr(dag, expr.right)
        return dag.add_op("join", expr.pred, (l, r), use_fp=False)[1]
    if isinstance(expr, Aggregate):
        x = _add_expr(dag, expr.input)
        return dag.add_op("aggregate", (expr.group_by, expr.aggregates), (x,), use_fp=False)[1]
    raise TypeError(f"not an expression: {expr!r}")


def build_initial_dag(batch: QueryBatch, catalog: Catalog,
                      commutative_joins: bool = True) -> LogicalDag:
    """One node per distinct subexpression; duplicates merge through the memo
    index only (equivalent but differently shaped trees stay apart until
    expansion)."""
    if not batch.queries:
        raise ValueError("empty batch")
    dag = LogicalDag(catalog, commutative_joins)
    nomat = set()
    for q in batch.queries:
        nomat |= q.no_materialize
    dag.no_materialize = frozenset(nomat)
    roots = [_add_expr(dag, q.expr) for q in batch.queries]
    dag.install_root(roots, [q.weight for q in batch.queries])
    dag.assign_topo_numbers()
    return dag
