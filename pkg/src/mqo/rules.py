"""Transformation rules that expand the initial DAG to a fixpoint, plus the
subsumption derivations added afterwards."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

from .logical_dag import LogicalDag
from .predicates import Atom, Predicate, and_or_none, conjuncts, implies, make_and, make_or

__all__ = ["RuleSet", "ExpansionStats", "ExpansionBudgetError", "expand",
           "add_subsumption_derivations", "implies"]


class ExpansionBudgetError(RuntimeError):
    pass


@dataclass(frozen=True)
class RuleSet:
    select_pushdown: bool = True
    join_commutativity: bool = True
    join_associativity: bool = True
    select_subsumption: bool = True
    select_disjunction: bool = True
    aggregate_subsumption: bool = True
    avoid_duplicates: bool = True
    node_budget: int = 100_000


@dataclass
class ExpansionStats:
    rule_applications: int = 0
    skipped_duplicates: int = 0
    ops_created: int = 0
    unifications: int = 0
    subsumption_ops: list = field(default_factory=list)


class _Expander:
    def __init__(self, dag: LogicalDag, rules: RuleSet, stats: ExpansionStats):
        self.dag = dag
        self.rules = rules
        self.stats = stats
        self.applied: set = set()
        self.queue: deque[int] = deque()
        self.queued: set[int] = set()

    def push(self, oid: int | None) -> None:
        if oid is not None and oid not in self.queued and oid in self.dag.ops:
            self.queued.add(oid)
            self.queue.append(oid)

    def add(self, kind, params, inputs, parent=None) -> int:
        """Add an op; returns the id of the node it lands in."""
        before = len(self.dag.nodes)
        merges = self.dag.unifications
        oid, nid, created = self.dag.add_op(kind, params, inputs, parent)
        if self.dag.unifications != merges:
            # merged nodes expose new combinations anywhere above them
            for o in sorted(self.dag.ops):
                self.push(o)
        if created:
            self.stats.ops_created += 1
            self.push(oid)
            # parents of the node may now match new patterns
            for p in list(self.dag.nodes[self.dag.find(nid)].parent_ops):
                self.push(p)
        if len(self.dag.nodes) > self.rules.node_budget and len(self.dag.nodes) > before:
            raise ExpansionBudgetError(
                f"expansion exceeded the node budget of {self.rules.node_budget} equivalence nodes")
        return self.dag.find(nid)

    def once(self, tag: tuple) -> bool:
        """Duplicate avoidance: False if this exact application was done."""
        self.stats.rule_applications += 1
        if not self.rules.avoid_duplicates:
            return True
        if tag in self.applied:
            self.stats.skipped_duplicates += 1
            self.stats.rule_applications -= 1
            return False
        self.applied.add(tag)
        return True

    def child_ops(self, nid: int, kind: str):
        n = self.dag.nodes[self.dag.find(nid)]
        return [self.dag.ops[o] for o in list(n.child_ops)
                if o in self.dag.ops and self.dag.ops[o].kind == kind
                and not self.dag.ops[o].subsumption]

    def cols(self, nid: int) -> frozenset:
        return frozenset(self.dag.nodes[self.dag.find(nid)].columns)

    def run(self) -> None:
        for oid in sorted(self.dag.ops):
            self.push(oid)
        while self.queue:
            oid = self.queue.popleft()
            self.queued.discard(oid)
            op = self.dag.ops.get(oid)
            if op is None or op.subsumption:
                continue
            if op.kind == "join":
                if self.rules.join_associativity:
                    self.associate(op)
                if self.rules.select_pushdown:
                    self.pull_up(op)
            elif op.kind == "select" and self.rules.select_pushdown:
                self.push_down(op)
                self.split(op)
                self.merge(op)

    # ----------------------------------------------------------------- joins

    def associate(self, op) -> None:
        dag = self.dag
        for side in (0, 1):
            x = op.inputs[side]
            other = op.inputs[1 - side]
            for child in self.child_ops(x, "join"):
                if dag.ops.get(op.id) is None:
                    return
                if not self.once(("assoc", op.id, side, child.id)):
                    continue
                if self.rules.join_commutativity:
                    picks = [0, 1]
                elif side == 0:
                    picks = [1]  # (a b) c -> a (b c)
                else:
                    picks = [0]  # a (b c) -> (a b) c
                for pick in picks:
                    y = child.inputs[pick]
                    z = child.inputs[1 - pick]
                    self._regroup(op, child, y, z, other, side)

    def _regroup(self, op, child, y, z, other, side) -> None:
        dag = self.dag
        atoms = list(conjuncts(op.params)) + list(conjuncts(child.params))
        inner_cols = self.cols(y) | self.cols(other)
        inner = [a for a in atoms if a.columns() <= inner_cols]
        outer = [a for a in atoms if not a.columns() <= inner_cols]
        if self.rules.join_commutativity or side == 0:
            ins = (y, other)
        else:
            ins = (other, y)
        mid = self.add("join", and_or_none(inner), ins)
        parent = dag.find(op.parent)
        if self.rules.join_commutativity or side == 0:
            self.add("join", and_or_none(outer), (z, mid), parent)
        else:
            self.add("join", and_or_none(outer), (mid, z), parent)

    # --------------------------------------------------------------- selects

    def push_down(self, op) -> None:
        x = op.inputs[0]
        for child in self.child_ops(x, "join"):
            if self.dag.ops.get(op.id) is None:
                return
            if not self.once(("push", op.id, child.id)):
                continue
            a, b = child.inputs
            ca, cb = self.cols(a), self.cols(b)
            pa, pb, pj, rest = [], [], list(conjuncts(child.params)), []
            for c in conjuncts(op.params):
                cc = c.columns()
                if cc <= ca:
                    pa.append(c)
                elif cc <= cb:
                    pb.append(c)
                elif isinstance(c, Atom) and c.is_col:
                    pj.append(c)
                else:
                    rest.append(c)
            if not (pa or pb or len(pj) > len(conjuncts(child.params))):
                continue
            na = self.add("select", make_and(pa), (a,)) if pa else a
            nb = self.add("select", make_and(pb), (b,)) if pb else b
            parent = self.dag.find(op.parent)
            if rest:
                j = self.add("join", and_or_none(pj), (na, nb))
                self.add("select", make_and(rest), (j,), parent)
            else:
                self.add("join", and_or_none(pj), (na, nb), parent)

    def pull_up(self, op) -> None:
        for side in (0, 1):
            x = op.inputs[side]
            for child in self.child_ops(x, "select"):
                if self.dag.ops.get(op.id) is None:
                    return
                if not self.once(("pull", op.id, side, child.id)):
                    continue
                ins = list(op.inputs)
                ins[side] = child.inputs[0]
                j = self.add("join", op.params, tuple(ins))
                self.add("select", child.params, (j,), self.dag.find(op.parent))

    def split(self, op) -> None:
        parts = conjuncts(op.params)
        if len(parts) < 2:
            return
        if not self.once(("split", op.id)):
            return
        x = op.inputs[0]
        for i, c in enumerate(parts):
            rest = parts[:i] + parts[i + 1:]
            inner = self.add("select", make_and(rest), (x,))
            if self.dag.ops.get(op.id) is None:
                return
            self.add("select", c, (inner,), self.dag.find(op.parent))

    def merge(self, op) -> None:
        x = op.inputs[0]
        for child in self.child_ops(x, "select"):
            if self.dag.ops.get(op.id) is None:
                return
            if not self.once(("merge", op.id, child.id)):
                continue
            pred = make_and(list(conjuncts(op.params)) + list(conjuncts(child.params)))
            self.add("select", pred, (child.inputs[0],), self.dag.find(op.parent))


# ----------------------------------------------------------------- subsumption

def add_subsumption_derivations(dag: LogicalDag, rules: RuleSet | None = None) -> list:
    """Add derivations of selections/aggregates from more general results.

    Returns ``(derived equiv id, new op id, source equiv id)`` triples for
    every op created.  All ops added here carry the subsumption flag, and
    nodes created here are marked as introduced.
    """
    rules = rules or RuleSet()
    added = []

    def record(oid, nid, src, created):
        if created and oid is not None:
            added.append((dag.find(nid), oid, dag.find(src)))

    for e in sorted(dag.nodes):
        if e not in dag.nodes:
            continue
        selects: dict[int, Predicate] = {}
        aggs: dict[int, tuple] = {}
        for oid in sorted(dag.nodes[e].parent_ops):
            op = dag.ops[oid]
            if op.subsumption or op.inputs != (e,):
                continue
            p = dag.find(op.parent)
            if op.kind == "select" and p not in selects:
                selects[p] = op.params
            elif op.kind == "aggregate" and p not in aggs:
                aggs[p] = op.params
        if len(selects) >= 2 and (rules.select_subsumption or rules.select_disjunction):
            _select_subsumption(dag, e, selects, rules, record)
        if len(aggs) >= 2 and rules.aggregate_subsumption:
            _aggregate_subsumption(dag, e, aggs, record)
    return added


def _select_subsumption(dag, e, selects, rules, record) -> None:
    items = sorted(selects.items())
    if rules.select_subsumption:
        for pi, qi in items:
            for pj, qj in items:
                if pi != pj and implies(qi, qj) and not implies(qj, qi):
                    oid, nid, created = dag.add_op("select", qi, (pj,), pi, subsumption=True)
                    record(oid, nid, pj, created)
    if not rules.select_disjunction:
        return
    maximal = [(p, q) for p, q in items
               if not any(p2 != p and implies(q, q2) for p2, q2 in items)]
    if len(maximal) < 2:
        return
    disj = make_or([q for _, q in maximal])
    oid, d, created = dag.add_op("select", disj, (e,), subsumption=True, introduced=True)
    record(oid, d, e, created)
    if oid is None:
        return
    for p, q in maximal:
        if dag.find(p) == dag.find(d):
            continue
        oid, nid, created = dag.add_op("select", q, (d,), p, subsumption=True)
        record(oid, nid, d, created)


def _aggregate_subsumption(dag, e, aggs, record) -> None:
    groupings = {tuple(sorted(gb)) for gb, _ in aggs.values()}
    if len(groupings) < 2:
        return
    gb_union = tuple(sorted({g for gb, _ in aggs.values() for g in gb}))
    agg_union = tuple(sorted({a for _, al in aggs.values() for a in al}))
    oid, u, created = dag.add_op("aggregate", (gb_union, agg_union), (e,),
                                 subsumption=True, introduced=True)
    record(oid, u, e, created)
    for p, (gb, al) in sorted(aggs.items()):
        if dag.find(p) == dag.find(u):
            continue
        oid, nid, created = dag.add_op("regroup", (gb, al), (u,), p, subsumption=True)
        record(oid, nid, u, created)


# ---------------------------------------------------------------------- driver

def expand(dag: LogicalDag, rules: RuleSet | None = None) -> ExpansionStats:
    """Expand in place to a fixpoint, add subsumption derivations, prune,
    and renumber."""
    rules = rules or RuleSet()
    stats = ExpansionStats()
    before = dag.unifications
    dag.unify_by_fingerprint()
    _Expander(dag, rules, stats).run()
    stats.subsumption_ops = add_subsumption_derivations(dag, rules)
    dag.prune()
    dag.assign_topo_numbers()
    stats.unifications = dag.unifications - before
    return stats
