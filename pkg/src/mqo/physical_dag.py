"""Physical refinement of the logical DAG.

A physical node is a (logical node, property) pair where the property is a
sort order and/or a clustered index.  Only properties that some parent
operator can exploit are created.  Enforcers only lead away from the
no-property node (sort) or from a sorted node (build-index), so the
physical DAG is acyclic whenever the logical one is.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .catalog import DerivedStats, selectivity
from .cost_model import CostModel
from .logical_dag import LogicalDag, describe_params
from .predicates import Atom, and_or_none, conjuncts


@dataclass(frozen=True)
class PhysProp:
    sort_order: tuple[str, ...] = ()
    indexed_on: str | None = None

    def is_none(self) -> bool:
        return not self.sort_order and self.indexed_on is None

    def sort_key(self) -> tuple:
        return (self.indexed_on is not None, self.indexed_on or "", self.sort_order)

    def __str__(self) -> str:
        if self.indexed_on is not None:
            return f"idx({self.indexed_on})"
        if self.sort_order:
            return f"sorted({','.join(self.sort_order)})"
        return "any"


NONE = PhysProp()


def sorted_on(*cols: str) -> PhysProp:
    return PhysProp(tuple(cols), None)


def index_on(col: str) -> PhysProp:
    return PhysProp((), col)


ALGORITHMS = ("relation-scan", "clustered-index", "select-filter", "indexed-select",
              "project", "nested-loops-join", "merge-join", "indexed-join",
              "sort-based-aggregate", "no-op")
ENFORCERS = ("sort", "build-index")


@dataclass
class PhysNode:
    id: int
    logical: int
    prop: PhysProp
    stats: DerivedStats | None
    child_ops: list[int] = field(default_factory=list)
    parent_ops: list[int] = field(default_factory=list)
    requires_mat: bool = False  # usable only once stored (built indexes)
    materializable: bool = True
    base_access: bool = False  # direct access path of a stored base relation
    matcost: int = 0
    reusecost: int = 0
    label: str = ""


@dataclass
class PhysOp:
    id: int
    kind: str
    logical_op: int | None  # None for enforcers
    inputs: tuple[int, ...]
    parent: int
    exec_cost: int
    weights: tuple[int, ...] | None = None

    @property
    def is_enforcer(self) -> bool:
        return self.kind in ENFORCERS


@dataclass(frozen=True)
class PhysicalOptions:
    merge_join: bool = True
    indexed_join: bool = True
    indexed_select: bool = True


class PhysicalDag:
    def __init__(self, ldag: LogicalDag, model: CostModel):
        self.ldag = ldag
        self.model = model
        self.nodes: list[PhysNode] = []
        self.ops: list[PhysOp] = []
        self.index: dict[tuple[int, PhysProp], int] = {}
        self.by_logical: dict[int, list[int]] = {}
        self.root: int = -1
        self.topo: list[int] = []
        self.topo_order: list[int] = []

    def node_for(self, logical: int, prop: PhysProp = NONE) -> int | None:
        return self.index.get((self.ldag.find(logical), prop))

    def _add_node(self, logical: int, prop: PhysProp) -> int:
        ln = self.ldag.nodes[logical]
        n = PhysNode(len(self.nodes), logical, prop, ln.stats)
        n.label = ln.label() + ("" if prop.is_none() else f" @{prop}")
        self.nodes.append(n)
        self.index[(logical, prop)] = n.id
        self.by_logical.setdefault(logical, []).append(n.id)
        return n.id

    def _add_op(self, kind, logical_op, inputs, parent, exec_cost, weights=None) -> int:
        op = PhysOp(len(self.ops), kind, logical_op, tuple(inputs), parent, exec_cost, weights)
        self.ops.append(op)
        self.nodes[parent].child_ops.append(op.id)
        for i in dict.fromkeys(inputs):
            self.nodes[i].parent_ops.append(op.id)
        return op.id

    def enforcer_edges(self, nid: int) -> list[tuple[int, PhysProp]]:
        """Enforcer ops that read ``nid`` and the property each produces."""
        return [(o, self.nodes[self.ops[o].parent].prop) for o in self.nodes[nid].parent_ops
                if self.ops[o].is_enforcer]

    def op_label(self, o: int) -> str:
        op = self.ops[o]
        if op.logical_op is None or op.kind in ("no-op",):
            return op.kind
        lop = self.ldag.ops.get(op.logical_op)
        p = describe_params(lop.kind, lop.params) if lop else ""
        return f"{op.kind} {p}".rstrip()

    def candidates(self) -> list[int]:
        """Physical nodes that may be materialized at all."""
        return [n.id for n in self.nodes
                if n.materializable and not n.base_access and n.id != self.root
                and self.topo[n.id] >= 0]

    def stats_summary(self) -> dict:
        return {"physical_nodes": len(self.nodes), "physical_ops": len(self.ops)}

    def dump(self) -> str:
        lines = []
        for lid in sorted(self.by_logical):
            lines.append(f"e{lid} {self.ldag.nodes[lid].label()}")
            for nid in self.by_logical[lid]:
                n = self.nodes[nid]
                flags = []
                if n.requires_mat:
                    flags.append("needs-mat")
                if n.base_access:
                    flags.append("stored")
                extra = f" [{','.join(flags)}]" if flags else ""
                lines.append(f"  p{nid} {n.prop}{extra}")
                for o in n.child_ops:
                    op = self.ops[o]
                    ins = ", ".join(f"p{i}" for i in op.inputs)
                    lines.append(f"    q{o} {self.op_label(o)} cost={op.exec_cost} <- {ins}")
        return "\n".join(lines) + "\n"


# -------------------------------------------------------------------- building

def _join_sides(a: Atom, left_cols) -> tuple[str, str]:
    x, y = a.col, str(a.value)
    return (x, y) if x in left_cols else (y, x)


def _first_join_atom(pred):
    atoms = [c for c in conjuncts(pred) if isinstance(c, Atom) and c.is_col]
    return min(atoms, key=lambda a: a.sort_key()) if atoms else None


def _index_column(pred) -> str | None:
    atoms = [c for c in conjuncts(pred) if isinstance(c, Atom) and not c.is_col]
    return min(atoms, key=lambda a: a.sort_key()).col if atoms else None


def _matching_blocks(stats: DerivedStats, col: str) -> int:
    per_probe = math.ceil(stats.rows / stats.v(col))
    return max(1, -(-per_probe // stats.tuples_per_block))


def build_physical_dag(ldag: LogicalDag, model: CostModel | None = None,
                       options: PhysicalOptions | None = None) -> PhysicalDag:
    model = model or CostModel.from_params(ldag.catalog.params)
    options = options or PhysicalOptions()
    pd = PhysicalDag(ldag, model)
    cat = ldag.catalog
    order = list(ldag.topo_order)

    def clustered(lid: int) -> str | None:
        fp = ldag.nodes[lid].fp
        if fp[0] != "rel":
            return None
        idx = cat.relation(fp[1]).clustered_index_on
        return f"{fp[1]}.{idx}" if idx else None

    # 1. interesting properties, requested by parent algorithms
    wanted: dict[int, set[PhysProp]] = {lid: {NONE} for lid in order}
    for lid in order:
        for oid in ldag.nodes[lid].child_ops:
            op = ldag.ops[oid]
            if op.kind == "join" and op.params is not None:
                a = _first_join_atom(op.params)
                left, right = op.inputs
                lc, rc = _join_sides(a, set(ldag.nodes[left].columns))
                if options.merge_join:
                    wanted[left].add(sorted_on(lc))
                    wanted[right].add(sorted_on(rc))
                if options.indexed_join:
                    wanted[right].add(index_on(rc))
                    if ldag.commutative_joins:
                        wanted[left].add(index_on(lc))
            elif op.kind == "select" and options.indexed_select:
                c = _index_column(op.params)
                if c is not None:
                    wanted[op.inputs[0]].add(index_on(c))
            elif op.kind in ("aggregate", "regroup"):
                gb = op.params[0]
                if gb:
                    wanted[op.inputs[0]].add(sorted_on(*sorted(gb)))
    for lid in order:
        ci = clustered(lid)
        if ci is not None:
            wanted[lid].add(index_on(ci))
        for p in list(wanted[lid]):
            if p.indexed_on is not None and p.indexed_on != ci:
                wanted[lid].add(sorted_on(p.indexed_on))

    # 2. nodes
    for lid in order:
        ln = ldag.nodes[lid]
        ci = clustered(lid)
        for p in sorted(wanted[lid], key=PhysProp.sort_key):
            nid = pd._add_node(lid, p)
            n = pd.nodes[nid]
            n.materializable = ln.materializable and lid != ldag.root
            if p.indexed_on is not None and p.indexed_on != ci:
                n.requires_mat = True
            if ln.fp[0] == "rel" and (p.is_none() or (ci and p in (index_on(ci), sorted_on(ci)))):
                n.base_access = True
            if n.stats is not None:
                b = n.stats.blocks
                n.matcost = model.matcost(b)
                n.reusecost = model.index_reusecost() if p.indexed_on else model.reusecost(b)

    def node(lid, prop=NONE):
        return pd.index[(lid, prop)]

    def place(kind, loid, inputs, lid, cost, props=(NONE,), weights=None):
        for p in props:
            nid = pd.index.get((lid, p))
            if nid is not None:
                pd._add_op(kind, loid, inputs, nid, cost, weights)

    # 3. algorithms
    for lid in order:
        ln = ldag.nodes[lid]
        out_stats = ln.stats
        ci = clustered(lid)
        for oid in sorted(ln.child_ops):
            op = ldag.ops[oid]
            ins = [ldag.nodes[i] for i in op.inputs]
            if op.kind == "scan":
                c = model.scan(out_stats.blocks)
                props = [NONE] + ([sorted_on(ci)] if ci else [])
                place("relation-scan", oid, (), lid, c, props)
                if ci:
                    place("clustered-index", oid, (), lid, 0, [index_on(ci)])
            elif op.kind == "select":
                x = op.inputs[0]
                place("select-filter", oid, (node(x),), lid, model.filter(ins[0].stats.blocks))
                c = _index_column(op.params) if options.indexed_select else None
                if c is not None:
                    on_c = and_or_none(a for a in conjuncts(op.params)
                                       if isinstance(a, Atom) and not a.is_col and a.col == c)
                    sel = selectivity(on_c, ins[0].stats)
                    place("indexed-select", oid, (node(x, index_on(c)),), lid,
                          model.indexed_select(sel, ins[0].stats.blocks))
            elif op.kind == "project":
                place("project", oid, (node(op.inputs[0]),), lid, model.filter(ins[0].stats.blocks))
            elif op.kind == "join":
                a_id, b_id = op.inputs
                orients = [(a_id, b_id), (b_id, a_id)] if ldag.commutative_joins else [(a_id, b_id)]
                for l, r in orients:
                    ls, rs = ldag.nodes[l].stats, ldag.nodes[r].stats
                    place("nested-loops-join", oid, (node(l), node(r)), lid,
                          model.nested_loops(ls.blocks, rs.blocks))
                if op.params is None:
                    continue
                atom = _first_join_atom(op.params)
                ac, bc = _join_sides(atom, set(ldag.nodes[a_id].columns))
                if options.indexed_join:
                    for (l, lc_), (r, rc_) in ([((a_id, ac), (b_id, bc)), ((b_id, bc), (a_id, ac))]
                                               if ldag.commutative_joins else [((a_id, ac), (b_id, bc))]):
                        ls, rs = ldag.nodes[l].stats, ldag.nodes[r].stats
                        cost = model.indexed_join(ls.tuple_count, _matching_blocks(rs, rc_))
                        place("indexed-join", oid, (node(l), node(r, index_on(rc_))), lid, cost)
                if options.merge_join:
                    sa, sb = ldag.nodes[a_id].stats, ldag.nodes[b_id].stats
                    place("merge-join", oid, (node(a_id, sorted_on(ac)), node(b_id, sorted_on(bc))),
                          lid, model.merge_join(sa.blocks, sb.blocks),
                          [NONE, sorted_on(ac), sorted_on(bc)])
            elif op.kind in ("aggregate", "regroup"):
                gb = op.params[0]
                x = op.inputs[0]
                c = model.aggregate(ins[0].stats.blocks)
                if gb:
                    s = sorted_on(*sorted(gb))
                    place("sort-based-aggregate", oid, (node(x, s),), lid, c, [NONE, s])
                else:
                    place("sort-based-aggregate", oid, (node(x),), lid, c)
            elif op.kind == "noop":
                merged: dict[int, int] = {}
                for q, w in zip(op.inputs, op.weights):
                    merged[node(q)] = merged.get(node(q), 0) + w
                place("no-op", oid, tuple(merged), lid, 0, weights=tuple(merged.values()))
            else:
                raise ValueError(f"no algorithm for {op.kind}")
        # 4. enforcers
        for nid in pd.by_logical[lid]:
            p = pd.nodes[nid].prop
            if p.is_none():
                continue
            if p.indexed_on is None:
                pd._add_op("sort", None, (node(lid),), nid, model.sort(out_stats.blocks))
            elif p.indexed_on != ci:
                src = node(lid, sorted_on(p.indexed_on))
                pd._add_op("build-index", None, (src,), nid, model.build_index(out_stats.blocks))

    pd.root = node(ldag.find(ldag.root))
    _number(pd)
    return pd


def _number(pd: PhysicalDag) -> None:
    """Topological numbers over nodes reachable from the root."""
    order: list[int] = []
    state = [0] * len(pd.nodes)
    stack = [(pd.root, iter(_kids(pd, pd.root)))]
    state[pd.root] = 1
    while stack:
        n, it = stack[-1]
        for c in it:
            if state[c] == 1:
                raise RuntimeError(f"cycle in physical DAG at p{c}")
            if state[c] == 0:
                state[c] = 1
                stack.append((c, iter(_kids(pd, c))))
                break
        else:
            stack.pop()
            state[n] = 2
            order.append(n)
    pd.topo = [-1] * len(pd.nodes)
    for t, n in enumerate(order):
        pd.topo[n] = t
    pd.topo_order = order


def _kids(pd: PhysicalDag, n: int) -> list[int]:
    out = {}
    for o in pd.nodes[n].child_ops:
        for i in pd.ops[o].inputs:
            out[i] = None
    return list(out)
