"""Volcano-SH: choose materializations bottom-up over a fixed consolidated
plan, using the number of plan parents as a lower bound on uses."""

from __future__ import annotations

from dataclasses import dataclass, field

from .cost_model import INF, PlanState, best_plan_given
from .physical_dag import PhysicalDag
from .volcano import Plan, evaluate_plan, make_plan, reachable_choice


@dataclass(frozen=True)
class Rewrite:
    """Plan node ``node`` switches from ``old_op`` to ``new_op``, which reads
    the more general result ``target``."""

    node: int
    old_op: int
    new_op: int
    target: int
    introduced: bool


@dataclass
class ShResult:
    M: frozenset
    plan: Plan
    cost: object
    numuses: dict[int, int] = field(default_factory=dict)
    node_cost: dict[int, object] = field(default_factory=dict)
    kept: list[Rewrite] = field(default_factory=list)
    undone: list[Rewrite] = field(default_factory=list)


def reuse_pays_off(cost, matcost, reusecost, nu: int) -> bool:
    """matcost/(nu-1) + reusecost < cost, false when nu <= 1."""
    if nu <= 1:
        return False
    return matcost + (nu - 1) * reusecost < (nu - 1) * cost


def numuses_lower(plan: Plan, n: int) -> int:
    return plan.numuses_lower(n)


def _subsumption_ops(pdag: PhysicalDag, n: int):
    """Filter ops under ``n`` whose logical op is a subsumption derivation."""
    ldag = pdag.ldag
    for o in pdag.nodes[n].child_ops:
        op = pdag.ops[o]
        if op.kind != "select-filter" or op.logical_op is None:
            continue
        lop = ldag.ops.get(op.logical_op)
        if lop is not None and lop.subsumption:
            yield o, op.inputs[0]


def find_rewrites(plan: Plan, base: PlanState | None = None) -> tuple[list[Rewrite], dict[int, int]]:
    """Subsumption rewrites applicable to the plan.

    Returns the rewrites and the extra choices needed to compute introduced
    nodes (taken from the Volcano best plans).
    """
    pdag = plan.pdag
    ldag = pdag.ldag
    in_plan = set(plan.choice)
    topo = pdag.topo
    implication: list[Rewrite] = []
    via_introduced: dict[int, list[tuple[int, int]]] = {}
    for x in sorted(in_plan, key=lambda n: topo[n]):
        node = pdag.nodes[x]
        if not node.prop.is_none() or x == pdag.root:
            continue
        cur = pdag.ops[plan.choice[x]]
        if cur.logical_op is not None:
            lop = ldag.ops.get(cur.logical_op)
            if lop is not None and lop.subsumption:
                continue
        options = []
        for o, src in _subsumption_ops(pdag, x):
            if topo[src] < 0 or topo[src] >= topo[x]:
                continue
            src_logical = ldag.nodes.get(pdag.nodes[src].logical)
            if src_logical is not None and src_logical.introduced:
                via_introduced.setdefault(src, []).append((x, o))
            elif src in in_plan:
                options.append((pdag.nodes[src].stats.blocks, src, o))
        if options:
            _, src, o = min(options)
            implication.append(Rewrite(x, plan.choice[x], o, src, False))
    rewrites = list(implication)
    rewritten = {r.node for r in implication}
    extra: dict[int, int] = {}
    if via_introduced:
        base = base or best_plan_given(pdag)
        for d, users in sorted(via_introduced.items()):
            users = [(x, o) for x, o in users if x not in rewritten]
            if len(users) < 2:
                continue
            for x, o in users:
                rewrites.append(Rewrite(x, plan.choice[x], o, d, True))
                rewritten.add(x)
            for n, o in reachable_from(pdag, base.best, d).items():
                if n not in in_plan:
                    extra.setdefault(n, o)
    return rewrites, extra


def reachable_from(pdag: PhysicalDag, best, start: int) -> dict[int, int]:
    out: dict[int, int] = {}
    stack = [start]
    while stack:
        n = stack.pop()
        if n in out:
            continue
        out[n] = best[n]
        stack.extend(pdag.ops[best[n]].inputs)
    return out


def subsumption_prepass(plan: Plan, base: PlanState | None = None) -> tuple[Plan, list[Rewrite]]:
    """The plan with every applicable subsumption derivation switched in."""
    rewrites, extra = find_rewrites(plan, base)
    choice = dict(plan.choice)
    choice.update(extra)
    for r in rewrites:
        choice[r.node] = r.new_op
    pd = plan.pdag
    choice = reachable_choice(pd, choice, plan.M)
    return make_plan(pd, choice, plan.M), rewrites


def _parent_counts(pdag: PhysicalDag, choice: dict[int, int]) -> dict[int, int]:
    counts = {n: 0 for n in choice}
    for n, o in choice.items():
        op = pdag.ops[o]
        ws = op.weights or (1,) * len(op.inputs)
        for i, w in zip(op.inputs, ws):
            counts[i] = counts.get(i, 0) + w
    return counts


def volcano_sh(plan: Plan, base: PlanState | None = None) -> ShResult:
    """Decide materializations over ``plan`` (which must have no
    materialized nodes yet).

    Nodes are visited bottom-up.  An ordinary plan node is materialized when
    the lower bound on its uses already guarantees a saving.  A node that
    other plan nodes could be derived from (a subsumption target) is
    materialized only if switching those nodes over to it and storing it
    lowers the cost of the whole plan; otherwise the derivations are undone.
    """
    pdag = plan.pdag
    rewrites, extra = find_rewrites(plan, base)
    by_target: dict[int, list[Rewrite]] = {}
    for r in rewrites:
        by_target.setdefault(r.target, []).append(r)

    original = set(plan.choice)
    choice = dict(plan.choice)
    # every op choice seen so far, so that a target dropped from the plan by
    # an earlier rewrite can be brought back by a later one
    known = dict(plan.choice)
    known.update(extra)
    parents = _parent_counts(pdag, choice)
    M: set[int] = set()
    cost: dict[int, object] = {}
    numuses: dict[int, int] = {}
    kept: list[Rewrite] = []
    undone: list[Rewrite] = []

    def use_cost(i):
        node = pdag.nodes[i]
        if i in M:
            return node.reusecost if node.requires_mat else min(cost[i], node.reusecost)
        return INF if node.requires_mat else cost[i]

    def compute(n):
        op = pdag.ops[choice[n]]
        ws = op.weights or (1,) * len(op.inputs)
        t = op.exec_cost
        for i, w in zip(op.inputs, ws):
            t = t + w * use_cost(i)
        cost[n] = t

    for e in sorted(original | set(by_target), key=lambda n: pdag.topo[n]):
        node = pdag.nodes[e]
        eligible = e != pdag.root and node.materializable and not node.base_access
        pending = by_target.get(e)
        if pending and eligible:
            trial = dict(choice)
            for n, o in known.items():
                trial.setdefault(n, o)
            for r in pending:
                trial[r.node] = r.new_op
            trial = reachable_choice(pdag, trial, M)
            _, before = evaluate_plan(pdag, reachable_choice(pdag, choice, M), M)
            after_costs, after = evaluate_plan(pdag, trial, M | {e})
            trial_parents = _parent_counts(pdag, trial)
            nu = trial_parents.get(e, 0)
            if reuse_pays_off(after_costs[e], node.matcost, node.reusecost, nu) and after < before:
                for n in trial:
                    if pdag.topo[n] <= pdag.topo[e]:
                        cost[n] = after_costs[n]
                choice, parents = trial, trial_parents
                known.update(trial)
                numuses[e] = nu
                M.add(e)
                kept.extend(pending)
                continue
            undone.extend(pending)
        if e not in choice:
            continue
        compute(e)
        if not eligible:
            continue
        nu = parents.get(e, 0)
        numuses[e] = nu
        ce = cost[e]
        if reuse_pays_off(ce, node.matcost, node.reusecost, nu) and \
                ce + node.matcost + nu * node.reusecost < nu * ce:
            M.add(e)

    final_choice = reachable_choice(pdag, choice, M)
    final_M = {m for m in M if m in final_choice}
    # a later rewrite can take plan parents away from a stored node, so
    # recheck the test on the final plan until nothing more is dropped
    while True:
        final = make_plan(pdag, final_choice, final_M)
        counts = _parent_counts(pdag, final_choice)
        drop = {e for e in final_M if not pdag.nodes[e].requires_mat and not reuse_pays_off(
            final.node_costs[e], pdag.nodes[e].matcost, pdag.nodes[e].reusecost, counts[e])}
        if not drop:
            break
        final_M -= drop
        final_choice = reachable_choice(pdag, final_choice, final_M)
    for e in final_M:
        numuses[e] = counts[e]
        cost[e] = final.node_costs[e]
    return ShResult(frozenset(final_M), final, final.cost, numuses, cost, kept, undone)
