"""Volcano-RU: optimize the queries one at a time, letting each query reuse
results that earlier queries' plans would make worth storing, then decide
the final materializations with Volcano-SH."""

from __future__ import annotations

from dataclasses import dataclass, field

from .cost_model import PlanState, best_plan_given
from .physical_dag import PhysicalDag
from .volcano import Plan, make_plan, reachable_choice
from .volcano_sh import ShResult, volcano_sh


@dataclass
class RuResult:
    M: frozenset
    plan: Plan
    cost: object
    order: str
    N: frozenset = frozenset()
    count: dict[int, int] = field(default_factory=dict)
    combined: Plan | None = None
    sh: ShResult | None = None


def query_nodes(pdag: PhysicalDag) -> list[tuple[int, int]]:
    """(physical query node, weight) for each input of the pseudo-root."""
    root = pdag.nodes[pdag.root]
    op = pdag.ops[root.child_ops[0]]
    ws = op.weights or (1,) * len(op.inputs)
    return list(zip(op.inputs, ws))


def worth_one_more_use(cost, matcost, reusecost, count: int) -> bool:
    """Storing pays off if the result is used once more than seen so far."""
    return cost + matcost + count * reusecost < (count + 1) * cost


def _query_plan(state: PlanState, start: int) -> dict[int, int]:
    """Best plan of one query given ``state``; nodes read from storage are
    included but not expanded."""
    pdag = state.pdag
    out: dict[int, int] = {}
    stack = [start]
    while stack:
        n = stack.pop()
        if n in out:
            continue
        out[n] = state.best[n]
        if state.reuses(n):
            continue
        stack.extend(pdag.ops[state.best[n]].inputs)
    return out


def volcano_ru(pdag: PhysicalDag, order: list[int] | None = None,
               label: str = "forward") -> RuResult:
    """``order`` lists positions into the query list (default: as given)."""
    queries = query_nodes(pdag)
    order = list(range(len(queries))) if order is None else list(order)
    # a built index is only usable once stored, which the SH pass cannot
    # guarantee, so only ordinary results are offered for reuse
    candidates = {n for n in pdag.candidates() if not pdag.nodes[n].requires_mat}
    state = best_plan_given(pdag)
    N: set[int] = set()
    count: dict[int, int] = {}
    combined: dict[int, int] = {}
    for qi in order:
        q, _ = queries[qi]
        if state.M != N:
            state.update(N)
        plan_i = _query_plan(state, q)
        for e, o in plan_i.items():
            combined.setdefault(e, o)
            count[e] = count.get(e, 0) + 1
            if e in candidates and e not in N:
                node = pdag.nodes[e]
                if worth_one_more_use(state.cost[e], node.matcost, node.reusecost, count[e]):
                    N.add(e)
    root = pdag.root
    combined[root] = pdag.nodes[root].child_ops[0]
    choice = reachable_choice(pdag, _fill(pdag, combined, state))
    plan = make_plan(pdag, choice)
    sh = volcano_sh(plan)
    return RuResult(sh.M, sh.plan, sh.cost, label, frozenset(N), count, plan, sh)


def _fill(pdag: PhysicalDag, combined: dict[int, int], state: PlanState) -> dict[int, int]:
    """Complete the combined choice map below any node that was only ever
    read from storage (its own choice is in ``combined``, but a stored node
    that never appeared expanded falls back to the current best plan)."""
    out = dict(combined)
    stack = list(combined.values())
    while stack:
        o = stack.pop()
        for i in pdag.ops[o].inputs:
            if i not in out:
                out[i] = state.best[i]
                stack.append(out[i])
    return out


def volcano_ru_bidirectional(pdag: PhysicalDag) -> RuResult:
    """Run in the given and in the reversed query order; keep the cheaper
    (the given order on ties)."""
    k = len(query_nodes(pdag))
    fwd = volcano_ru(pdag, list(range(k)), "forward")
    if k < 2:
        return fwd
    rev = volcano_ru(pdag, list(reversed(range(k))), "reverse")
    return rev if rev.cost < fwd.cost else fwd
