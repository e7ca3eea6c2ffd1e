"""Plain Volcano optimization and DAG-structured plans."""

from __future__ import annotations

from dataclasses import dataclass, field

from .cost_model import INF, PlanState, best_plan_given, to_ms
from .physical_dag import PhysicalDag


class PlanError(RuntimeError):
    pass


@dataclass
class Plan:
    """A chosen op for every node the plan computes.

    The plan is rooted at the pseudo-root; materialized nodes are extra
    roots (each is computed once and written out).
    """

    pdag: PhysicalDag
    choice: dict[int, int]
    M: frozenset = frozenset()
    cost: object = None
    node_costs: dict[int, object] = field(default_factory=dict)

    @property
    def root(self) -> int:
        return self.pdag.root

    def nodes(self) -> list[int]:
        """Plan nodes, descendants first."""
        topo = self.pdag.topo
        return sorted(self.choice, key=lambda n: topo[n])

    def inputs(self, n: int) -> list[tuple[int, int]]:
        op = self.pdag.ops[self.choice[n]]
        ws = op.weights or (1,) * len(op.inputs)
        return list(zip(op.inputs, ws))

    def parent_edges(self) -> dict[int, list[tuple[int, int]]]:
        out: dict[int, list[tuple[int, int]]] = {n: [] for n in self.choice}
        for n in self.choice:
            for i, w in self.inputs(n):
                out[i].append((n, w))
        return out

    def numuses_lower(self, n: int) -> int:
        """Number of plan parent edges of ``n`` (query edges count their
        weight); never exceeds the plan-tree use count."""
        total = 0
        for p in self.choice:
            for i, w in self.inputs(p):
                if i == n:
                    total += w
        return total

    def tree_uses(self, M=None) -> dict[int, int]:
        """Occurrences of each node in the plan tree, where nodes in ``M``
        (default: none) are computed once and referenced thereafter."""
        M = frozenset() if M is None else frozenset(M)
        uses = {n: 0 for n in self.choice}
        uses[self.root] = 1
        for n in reversed(self.nodes()):
            runs = 1 if n in M else uses[n]
            for i, w in self.inputs(n):
                uses[i] += runs * w
        return uses

    def render(self) -> str:
        uses = self.tree_uses(self.M)
        lines: list[str] = []
        shown: set[int] = set()

        def walk(n: int, depth: int, w: int) -> None:
            node = self.pdag.nodes[n]
            pad = "  " * depth
            mult = f" x{w}" if w != 1 else ""
            tag = " [materialized]" if n in self.M else ""
            if n in shown:
                lines.append(f"{pad}-> p{n}{mult}{tag} (see above)")
                return
            shown.add(n)
            c = self.node_costs.get(n)
            cs = f" cost={to_ms(c):.3f}ms" if c is not None else ""
            lines.append(f"{pad}p{n} {self.pdag.op_label(self.choice[n])} "
                         f"[{node.prop}]{cs} uses={uses[n]}{mult}{tag}  {node.label}")
            for i, wi in self.inputs(n):
                walk(i, depth + 1, wi)

        walk(self.root, 0, 1)
        for s in sorted(self.M, key=lambda n: self.pdag.topo[n]):
            if s not in shown:
                walk(s, 0, 1)
        total = "inf" if self.cost == INF else f"{to_ms(self.cost):.3f}ms"
        lines.append(f"total cost {total}")
        return "\n".join(lines) + "\n"


def reachable_choice(pdag: PhysicalDag, best, M=frozenset()) -> dict[int, int]:
    """Follow chosen ops from the root and from each materialized node."""
    choice: dict[int, int] = {}
    stack = [pdag.root] + sorted(M)
    while stack:
        n = stack.pop()
        if n in choice:
            continue
        o = best[n] if not isinstance(best, dict) else best.get(n, -1)
        if o is None or o < 0:
            raise PlanError(f"no chosen operator for p{n}")
        if pdag.ops[o].parent != n:
            raise PlanError(f"chosen operator q{o} does not belong to p{n}")
        choice[n] = o
        stack.extend(pdag.ops[o].inputs)
    return choice


def evaluate_plan(pdag: PhysicalDag, choice: dict[int, int], M=frozenset()):
    """Cost a fixed plan bottom-up.  A parent pays the reuse cost for a
    materialized input when that is cheaper than recomputing it."""
    M = frozenset(M)
    node_costs: dict[int, object] = {}
    for n in sorted(choice, key=lambda x: pdag.topo[x]):
        op = pdag.ops[choice[n]]
        t = op.exec_cost
        ws = op.weights or (1,) * len(op.inputs)
        for i, w in zip(op.inputs, ws):
            inp = pdag.nodes[i]
            if i in M:
                c = inp.reusecost if inp.requires_mat else min(node_costs[i], inp.reusecost)
            else:
                c = INF if inp.requires_mat else node_costs[i]
            t = t + w * c
        node_costs[n] = t
    total = node_costs[pdag.root]
    for s in sorted(M):
        total = total + node_costs[s] + pdag.nodes[s].matcost
    return node_costs, total


def make_plan(pdag: PhysicalDag, choice: dict[int, int], M=frozenset()) -> Plan:
    node_costs, total = evaluate_plan(pdag, choice, M)
    return Plan(pdag, choice, frozenset(M), total, node_costs)


def extract_plan(state: PlanState) -> Plan:
    choice = reachable_choice(state.pdag, state.best, state.M)
    return make_plan(state.pdag, choice, state.M)


def optimize_volcano(pdag: PhysicalDag) -> tuple[Plan, object]:
    state = best_plan_given(pdag)
    plan = extract_plan(state)
    return plan, plan.cost
