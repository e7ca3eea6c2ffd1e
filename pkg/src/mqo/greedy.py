"""Greedy choice of results to materialize.

Only nodes that can occur more than once in some plan are considered.  Each
iteration adds the node whose materialization lowers the total batch cost
the most, keeping the cost annotations up to date incrementally.  Benefits
are kept in a max-heap and treated as upper bounds: only the top entry is
recomputed until an entry that is already current reaches the top.
"""

from __future__ import annotations

import heapq
import time
from dataclasses import dataclass, field

from .cost_model import INF, PlanState, PropHeap, best_plan_given
from .logical_dag import LogicalDag
from .physical_dag import PhysicalDag
from .volcano import Plan, extract_plan


class IncrementalMismatch(AssertionError):
    """Incrementally maintained costs differ from a full recomputation."""


# ------------------------------------------------------------------ sharability

@dataclass
class SharabilityInfo:
    degree: dict[int, int]  # logical equivalence node -> degree of sharing
    sharable: frozenset

    def is_sharable(self, logical: int) -> bool:
        return logical in self.sharable


def _ancestors(dag: LogicalDag, z: int) -> set[int]:
    seen = {z}
    stack = [z]
    while stack:
        n = stack.pop()
        for o in dag.nodes[n].parent_ops:
            p = dag.find(dag.ops[o].parent)
            if p not in seen:
                seen.add(p)
                stack.append(p)
    return seen


def degree_of_sharing(dag: LogicalDag, z: int) -> int:
    """Largest number of times ``z`` occurs in any plan tree of the batch.

    Occurrences of a node in a plan tree choose their operators
    independently, so the count is a maximum over alternatives and a
    (query-weighted) sum over the inputs of one operator.
    """
    up = _ancestors(dag, z)
    E: dict[int, int] = {}
    for x in sorted(up, key=lambda n: dag.nodes[n].topo):
        if x == z:
            E[x] = 1
            continue
        best = 0
        for o in dag.nodes[x].child_ops:
            op = dag.ops[o]
            ws = op.weights or (1,) * len(op.inputs)
            s = sum(w * E.get(dag.find(i), 0) for i, w in zip(op.inputs, ws))
            best = max(best, s)
        E[x] = best
    return E[dag.find(dag.root)]


def compute_sharability(dag: LogicalDag) -> SharabilityInfo:
    """Degree of sharing of every live node, one target node at a time."""
    degree = {z: degree_of_sharing(dag, z) for z in sorted(dag.nodes) if dag.nodes[z].topo >= 0}
    sharable = frozenset(z for z, d in degree.items() if d > 1 and dag.nodes[z].materializable)
    return SharabilityInfo(degree, sharable)


def sharable_candidates(pdag: PhysicalDag, info: SharabilityInfo) -> list[int]:
    """Physical nodes worth considering: candidates whose logical node is
    sharable."""
    return [n for n in pdag.candidates() if info.is_sharable(pdag.nodes[n].logical)]


# ----------------------------------------------------------------- cost updates

def update_cost(state: PlanState, new_M) -> int:
    """Move ``state`` to materialized set ``new_M``; returns the number of
    parent-op cost recomputations."""
    return state.update(new_M)


def check_against_full(state: PlanState) -> None:
    fresh = best_plan_given(state.pdag, state.M)
    if fresh.snapshot() != state.snapshot():
        bad = [n for n in range(len(fresh.cost))
               if fresh.cost[n] != state.cost[n] or fresh.best[n] != state.best[n]]
        raise IncrementalMismatch(
            f"incremental costs differ from full recomputation at nodes {bad[:10]}")


# ------------------------------------------------------------------------ heaps

class BenefitHeap:
    """Max-heap of benefit bounds; ties go to the smaller node id."""

    def __init__(self, bounds: dict[int, object]):
        self._heap = [(-b, n) for n, b in bounds.items()]
        heapq.heapify(self._heap)

    def __len__(self) -> int:
        return len(self._heap)

    def top(self) -> tuple[int, object]:
        b, n = self._heap[0]
        return n, -b

    def pop(self) -> tuple[int, object]:
        b, n = heapq.heappop(self._heap)
        return n, -b

    def push(self, n: int, bound) -> None:
        heapq.heappush(self._heap, (-bound, n))


# ----------------------------------------------------------------------- greedy

@dataclass
class TraceEntry:
    iteration: int
    node: int
    benefit: object
    recomputations: int
    propagations: int


@dataclass
class GreedyResult:
    X: frozenset
    plan: Plan
    cost: object
    initial_cost: object
    candidates: list[int]
    benefit_recomputations: int = 0
    propagations: int = 0
    iterations: int = 0
    trace: list[TraceEntry] = field(default_factory=list)
    seconds: float = 0.0


class _Benefits:
    """Exact benefit of adding one node to the current set, measured by
    moving the shared state there and back."""

    def __init__(self, state: PlanState, verify: bool):
        self.state = state
        self.verify = verify
        self.count = 0

    def __call__(self, X: set[int], x: int):
        self.count += 1
        base = self.state.total()
        self.state.update(X | {x})
        if self.verify:
            check_against_full(self.state)
        with_x = self.state.total()
        self.state.update(X)
        if with_x == INF:
            return -INF
        return base - with_x


def monotonic_pick(heap: BenefitHeap, X: set[int], benefit) -> tuple[int | None, object]:
    """Recompute the top entry until an entry whose benefit is current for
    this iteration reaches the top; return it if its benefit is positive."""
    fresh: set[int] = set()
    while heap:
        n, b = heap.top()
        if n in fresh:
            if b > 0:
                heap.pop()
                return n, b
            return None, b
        heap.pop()
        heap.push(n, benefit(X, n))
        fresh.add(n)
    return None, 0


def exhaustive_pick(Y: list[int], X: set[int], benefit) -> tuple[int | None, object]:
    best_n, best_b = None, None
    for n in Y:
        if n in X:
            continue
        b = benefit(X, n)
        if best_b is None or b > best_b:
            best_n, best_b = n, b
    if best_n is None or not best_b > 0:
        return None, best_b if best_b is not None else 0
    return best_n, best_b


def greedy_select(pdag: PhysicalDag, info: SharabilityInfo, *, monotonic: bool = True,
                  verify: bool = False, trace: bool = False) -> GreedyResult:
    """Repeatedly materialize the node with the largest positive benefit.

    ``monotonic`` selects the bound heap; otherwise every remaining benefit
    is recomputed each iteration.  ``verify`` checks the incremental cost
    state against a full recomputation after every change.
    """
    start = time.perf_counter()
    state = best_plan_given(pdag)
    initial = state.total()
    Y = sharable_candidates(pdag, info)
    X: set[int] = set()
    benefit = _Benefits(state, verify)
    heap = None
    if monotonic:
        heap = BenefitHeap({n: state.cost[n] * info.degree[pdag.nodes[n].logical] for n in Y})
    entries: list[TraceEntry] = []
    it = 0
    while True:
        before_r, before_p = benefit.count, state.propagations
        if monotonic:
            x, b = monotonic_pick(heap, X, benefit)
        else:
            x, b = exhaustive_pick(Y, X, benefit)
        if x is None:
            break
        it += 1
        X.add(x)
        state.update(X)
        if verify:
            check_against_full(state)
        if trace:
            entries.append(TraceEntry(it, x, b, benefit.count - before_r,
                                      state.propagations - before_p))
    plan = extract_plan(state)
    return GreedyResult(frozenset(X), plan, plan.cost, initial, Y, benefit.count,
                        state.propagations, it, entries, time.perf_counter() - start)
