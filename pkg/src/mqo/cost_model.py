"""Operator cost formulas and the cost recursion with a materialized set.

Costs are integers in units of 0.001 ms.  Each formula is evaluated exactly
(rationals) and rounded half-up once per operator, so every sum of costs is
exact and reproducible.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import TYPE_CHECKING, Iterable

from .catalog import CostParams

if TYPE_CHECKING:
    from .physical_dag import PhysicalDag

INF = math.inf
UNITS_PER_MS = 1000


def to_units(ms: Fraction) -> int:
    return math.floor(ms * UNITS_PER_MS + Fraction(1, 2))


def to_ms(units) -> float:
    return units / UNITS_PER_MS


@dataclass(frozen=True)
class CostModel:
    """Exact-arithmetic view of :class:`CostParams`."""

    seek: Fraction
    read: Fraction
    write: Fraction
    cpu: Fraction
    memory: int

    @classmethod
    def from_params(cls, p: CostParams) -> "CostModel":
        return cls(Fraction(str(p.seek_ms)), Fraction(str(p.read_ms_per_block)),
                   Fraction(str(p.write_ms_per_block)), Fraction(str(p.cpu_ms_per_block)),
                   p.operator_memory_blocks)

    def scan(self, blocks: int) -> int:
        return to_units(self.seek + blocks * (self.read + self.cpu))

    def filter(self, blocks_in: int) -> int:
        """Pipelined select or project."""
        return to_units(self.cpu * blocks_in)

    def indexed_select(self, sel: Fraction, blocks: int) -> int:
        return to_units(self.seek + math.ceil(sel * blocks) * (self.read + self.cpu))

    def nlj_passes(self, outer_blocks: int) -> int:
        return max(1, -(-outer_blocks // (self.memory - 1)))

    def nested_loops(self, outer_blocks: int, inner_blocks: int) -> int:
        """Block nested loops: the outer is consumed in memory-sized chunks and
        the inner is scanned once per chunk.  With more than one pass the
        pipelined inner is spooled to disk once and re-read on later passes."""
        passes = self.nlj_passes(outer_blocks)
        ms = self.cpu * (outer_blocks + passes * inner_blocks)
        if passes > 1:
            ms += self.seek + inner_blocks * self.write
            ms += (passes - 1) * (self.seek + inner_blocks * self.read)
        return to_units(ms)

    def merge_join(self, left_blocks: int, right_blocks: int) -> int:
        return to_units(self.cpu * (left_blocks + right_blocks))

    def indexed_join(self, probes: int, matching_blocks: int) -> int:
        return to_units(probes * (self.seek + matching_blocks * (self.read + self.cpu)))

    def sort_passes(self, blocks: int) -> int:
        runs = -(-blocks // self.memory)
        fan_in = self.memory - 1
        p, reach = 1, fan_in
        while reach < runs:
            p += 1
            reach *= fan_in
        return p

    def sort(self, blocks: int) -> int:
        if blocks <= self.memory:
            return to_units(self.cpu * blocks)
        p = self.sort_passes(blocks)
        return to_units(2 * blocks * (self.read + self.write + self.cpu) * p)

    def aggregate(self, blocks_in: int) -> int:
        return to_units(self.cpu * blocks_in)

    def build_index(self, blocks: int) -> int:
        return to_units(blocks * (self.read + self.write))

    def matcost(self, blocks: int) -> int:
        return to_units(self.seek + blocks * self.write)

    def reusecost(self, blocks: int) -> int:
        return to_units(self.seek + blocks * (self.read + self.cpu))

    def index_reusecost(self) -> int:
        """Opening a stored index; the probes are charged by the consumer."""
        return to_units(self.seek)


# ------------------------------------------------------------------- plan state

class PropHeap:
    """Min-heap of node ids keyed by topological number, without duplicates."""

    def __init__(self, topo: list[int]):
        self.topo = topo
        self._heap: list[tuple[int, int]] = []
        self._members: set[int] = set()

    def __len__(self) -> int:
        return len(self._heap)

    def push(self, n: int) -> None:
        if n not in self._members:
            self._members.add(n)
            heapq.heappush(self._heap, (self.topo[n], n))

    def pop(self) -> int:
        _, n = heapq.heappop(self._heap)
        self._members.discard(n)
        return n


class PlanState:
    """Cost annotations of every physical node for a given materialized set.

    ``cost[n]`` is the cost of computing ``n`` (its inputs charged through
    ``C``); ``best[n]`` the chosen child op; ``op_total[o]`` the op's cost
    including its inputs.  ``C(n)`` is what a parent pays to use ``n``.
    """

    def __init__(self, pdag: "PhysicalDag", materialized: Iterable[int] = ()):
        self.pdag = pdag
        self.M: set[int] = set(materialized)
        n, m = len(pdag.nodes), len(pdag.ops)
        self.cost: list = [INF] * n
        self.best: list[int] = [-1] * n
        self.op_total: list = [INF] * m
        self.propagations = 0
        self.recompute_all()

    # ----------------------------------------------------------------- access

    def C(self, n: int):
        node = self.pdag.nodes[n]
        if n in self.M:
            if node.requires_mat:
                return node.reusecost
            return min(self.cost[n], node.reusecost)
        return INF if node.requires_mat else self.cost[n]

    def reuses(self, n: int) -> bool:
        """Do parents read the stored result of ``n`` rather than recompute?"""
        node = self.pdag.nodes[n]
        return n in self.M and (node.requires_mat or node.reusecost <= self.cost[n])

    def total(self):
        root = self.pdag.root
        t = self.cost[root]
        for s in sorted(self.M):
            t = t + self.cost[s] + self.pdag.nodes[s].matcost
        return t

    def snapshot(self) -> tuple:
        return (tuple(self.cost), tuple(self.best), tuple(self.op_total), frozenset(self.M))

    def copy(self) -> "PlanState":
        other = PlanState.__new__(PlanState)
        other.pdag = self.pdag
        other.M = set(self.M)
        other.cost = list(self.cost)
        other.best = list(self.best)
        other.op_total = list(self.op_total)
        other.propagations = self.propagations
        return other

    # ------------------------------------------------------------ computation

    def _op_cost(self, o: int):
        op = self.pdag.ops[o]
        t = op.exec_cost
        if op.weights is None:
            for i in op.inputs:
                t = t + self.C(i)
        else:
            for i, w in zip(op.inputs, op.weights):
                t = t + w * self.C(i)
        return t

    def _node_cost(self, n: int) -> None:
        best_c, best_o = INF, -1
        for o in self.pdag.nodes[n].child_ops:
            c = self.op_total[o]
            if best_o == -1 or c < best_c or (c == best_c and o < best_o):
                best_c, best_o = c, o
        self.cost[n] = best_c
        self.best[n] = best_o

    def recompute_all(self) -> None:
        for n in self.pdag.topo_order:
            for o in self.pdag.nodes[n].child_ops:
                self.op_total[o] = self._op_cost(o)
            self._node_cost(n)

    def update(self, new_M: Iterable[int]) -> int:
        """Move to a new materialized set, propagating changes upward in
        topological order.  Returns the number of parent-op recomputations."""
        new_M = set(new_M)
        changed = self.M ^ new_M
        self.M = new_M
        heap = PropHeap(self.pdag.topo)
        for n in sorted(changed):
            heap.push(n)
        props = 0
        nodes = self.pdag.nodes
        ops = self.pdag.ops
        while heap:
            n = heap.pop()
            old = self.cost[n]
            self._node_cost(n)
            if self.cost[n] != old or n in changed:
                for o in nodes[n].parent_ops:
                    self.op_total[o] = self._op_cost(o)
                    props += 1
                    heap.push(ops[o].parent)
        self.propagations += props
        return props


def best_plan_given(pdag: "PhysicalDag", materialized: Iterable[int] = ()) -> PlanState:
    """Full bottom-up recomputation for the materialized set."""
    return PlanState(pdag, materialized)
