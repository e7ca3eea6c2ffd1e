"""Exhaustive search over subsets of the sharable nodes (small inputs only)."""

from __future__ import annotations

from dataclasses import dataclass

from .cost_model import best_plan_given
from .greedy import SharabilityInfo, check_against_full, sharable_candidates
from .physical_dag import PhysicalDag
from .volcano import Plan, extract_plan

DEFAULT_MAX_NODES = 14


class OracleRefused(ValueError):
    pass


@dataclass
class OracleResult:
    S_opt: frozenset
    opt_cost: object
    subsets_examined: int
    plan: Plan
    candidates: list[int]


def _guard(Y: list[int], max_nodes: int) -> None:
    if len(Y) > max_nodes:
        raise OracleRefused(
            f"exhaustive search over {len(Y)} sharable nodes refused (limit {max_nodes})")


def exhaustive_optimize(pdag: PhysicalDag, info: SharabilityInfo,
                        max_nodes: int = DEFAULT_MAX_NODES, verify: bool = False) -> OracleResult:
    """Visit all subsets in Gray-code order, so each step adds or removes a
    single node and costs are updated incrementally.  Ties keep the subset
    visited first."""
    Y = sharable_candidates(pdag, info)
    _guard(Y, max_nodes)
    state = best_plan_given(pdag)
    S: set[int] = set()
    best_S, best_cost = frozenset(), state.total()
    for i in range(1, 1 << len(Y)):
        bit = (i & -i).bit_length() - 1
        S ^= {Y[bit]}
        state.update(S)
        if verify:
            check_against_full(state)
        t = state.total()
        if t < best_cost:
            best_S, best_cost = frozenset(S), t
    final = best_plan_given(pdag, best_S)
    return OracleResult(best_S, best_cost, 1 << len(Y), extract_plan(final), Y)


def subset_costs_naive(pdag: PhysicalDag, info: SharabilityInfo,
                       max_nodes: int = DEFAULT_MAX_NODES) -> dict[frozenset, object]:
    """Cost of every subset, each recomputed from scratch."""
    Y = sharable_candidates(pdag, info)
    _guard(Y, max_nodes)
    out = {}
    for mask in range(1 << len(Y)):
        S = frozenset(Y[b] for b in range(len(Y)) if mask >> b & 1)
        out[S] = best_plan_given(pdag, S).total()
    return out


def subset_costs_gray(pdag: PhysicalDag, info: SharabilityInfo,
                      max_nodes: int = DEFAULT_MAX_NODES) -> dict[frozenset, object]:
    """Cost of every subset, visited in Gray-code order with incremental
    updates."""
    Y = sharable_candidates(pdag, info)
    _guard(Y, max_nodes)
    state = best_plan_given(pdag)
    S: set[int] = set()
    out = {frozenset(): state.total()}
    for i in range(1, 1 << len(Y)):
        bit = (i & -i).bit_length() - 1
        S ^= {Y[bit]}
        state.update(S)
        out[frozenset(S)] = state.total()
    return out

