from __future__ import annotations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mqo.cost_model import best_plan_given
from mqo.greedy import (BenefitHeap, IncrementalMismatch, check_against_full,
                        compute_sharability, degree_of_sharing, greedy_select,
                        sharable_candidates)
from mqo.volcano import optimize_volcano

from conftest import build, core_case, shared_join, max_occurrences, random_case

CAT = """\
relation A tuples=10000 perblock=20
column a distinct=100
relation B tuples=5000 perblock=20
column a distinct=100
column c distinct=10
relation C tuples=2000 perblock=20
column c distinct=10
"""


def test_degree_counts_repeated_uses():
    inst = build(CAT, "(join (= A.a B.a) (scan A) (scan B));"
                      "@weight=2 (join (= B.c C.c) (join (= A.a B.a) (scan A) (scan B)) (scan C));")
    ld = inst.ldag
    ab = next(n for n in ld.nodes.values() if n.label() == "join{A,B} where (= A.a B.a)")
    assert degree_of_sharing(ld, ab.id) == 3
    assert inst.sharability.is_sharable(ab.id)


def test_single_query_without_repeats_has_nothing_sharable():
    inst = build(CAT, "(join (= A.a B.a) (scan A) (scan B));")
    assert not inst.sharability.sharable


def test_degree_matches_brute_force_on_example():
    inst = shared_join()
    occ = max_occurrences(inst.ldag)
    info = compute_sharability(inst.ldag)
    for n, d in info.degree.items():
        assert d == occ.get(n, 0)


def test_benefit_heap_order():
    h = BenefitHeap({3: 10, 1: 10, 2: 30})
    assert h.pop() == (2, 30)
    assert h.pop() == (1, 10)
    h.push(7, 50)
    assert h.top() == (7, 50)


def test_shared_join_picks_the_common_join():
    inst = shared_join()
    r = greedy_select(inst.pdag, inst.sharability, verify=True, trace=True)
    assert len(r.X) == 1
    assert inst.pdag.nodes[next(iter(r.X))].label.startswith("join{R,S}")
    assert r.cost < r.initial_cost == optimize_volcano(inst.pdag)[1]
    assert [t.iteration for t in r.trace] == [1]


@pytest.mark.parametrize("seed", range(8))
def test_heap_and_exhaustive_variants_agree(seed):
    inst = core_case(seed)
    a = greedy_select(inst.pdag, inst.sharability, monotonic=True)
    b = greedy_select(inst.pdag, inst.sharability, monotonic=False)
    assert a.X == b.X and a.cost == b.cost
    assert a.benefit_recomputations <= b.benefit_recomputations


def test_final_cost_matches_full_recompute():
    for s in range(10):
        inst = random_case(s)
        r = greedy_select(inst.pdag, inst.sharability)
        assert r.cost == best_plan_given(inst.pdag, r.X).total()
        assert r.cost <= r.initial_cost


def test_check_against_full_detects_drift():
    inst = shared_join()
    state = best_plan_given(inst.pdag)
    check_against_full(state)
    n = state.pdag.candidates()[0]
    state.cost[n] += 1
    with pytest.raises(IncrementalMismatch):
        check_against_full(state)


def test_candidates_are_sharable_and_materializable():
    inst = core_case(0)
    for n in sharable_candidates(inst.pdag, inst.sharability):
        node = inst.pdag.nodes[n]
        assert inst.sharability.degree[node.logical] > 1 and node.materializable


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10**6))
def test_greedy_never_worse_than_volcano(seed):
    inst = random_case(seed % 400)
    r = greedy_select(inst.pdag, inst.sharability)
    assert r.cost <= optimize_volcano(inst.pdag)[1]


def test_prohibitive_write_cost_stores_nothing():
    from mqo.workload import SHARED_JOIN_CATALOG, SHARED_JOIN_QUERIES
    # one-pass joins, so writing is charged only for stored results
    inst = build("costparams write=100000 memblocks=1000000\n" + SHARED_JOIN_CATALOG, SHARED_JOIN_QUERIES)
    r = greedy_select(inst.pdag, inst.sharability)
    assert r.X == frozenset() and r.cost == optimize_volcano(inst.pdag)[1]


def test_single_candidate_needs_one_recomputation():
    from mqo.greedy import monotonic_pick
    h = BenefitHeap({5: 100})
    calls = []
    n, b = monotonic_pick(h, set(), lambda X, x: calls.append(x) or 40)
    assert (n, b) == (5, 40) and calls == [5]


def _benefit_by_label(weight: int, label: str):
    from mqo.workload import SHARED_JOIN_CATALOG, SHARED_JOIN_QUERIES
    q1, q2 = SHARED_JOIN_QUERIES.strip().splitlines()
    pd = build(SHARED_JOIN_CATALOG, f"{q1}\n@weight={weight} {q2}").pdag
    n = next(x.id for x in pd.nodes if x.label == label)
    return best_plan_given(pd).total() - best_plan_given(pd, {n}).total()


def test_heavier_query_never_lowers_benefit():
    from mqo.volcano_ru import query_nodes
    pd = shared_join().pdag
    q2 = query_nodes(pd)[1][0]
    labels = set()
    stack = [q2]
    while stack:
        n = stack.pop()
        if n in pd.candidates():
            labels.add(pd.nodes[n].label)
        for o in pd.nodes[n].child_ops:
            stack.extend(pd.ops[o].inputs)
    only_q2 = {l for l in labels if "T" in l.split(" where")[0]}
    assert only_q2
    for label in only_q2:
        assert _benefit_by_label(2, label) >= _benefit_by_label(1, label)
