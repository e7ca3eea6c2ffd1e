from __future__ import annotations

from types import SimpleNamespace

from mqo.volcano import Plan, evaluate_plan, optimize_volcano

from conftest import build, shared_join, physical_tree_costs, random_case

CAT = """\
relation R tuples=1000 perblock=10
column a distinct=100
relation S tuples=800 perblock=20
column b distinct=10
"""


def test_single_scan_costs_one_scan():
    plan, cost = optimize_volcano(build(CAT, "(scan R);").pdag)
    assert cost == 230_000  # seek 10 ms + 100 blocks * 2.2 ms
    assert plan.pdag.ops[plan.choice[plan.root]].kind == "no-op"


def test_disjoint_queries_add_up():
    both = optimize_volcano(build(CAT, "(scan R); (select (= S.b 1) (scan S));").pdag)[1]
    one = optimize_volcano(build(CAT, "(scan R);").pdag)[1]
    two = optimize_volcano(build(CAT, "(select (= S.b 1) (scan S));").pdag)[1]
    assert both == one + two


def test_weights_multiply_cost():
    one = optimize_volcano(build(CAT, "(scan R);").pdag)[1]
    three = optimize_volcano(build(CAT, "@weight=3 (scan R);").pdag)[1]
    assert three == 3 * one


def test_matches_brute_force_on_small_instance():
    for inst in (shared_join(), random_case(1)):
        assert optimize_volcano(inst.pdag)[1] == min(physical_tree_costs(inst.pdag))


def test_deterministic():
    a = optimize_volcano(shared_join().pdag)[0]
    b = optimize_volcano(shared_join().pdag)[0]
    assert a.choice == b.choice and a.cost == b.cost


def test_shared_node_has_two_plan_parents():
    plan, _ = optimize_volcano(shared_join().pdag)
    assert max(plan.numuses_lower(n) for n in plan.choice if n != plan.root) == 2


def _stub_plan():
    """e3 reads e2 twice, e2 reads e1 twice."""
    ops = [SimpleNamespace(inputs=(), weights=None, exec_cost=1),
           SimpleNamespace(inputs=(0, 0), weights=None, exec_cost=1),
           SimpleNamespace(inputs=(1, 1), weights=None, exec_cost=1),
           SimpleNamespace(inputs=(2,), weights=(1,), exec_cost=0)]
    nodes = [SimpleNamespace(requires_mat=False, reusecost=0, matcost=0) for _ in range(4)]
    pdag = SimpleNamespace(ops=ops, nodes=nodes, topo=[0, 1, 2, 3], root=3)
    return Plan(pdag, {0: 0, 1: 1, 2: 2, 3: 3})


def test_tree_uses_multiply_along_paths():
    plan = _stub_plan()
    assert plan.tree_uses() == {3: 1, 2: 1, 1: 2, 0: 4}
    assert plan.tree_uses({1}) == {3: 1, 2: 1, 1: 2, 0: 2}
    assert plan.numuses_lower(0) == 2


def test_evaluate_plan_on_stub():
    plan = _stub_plan()
    costs, total = evaluate_plan(plan.pdag, plan.choice)
    assert costs == {0: 1, 1: 3, 2: 7, 3: 7}
    assert total == 7


def test_render_mentions_every_node():
    plan, _ = optimize_volcano(shared_join().pdag)
    text = plan.render()
    for n in plan.choice:
        assert f"p{n}" in text
    assert text.rstrip().endswith("ms")
