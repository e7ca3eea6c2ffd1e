from __future__ import annotations

import pytest

from mqo.catalog import parse_catalog
from mqo.optimizer import prepare
from mqo.query_ir import parse_batch
from mqo.volcano import optimize_volcano
from mqo.workload import (BOUND_LOW, SHARED_JOIN_CATALOG, SHARED_JOIN_QUERIES,
                          count_predicates, core_instance, generate_scaleup, no_overlap,
                          random_instance, scaleup_pair_count, scaleup_relation_count)

from conftest import build


@pytest.mark.parametrize("i", [1, 2, 3, 4, 5])
def test_scaleup_shape(i):
    cat_text, q_text = generate_scaleup(i, seed=3)
    cat = parse_catalog(cat_text)
    batch = parse_batch(q_text, cat)
    assert len(cat.relations) == scaleup_relation_count(i) == 4 * i + 2
    assert len(batch) == 2 * scaleup_pair_count(i)
    assert count_predicates(batch) == (32 * i - 16, 8 * i - 4)


def test_scaleup_pairs_differ_only_in_bound():
    _, q_text = generate_scaleup(2, seed=5)
    lines = q_text.strip().splitlines()
    for a, b in zip(lines[::2], lines[1::2]):
        ta, tb = a.split(), b.split()
        diff = [k for k, (x, y) in enumerate(zip(ta, tb)) if x != y]
        assert len(diff) == 1
        assert BOUND_LOW <= int(ta[diff[0]].rstrip(")")) < 1000


def test_scaleup_is_deterministic():
    assert generate_scaleup(3, 11) == generate_scaleup(3, 11)
    assert generate_scaleup(3, 11) != generate_scaleup(3, 12)


def test_scaleup_index_range():
    with pytest.raises(ValueError):
        generate_scaleup(6)


def test_random_generators_are_deterministic():
    assert random_instance(4) == random_instance(4)
    assert core_instance(4) == core_instance(4)
    build(*random_instance(4))
    build(*core_instance(4))


def test_no_overlap_removes_all_sharing():
    cat = parse_catalog(SHARED_JOIN_CATALOG)
    batch = parse_batch(SHARED_JOIN_QUERIES, cat)
    cat2, batch2 = no_overlap(cat, batch)
    assert len(cat2.relations) == 6
    inst = prepare(cat2, batch2)
    assert not inst.sharability.sharable
    assert count_predicates(batch2) == count_predicates(batch)


def test_no_overlap_keeps_each_query_cost():
    cat = parse_catalog(SHARED_JOIN_CATALOG)
    batch = parse_batch(SHARED_JOIN_QUERIES, cat)
    cat2, batch2 = no_overlap(cat, batch)
    separate = 0
    for q in SHARED_JOIN_QUERIES.strip().splitlines():
        separate += optimize_volcano(build(SHARED_JOIN_CATALOG, q).pdag)[1]
    assert optimize_volcano(prepare(cat2, batch2).pdag)[1] == separate
