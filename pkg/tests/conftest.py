"""Shared helpers: instance builders, brute-force plan-tree enumerators and
the fixed instance suites used by several test modules."""

from __future__ import annotations

import sys
from collections import Counter
from functools import lru_cache
from itertools import product
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))

from mqo.catalog import parse_catalog
from mqo.optimizer import Instance, prepare
from mqo.query_ir import parse_batch
from mqo.workload import (SHARED_JOIN_CATALOG, SHARED_JOIN_QUERIES, core_instance,
                          generate_scaleup, random_instance)

TREE_LIMIT = 10_000


def build(cat_text: str, q_text: str, **kw) -> Instance:
    cat = parse_catalog(cat_text)
    return prepare(cat, parse_batch(q_text, cat), **kw)


# ------------------------------------------------------------ brute force

def physical_tree_count(pdag) -> int:
    """Number of plan trees at the root with nothing materialized."""
    count: dict[int, int] = {}
    for n in pdag.topo_order:
        total = 0
        for o in pdag.nodes[n].child_ops:
            k = 1
            for i in pdag.ops[o].inputs:
                k *= 0 if pdag.nodes[i].requires_mat else count[i]
            total += k
        count[n] = total
    return count[pdag.root]


def physical_tree_costs(pdag) -> list:
    """Cost of every plan tree at the root (nothing materialized), each
    tree evaluated separately."""
    trees: dict[int, list] = {}
    for n in pdag.topo_order:
        out = []
        for o in pdag.nodes[n].child_ops:
            op = pdag.ops[o]
            ws = op.weights or (1,) * len(op.inputs)
            lists = [[] if pdag.nodes[i].requires_mat else trees[i] for i in op.inputs]
            for combo in product(*lists):
                out.append(op.exec_cost + sum(w * c for w, c in zip(ws, combo)))
        trees[n] = out
    return trees[pdag.root]


def logical_tree_count(ldag) -> int:
    count: dict[int, int] = {}
    for n in ldag.topo_order:
        total = 0
        for o in ldag.nodes[n].child_ops:
            k = 1
            for i in ldag.ops[o].inputs:
                k *= count[ldag.find(i)]
            total += k
        count[n] = total
    return count[ldag.find(ldag.root)]


def max_occurrences(ldag) -> dict[int, int]:
    """Largest number of times each node occurs in any single logical plan
    tree, found by listing every tree as an occurrence multiset."""
    trees: dict[int, list[Counter]] = {}
    for n in ldag.topo_order:
        out = []
        for o in ldag.nodes[n].child_ops:
            op = ldag.ops[o]
            ws = op.weights or (1,) * len(op.inputs)
            lists = [trees[ldag.find(i)] for i in op.inputs]
            for combo in product(*lists):
                c = Counter({n: 1})
                for w, sub in zip(ws, combo):
                    for k, v in sub.items():
                        c[k] += w * v
                out.append(c)
        trees[n] = out
    best: Counter = Counter()
    for c in trees[ldag.find(ldag.root)]:
        for k, v in c.items():
            best[k] = max(best[k], v)
    return dict(best)


# ------------------------------------------------------------------ suites

def shared_join() -> Instance:
    return build(SHARED_JOIN_CATALOG, SHARED_JOIN_QUERIES)


@lru_cache(maxsize=None)
def random_case(seed: int, **kw) -> Instance:
    return build(*random_instance(seed, **kw))


@lru_cache(maxsize=None)
def core_case(seed: int, queries: int = 3) -> Instance:
    return build(*core_instance(seed, queries))


@lru_cache(maxsize=None)
def scaleup_case(i: int, seed: int = 0) -> Instance:
    return build(*generate_scaleup(i, seed))


def ordering_suite() -> list[tuple[str, Instance]]:
    """Every instance the ordering and guardrail checks run over."""
    out = [("shared-join", shared_join())]
    out += [(f"random-{s}", random_case(s)) for s in range(50)]
    out += [(f"core-{s}", core_case(s)) for s in range(20)]
    out += [(f"CQ_{i}", scaleup_case(i)) for i in (1, 2)]
    return out


# -------------------------------------------------------- acceptance report

ACCEPTANCE: dict[int, str] = {}


def record(n: int, ok: bool, detail: str) -> bool:
    line = f"criterion {n:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE[n] = line
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[n])
