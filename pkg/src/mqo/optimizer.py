"""One entry point per algorithm over a DAG built once per batch."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

from .catalog import Catalog
from .cost_model import INF, to_ms
from .greedy import SharabilityInfo, compute_sharability, greedy_select
from .logical_dag import LogicalDag, build_initial_dag
from .oracle import DEFAULT_MAX_NODES, exhaustive_optimize
from .physical_dag import PhysicalDag, PhysicalOptions, build_physical_dag
from .query_ir import QueryBatch
from .rules import ExpansionStats, RuleSet, expand
from .volcano import Plan, optimize_volcano
from .volcano_ru import volcano_ru_bidirectional
from .volcano_sh import volcano_sh

ALGORITHMS = ("volcano", "sh", "ru", "greedy", "greedy-exhaustive", "exhaustive")


@dataclass
class Instance:
    catalog: Catalog
    batch: QueryBatch
    ldag: LogicalDag
    pdag: PhysicalDag
    expansion: ExpansionStats
    build_seconds: float
    _sharability: SharabilityInfo | None = None

    @property
    def sharability(self) -> SharabilityInfo:
        if self._sharability is None:
            self._sharability = compute_sharability(self.ldag)
        return self._sharability


def prepare(catalog: Catalog, batch: QueryBatch, rules: RuleSet | None = None,
            options: PhysicalOptions | None = None) -> Instance:
    """Build and expand the logical DAG, then the physical DAG."""
    rules = rules or RuleSet()
    start = time.perf_counter()
    ldag = build_initial_dag(batch, catalog, commutative_joins=rules.join_commutativity)
    stats = expand(ldag, rules)
    pdag = build_physical_dag(ldag, options=options)
    return Instance(catalog, batch, ldag, pdag, stats, time.perf_counter() - start)


@dataclass
class AlgorithmResult:
    name: str
    cost: object
    M: frozenset
    plan: Plan
    seconds: float
    details: dict = field(default_factory=dict)

    @property
    def cost_ms(self) -> float:
        return INF if self.cost == INF else to_ms(self.cost)


def run_algorithm(inst: Instance, name: str, *, trace: bool = False, verify: bool = False,
                  max_oracle_nodes: int = DEFAULT_MAX_NODES) -> AlgorithmResult:
    """Run one algorithm; ``seconds`` covers the algorithm only (for greedy
    and the exhaustive search it includes the sharability analysis)."""
    pdag = inst.pdag
    start = time.perf_counter()
    details: dict = {}
    if name == "volcano":
        plan, cost = optimize_volcano(pdag)
        M = frozenset()
    elif name == "sh":
        base, _ = optimize_volcano(pdag)
        r = volcano_sh(base)
        plan, cost, M = r.plan, r.cost, r.M
        details["subsumption_kept"] = len(r.kept)
        details["subsumption_undone"] = len(r.undone)
    elif name == "ru":
        r = volcano_ru_bidirectional(pdag)
        plan, cost, M = r.plan, r.cost, r.M
        details["order"] = r.order
        details["reuse_candidates"] = len(r.N)
    elif name in ("greedy", "greedy-exhaustive"):
        info = compute_sharability(inst.ldag)
        r = greedy_select(pdag, info, monotonic=name == "greedy", verify=verify, trace=trace)
        plan, cost, M = r.plan, r.cost, r.X
        details["sharable_nodes"] = len(r.candidates)
        details["iterations"] = r.iterations
        details["benefit_recomputations"] = r.benefit_recomputations
        details["cost_propagations"] = r.propagations
        if trace:
            details["trace"] = [
                {"iteration": t.iteration, "node": t.node, "label": pdag.nodes[t.node].label,
                 "benefit_ms": to_ms(t.benefit), "recomputations": t.recomputations,
                 "propagations": t.propagations}
                for t in r.trace]
    elif name == "exhaustive":
        info = compute_sharability(inst.ldag)
        r = exhaustive_optimize(pdag, info, max_oracle_nodes, verify=verify)
        plan, cost, M = r.plan, r.opt_cost, r.S_opt
        details["subsets_examined"] = r.subsets_examined
    else:
        raise ValueError(f"unknown algorithm {name!r} (choose from {', '.join(ALGORITHMS)})")
    return AlgorithmResult(name, cost, M, plan, time.perf_counter() - start, details)
