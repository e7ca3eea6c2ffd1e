"""Command-line front end.

    mqo --catalog cat.txt --queries batch.txt --algorithms volcano,sh,ru,greedy
    mqo --gen-scaleup 2 --seed 7 --catalog cq2.cat --queries cq2.q
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

from .catalog import CatalogError, load_catalog
from .cost_model import INF
from .logical_dag import DagError
from .optimizer import ALGORITHMS, AlgorithmResult, Instance, prepare, run_algorithm
from .oracle import DEFAULT_MAX_NODES, OracleRefused
from .query_ir import QueryError, parse_batch
from .rules import ExpansionBudgetError
from .workload import generate_scaleup

DEFAULT_ALGORITHMS = "volcano,sh,ru,greedy"


@dataclass
class RunReport:
    dag: dict
    results: list[AlgorithmResult] = field(default_factory=list)

    def to_dict(self, plans: bool = True) -> dict:
        out = {"dag": self.dag, "algorithms": []}
        for r in self.results:
            pd = r.plan.pdag
            entry = {
                "name": r.name,
                "cost_ms": None if r.cost == INF else r.cost_ms,
                "cost_units": None if r.cost == INF else r.cost,
                "materialized": [pd.nodes[n].label for n in sorted(r.M)],
                "materialized_ids": sorted(r.M),
                "seconds": round(r.seconds, 6),
                "details": r.details,
            }
            if plans:
                entry["plan"] = r.plan.render()
            out["algorithms"].append(entry)
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    def to_text(self, plans: bool = True) -> str:
        d = self.dag
        lines = [
            f"DAG: {d['logical_nodes']} logical nodes, {d['physical_nodes']} physical nodes, "
            f"{d['sharable_nodes']} sharable, built in {d['build_seconds']:.3f}s",
            "",
            f"{'algorithm':<18} {'cost (ms)':>16} {'materialized':>12} {'time (s)':>10}",
        ]
        for r in self.results:
            cost = "inf" if r.cost == INF else f"{r.cost_ms:.3f}"
            lines.append(f"{r.name:<18} {cost:>16} {len(r.M):>12} {r.seconds:>10.3f}")
        for r in self.results:
            pd = r.plan.pdag
            lines.append("")
            lines.append(f"== {r.name}")
            for k, v in r.details.items():
                if k != "trace":
                    lines.append(f"{k}: {v}")
            for t in r.details.get("trace", []):
                lines.append(f"  iteration {t['iteration']}: p{t['node']} benefit "
                             f"{t['benefit_ms']:.3f}ms recomputations {t['recomputations']} "
                             f"propagations {t['propagations']}  {t['label']}")
            for n in sorted(r.M):
                lines.append(f"materialize p{n}: {pd.nodes[n].label}")
            if plans:
                lines.append(r.plan.render().rstrip("\n"))
        return "\n".join(lines) + "\n"


def build_report(inst: Instance, algorithms: list[str], trace: bool = False,
                 verify: bool = False, max_oracle_nodes: int = DEFAULT_MAX_NODES) -> RunReport:
    dag = {
        "logical_nodes": len(inst.ldag.nodes),
        "logical_ops": len(inst.ldag.ops),
        "physical_nodes": len(inst.pdag.nodes),
        "physical_ops": len(inst.pdag.ops),
        "sharable_nodes": len(inst.sharability.sharable),
        "queries": len(inst.batch),
        "build_seconds": round(inst.build_seconds, 6),
    }
    report = RunReport(dag)
    for name in algorithms:
        report.results.append(run_algorithm(inst, name, trace=trace, verify=verify,
                                            max_oracle_nodes=max_oracle_nodes))
    return report


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mqo", description="Multi-query optimizer.")
    p.add_argument("--catalog", required=True, help="catalog file")
    p.add_argument("--queries", required=True, help="query batch file")
    p.add_argument("--algorithms", default=None,
                   help=f"comma-separated subset of {','.join(ALGORITHMS)} "
                        f"(default {DEFAULT_ALGORITHMS})")
    p.add_argument("--report", choices=("text", "json"), default="text")
    p.add_argument("--trace", action="store_true", help="per-iteration greedy trace")
    p.add_argument("--verify", action="store_true",
                   help="check incremental costs against full recomputation")
    p.add_argument("--no-plans", action="store_true", help="omit plan renderings")
    p.add_argument("--seed", type=int, default=0, help="seed for --gen-scaleup")
    p.add_argument("--gen-scaleup", type=int, metavar="I",
                   help="write composite scaleup batch I to --catalog/--queries; "
                        "optimize it only if --algorithms is given")
    p.add_argument("--max-oracle-nodes", type=int, default=DEFAULT_MAX_NODES)
    return p


def main(argv: list[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    try:
        if args.gen_scaleup is not None:
            cat_text, q_text = generate_scaleup(args.gen_scaleup, args.seed)
            Path(args.catalog).write_text(cat_text)
            Path(args.queries).write_text(q_text)
            if args.algorithms is None:
                return 0
        algorithms = [a.strip() for a in (args.algorithms or DEFAULT_ALGORITHMS).split(",")
                      if a.strip()]
        for a in algorithms:
            if a not in ALGORITHMS:
                raise ValueError(f"unknown algorithm {a!r} (choose from {', '.join(ALGORITHMS)})")
        catalog = load_catalog(args.catalog)
        try:
            batch = parse_batch(Path(args.queries).read_text(), catalog)
        except QueryError as e:
            raise QueryError(f"{args.queries}: {e}") from None
        inst = prepare(catalog, batch)
        report = build_report(inst, algorithms, args.trace, args.verify, args.max_oracle_nodes)
    except (CatalogError, QueryError, OracleRefused, ExpansionBudgetError, DagError,
            ValueError, OSError) as e:
        print(f"mqo: error: {e}", file=sys.stderr)
        return 2
    if args.report == "json":
        sys.stdout.write(report.to_json() if not args.no_plans
                         else json.dumps(report.to_dict(plans=False), indent=2) + "\n")
    else:
        sys.stdout.write(report.to_text(plans=not args.no_plans))
    return 0


if __name__ == "__main__":
    sys.exit(main())
