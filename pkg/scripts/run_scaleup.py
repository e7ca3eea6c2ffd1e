"""Optimize the composite scaleup batches CQ_1..CQ_n with every heuristic and
print cost, materializations and optimization time per batch.

    python3 scripts/run_scaleup.py --max-i 5 --seed 0 [--json out.json]
"""

from __future__ import annotations

import argparse
import json

from mqo.catalog import parse_catalog
from mqo.optimizer import prepare, run_algorithm
from mqo.query_ir import parse_batch
from mqo.workload import count_predicates, generate_scaleup

ALGS = ("volcano", "sh", "ru", "greedy")


def run(i: int, seed: int) -> dict:
    cat_text, q_text = generate_scaleup(i, seed)
    cat = parse_catalog(cat_text)
    batch = parse_batch(q_text, cat)
    inst = prepare(cat, batch)
    joins, sels = count_predicates(batch)
    row = {"i": i, "queries": len(batch), "join_predicates": joins,
           "select_predicates": sels, "logical_nodes": len(inst.ldag.nodes),
           "physical_nodes": len(inst.pdag.nodes), "build_seconds": inst.build_seconds}
    for name in ALGS:
        r = run_algorithm(inst, name)
        row[name] = {"cost_ms": r.cost_ms, "materialized": len(r.M), "seconds": r.seconds,
                     **{k: v for k, v in r.details.items() if k != "trace"}}
    return row


def main() -> None:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--max-i", type=int, default=4)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--json", help="also write the rows as JSON")
    args = p.parse_args()
    rows = [run(i, args.seed) for i in range(1, args.max_i + 1)]
    print(f"{'batch':<6}{'preds':>9}{'nodes':>8}" + "".join(f"{a + ' (s)':>24}" for a in ALGS)
          + f"{'greedy gain':>13}")
    for r in rows:
        cells = "".join(f"{r[a]['cost_ms'] / 1000:>14.1f} ({r[a]['seconds']:>6.3f})" for a in ALGS)
        gain = 1 - r["greedy"]["cost_ms"] / r["volcano"]["cost_ms"]
        print(f"CQ_{r['i']:<3}{r['join_predicates']:>5}/{r['select_predicates']:<3}"
              f"{r['physical_nodes']:>8}{cells}{gain:>13.1%}")
    print("costs in seconds of estimated execution time; optimization time in parentheses")
    if args.json:
        with open(args.json, "w") as f:
            json.dump(rows, f, indent=2)


if __name__ == "__main__":
    main()
