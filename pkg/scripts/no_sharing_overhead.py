"""Measure what Greedy costs over plain Volcano when nothing can be shared:
each scaleup batch is rewritten so every query reads private copies of its
relations, then both optimizers run from scratch.

    python3 scripts/no_sharing_overhead.py --max-i 4 --repeat 3
"""

from __future__ import annotations

import argparse
import statistics

from mqo.catalog import parse_catalog
from mqo.optimizer import prepare, run_algorithm
from mqo.query_ir import parse_batch
from mqo.workload import generate_scaleup, no_overlap


def timed(cat, batch, name: str) -> tuple[float, float, object]:
    inst = prepare(cat, batch)
    r = run_algorithm(inst, name)
    return inst.build_seconds, r.seconds, r


def main() -> None:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--max-i", type=int, default=4)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--repeat", type=int, default=3)
    args = p.parse_args()
    print(f"{'batch':<6}{'volcano (s)':>13}{'greedy (s)':>12}{'ratio':>8}"
          f"{'alg-only ratio':>16}  greedy result")
    for i in range(1, args.max_i + 1):
        cat_text, q_text = generate_scaleup(i, args.seed)
        cat = parse_catalog(cat_text)
        cat, batch = no_overlap(cat, parse_batch(q_text, cat))
        vt, gt, va, ga = [], [], [], []
        for _ in range(args.repeat):
            b, a, v = timed(cat, batch, "volcano")
            vt.append(b + a)
            va.append(a)
            b, a, g = timed(cat, batch, "greedy")
            gt.append(b + a)
            ga.append(a)
        same = "M empty, Volcano plan" if not g.M and g.cost == v.cost else f"M={sorted(g.M)}"
        v_med, g_med = statistics.median(vt), statistics.median(gt)
        print(f"CQ_{i:<3}{v_med:>13.3f}{g_med:>12.3f}{g_med / v_med:>8.2f}"
              f"{statistics.median(ga) / statistics.median(va):>16.2f}  {same}")
    print("times include building the DAG; the last ratio counts the search alone")


if __name__ == "__main__":
    main()
