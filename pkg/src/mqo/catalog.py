"""Base-relation statistics, cost constants, and cardinality estimation."""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field, fields
from fractions import Fraction
from pathlib import Path
from typing import Mapping

from .predicates import And, Atom, Or, Predicate


class CatalogError(ValueError):
    pass


class EstimationError(ValueError):
    pass


@dataclass(frozen=True)
class CostParams:
    block_size_bytes: int = 4096
    seek_ms: float = 10.0
    read_ms_per_block: float = 2.0
    write_ms_per_block: float = 4.0
    cpu_ms_per_block: float = 0.2
    operator_memory_blocks: int = 1536

    def __post_init__(self):
        for f in fields(self):
            if not getattr(self, f.name) > 0:
                raise CatalogError(f"{f.name} must be positive")
        if self.write_ms_per_block < self.read_ms_per_block:
            raise CatalogError("write_ms_per_block must be >= read_ms_per_block")
        if self.operator_memory_blocks < 2:
            raise CatalogError("operator_memory_blocks must be at least 2")


@dataclass(frozen=True)
class RelationStats:
    name: str
    tuple_count: int
    tuples_per_block: int
    columns: tuple[tuple[str, int], ...]  # (unqualified name, distinct count)
    clustered_index_on: str | None = None
    bounds: tuple[tuple[str, Fraction, Fraction], ...] = ()  # (column, min, max)

    def __post_init__(self):
        if self.tuple_count < 0:
            raise CatalogError(f"{self.name}: tuple_count must be >= 0")
        if self.tuples_per_block < 1:
            raise CatalogError(f"{self.name}: tuples_per_block must be >= 1")
        if not self.columns:
            raise CatalogError(f"{self.name}: relation has no columns")
        seen = set()
        for col, v in self.columns:
            if col in seen:
                raise CatalogError(f"{self.name}: duplicate column {col}")
            seen.add(col)
            if v < 1 or (self.tuple_count >= 1 and v > self.tuple_count):
                raise CatalogError(
                    f"{self.name}.{col}: distinct_value_count {v} outside "
                    f"[1, {self.tuple_count}]")
        for col, lo, hi in self.bounds:
            if col not in seen:
                raise CatalogError(f"{self.name}: bounds for unknown column {col}")
            if lo > hi:
                raise CatalogError(f"{self.name}.{col}: min {lo} exceeds max {hi}")
        if self.clustered_index_on is not None and self.clustered_index_on not in seen:
            raise CatalogError(
                f"{self.name}: index column {self.clustered_index_on} is not a column")

    def qualified(self, col: str) -> str:
        return f"{self.name}.{col}"

    @property
    def column_names(self) -> tuple[str, ...]:
        return tuple(self.qualified(c) for c, _ in self.columns)


@dataclass(frozen=True)
class Catalog:
    relations: Mapping[str, RelationStats]
    params: CostParams = field(default_factory=CostParams)

    def relation(self, name: str) -> RelationStats:
        try:
            return self.relations[name]
        except KeyError:
            raise CatalogError(f"unknown relation {name}") from None


def blocks_of(stats: RelationStats) -> int:
    return -(-stats.tuple_count // stats.tuples_per_block)


# ------------------------------------------------------------------ derived stats

@dataclass(frozen=True)
class DerivedStats:
    """Estimated size of an intermediate result.

    ``rows`` is kept exact so that estimates do not depend on the order in
    which selectivities were multiplied.
    """

    columns: tuple[str, ...]
    rows: Fraction
    distinct: Mapping[str, Fraction]
    widths: Mapping[str, Fraction]
    tuples_per_block: int
    bounds: Mapping[str, tuple[Fraction, Fraction]] = field(default_factory=dict)

    @property
    def tuple_count(self) -> int:
        return math.ceil(self.rows)

    @property
    def blocks(self) -> int:
        return -(-self.tuple_count // self.tuples_per_block)

    @property
    def width(self) -> Fraction:
        return sum(self.widths.values(), Fraction(0))

    def v(self, col: str) -> Fraction:
        try:
            return max(Fraction(1), self.distinct[col])
        except KeyError:
            raise EstimationError(f"unknown column {col}") from None


def base_stats(rel: RelationStats, params: CostParams) -> DerivedStats:
    cols = rel.column_names
    w = Fraction(params.block_size_bytes, rel.tuples_per_block) / len(cols)
    return DerivedStats(
        columns=cols,
        rows=Fraction(rel.tuple_count),
        distinct={rel.qualified(c): Fraction(v) for c, v in rel.columns},
        widths={c: w for c in cols},
        tuples_per_block=rel.tuples_per_block,
        bounds={rel.qualified(c): (lo, hi) for c, lo, hi in rel.bounds},
    )


def tuples_per_block_for(width: Fraction, params: CostParams) -> int:
    if width <= 0:
        return params.block_size_bytes
    return max(1, math.floor(Fraction(params.block_size_bytes) / width))


def selectivity(pred: Predicate | None, stats: DerivedStats) -> Fraction:
    if pred is None:
        return Fraction(1)
    if isinstance(pred, And):
        out = Fraction(1)
        for p in pred.parts:
            out *= selectivity(p, stats)
        return out
    if isinstance(pred, Or):
        return min(Fraction(1), sum((selectivity(p, stats) for p in pred.parts), Fraction(0)))
    assert isinstance(pred, Atom)
    if pred.is_col:
        return 1 / max(stats.v(pred.col), stats.v(str(pred.value)))
    v = stats.v(pred.col)
    if pred.op == "=":
        return 1 / v
    if pred.op == "!=":
        return 1 - 1 / v if v > 1 else Fraction(1)
    return _range_selectivity(pred, stats)


def _range_selectivity(pred: Atom, stats: DerivedStats) -> Fraction:
    """Uniform-distribution estimate when the column's value range is
    known, else 1/3."""
    rng = stats.bounds.get(pred.col)
    if rng is None or isinstance(pred.value, str):
        return Fraction(1, 3)
    lo, hi = rng
    x = Fraction(str(pred.value))
    if hi == lo:
        holds = {"<": lo < x, "<=": lo <= x, ">": lo > x, ">=": lo >= x}[pred.op]
        return Fraction(int(holds))
    if pred.op in ("<", "<="):
        frac = (x - lo) / (hi - lo)
    else:
        frac = (hi - x) / (hi - lo)
    return min(Fraction(1), max(Fraction(0), frac))


def with_rows(stats: DerivedStats, rows: Fraction, params: CostParams,
              columns: tuple[str, ...] | None = None) -> DerivedStats:
    """Restrict to ``columns`` (default all), set the row estimate, cap the
    distinct counts, and recompute the blocking factor."""
    cols = stats.columns if columns is None else columns
    widths = {c: stats.widths[c] for c in cols}
    return DerivedStats(
        columns=cols,
        rows=rows,
        distinct={c: min(stats.distinct[c], max(rows, Fraction(1))) for c in cols},
        widths=widths,
        tuples_per_block=tuples_per_block_for(sum(widths.values(), Fraction(0)), params),
        bounds={c: b for c, b in stats.bounds.items() if c in widths},
    )


def combine(parts: list[DerivedStats]) -> DerivedStats:
    """Column-wise concatenation (the cross product before any predicate)."""
    cols: list[str] = []
    distinct: dict[str, Fraction] = {}
    widths: dict[str, Fraction] = {}
    bounds: dict = {}
    rows = Fraction(1)
    for s in parts:
        for c in s.columns:
            if c in distinct:
                raise EstimationError(f"duplicate column {c}")
            cols.append(c)
        distinct.update(s.distinct)
        widths.update(s.widths)
        bounds.update(s.bounds)
        rows *= s.rows
    return DerivedStats(tuple(cols), rows, distinct, widths, 1, bounds)


# ------------------------------------------------------------------ file format

_KV = re.compile(r"^([A-Za-z_]+)=(\S+)$")

_PARAM_KEYS = {
    "seek": ("seek_ms", float),
    "read": ("read_ms_per_block", float),
    "write": ("write_ms_per_block", float),
    "cpu": ("cpu_ms_per_block", float),
    "block": ("block_size_bytes", int),
    "memblocks": ("operator_memory_blocks", int),
}


def _kvs(tokens: list[str], lineno: int) -> dict[str, str]:
    out = {}
    for t in tokens:
        m = _KV.match(t)
        if not m:
            raise CatalogError(f"line {lineno}: expected key=value, got {t!r}")
        if m.group(1) in out:
            raise CatalogError(f"line {lineno}: repeated key {m.group(1)}")
        out[m.group(1)] = m.group(2)
    return out


def _int(v: str, what: str, lineno: int) -> int:
    try:
        return int(v)
    except ValueError:
        raise CatalogError(f"line {lineno}: {what} must be an integer, got {v!r}") from None


def _num(v: str, what: str, lineno: int) -> Fraction:
    try:
        return Fraction(v)
    except ValueError:
        raise CatalogError(f"line {lineno}: {what} must be a number, got {v!r}") from None


def parse_catalog(text: str) -> Catalog:
    relations: dict[str, RelationStats] = {}
    params = None
    current = None  # [name, tuples, perblock, index, columns, lineno, bounds]

    def finish():
        if current is None:
            return
        name, tuples, perblock, index, cols, lineno, bounds = current
        try:
            relations[name] = RelationStats(name, tuples, perblock, tuple(cols), index,
                                            tuple(bounds))
        except CatalogError as e:
            raise CatalogError(f"line {lineno}: {e}") from None

    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        head, *rest = line.split()
        if head == "relation":
            finish()
            if not rest:
                raise CatalogError(f"line {lineno}: relation needs a name")
            name = rest[0]
            if not re.fullmatch(r"[A-Za-z_][A-Za-z0-9_]*", name):
                raise CatalogError(f"line {lineno}: bad relation name {name!r}")
            if name in relations:
                raise CatalogError(f"line {lineno}: duplicate relation {name}")
            kv = _kvs(rest[1:], lineno)
            unknown = set(kv) - {"tuples", "perblock", "index"}
            if unknown:
                raise CatalogError(f"line {lineno}: unknown relation field {sorted(unknown)[0]}")
            for req in ("tuples", "perblock"):
                if req not in kv:
                    raise CatalogError(f"line {lineno}: relation {name} missing {req}=")
            current = [name, _int(kv["tuples"], "tuples", lineno),
                       _int(kv["perblock"], "perblock", lineno), kv.get("index"), [], lineno, []]
        elif head == "column":
            if current is None:
                raise CatalogError(f"line {lineno}: column outside a relation")
            if len(rest) not in (2, 4):
                raise CatalogError(
                    f"line {lineno}: expected 'column <name> distinct=<v> [min=<x> max=<y>]'")
            kv = _kvs(rest[1:], lineno)
            unknown = set(kv) - {"distinct", "min", "max"}
            if unknown:
                raise CatalogError(f"line {lineno}: unknown column field {sorted(unknown)[0]}")
            if "distinct" not in kv:
                raise CatalogError(f"line {lineno}: column missing distinct=")
            current[4].append((rest[0], _int(kv["distinct"], "distinct", lineno)))
            if ("min" in kv) != ("max" in kv):
                raise CatalogError(f"line {lineno}: min= and max= must be given together")
            if "min" in kv:
                current[6].append((rest[0], _num(kv["min"], "min", lineno),
                                   _num(kv["max"], "max", lineno)))
        elif head == "costparams":
            if params is not None:
                raise CatalogError(f"line {lineno}: repeated costparams")
            kv = _kvs(rest, lineno)
            args = {}
            for k, v in kv.items():
                if k not in _PARAM_KEYS:
                    raise CatalogError(f"line {lineno}: unknown cost parameter {k}")
                fname, conv = _PARAM_KEYS[k]
                try:
                    args[fname] = conv(v)
                except ValueError:
                    raise CatalogError(f"line {lineno}: bad value for {k}: {v!r}") from None
            try:
                params = CostParams(**args)
            except CatalogError as e:
                raise CatalogError(f"line {lineno}: {e}") from None
        else:
            raise CatalogError(f"line {lineno}: unknown directive {head!r}")
    finish()
    return Catalog(relations, params or CostParams())


def load_catalog(path: str | Path) -> Catalog:
    return parse_catalog(Path(path).read_text())


def format_catalog(cat: Catalog) -> str:
    p = cat.params
    lines = [
        f"costparams seek={p.seek_ms:g} read={p.read_ms_per_block:g} "
        f"write={p.write_ms_per_block:g} cpu={p.cpu_ms_per_block:g} "
        f"block={p.block_size_bytes} memblocks={p.operator_memory_blocks}"
    ]
    for name in sorted(cat.relations):
        r = cat.relations[name]
        idx = f" index={r.clustered_index_on}" if r.clustered_index_on else ""
        lines.append(f"relation {name} tuples={r.tuple_count} perblock={r.tuples_per_block}{idx}")
        bounds = {c: (lo, hi) for c, lo, hi in r.bounds}
        for c, v in r.columns:
            extra = ""
            if c in bounds:
                lo, hi = bounds[c]
                extra = f" min={lo} max={hi}"
            lines.append(f"column {c} distinct={v}{extra}")
    return "\n".join(lines) + "\n"
