from __future__ import annotations

from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mqo.catalog import (Catalog, CatalogError, CostParams, RelationStats, base_stats,
                         blocks_of, format_catalog, parse_catalog, selectivity)
from mqo.predicates import atom, make_and, make_or

TEXT = """\
relation R tuples=1000 perblock=10 index=a
column a distinct=100 min=0 max=99
column b distinct=20
relation S tuples=55 perblock=10
column b distinct=50
"""


def stats(name="R"):
    cat = parse_catalog(TEXT)
    return base_stats(cat.relation(name), cat.params)


def test_parse_basic():
    cat = parse_catalog(TEXT)
    r = cat.relation("R")
    assert r.tuple_count == 1000 and r.clustered_index_on == "a"
    assert r.bounds == (("a", Fraction(0), Fraction(99)),)
    assert cat.params == CostParams()


def test_blocks_round_up():
    cat = parse_catalog(TEXT)
    assert blocks_of(cat.relation("R")) == 100
    assert blocks_of(cat.relation("S")) == 6


@pytest.mark.parametrize("bad, msg", [
    ("column a distinct=3\n", "outside a relation"),
    ("relation R tuples=10 perblock=2\ncolumn a distinct=3 min=0\n", "expected 'column"),
    ("relation R tuples=10 perblock=2\ncolumn a distinct=30\n", "outside"),
    ("relation R tuples=10\n", "perblock"),
    ("costparams seek=0\n", "positive"),
    ("frobnicate\n", "unknown directive"),
])
def test_parse_errors(bad, msg):
    with pytest.raises(CatalogError, match=msg):
        parse_catalog(bad)


def test_atom_selectivities():
    s = stats()
    assert selectivity(atom("R.a", "=", 3), s) == Fraction(1, 100)
    assert selectivity(atom("R.b", "!=", 3), s) == Fraction(19, 20)
    assert selectivity(atom("R.b", "<", 3), s) == Fraction(1, 3)


def test_range_selectivity_uses_bounds():
    s = stats()
    assert selectivity(atom("R.a", ">=", 90), s) == Fraction(9, 99)
    assert selectivity(atom("R.a", "<", 10), s) == Fraction(10, 99)
    assert selectivity(atom("R.a", ">", 500), s) == 0
    assert selectivity(atom("R.a", "<=", 500), s) == 1


def test_compound_selectivities():
    s = stats()
    p, q = atom("R.a", "=", 1), atom("R.b", "=", 2)
    assert selectivity(make_and([p, q]), s) == Fraction(1, 2000)
    assert selectivity(make_or([p, q]), s) == Fraction(1, 100) + Fraction(1, 20)
    assert selectivity(None, s) == 1


def test_join_selectivity_uses_larger_distinct_count():
    cat = parse_catalog(TEXT)
    from mqo.catalog import combine
    s = combine([base_stats(cat.relation("R"), cat.params),
                 base_stats(cat.relation("S"), cat.params)])
    assert selectivity(atom("R.b", "=", "S.b", True), s) == Fraction(1, 50)


names = st.from_regex(r"[A-Z][a-z]{0,4}", fullmatch=True)


@st.composite
def catalogs(draw):
    rels = {}
    for name in draw(st.lists(names, min_size=1, max_size=4, unique=True)):
        t = draw(st.integers(1, 10**6))
        cols = draw(st.lists(st.from_regex(r"[a-z]{1,3}", fullmatch=True),
                             min_size=1, max_size=4, unique=True))
        columns = tuple((c, draw(st.integers(1, t))) for c in cols)
        bounds = ()
        if draw(st.booleans()):
            lo = draw(st.integers(-100, 100))
            bounds = ((cols[0], Fraction(lo), Fraction(lo + draw(st.integers(0, 100)))),)
        idx = draw(st.sampled_from([None] + cols))
        rels[name] = RelationStats(name, t, draw(st.integers(1, 200)), columns, idx, bounds)
    return Catalog(rels, CostParams())


@settings(max_examples=100, deadline=None)
@given(catalogs())
def test_format_round_trip(cat):
    again = parse_catalog(format_catalog(cat))
    assert again.relations == cat.relations
    assert again.params == cat.params
