from __future__ import annotations

from hypothesis import given, settings
from hypothesis import strategies as st

from mqo.predicates import (And, Atom, Or, atom, atom_implies, conjuncts, evaluate, implies,
                            make_and, make_or, normalize_conjuncts, render)


def test_column_equality_is_ordered():
    assert atom("S.b", "=", "R.b", True) == atom("R.b", "=", "S.b", True)


def test_make_and_flattens_and_deduplicates():
    a, b = atom("R.a", "=", 1), atom("R.a", "<", 5)
    p = make_and([a, make_and([a, b])])
    assert isinstance(p, And) and len(p.parts) == 2
    assert make_and([a]) == a
    assert conjuncts(p) == p.parts


def test_interval_implications():
    assert implies(atom("R.a", ">=", 20), atom("R.a", ">=", 10))
    assert not implies(atom("R.a", ">=", 10), atom("R.a", ">=", 20))
    assert implies(atom("R.a", "=", 5), atom("R.a", "<", 6))
    assert implies(atom("R.a", "<", 5), atom("R.a", "!=", 7))
    assert not implies(atom("R.a", "<", 5), atom("R.a", "!=", 3))
    assert not implies(atom("R.a", ">", 5), atom("R.b", ">", 5))


def test_disjunction_implications():
    five, seven = atom("R.a", "=", 5), atom("R.a", "=", 7)
    both = make_or([five, seven])
    assert implies(five, both) and implies(seven, both)
    assert not implies(both, five)


def test_normalize_drops_implied_conjuncts():
    assert normalize_conjuncts([atom("R.a", ">=", 20), atom("R.a", ">=", 10)]) == \
        frozenset([atom("R.a", ">=", 20)])


def test_render_uses_query_syntax():
    assert render(make_and([atom("R.a", "=", 1), atom("R.b", "=", "S.b", True)])) == \
        "(and (= R.a 1) (= R.b S.b))"


OPS = ("=", "<", "<=", ">", ">=", "!=")
atoms = st.builds(lambda op, v: atom("R.a", op, v), st.sampled_from(OPS), st.integers(0, 6))
preds = st.recursive(atoms, lambda inner: st.one_of(
    st.lists(inner, min_size=1, max_size=3).map(make_and),
    st.lists(inner, min_size=1, max_size=3).map(make_or)), max_leaves=6)


@settings(max_examples=300, deadline=None)
@given(preds, preds)
def test_implication_is_sound(p, q):
    if implies(p, q):
        for v in range(-1, 8):
            row = {"R.a": v}
            assert not evaluate(p, row) or evaluate(q, row)


@settings(max_examples=200, deadline=None)
@given(st.lists(atoms, min_size=1, max_size=5))
def test_normalize_preserves_meaning(parts):
    kept = normalize_conjuncts(parts)
    for v in range(-1, 8):
        row = {"R.a": v}
        assert all(evaluate(p, row) for p in parts) == all(evaluate(p, row) for p in kept)


@given(atoms, atoms)
def test_atom_implication_agrees_with_general(p, q):
    assert atom_implies(p, q) == implies(p, q)
