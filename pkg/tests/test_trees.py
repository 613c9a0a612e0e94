import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from osgp import problems
from osgp.trees import (
    ExpressionTree, InvalidCoordinateError, PrimitiveSet, Symbol, TreeParseError,
    is_well_formed, node_at, parse, random_node, random_node_index, render, replace_subtree,
    shape_signature, subtree_size,
)

from conftest import random_trees

PRIMS = PrimitiveSet.build(problems.ARITHMETIC, ["x1", "x2", "x3"])


def test_node_at_root_and_child():
    t = parse("(ADD x1 x2)")
    assert node_at(t, ()).symbol.name == "ADD"
    assert node_at(t, (1,)).symbol.name == "x2"
    with pytest.raises(InvalidCoordinateError):
        node_at(t, (2,))
    with pytest.raises(InvalidCoordinateError):
        node_at(t, (0, 0))


def test_subtree_size():
    t = parse("(ADD x1 (MUL x2 x3))")
    assert subtree_size(t, ()) == 5
    assert subtree_size(t, (1,)) == 3
    assert subtree_size(t, (0,)) == 1


def test_replace_subtree():
    t = parse("(ADD x1 x2)")
    assert replace_subtree(t, (), parse("x1")) == parse("x1")
    out = replace_subtree(t, (0,), parse("(MUL x3 x2)"))
    assert out == parse("(ADD (MUL x3 x2) x2)")
    assert len(out) == 3 - 1 + 3
    # the input is untouched
    assert t == parse("(ADD x1 x2)")


def test_shape_signature():
    assert shape_signature(parse("(ADD x1 x2)")) == shape_signature(parse("(MUL x3 x2)"))
    assert shape_signature(parse("(ADD x1 x2)")) != shape_signature(parse("(ADD x1 (ADD x1 x2))"))
    for t in random_trees(PRIMS, 1000):
        assert shape_signature(t) == shape_signature(t)
        hash(shape_signature(t))


def test_random_node_trivial_cases():
    rng = random.Random(0)
    leaf = parse("x1")
    assert all(random_node(leaf, rng) == () for _ in range(100))
    t = parse("(ADD x1 x2)")
    assert all(random_node(t, rng, internal_bias=1.0) == () for _ in range(100))


def test_random_node_internal_frequency():
    rng = random.Random(1)
    mixed = PrimitiveSet.build(problems.EXTENDED, ["x1", "x2"])
    tree = next(t for t in random_trees(mixed, 200, 100, 100) if len(t) == 100)
    internal = set(tree.internal_indices.tolist())
    draws = 100_000
    hits = sum(random_node_index(tree, rng, 0.9) in internal for _ in range(draws))
    assert 0.87 <= hits / draws <= 0.93


def test_coords_round_trip():
    for t in random_trees(PRIMS, 200):
        for i, c in enumerate(t.coords()):
            assert t.index_of(c) == i
            assert t.coord_of(i) == c


def test_well_formedness():
    add, x = Symbol.function("ADD"), Symbol.variable("x1", 0)
    assert is_well_formed([add, x, x])
    assert not is_well_formed([add, x])
    assert not is_well_formed([add, x, x, x])
    with pytest.raises(ValueError):
        ExpressionTree([add, x])


def test_with_symbol_keeps_arity():
    t = parse("(ADD x1 x2)")
    assert t.with_symbol(0, Symbol.function("SUB")) == parse("(SUB x1 x2)")
    with pytest.raises(ValueError):
        t.with_symbol(0, Symbol.function("LOG"))


def test_render_parse_round_trip():
    for t in random_trees(PrimitiveSet.build(problems.EXTENDED, ["x1", "x2"]), 300):
        assert parse(render(t)) == t
    assert render(parse("(ADD x1 2.5)")) == "(ADD x1 2.5)"


@pytest.mark.parametrize("text", ["(ADD x1", "(ADD x1 x2 x3)", ")", "(FOO x1 x2)", ""])
def test_parse_errors(text):
    with pytest.raises(TreeParseError):
        parse(text)


def test_cached_arrays_follow_structure():
    # splice and with_symbol carry the numeric encoding over by slicing;
    # it must match a fresh encoding of the same nodes
    rng = random.Random(3)
    trees = random_trees(PRIMS, 100, seed=3)
    for a, b in zip(trees, trees[1:]):
        child = a.splice(rng.randrange(len(a)), b, rng.randrange(len(b)))
        fresh = ExpressionTree(child.nodes)
        assert (child.code[0] == fresh.code[0]).all()
        assert (child.code[1] == fresh.code[1]).all()
        assert (child.ends == fresh.ends).all()


@settings(max_examples=200, deadline=None)
@given(st.data())
def test_replace_keeps_arity_consistency(data):
    seed = data.draw(st.integers(0, 10_000))
    a, b = random_trees(PRIMS, 2, seed=seed)
    coords = a.coords()
    c = coords[data.draw(st.integers(0, len(coords) - 1))]
    out = replace_subtree(a, c, b)
    assert is_well_formed(out.nodes)
    assert len(out) == len(a) - subtree_size(a, c) + len(b)
