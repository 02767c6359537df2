from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from haarfactor import dyadic
from haarfactor.dyadic import DyadicInterval, ROOT, from_iota, haar_step


def intervals(max_level=10):
    return st.integers(0, max_level).flatmap(
        lambda k: st.builds(DyadicInterval, st.just(k), st.integers(0, 2 ** k - 1)))


def test_iota_examples():
    assert ROOT.iota == 1
    assert DyadicInterval(1, 1).iota == 3
    assert from_iota(2) == DyadicInterval(1, 0)
    assert DyadicInterval(1, 1).left == Fraction(1, 2)


def test_iota_is_bijection_up_to_12():
    for n in range(13):
        seen = {I.iota for I in dyadic.enumerate_upto(n)}
        assert seen == set(range(1, 2 ** (n + 1)))


def test_children_contains_enumerate():
    assert ROOT.children() == (DyadicInterval(1, 0), DyadicInterval(1, 1))
    assert DyadicInterval(1, 0).contains(DyadicInterval(2, 1))
    assert dyadic.enumerate_level(1) == [DyadicInterval(1, 0), DyadicInterval(1, 1)]
    with pytest.raises(ValueError):
        ROOT.parent()
    with pytest.raises(ValueError):
        DyadicInterval(2, 4)


def test_haar_step_examples():
    assert list(haar_step(ROOT, 2).values) == [1, 1, -1, -1]
    assert list(haar_step(DyadicInterval(1, 1), 2).values) == [0, 0, 1, -1]
    with pytest.raises(ValueError):
        haar_step(DyadicInterval(1, 0), 1)


@given(intervals())
def test_parent_child_roundtrip(I):
    a, b = I.children()
    assert a.parent() == I == b.parent()
    assert I.half_containing(a) == 1 and I.half_containing(b) == -1
    assert a.measure + b.measure == I.measure
    assert dyadic.from_index(I.index) == I
    assert DyadicInterval.from_json(I.to_json()) == I


@given(intervals(8), intervals(8))
def test_containment_matches_endpoints(I, J):
    by_endpoints = I.left <= J.left and J.right <= I.right
    assert I.contains(J) == by_endpoints
    assert I.disjoint(J) == (I.right <= J.left or J.right <= I.left)


@given(intervals(6))
def test_haar_step_integrates_to_zero(I):
    f = haar_step(I, I.level + 2)
    assert f.integral() == 0
    assert np.abs(f.values).sum() / len(f) == I.measure


def test_union_measure_and_layout():
    assert dyadic.union_measure([DyadicInterval(1, 0), DyadicInterval(2, 2)]) == 0.75
    assert dyadic.dimension(3) == 15
    assert dyadic.level_slice(2) == slice(3, 7)
    assert dyadic.ambient_from_dim(15) == 3
    np.testing.assert_array_equal(dyadic.measures(1), [1, 0.5, 0.5])
