import math
from fractions import Fraction

import numpy as np
import pytest
from conftest import piecewise, rational
from hypothesis import given
from hypothesis import strategies as st

from posbasis.fnspace import (
    HaarIndex,
    IntervalSet,
    NotPiecewiseConstantOnS,
    PiecewiseFn,
    Registry,
    allocate_fresh_intervals,
    distribution_on,
    equal_distribution_split,
    haar,
    haar_enumerate,
    indicator,
    lp_norm,
    pairing,
    pos_neg_parts,
    translate,
)

H = Fraction(1, 2)


def test_lp_norm_examples():
    assert lp_norm(indicator(0, 1), 2) == 1.0
    assert lp_norm(PiecewiseFn(), 3) == 0.0
    assert lp_norm(2.0 * indicator(0, H), 2) == pytest.approx(math.sqrt(2), abs=1e-15)


def test_lp_norm_rejects_bad_p():
    with pytest.raises(ValueError):
        lp_norm(indicator(0, 1), 0.5)


def test_pairing_examples():
    assert pairing(indicator(0, 1), indicator(0, 1)) == 1.0
    assert pairing(indicator(0, 1), indicator(1, 2)) == 0.0
    h = haar(HaarIndex(0, 1, 0), 2.0)
    # oracle: (+1)^2 on (0,1/2] plus (-1)^2 on (1/2,1]
    assert pairing(h, h) == pytest.approx(0.5 * 1 + 0.5 * 1, abs=1e-15)


def test_translate_examples():
    assert translate(indicator(0, 1), 1) == indicator(1, 2)
    f = PiecewiseFn([0, H, 2], [1.0, -2.0])
    assert translate(f, 0) == f


def test_pos_neg_examples():
    h = haar(HaarIndex(0, 1, 0), 2.0)
    assert pos_neg_parts(h) == (indicator(0, H), indicator(H, 1))
    f = PiecewiseFn([0, 1, 3], [2.0, 1.0])
    assert pos_neg_parts(f) == (f, PiecewiseFn())


def test_distribution_examples():
    S = IntervalSet([(0, 1)])
    assert distribution_on(indicator(0, 1), S).as_dict() == {1.0: Fraction(1)}
    assert len(distribution_on(indicator(0, 1), IntervalSet([(2, 3)]))) == 0
    f = 3.0 * indicator(0, 1)
    assert distribution_on(f, IntervalSet([(0, H)])) == distribution_on(f, IntervalSet([(H, 1)]))


def test_split_examples():
    S = IntervalSet([(0, 1)])
    G = equal_distribution_split([indicator(0, 1)], S, 2)
    assert G == [IntervalSet([(0, H)]), IntervalSet([(H, 1)])]
    assert equal_distribution_split([indicator(0, 1)], S, 1) == [S]


def test_split_rejects_non_functions():
    with pytest.raises(NotPiecewiseConstantOnS):
        equal_distribution_split([lambda t: t], IntervalSet([(0, 1)]), 2)


def test_haar_examples():
    assert haar(HaarIndex(0, 0), 3.0) == indicator(0, 1)
    h = haar(HaarIndex(0, 1, 0), 2.0)
    assert h == indicator(0, H) - indicator(H, 1)
    assert lp_norm(h, 2) == 1.0
    g = haar(HaarIndex(0, 2, 1), 3.0)
    expected = 2 ** (1 / 3) * (indicator(H, Fraction(3, 4)) - indicator(Fraction(3, 4), 1))
    assert g == expected
    assert lp_norm(g, 3) == pytest.approx(1.0, abs=1e-12)


def test_haar_enumerate():
    assert haar_enumerate(1) == [HaarIndex(0, 0, 0)]
    first = haar_enumerate(1000)
    assert len(set(first)) == 1000
    assert [i.to_json() for i in haar_enumerate(50)] == [i.to_json() for i in haar_enumerate(50)]


def test_allocate_fresh_examples():
    reg = Registry(IntervalSet())
    a, b = allocate_fresh_intervals(reg, 2)
    assert a.measure() == b.measure() == 1 and a.isdisjoint(b)
    reg2 = Registry(IntervalSet([(0, 1)]))
    reg3 = Registry(IntervalSet([(0, 1)]))
    assert allocate_fresh_intervals(reg2, 3) == allocate_fresh_intervals(reg3, 3)


@given(st.lists(st.tuples(rational, st.integers(1, 3)), max_size=4), st.integers(1, 4))
def test_fresh_intervals_avoid_registry(spans, count):
    parts = IntervalSet()
    for a, w in spans:
        parts = parts | IntervalSet([(a, a + w)])
    reg = Registry(parts)
    before = reg.used
    out = allocate_fresh_intervals(reg, count)
    for i, s in enumerate(out):
        assert s.measure() == 1 and s.isdisjoint(before)
        assert all(s.isdisjoint(t) for t in out[i + 1 :])


@given(piecewise())
def test_json_round_trip(f):
    assert PiecewiseFn.from_json(f.to_json()) == f


@given(piecewise(), piecewise(), st.sampled_from([1.0, 1.5, 2.0, 3.0]))
def test_disjoint_support_additivity(f, g, p):
    shift = (max(f.breakpoints, default=0) if not f.is_zero() else 0) - (min(g.breakpoints, default=0) if not g.is_zero() else 0) + 1
    g = translate(g, shift)
    lhs = lp_norm(f, p) ** p + lp_norm(g, p) ** p
    assert lp_norm(f + g, p) ** p == pytest.approx(lhs, rel=1e-12, abs=1e-300)


@given(piecewise())
def test_pos_neg_parts(f):
    fp, fm = pos_neg_parts(f)
    assert fp.is_nonnegative() and fm.is_nonnegative()
    assert fp - fm == f
    assert fp + fm == abs(f)
    assert fp.support().isdisjoint(fm.support())


@given(piecewise(), rational, st.sampled_from([1.0, 2.0, 2.5]))
def test_translation_invariance(f, lam, p):
    assert lp_norm(translate(f, lam), p) == pytest.approx(lp_norm(f, p), rel=1e-15)


@given(st.lists(piecewise(), min_size=1, max_size=3), st.integers(1, 5))
def test_equal_distribution_split(fns, N):
    S = IntervalSet([(-2, Fraction(5, 3))])
    G = equal_distribution_split(fns, S, N)
    assert len(G) == N
    union = IntervalSet()
    for i, g in enumerate(G):
        assert g.measure() == S.measure() / N
        assert all(g.isdisjoint(h) for h in G[i + 1 :])
        union = union | g
    assert union == S
    for f in fns:
        d0 = distribution_on(f, G[0])
        assert all(distribution_on(f, g) == d0 for g in G[1:])


@given(st.integers(0, 63), st.integers(0, 63), st.sampled_from([1.5, 2.0, 3.0]))
def test_haar_normalized_and_orthogonal(i, j, p):
    from posbasis.fnspace import unit_haar_index

    assert lp_norm(haar(unit_haar_index(i), p), p) == pytest.approx(1.0, abs=1e-12)
    if i != j:
        assert abs(pairing(haar(unit_haar_index(i), 2.0), haar(unit_haar_index(j), 2.0))) <= 1e-12


def test_split_on_non_dyadic_pieces_is_exact():
    G = equal_distribution_split([indicator(0, 1)], IntervalSet([(0, 1)]), 3)
    assert [g.measure() for g in G] == [Fraction(1, 3)] * 3
    assert np.isclose(float(sum(g.measure() for g in G)), 1.0)


def test_copy_and_pickle_keep_values():
    import copy
    import pickle

    f = PiecewiseFn([0, Fraction(1, 3), 2], [1.5, -2.0])
    S = f.support()
    assert copy.deepcopy(f) is f and copy.copy(S) is S
    assert pickle.loads(pickle.dumps(f)) == f
    assert pickle.loads(pickle.dumps(S)) == S
