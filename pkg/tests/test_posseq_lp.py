import copy
import json
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.optimize import brentq

from posbasis import posseq_lp as lp
from posbasis.fnspace import (
    HaarIndex,
    IntervalSet,
    haar,
    indicator,
    lp_norm,
    pairing,
    pos_neg_parts,
    restrict,
)
from posbasis.posbasis_l2 import SeedInfeasible

SCHEDULE = (0.9, 0.85, 0.8)


@pytest.fixture(scope="module")
def built3():
    return lp.build(3.0, SCHEDULE)


@pytest.fixture(scope="module")
def report3(built3):
    return lp.verify_lp(built3)


def _dual_oracle(m, p):
    n, j = lp.haar_position(m)
    h = haar(HaarIndex(0, n, j), p)
    return brentq(lambda C: pairing(h, h * C) - 1.0, 1e-6, 1e6, xtol=1e-14)


def test_dual_constant_examples():
    assert lp.dual_constant(0, 3.0) == 1.0
    for m in range(1, 9):
        assert lp.dual_constant(m, 2.0) == pytest.approx(1.0)
    assert lp.dual_constant(1, 3.0) == pytest.approx(1.0)
    assert lp.dual_constant(2, 3.0) == pytest.approx(0.5 ** (-1 / 3))
    with pytest.raises(ValueError):
        lp.dual_constant(-1, 3.0)


@given(st.integers(1, 40), st.sampled_from([1.25, 1.5, 2.0, 3.0, 5.0]))
def test_dual_constant_matches_biorthogonality(m, p):
    assert lp.dual_constant(m, p) == pytest.approx(_dual_oracle(m, p), rel=1e-10)


def test_projection_methods_agree():
    f = indicator(Fraction(1, 3), Fraction(7, 5)) * 2.0 - indicator(0, Fraction(1, 8))
    for L in range(4):
        a = lp.projection_norm(f, L, 3.0, "haar")
        b = lp.projection_norm(f, L, 3.0, "expectation")
        assert a == pytest.approx(b, rel=1e-12)


def test_first_extension_splits_halves():
    st0 = lp.init(3.0, SCHEDULE)
    ext = lp.extend_haar_type(st0)
    assert ext.left == IntervalSet([(0, Fraction(1, 2))])
    assert ext.right == IntervalSet([(Fraction(1, 2), 1)])
    assert ext.g == indicator(0, Fraction(1, 2)) - indicator(Fraction(1, 2), 1)
    assert ext.gamma and ext.beta <= 1e-10


def test_haar_type_system(built3):
    hts = built3.hts
    assert all(hts.check().values())
    for m in range(1, len(hts.g)):
        n, j = lp.haar_position(m)
        assert hts.E[(2 * j, n)].measure() == hts.E[(2 * j + 1, n)].measure() == Fraction(1, 2**n)
        # the new vector pairs to zero with every dual of the previous prefix
        L_prev = built3.levels[m - 1]
        assert np.abs(lp.haar_coefficients(hts.g[m], L_prev, 3.0)).max() <= 1e-10


def test_step_examples(built3):
    p = built3.p
    for n, stp in enumerate(built3.steps, start=1):
        g = built3.hts.g[n]
        N = stp.N
        gp, gm = pos_neg_parts(g)
        for i, G in enumerate(stp.embedding.pieces()):
            part = gp if i % 2 == 0 else gm
            assert lp_norm(restrict(part, G), p) == pytest.approx((2 * N) ** (-1 / p), rel=1e-12)
        w = np.zeros(4 * N)
        w[2 * N :] = (2 * N) ** (-1 / p) * np.where(np.arange(2 * N) % 2 == 0, 1.0, -1.0)
        img = stp.embedding.apply(w)
        assert img.breakpoints == g.breakpoints
        assert (img - g).max_abs() <= 1e-12
    assert all(f.is_nonnegative() for f in built3.z)


def test_expansion_identity_random_coefficients(built3):
    r = np.random.default_rng(3)
    for stp in built3.steps:
        seed = lp._seed(stp)
        b = r.standard_normal(2 * stp.N)
        x = seed.vectors.matrix @ b
        direct = stp.embedding.apply(x)
        block = built3.z[stp.start : stp.stop]
        combo = sum((f * float(c) for f, c in zip(block[1:], b[1:])), block[0] * float(b[0]))
        assert (direct - combo).max_abs() <= 1e-10 * max(1.0, direct.max_abs())


def test_verify_three_steps_p3(report3):
    assert report3.passed, report3.summary()
    for n in (1, 2, 3):
        assert report3[f"haar_dual_factored[{n}]"].computed <= 1e-8
        e = report3[f"e[{n}]"]
        assert e.computed <= e.oracle + 1e-9
    assert report3["basis_constant"].passed


def test_verify_p_one_and_a_half():
    st15 = lp.build(1.5, (0.9, 0.9, 0.85))
    rep = lp.verify_lp(st15, restarts=4, samples=10)
    assert rep.passed, rep.summary()


def test_strengthened_tolerance_mode_is_infeasible():
    st0 = lp.init(3.0, SCHEDULE, tolerance="strengthened")
    with pytest.raises(SeedInfeasible):
        lp.step_lp(st0)


def test_bad_inputs():
    with pytest.raises(ValueError):
        lp.init(1.0)
    with pytest.raises(ValueError):
        lp.init(3.0, tolerance="loose")
    with pytest.raises(ValueError):
        lp.init(3.0, (0.9, 0.9), eps_total=1.0)
    st1 = lp.build(3.0, (0.9,))
    with pytest.raises(ValueError):
        lp.step_lp(st1)


def test_negative_control_corrupted_piece(built3):
    bad = copy.deepcopy(built3)
    emb = bad.steps[0].embedding
    left, width, val = emb.plus
    # every positive piece moves up one label: the last one leaves supp g+
    emb.plus = (left + width, width, val)
    rep = lp.verify_lp(bad, restarts=2, samples=4)
    assert not rep["distribution[1]"].passed


def test_json_round_trip(built3, tmp_path):
    path = tmp_path / "lp.json"
    lp.export(built3, path)
    back = lp.load(path)
    assert back.z == built3.z
    assert back.hts.g == built3.hts.g
    assert back.M_index == built3.M_index and back.N_index == built3.N_index
    lp.export(back, tmp_path / "again.json")
    assert (tmp_path / "again.json").read_bytes() == path.read_bytes()
    assert json.loads(path.read_text())["construction"] == "seq-lp"
