import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from oracles import double_integral

from posbasis import condseed as cs
from posbasis.seqspace import cyclic_shift, pnorm


@pytest.fixture(scope="module")
def seed08():
    return cs.build_seed(cs.coeffs_optimized(0.8, 1.0, 2.0, 0.9), "l2")


@pytest.fixture(scope="module")
def seed_lp():
    return cs.build_seed(cs.coeffs_optimized(0.9, 1.0, 3.0, 0.9), "lp")


def direct_inequalities(P):
    """Both seed inequalities by plain summation, tails accumulated from the end."""
    q = P.p / (P.p - 1)
    tails, acc = [], 0.0
    for x in reversed(P.a):
        acc += x**q
        tails.append(acc)
    return math.fsum(P.a), math.fsum(t ** (P.p / q) for t in tails)


@pytest.mark.parametrize("p", [2.0, 3.0])
def test_integral_bound_by_quadrature(p):
    assert double_integral(p) <= cs.integral_bound(p) + 1e-6


def test_nlogn_coefficient_value():
    a = cs.nlogn_coefficients(0.5, 2.0, 3)
    assert a[0] == pytest.approx(0.5 * math.sqrt(math.log(2)) / (3 * math.log(3)), rel=1e-14)


def test_nlogn_recipe_infeasible():
    with pytest.raises(cs.Infeasible) as info:
        cs.coeffs_nlogn(0.25, 2.0)
    # sum_{n<=N} 1/((n+2) ln(n+2)) ~ ln ln N, so N_required is astronomically beyond the cap
    assert info.value.ln_N_required > math.log(cs.N_CAP)


@pytest.mark.parametrize("eps,nmax", [(1.0, 4), (0.8, 60)])
def test_optimized_examples(eps, nmax):
    P = cs.coeffs_optimized(eps, 1.0, 2.0, 0.9)
    A, W = direct_inequalities(P)
    assert P.N <= nmax
    assert A > eps**-2 and W < eps**2
    if eps == 0.8:
        assert 30 <= P.N <= 60


def test_optimized_infeasible_frontier():
    with pytest.raises(cs.Infeasible) as info:
        cs.coeffs_optimized(0.3, 1.0, 2.0, 0.9)
    # Cauchy-Schwarz: 1 + ln N >= eps^-6
    assert info.value.ln_N_required >= cs.frontier_ln_N(0.3) > math.log(cs.N_CAP)


@given(st.floats(0.75, 1.0), st.sampled_from([1.5, 2.0, 3.0]), st.floats(0.5, 0.95))
def test_optimized_meets_inequalities(eps, p, theta):
    try:
        P = cs.coeffs_optimized(eps, 1.0, p, theta, N_cap=10**5)
    except cs.Infeasible:
        return
    A, W = direct_inequalities(P)
    assert A > eps**-2 and W < eps**p
    assert all(x > 0 for x in P.a) and all(x >= y for x, y in zip(P.a, P.a[1:]))


def test_params_validation():
    with pytest.raises(cs.InvalidSeedParams):
        cs.SeedParams(0.8, 1.0, 2.0, (0.1,))
    with pytest.raises(cs.InvalidSeedParams):
        cs.SeedParams(1.5, 1.0, 2.0, (1.0,), unchecked=True)


def test_structural_n1():
    P = cs.SeedParams(0.5, 0.7, 2.0, (0.3,), unchecked=True)
    s = cs.build_seed(P, "l2")
    x1, x2 = s.vectors[0], s.vectors[1]
    assert np.array_equal(x1.e, [1.0, 0.3]) and np.array_equal(x1.f, [0.0, 0.5 * 0.3])
    assert np.array_equal(x2.e, [0.0, 1.0]) and np.array_equal(x2.f, [0.5 * 0.7, 0.0])
    with pytest.raises(ValueError):
        cs.certify_seed(s)


def test_cyclic_structure(seed08):
    assert seed08.vectors[2] == cyclic_shift(seed08.vectors[0], 2)
    err = cs.structure_errors(seed08)
    assert err["max_deviation"] == 0.0 and err["min_coordinate"] >= 0.0


def test_lp_witness_norm(seed_lp):
    assert seed_lp.witness_y.norm() == pytest.approx(2 ** (1 / 3), rel=1e-14)
    assert seed_lp.vectors.matrix.min() >= 0


@given(st.integers(0, 10**6))
def test_expansion_identity(seed):
    for P, v in ((cs.coeffs_optimized(0.8, 1.0, 2.0), "l2"), (cs.coeffs_optimized(0.9, 1.0, 3.0), "lp")):
        s = cs.build_seed(P, v)
        b = np.random.default_rng(seed).standard_normal(2 * P.N)
        assert np.abs(cs.expansion_closed_form(s, b) - s.vectors.matrix @ b).max() <= 1e-10


def test_certify_l2(seed08):
    rep = cs.certify_seed(seed08)
    assert rep.passed, rep.summary()
    P = seed08.params
    assert rep["witness_residual"].computed == pytest.approx(1 / (P.eps * P.A), rel=1e-9)
    assert cs.prefix_inequality(seed08) <= 1 + 4 * P.eps


def test_witness_residual_by_hand(seed08):
    b = seed08.explicit_coeffs()
    P = seed08.params
    r = pnorm(seed08.vectors.matrix @ b - seed08.witness_y.coords(), 2.0)
    assert r == pytest.approx(1 / (P.eps * P.A), rel=1e-12)
    # both sign conventions of the witness sit at the same distance
    r_alt = pnorm(seed08.vectors.matrix @ (-b) - seed08.witness_y_alt.coords(), 2.0)
    assert r_alt == pytest.approx(r, rel=1e-12)


def test_certify_lp(seed_lp):
    rep = cs.certify_seed(seed_lp, restarts=8)
    assert rep.passed, rep.summary()
    assert rep["basis_constant"].computed <= 1 + 4 * seed_lp.params.eps


def test_relaxed_threshold_needs_fewer_terms():
    strict = cs.coeffs_optimized(0.8, 0.9, 2.0)
    relaxed = cs.coeffs_optimized(0.8, 0.9, 2.0, threshold="relaxed")
    assert relaxed.N <= strict.N


def test_infeasible_payload():
    with pytest.raises(cs.Infeasible) as info:
        cs.coeffs_optimized(0.25, 1.0, 2.0)
    d = info.value.to_dict()
    assert d["infeasible"] and d["log10_N_required"] > 7
