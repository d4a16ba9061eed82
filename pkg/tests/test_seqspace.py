import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from posbasis.seqspace import (
    BlockVec,
    IllConditioned,
    LinearDependence,
    SpanBasis,
    basis_constant,
    basis_constants_eig,
    basis_constants_l2,
    check_conditioning,
    cyclic_shift,
    dist_to_span,
    dual_exponent,
    functional_sup,
    gram_matrix,
    merge_identical_rows,
    orthoproject_l2,
    pnorm,
)


def unit(N, k, p=2.0, block="e"):
    v = np.zeros(4 * N)
    v[k if block == "e" else 2 * N + k] = 1.0
    return BlockVec.from_coords(N, v, p)


def random_basis(N, k, seed, p=2.0):
    r = np.random.default_rng(seed)
    return SpanBasis([BlockVec.from_coords(N, r.standard_normal(4 * N), p) for _ in range(k)])


def test_cyclic_shift_examples():
    v = BlockVec(3, [1, 0, 0, 0, 0, 0], [0] * 6)
    assert cyclic_shift(v, 1) == BlockVec(3, [0, 1, 0, 0, 0, 0], [0] * 6)
    w = BlockVec(3, np.arange(6.0), np.arange(6.0) ** 2)
    assert cyclic_shift(w, 6) == w
    assert cyclic_shift(cyclic_shift(w, 4), 2) == w


@given(st.integers(1, 5), st.integers(-20, 20), st.integers(0, 10**6))
def test_shift_preserves_norm(N, m, seed):
    v = BlockVec.from_coords(N, np.random.default_rng(seed).standard_normal(4 * N), 3.0)
    assert cyclic_shift(v, m).norm() == pytest.approx(v.norm(), rel=1e-14)


def test_project_examples():
    S = SpanBasis([unit(2, 0), unit(2, 1)])
    v = S.combine([2.0, -1.0])
    P, n = orthoproject_l2(v, S)
    assert np.allclose(P.coords(), v.coords()) and n == pytest.approx(math.sqrt(5))
    P, n = orthoproject_l2(unit(2, 0, block="f"), S)
    assert np.allclose(P.coords(), 0) and n == pytest.approx(0.0, abs=1e-15)


def test_project_residual_orthogonal():
    S = random_basis(3, 5, 1)
    v = BlockVec.from_coords(3, np.random.default_rng(2).standard_normal(12))
    P, _ = orthoproject_l2(v, S)
    r = v.coords() - P.coords()
    assert np.abs(S.matrix.T @ r).max() <= 1e-9


@given(st.integers(0, 10**6))
def test_projection_idempotent(seed):
    S = random_basis(2, 3, seed)
    v = BlockVec.from_coords(2, np.random.default_rng(seed + 1).standard_normal(8))
    P, _ = orthoproject_l2(v, S)
    PP, _ = orthoproject_l2(P, S)
    assert np.abs(PP.coords() - P.coords()).max() <= 1e-10


def test_dist_examples():
    S = SpanBasis([unit(2, 0, 3.0), unit(2, 1, 3.0)])
    d, _ = dist_to_span(S.combine([1.0, 4.0]), S)
    assert d <= 1e-12
    v = unit(2, 2, 2.0)
    S2 = SpanBasis([unit(2, 0), unit(2, 1)])
    assert dist_to_span(v, S2)[0] == pytest.approx(1.0, abs=1e-12)


@given(st.integers(0, 10**6), st.sampled_from([1.5, 2.0, 3.0, 4.0]))
def test_dist_beats_random_probes(seed, p):
    S = random_basis(2, 3, seed, p)
    v = BlockVec.from_coords(2, np.random.default_rng(seed + 7).standard_normal(8), p)
    d, b = dist_to_span(v, S)
    assert d == pytest.approx(pnorm(v.coords() - S.matrix @ b, p), rel=1e-12)
    r = np.random.default_rng(seed + 9)
    for _ in range(20):
        probe = b + r.standard_normal(3) * 10.0 ** r.integers(-3, 1)
        assert d <= pnorm(v.coords() - S.matrix @ probe, p) + 1e-12


def test_functional_sup_examples():
    for p in (1.5, 2.0, 3.0):
        q = dual_exponent(p)
        S = SpanBasis([unit(2, 0, p)])
        assert functional_sup(unit(2, 0, q), S, p) == pytest.approx(1.0, abs=1e-9)
    S = SpanBasis([unit(2, 0), unit(2, 1)])
    assert functional_sup(unit(2, 3), S) == pytest.approx(0.0, abs=1e-12)


@given(st.integers(0, 10**6), st.sampled_from([1.5, 2.0, 3.0]))
def test_functional_sup_holder(seed, p):
    q = dual_exponent(p)
    S = random_basis(2, 3, seed, p)
    g = BlockVec.from_coords(2, np.random.default_rng(seed + 3).standard_normal(8), q)
    assert functional_sup(g, S, p, restarts=4) <= g.norm() + 1e-9


def test_basis_constant_examples():
    S = SpanBasis([unit(3, k) for k in range(4)])
    assert basis_constant(S) == pytest.approx(1.0, abs=1e-12)
    e1, e2 = unit(1, 0), unit(1, 1)
    S2 = SpanBasis([e1, e1 + 10.0 * e2])
    bc = basis_constant(S2)
    # oracle: brute force over unit coefficient vectors
    t = np.linspace(0, np.pi, 200001)
    X = S2.matrix
    ratios = np.abs(np.cos(t)) * np.linalg.norm(X[:, 0]) / np.linalg.norm(np.outer(X[:, 0], np.cos(t)) + np.outer(X[:, 1], np.sin(t)), axis=0)
    assert bc > 1 and bc == pytest.approx(ratios.max(), abs=1e-3)


@given(st.integers(0, 10**6), st.integers(2, 6))
def test_basis_constant_properties(seed, k):
    S = random_basis(2, k, seed)
    G = gram_matrix(S.matrix)
    full = basis_constant(S)
    assert full >= 1.0
    assert np.allclose(basis_constants_l2(G), basis_constants_eig(G), rtol=1e-8)
    for m in range(1, k):
        assert basis_constant(SpanBasis(S.vectors[:m])) <= full + 1e-9


def test_basis_constant_lp_is_lower_bound():
    S = random_basis(2, 4, 5, 3.0)
    est = basis_constant(S, restarts=8)
    r = np.random.default_rng(11)
    X = S.matrix
    for _ in range(200):
        b = r.standard_normal(4)
        m = int(r.integers(1, 4))
        assert est >= pnorm(X[:, :m] @ b[:m], 3.0) / pnorm(X @ b, 3.0) - 1e-9


def test_errors():
    with pytest.raises(LinearDependence):
        SpanBasis([unit(2, 0), unit(2, 0)])
    with pytest.raises(IllConditioned):
        check_conditioning(np.diag([1.0, 1e-14]))
    with pytest.raises(ValueError):
        BlockVec(2, [1.0], [0.0] * 4)


@given(st.integers(0, 10**6), st.sampled_from([1.5, 2.0, 3.0]))
def test_merge_identical_rows_keeps_norms(seed, p):
    r = np.random.default_rng(seed)
    base = r.integers(-2, 3, size=(4, 3)).astype(float)
    M = base[r.integers(0, 4, size=12)]
    w = r.random(12)
    Mm, wm = merge_identical_rows(M, w)
    assert Mm.shape[0] <= 4
    b = r.standard_normal(3)
    assert pnorm(Mm @ b, p, wm) == pytest.approx(pnorm(M @ b, p, w), rel=1e-12, abs=1e-300)
