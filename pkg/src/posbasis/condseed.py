"""Conditional positive basic sequences in lp(Z_2N) + lp(Z_2N).

The seed is built from a positive coefficient sequence a_1 >= ... >= a_N:

    x_1 = e_1 + sum_j a_j e_2j + eps * sum_j a_j f_2j
    x_2 = e_2 + eps*c f_1            (c = 1 in the lp variant)
    x_{2n+1} = T_2n x_1,  x_{2n+2} = T_2n x_2

where T is the cyclic right shift acting on both blocks.  The sequence is
basic with a constant close to 1, yet a fixed unit vector sits within eps of
its span while being almost orthogonal to every vector of it.

Two inequalities make this work, with A = sum a_j:
    A > threshold                                   (eps^-2 c^-2, or eps^-2)
    sum_n (sum_{j>=n} a_j^q)^(p/q) < eps^p          (sum j a_j^2 < eps^2 at p=2)
By Cauchy-Schwarz, A^2 <= (sum j a_j^2)(sum 1/j) < eps^2 H_N, so at p = 2 and
c = 1 any admissible sequence needs 1 + ln N > eps^-6.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Literal

import numpy as np
from scipy.optimize import minimize_scalar

from .parallel import streams
from .report import CertReport, Check
from .seqspace import (
    BlockVec,
    SpanBasis,
    basis_constant_matrix,
    basis_constants_eig,
    dist_to_span,
    dual_exponent,
    functional_bracket,
    gram_matrix,
    orthoproject_l2,
    pairing_vector,
    pnorm,
)

N_CAP = 10**7
BUILD_CAP = 4096
EULER_GAMMA = 0.5772156649015329

Threshold = Literal["strict", "relaxed"]
Variant = Literal["l2", "lp"]


class InvalidSeedParams(ValueError):
    pass


class Infeasible(Exception):
    """No admissible coefficient sequence within the search cap."""

    def __init__(self, reason: str, **info):
        super().__init__(reason)
        self.reason = reason
        self.info = info

    @property
    def ln_N_required(self) -> float | None:
        return self.info.get("ln_N_required")

    def to_dict(self) -> dict:
        out = {"infeasible": True, "reason": self.reason}
        out.update(self.info)
        ln = self.info.get("ln_N_required")
        if ln is not None and math.isfinite(ln):
            out["log10_N_required"] = ln / math.log(10)
            out["N_required"] = math.exp(ln) if ln < 700 else None
        return out


def required_sum(eps: float, c: float, threshold: Threshold) -> float:
    """The lower bound the coefficient sum must exceed."""
    return eps**-2 * (c**-2 if threshold == "strict" else 1.0)


def tail_functional(a: np.ndarray, p: float) -> float:
    """sum_{n=1}^N (sum_{j=n}^N a_j^q)^(p/q)."""
    q = dual_exponent(p)
    tails = np.cumsum((np.asarray(a, dtype=float) ** q)[::-1])[::-1]
    return math.fsum(tails ** (p / q))


@dataclass(frozen=True)
class SeedParams:
    eps: float
    c: float
    p: float
    a: tuple[float, ...]
    threshold: Threshold = "strict"
    recipe: str = "manual"
    theta: float | None = None
    unchecked: bool = False

    def __post_init__(self):
        if not 0 < self.eps <= 1:
            raise InvalidSeedParams("eps must lie in (0, 1]")
        if not 0 < self.c <= 1:
            raise InvalidSeedParams("c must lie in (0, 1]")
        if self.p <= 1:
            raise InvalidSeedParams("p must exceed 1")
        a = np.asarray(self.a, dtype=float)
        if a.ndim != 1 or a.size == 0:
            raise InvalidSeedParams("need at least one coefficient")
        if np.any(a <= 0) or np.any(np.diff(a) > 0):
            raise InvalidSeedParams("coefficients must be positive and non-increasing")
        object.__setattr__(self, "a", tuple(float(x) for x in a))
        if not self.unchecked:
            ok = self.inequalities()
            if not ok["sum_ok"]:
                raise InvalidSeedParams(f"sum of coefficients {ok['A']} does not exceed {ok['threshold']}")
            if not ok["tail_ok"]:
                raise InvalidSeedParams(f"tail functional {ok['tail']} is not below eps^p = {ok['eps_p']}")

    @property
    def N(self) -> int:
        return len(self.a)

    @property
    def q(self) -> float:
        return dual_exponent(self.p)

    @property
    def A(self) -> float:
        return math.fsum(self.a)

    def inequalities(self) -> dict:
        A = self.A
        T = required_sum(self.eps, self.c, self.threshold)
        W = tail_functional(np.array(self.a), self.p)
        return {
            "A": A,
            "threshold": T,
            "sum_ok": A > T,
            "tail": W,
            "eps_p": self.eps**self.p,
            "tail_ok": W < self.eps**self.p,
        }

    def to_dict(self) -> dict:
        return {
            "eps": self.eps,
            "c": self.c,
            "p": self.p,
            "q": self.q,
            "N": self.N,
            "A": self.A,
            "threshold": self.threshold,
            "recipe": self.recipe,
            "theta": self.theta,
            "a_first": self.a[0],
            "a_last": self.a[-1],
        }


# ---------------------------------------------------------------------------
# coefficient recipes


def integral_bound(p: float) -> float:
    """Closed form of the double integral for f(x) = ((x+1) ln(x+1))^-1."""
    q = dual_exponent(p)
    return (q - 1) ** (-p / q) * (p - 1) ** -1 * math.log(2) ** (1 - p)


def nlogn_scale(p: float) -> float:
    return integral_bound(p) ** (-1.0 / p)


def nlogn_coefficients(eps: float, p: float, N: int) -> np.ndarray:
    n = np.arange(1, N + 1, dtype=float)
    return nlogn_scale(p) * eps / ((n + 2) * np.log(n + 2))


def _chunks(cap: int, size: int = 1 << 20):
    start = 1
    while start <= cap:
        stop = min(cap, start + size - 1)
        yield np.arange(start, stop + 1, dtype=float)
        start = stop + 1


def coeffs_nlogn(
    eps: float,
    p: float,
    c: float = 1.0,
    threshold: Threshold = "strict",
    N_cap: int = N_CAP,
) -> SeedParams:
    """The recipe a_n = K eps / ((n+2) ln(n+2)), cut at the first N that works."""
    if eps <= 0 or p <= 1:
        raise ValueError("need eps > 0 and p > 1")
    K = nlogn_scale(p)
    target = required_sum(eps, c, threshold) / (K * eps)
    total = 0.0
    for n in _chunks(N_cap):
        part = np.cumsum(1.0 / ((n + 2) * np.log(n + 2))) + total
        hit = np.flatnonzero(part > target)
        if hit.size:
            N = int(n[hit[0]])
            return SeedParams(eps, c, p, tuple(nlogn_coefficients(eps, p, N)), threshold, "nlogn")
        total = float(part[-1])
    # sum_{n<=N} 1/((n+2)ln(n+2)) grows like ln ln N beyond the cap
    lnln = math.log(math.log(N_cap + 2.5)) + (target - total)
    raise Infeasible(
        "the n log n recipe needs more than the search cap",
        recipe="nlogn",
        eps=eps,
        c=c,
        p=p,
        N_cap=N_cap,
        ln_N_required=math.exp(lnln) if lnln < 700 else float("inf"),
        frontier_ln_N_min=frontier_ln_N(eps, c) if p == 2 else None,
    )


def frontier_ln_N(eps: float, c: float = 1.0) -> float:
    """Lower bound on ln N for any admissible sequence at p = 2 (strict threshold)."""
    return eps**-6 * c**-4 - 1.0


def _family_ratio(N: int, p: float) -> tuple[float, float]:
    """(H_N, W_N) for the unit family a_n = 1/n."""
    n = np.arange(1, N + 1, dtype=float)
    H = math.fsum(1.0 / n)
    if p == 2:
        return H, H
    return H, tail_functional(1.0 / n, p)


def _margin_value(N: int, eps: float, p: float, theta: float) -> float:
    H, W = _family_ratio(N, p)
    return eps * theta ** (1.0 / p) * H / W ** (1.0 / p)


def coeffs_optimized(
    eps: float,
    c: float = 1.0,
    p: float = 2.0,
    theta: float = 0.9,
    threshold: Threshold = "strict",
    N_cap: int = N_CAP,
    power_of_two: bool = False,
) -> SeedParams:
    """Smallest N in the family a_n = b/n meeting both inequalities with margin theta.

    b is fixed by putting the tail functional at theta*eps^p; then the sum
    condition reads eps theta^(1/p) H_N / W_N^(1/p) > threshold.  At p = 2,
    W_N = H_N and this is H_N > threshold^2 / (theta eps^2).
    """
    if not 0 < theta < 1:
        raise ValueError("theta must lie in (0, 1)")
    if not 0 < eps <= 1 or not 0 < c <= 1 or p <= 1:
        raise ValueError("need eps, c in (0, 1] and p > 1")
    T = required_sum(eps, c, threshold)
    q = dual_exponent(p)
    if p == 2:
        ln_needed = T**2 / (theta * eps**2) - EULER_GAMMA
    else:
        ln_needed = (T / (eps * theta ** (1 / p) * (q - 1) ** (1 / q))) ** q
    if ln_needed > math.log(N_cap) + 2:
        raise Infeasible(
            "the 1/n family needs N beyond the search cap",
            recipe="optimized",
            eps=eps,
            c=c,
            p=p,
            theta=theta,
            threshold=threshold,
            N_cap=N_cap,
            ln_N_required=ln_needed,
            frontier_ln_N_min=frontier_ln_N(eps, c if threshold == "strict" else 1.0) if p == 2 else None,
        )
    good = lambda N: _margin_value(N, eps, p, theta) > T
    hi = 1
    while not good(hi):
        hi *= 2
        if hi > 2 * N_cap:
            raise Infeasible(
                "the 1/n family needs N beyond the search cap",
                recipe="optimized", eps=eps, c=c, p=p, theta=theta, threshold=threshold,
                N_cap=N_cap, ln_N_required=ln_needed,
            )
    lo = hi // 2
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if good(mid):
            hi = mid
        else:
            lo = mid
    N = hi
    while N > 1 and good(N - 1):
        N -= 1
    if power_of_two:
        N = 1 << (N - 1).bit_length()
    if N > N_cap:
        raise Infeasible("N exceeds the search cap", recipe="optimized", eps=eps, c=c, p=p, N_cap=N_cap,
                         ln_N_required=math.log(N))
    _, W = _family_ratio(N, p)
    b = eps * (theta / W) ** (1.0 / p)
    a = tuple(b / np.arange(1, N + 1, dtype=float))
    return SeedParams(eps, c, p, a, threshold, "optimized", theta)


# ---------------------------------------------------------------------------
# the seed


@dataclass
class SeedSystem:
    params: SeedParams
    variant: Variant
    vectors: SpanBasis
    witness_y: BlockVec
    witness_y_alt: BlockVec | None = None
    witness_x: BlockVec | None = None
    witness_fstar: BlockVec | None = None
    meta: dict = field(default_factory=dict)

    @property
    def N(self) -> int:
        return self.params.N

    def explicit_coeffs(self) -> np.ndarray:
        """Coefficients whose combination lies exactly eps^-1 A^-1 from witness_y."""
        P, N = self.params, self.params.N
        s = N ** (1.0 / P.p)
        b = np.empty(2 * N)
        if self.variant == "l2":
            b[0::2] = -1.0 / (P.eps * P.A * s)
            b[1::2] = 1.0 / (P.eps * s)
        else:
            b[0::2] = 1.0 / (P.eps * P.A * s)
            b[1::2] = -1.0 / (P.eps * s)
        return b

    def family_coeffs(self, beta: float) -> np.ndarray:
        b = np.ones(2 * self.N)
        b[1::2] = beta
        return b


def _unit(n: int, j: int) -> np.ndarray:
    """Coordinate vector for the 1-based index j in a block of length n."""
    out = np.zeros(n)
    out[j - 1] = 1.0
    return out


def build_seed(params: SeedParams, variant: Variant = "l2") -> SeedSystem:
    if variant not in ("l2", "lp"):
        raise ValueError("variant must be 'l2' or 'lp'")
    if variant == "l2" and params.p != 2:
        raise ValueError("the L2 variant needs p = 2")
    N = params.N
    if N > BUILD_CAP:
        raise ValueError(f"N = {N} exceeds the dense build cap {BUILD_CAP}")
    eps, p = params.eps, params.p
    c = params.c if variant == "l2" else 1.0
    a = np.array(params.a)
    e1 = np.zeros(2 * N)
    f1 = np.zeros(2 * N)
    e1[0] = 1.0
    e1[1::2] += a
    f1[1::2] = eps * a
    x1 = BlockVec(N, e1, f1, p)
    x2 = BlockVec(N, _unit(2 * N, 2), eps * c * _unit(2 * N, 1), p)
    vecs = []
    for n in range(N):
        vecs.append(BlockVec(N, np.roll(x1.e, 2 * n), np.roll(x1.f, 2 * n), p))
        vecs.append(BlockVec(N, np.roll(x2.e, 2 * n), np.roll(x2.f, 2 * n), p))
    S = SpanBasis(vecs)
    zero = np.zeros(2 * N)
    if variant == "l2":
        fx = np.empty(2 * N)
        fx[0::2] = N**-0.5
        fx[1::2] = c * N**-0.5
        fy = np.empty(2 * N)
        fy[0::2] = c * N**-0.5
        fy[1::2] = -(N**-0.5)
        y = BlockVec(N, zero, fy, p)
        return SeedSystem(params, variant, S, y, -y, witness_x=BlockVec(N, zero, fx, p))
    q = params.q
    fstar = BlockVec(N, zero, np.full(2 * N, N ** (-1.0 / q)), q)
    signs = np.where(np.arange(1, 2 * N + 1) % 2 == 0, 1.0, -1.0)
    y = BlockVec(N, zero, signs * N ** (-1.0 / p), p)
    return SeedSystem(params, variant, S, y, witness_fstar=fstar)


def structure_errors(s: SeedSystem) -> dict:
    """Deviation from the displayed construction, and the smallest coordinate."""
    P, N = s.params, s.N
    c = P.c if s.variant == "l2" else 1.0
    x1 = np.zeros(4 * N)
    x1[0] = 1.0
    for j in range(1, N + 1):
        x1[2 * j - 1] += P.a[j - 1]
        x1[2 * N + 2 * j - 1] = P.eps * P.a[j - 1]
    x2 = np.zeros(4 * N)
    x2[1] = 1.0
    x2[2 * N] = P.eps * c
    worst = 0.0
    for n in range(N):
        for base, got in ((x1, s.vectors[2 * n]), (x2, s.vectors[2 * n + 1])):
            want = np.concatenate((np.roll(base[: 2 * N], 2 * n), np.roll(base[2 * N :], 2 * n)))
            worst = max(worst, float(np.abs(want - got.coords()).max()))
    return {"max_deviation": worst, "min_coordinate": float(s.vectors.matrix.min())}


def expansion_closed_form(s: SeedSystem, b) -> np.ndarray:
    """Coordinates of sum_j b_j x_j from the expanded formula.

    The e_2j and f_2j coordinates carry the cyclic convolution
    sum_i b_{2i+1} a_{j-i} (indices mod N); the odd coordinates are direct.
    """
    P, N = s.params, s.N
    c = P.c if s.variant == "l2" else 1.0
    a = np.array(P.a)
    b = np.asarray(b, dtype=float)
    odd, even = b[0::2], b[1::2]
    conv = np.array([math.fsum(odd[i] * a[(j - i) % N] for i in range(N)) for j in range(N)])
    e = np.empty(2 * N)
    f = np.empty(2 * N)
    e[0::2] = odd
    e[1::2] = even + conv
    f[0::2] = P.eps * c * even
    f[1::2] = P.eps * conv
    return np.concatenate((e, f))


# ---------------------------------------------------------------------------
# closed forms used as oracles


def l2_beta(eps: float, c: float, A: float) -> float:
    return (1 + eps**2 * A**2) / (eps**2 * c**2 * A)


def l2_family_ratio(beta: float, eps: float, c: float, A: float) -> float:
    """<x, sum x_odd + beta sum x_even> / ||sum x_odd + beta sum x_even||, N cancelled."""
    num = eps * c * (beta + A)
    den = math.sqrt(1 + (beta + A) ** 2 + eps**2 * c**2 * beta**2 + eps**2 * A**2)
    return num / den


def lp_family_ratio(beta: float, eps: float, A: float, p: float) -> float:
    num = eps * abs(beta + A)
    den = (1 + abs(beta + A) ** p + eps**p * abs(beta) ** p + eps**p * A**p) ** (1 / p)
    return num / den


def lp_family_sup(eps: float, A: float, p: float) -> tuple[float, float]:
    """Maximum over beta of the symmetric-family ratio: (value, beta)."""
    lam = np.linspace(-60.0, 60.0, 24001)
    vals = np.array([lp_family_ratio(t * A, eps, A, p) for t in lam])
    i = int(np.argmax(vals))
    lo, hi = lam[max(i - 1, 0)] * A, lam[min(i + 1, lam.size - 1)] * A
    res = minimize_scalar(lambda b: -lp_family_ratio(b, eps, A, p), bounds=(lo, hi), method="bounded",
                          options={"xatol": 1e-13 * max(1.0, abs(hi))})
    best, beta = -res.fun, res.x
    limit = eps / (1 + eps**p) ** (1 / p)
    if limit > best:
        return limit, float("inf")
    return float(best), float(beta)


def witness_distance(eps: float, A: float) -> float:
    return 1.0 / (eps * A)


# ---------------------------------------------------------------------------
# certification


def prefix_inequality(s: SeedSystem, trials: int = 200, rng_seed: int = 0) -> float:
    """Largest ratio ||sum_{j<=2M+1} b_j x_j|| / ||sum b_j x_j|| over random b and all M."""
    X = s.vectors.matrix
    p = s.params.p
    worst = 0.0
    for r in streams(rng_seed, trials):
        b = r.standard_normal(len(s.vectors))
        full = pnorm(X @ b, p)
        for M in range(s.N):
            worst = max(worst, pnorm(X[:, : 2 * M + 1] @ b[: 2 * M + 1], p) / full)
    return worst


def certify_seed(s: SeedSystem, restarts: int = 16, rng_seed: int = 0) -> CertReport:
    P = s.params
    if P.unchecked:
        raise ValueError("refusing to certify a seed whose parameters were not validated")
    eps, A, p = P.eps, P.A, P.p
    rep = CertReport(f"seed-{s.variant}", {**P.to_dict(), "variant": s.variant, "restarts": restarts}, rng_seed=rng_seed)
    X = s.vectors.matrix
    wd = witness_distance(eps, A)

    bc = basis_constant_matrix(X, p, restarts=restarts, rng_seed=rng_seed)
    if s.variant == "l2":
        eig = float(basis_constants_eig(gram_matrix(X)).max())
        rep.add(Check("basis_constant", "exact basis constant <= 1 + 4 eps (generalized eigenvalue cross-check)",
                      bc.value, 1 + 4 * eps, "le", 1e-6, eig, "eq", 1e-9, True))
    else:
        rep.add(Check("basis_constant", "basis constant (attained lower bound) <= 1 + 4 eps",
                      bc.value, 1 + 4 * eps, "le", 1e-6))
    rep.observations["basis_constant_prefix"] = bc.prefix

    if s.variant == "l2":
        _, pnorm_x = orthoproject_l2(s.witness_x, s.vectors)
        beta = l2_beta(eps, P.c, A)
        oracle = l2_family_ratio(beta, eps, P.c, A)
        rep.add(Check("projection_norm", "||P x|| <= 3 c eps; equals the symmetric-family value at the critical beta",
                      pnorm_x, 3 * P.c * eps, "le", 1e-12, oracle, "eq", 1e-6, True))
        rep.observations["critical_beta"] = beta
    else:
        fam, beta = lp_family_sup(eps, A, p)
        starts = [s.family_coeffs(beta)] if math.isfinite(beta) else []
        u = pairing_vector(s.witness_fstar, s.vectors)
        probes = starts + [r.standard_normal(len(s.vectors)) for r in streams(rng_seed, restarts)]
        fb = functional_bracket(u, X, p, probes=probes)
        rep.add(Check("functional_sup", "|f*(x)| <= eps ||x|| on the span (attained lower bound); at least the family maximum",
                      fb.lower, eps, "le", 1e-12, fam, "ge", 1e-9))
        rep.add(Check("functional_dual_bound", "norming-functional upper bound for |f*| on the span <= eps",
                      fb.upper, eps, "le", 1e-12))
        rep.observations["family_beta"] = beta
        rep.observations["functional_gap"] = fb.upper - fb.lower

    ys = [s.witness_y] + ([s.witness_y_alt] if s.witness_y_alt is not None else [])
    dist = max(dist_to_span(y, s.vectors, p)[0] for y in ys)
    rep.add(Check("distance", "dist(y, span) <= eps and <= explicit witness value 1/(eps A)",
                  dist, eps, "le", 1e-12, wd, "le", 1e-9))

    b = s.explicit_coeffs()
    resid = pnorm(X @ b - s.witness_y.coords(), p)
    rep.add(Check("witness_residual", "explicit combination is exactly 1/(eps A) from y, which is < eps",
                  resid, eps, "le", 0.0, wd, "eq", 1e-9))
    return rep
