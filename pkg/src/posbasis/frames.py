"""Schauder frames whose vectors come from a prescribed dictionary.

A basis (e_n) with duals (e*_n) is first perturbed into the span of a
dictionary: u_n close to e_n and u_n = sum_j a_{j,n} x_{j,n} with finitely
many dictionary items.  Block n of the frame lists the pairs

    (x_{j,n}, N_n^-1 a_{j,n} u*_n)    i = 1..N_n, j = 1..J_n

in lexicographic order of (n, i, j).  A redundancy N_n at least the basis
constant C_n of the items gives norm convergence of the prefix sums; the
stronger rule N_n >= 4^n ||u*_n|| ||v_n|| max_j |a_{j,n}| gives uniform
order convergence with regulator v or w.

Frames are built in L2(0,1] over the Haar basis, where Gram matrices give
dual vectors and basis constants exactly.  The translate expansions
themselves work for every 1 < p < inf.
"""

from __future__ import annotations

import itertools
import math
from collections.abc import Callable, Iterator, Sequence
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
import scipy.linalg as sla

from .fnspace import (
    Grid,
    PiecewiseFn,
    as_fraction,
    gram,
    haar,
    indicator,
    linear_combination,
    lp_norm,
    translate,
    unit_haar_index,
)
from .parallel import pmap, streams
from .posseq_lp import dual_constant
from .report import CertReport, Check, flag
from .seqspace import basis_constants_l2, check_conditioning, dual_exponent

FRAME_CAP = 10**6
MAX_UFRAME_BLOCKS = 8
EXACT_BC_ITEMS = 1024
ROW_CHUNK = 1 << 24
RULE_SLACK = 1e-9
UNIT_FN = indicator(0, 1)

Oracle = Callable[[PiecewiseFn, float], tuple[list[PiecewiseFn], list[float]]]


class OracleFailure(RuntimeError):
    pass


class RedundancyOverflow(RuntimeError):
    def __init__(self, total: int, cap: int, block: int):
        super().__init__(f"frame length {total} exceeds {cap} at block {block}")
        self.total = total
        self.cap = cap
        self.block = block


# ---------------------------------------------------------------------------
# the space


@dataclass
class HaarSpace:
    """The first 2^levels Haar functions on (0,1] with their dual functionals."""

    levels: int
    p: float
    basis: list[PiecewiseFn]
    duals: list[PiecewiseFn]

    def __len__(self) -> int:
        return len(self.basis)


def haar_space(levels: int = 6, p: float = 2.0) -> HaarSpace:
    if levels < 0:
        raise ValueError("levels must be non-negative")
    basis = [haar(unit_haar_index(m), p) for m in range(2**levels)]
    duals = [dual_constant(m, p) * h for m, h in enumerate(basis)]
    return HaarSpace(levels, p, basis, duals)


# ---------------------------------------------------------------------------
# dictionaries


def dyadic_pieces(a, b) -> list[tuple[Fraction, Fraction]]:
    """Partition (a, b] into maximal dyadic intervals of length at most 1."""
    a, b = as_fraction(a), as_fraction(b)
    for x in (a, b):
        d = x.denominator
        if d & (d - 1):
            raise ValueError(f"{x} is not a dyadic rational")
    out = []
    while a < b:
        size = Fraction(1)
        while (a / size).denominator != 1 or a + size > b:
            size /= 2
        out.append((a, a + size))
        a += size
    return out


def dyadic_indicator_oracle(target: PiecewiseFn, delta: float) -> tuple[list[PiecewiseFn], list[float]]:
    """Exact expansion of a dyadic step function in indicators of dyadic intervals."""
    items, coeffs = [], []
    for lo, hi, v in target.intervals():
        if v == 0.0:
            continue
        try:
            pieces = dyadic_pieces(lo, hi)
        except ValueError as exc:
            raise OracleFailure(str(exc)) from None
        for a, b in pieces:
            items.append(indicator(a, b))
            coeffs.append(v)
    return items, coeffs


def cesaro_coefficients(M: int) -> list[Fraction]:
    """Weight of T_j 1_(0,1] in A_M = (1/M) sum_{n=1}^M sum_{j=0}^n T_j(1 - T_l 1)."""
    if M < 1:
        raise ValueError("M must be positive")
    return [Fraction(M - max(j, 1) + 1, M) for j in range(M + 1)]


def cesaro_error(M: int, length, p: float) -> float:
    """||A_M - 1_(0,l]||_p: M disjoint intervals of length l and height 1/M."""
    return M ** ((1 - p) / p) * float(as_fraction(length)) ** (1 / p)


def cesaro_order(length, p: float, tol: float) -> int:
    """Smallest M with cesaro_error(M, length, p) <= tol."""
    if not 1 < p < math.inf:
        raise ValueError("translate expansions need 1 < p < inf")
    if tol <= 0:
        raise ValueError("tol must be positive")
    lp = float(as_fraction(length)) ** (1 / p)
    M = max(1, math.ceil((lp / tol) ** (p / (p - 1))))
    while cesaro_error(M, length, p) > tol:
        M += 1
    while M > 1 and cesaro_error(M - 1, length, p) <= tol:
        M -= 1
    return M


@dataclass(frozen=True)
class TranslateExpansion:
    """target ~ sum_k coeffs[k] * T_{shifts[k]} 1_(0,1], shifts increasing."""

    left: Fraction
    length: Fraction
    p: float
    M: int
    shifts: tuple[Fraction, ...]
    coeffs: tuple[Fraction, ...]

    @property
    def remainder(self) -> Fraction:
        return self.length - math.floor(self.length)

    @property
    def error(self) -> float:
        """Closed-form residual norm."""
        r = self.remainder
        return 0.0 if r == 0 else cesaro_error(self.M, r, self.p)

    def items(self) -> list[PiecewiseFn]:
        return [translate(UNIT_FN, s) for s in self.shifts]

    def function(self) -> PiecewiseFn:
        return linear_combination([float(c) for c in self.coeffs], self.items())

    def target(self) -> PiecewiseFn:
        return indicator(self.left, self.left + self.length)

    def residual_norm(self) -> float:
        return lp_norm(self.function() - self.target(), self.p)


def translate_dictionary_expansion(
    left, length, p: float = 2.0, tol: float | None = None, M: int | None = None
) -> TranslateExpansion:
    """Expansion of 1_(left, left+length] in translates of 1_(0,1].

    Whole unit pieces are single translates.  A fractional remainder r uses
    the Cesaro mean A_M of the telescoped translates, error M^((1-p)/p) r^(1/p).
    Give either tol or M.
    """
    left, length = as_fraction(left), as_fraction(length)
    if not 1 < p < math.inf:
        raise ValueError("translate expansions need 1 < p < inf")
    if length <= 0:
        raise ValueError("length must be positive")
    whole = math.floor(length)
    r = length - whole
    terms: dict[Fraction, Fraction] = {}
    for k in range(whole):
        terms[left + k] = terms.get(left + k, Fraction(0)) + 1
    if r:
        if M is None:
            if tol is None:
                raise ValueError("give tol or M")
            M = cesaro_order(r, p, tol)
        base = left + whole
        for j, c in enumerate(cesaro_coefficients(M)):
            for s, sign in ((base + j, 1), (base + j + r, -1)):
                terms[s] = terms.get(s, Fraction(0)) + sign * c
    else:
        M = 0
    shifts = tuple(sorted(s for s, c in terms.items() if c != 0))
    return TranslateExpansion(left, length, p, M, shifts, tuple(terms[s] for s in shifts))


def _step_profile(events: dict[Fraction, Fraction]) -> list[tuple[Fraction, Fraction]]:
    """Canonical (point, value from here on) list for a sum of jumps."""
    out, acc = [], Fraction(0)
    for t in sorted(events):
        if events[t] == 0:
            continue
        acc += events[t]
        if out and out[-1][1] == acc:
            continue
        out.append((t, acc))
    return out


def _add_indicator(events, a, b, c):
    events[a] = events.get(a, Fraction(0)) + c
    events[b] = events.get(b, Fraction(0)) - c


def cesaro_identity_exact(M: int, length) -> bool:
    """A_M = 1_(0,l] - (1/M) sum_{n=1}^M 1_(n+1, n+1+l], in rational arithmetic."""
    length = as_fraction(length)
    lhs: dict[Fraction, Fraction] = {}
    for j, c in enumerate(cesaro_coefficients(M)):
        _add_indicator(lhs, Fraction(j), Fraction(j + 1), c)
        _add_indicator(lhs, j + length, j + 1 + length, -c)
    rhs: dict[Fraction, Fraction] = {}
    _add_indicator(rhs, Fraction(0), length, Fraction(1))
    for n in range(1, M + 1):
        _add_indicator(rhs, n + 1, n + 1 + length, Fraction(-1, M))
    return _step_profile(lhs) == _step_profile(rhs)


def telescoped_translate(n: int, length) -> PiecewiseFn:
    """sum_{j=0}^n T_j (1_(0,1] - 1_(l,l+1])."""
    x1 = UNIT_FN - translate(UNIT_FN, length)
    acc = PiecewiseFn()
    for j in range(n + 1):
        acc = acc + translate(x1, j)
    return acc


def telescoping_holds(n: int, length) -> bool:
    length = as_fraction(length)
    expected = indicator(0, length) - indicator(n + 1, n + 1 + length)
    return telescoped_translate(n, length) == expected


def translate_oracle(p: float = 2.0) -> Oracle:
    """Oracle into span{T_l 1_(0,1]} for step functions with rational breakpoints.

    One Cesaro order M serves every piece; M is doubled until the residual,
    computed exactly, is below delta.
    """

    def oracle(target: PiecewiseFn, delta: float):
        pieces = [(lo, hi - lo, v) for lo, hi, v in target.intervals() if v != 0.0]
        if not pieces:
            raise OracleFailure("zero target")
        scale = math.fsum(abs(v) * float(w) ** (1 / p) for _, w, v in pieces)
        M = 1
        if any(w != math.floor(w) for _, w, _ in pieces):
            M = max(1, math.ceil((scale / delta) ** (p / (p - 1)) / 4))
        for _ in range(40):
            if M > FRAME_CAP:
                break
            terms: dict[Fraction, float] = {}
            for lo, w, v in pieces:
                te = translate_dictionary_expansion(lo, w, p, M=M)
                for s, c in zip(te.shifts, te.coeffs):
                    terms[s] = terms.get(s, 0.0) + v * float(c)
            shifts = sorted(s for s, c in terms.items() if c != 0.0)
            items = [translate(UNIT_FN, s) for s in shifts]
            coeffs = [terms[s] for s in shifts]
            if lp_norm(target - linear_combination(coeffs, items), p) < delta:
                return items, coeffs
            M *= 2
        raise OracleFailure(f"no translate expansion within {delta:.3g} below M = {FRAME_CAP}")

    return oracle


DICTIONARIES = {"dyadic-indicators": lambda p: dyadic_indicator_oracle, "translates": translate_oracle}


# ---------------------------------------------------------------------------
# perturbation into the dictionary


@dataclass
class Perturbation:
    theta: float
    p: float
    u: list[PiecewiseFn]
    items: list[list[PiecewiseFn]]
    coeffs: list[list[float]]
    errors: list[float]
    eps: list[float]
    dual_norms: list[float]

    @property
    def criterion(self) -> float:
        """sum_j ||e_j - u_j|| ||e*_j||, at most theta."""
        return math.fsum(e * d for e, d in zip(self.errors, self.dual_norms))

    def slack(self) -> list[float]:
        return [math.inf if e == 0 else t / e for e, t in zip(self.errors, self.eps)]


def perturbation_eps(j: int, dual_norm: float, theta: float) -> float:
    """Tolerance for ||e_j - u_j||, j counted from 1."""
    return theta / (2**j * (1 + dual_norm))


def perturb_basis_into_dictionary(
    basis: Sequence[PiecewiseFn],
    duals: Sequence[PiecewiseFn],
    dict_oracle: Oracle,
    theta: float = 0.5,
    p: float = 2.0,
) -> Perturbation:
    if not 0 < theta < 1:
        raise ValueError("theta must lie in (0, 1)")
    q = dual_exponent(p)
    out = Perturbation(theta, p, [], [], [], [], [], [])
    for j, (e, es) in enumerate(zip(basis, duals), start=1):
        dn = lp_norm(es, q)
        eps = perturbation_eps(j, dn, theta)
        items, coeffs = dict_oracle(e, eps)
        u = linear_combination(coeffs, items)
        err = lp_norm(e - u, p)
        if not err < eps:
            raise OracleFailure(f"oracle missed tolerance {eps:.3g} for basis vector {j}: error {err:.3g}")
        out.u.append(u)
        out.items.append(list(items))
        out.coeffs.append([float(c) for c in coeffs])
        out.errors.append(err)
        out.eps.append(eps)
        out.dual_norms.append(dn)
    return out


def biorthogonal_duals(u: Sequence[PiecewiseFn]) -> list[PiecewiseFn]:
    """Riesz representers of the coordinate functionals of (u_n) in L2."""
    G = gram(list(u))
    check_conditioning(G)
    Ginv = sla.cho_solve(sla.cho_factor(G), np.eye(len(G)))
    return [linear_combination(Ginv[n], list(u)) for n in range(len(G))]


# ---------------------------------------------------------------------------
# expansions and frames


def frame_redundancy(C: float) -> int:
    return max(1, math.ceil(C - RULE_SLACK))


def uframe_bound(n: int, dual_norm: float, v_norm: float, amax: float) -> float:
    return 4.0**n * dual_norm * v_norm * amax


def uframe_redundancy(n: int, C: float, dual_norm: float, v_norm: float, amax: float) -> int:
    x = uframe_bound(n, dual_norm, v_norm, amax)
    return max(frame_redundancy(C), math.ceil(x - RULE_SLACK * x))


@dataclass
class DictionaryExpansion:
    """u = sum_j coeffs[j] items[j], repeated N times in its frame block."""

    n: int
    u: PiecewiseFn
    items: list[PiecewiseFn]
    coeffs: list[float]
    C: float
    N: int
    C_method: str = "exact"

    @property
    def J(self) -> int:
        return len(self.items)

    def identity_error(self) -> float:
        return lp_norm(self.u - linear_combination(self.coeffs, self.items), 2.0)

    def v(self) -> PiecewiseFn:
        """v_n = sum_j |x_{j,n}|."""
        return linear_combination([1.0] * self.J, [abs(x) for x in self.items])

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "N": self.N,
            "C": self.C,
            "C_method": self.C_method,
            "coeffs": list(self.coeffs),
            "items": [x.to_json() for x in self.items],
            "u": self.u.to_json(),
        }

    @classmethod
    def from_json(cls, d: dict) -> DictionaryExpansion:
        return cls(
            n=d["n"],
            u=PiecewiseFn.from_json(d["u"]),
            items=[PiecewiseFn.from_json(x) for x in d["items"]],
            coeffs=[float(a) for a in d["coeffs"]],
            C=float(d["C"]),
            N=int(d["N"]),
            C_method=d["C_method"],
        )


def items_basis_constant(items: Sequence[PiecewiseFn]) -> tuple[float, str]:
    """Basis constant of the items in L2: exact up to EXACT_BC_ITEMS, else the Riesz bound."""
    G = gram(list(items))
    cond = check_conditioning(G)
    if len(items) <= EXACT_BC_ITEMS:
        return max(1.0, float(basis_constants_l2(G).max())), "exact"
    return math.sqrt(cond), "riesz"


def expand(n: int, u: PiecewiseFn, items: Sequence[PiecewiseFn], coeffs: Sequence[float], N: int | None = None) -> DictionaryExpansion:
    if not items or any(a == 0 for a in coeffs):
        raise ValueError("expansion needs nonzero coefficients")
    C, method = items_basis_constant(items)
    return DictionaryExpansion(n, u, list(items), [float(a) for a in coeffs], C, N or frame_redundancy(C), method)


def expansions_from(pert: Perturbation) -> list[DictionaryExpansion]:
    return [expand(n, u, it, a) for n, (u, it, a) in enumerate(zip(pert.u, pert.items, pert.coeffs), start=1)]


@dataclass
class Frame:
    """Pairs (x_{j,n}, N_n^-1 a_{j,n} u*_n) in lexicographic (n, i, j) order."""

    expansions: list[DictionaryExpansion]
    duals: list[PiecewiseFn]
    kind: str = "frame"

    def __len__(self) -> int:
        return sum(e.N * e.J for e in self.expansions)

    def block_lengths(self) -> list[int]:
        return [e.N * e.J for e in self.expansions]

    def order_key(self) -> list[tuple[int, int, int]]:
        return [(e.n, i, j) for e in self.expansions for i in range(1, e.N + 1) for j in range(1, e.J + 1)]

    def pairs(self) -> Iterator[tuple[PiecewiseFn, PiecewiseFn]]:
        for e, d in zip(self.expansions, self.duals):
            fns = [(a / e.N) * d for a in e.coeffs]
            for _ in range(e.N):
                yield from zip(e.items, fns)

    def coefficients(self, x: PiecewiseFn) -> np.ndarray:
        """u*_n(x) for every block."""
        grid = Grid.of(self.duals + [x])
        return grid.matrix(self.duals) @ (grid.values(x) * grid.lengths())

    def to_json(self) -> dict:
        return {
            "kind": self.kind,
            "length": len(self),
            "blocks": [{**e.to_json(), "dual": d.to_json()} for e, d in zip(self.expansions, self.duals)],
        }

    @classmethod
    def from_json(cls, d: dict) -> Frame:
        exps = [DictionaryExpansion.from_json(b) for b in d["blocks"]]
        duals = [PiecewiseFn.from_json(b["dual"]) for b in d["blocks"]]
        return cls(exps, duals, d.get("kind", "frame"))


def build_frame(expansions: Sequence[DictionaryExpansion], duals: Sequence[PiecewiseFn]) -> Frame:
    if len(expansions) != len(duals):
        raise ValueError("one dual per expansion")
    for k, e in enumerate(expansions, start=1):
        if e.n != k:
            raise ValueError("expansions must be numbered 1, 2, ... in order")
        if e.N < e.C - RULE_SLACK:
            raise ValueError(f"block {k}: redundancy {e.N} below basis constant {e.C:.6g}")
    return Frame(list(expansions), list(duals))


def haar_frame(levels: int = 6, blocks: int | None = 8, dictionary: str = "dyadic-indicators", theta: float = 0.5) -> tuple[Frame, Perturbation]:
    """Frame over the first `blocks` Haar functions of the given depth."""
    space = haar_space(levels)
    k = len(space) if blocks is None else min(blocks, len(space))
    pert = perturb_basis_into_dictionary(space.basis[:k], space.duals[:k], DICTIONARIES[dictionary](2.0), theta)
    duals = biorthogonal_duals(pert.u)
    return build_frame(expansions_from(pert), duals), pert


def random_span_vectors(u: Sequence[PiecewiseFn], m: int, count: int, rng_seed: int = 0) -> list[PiecewiseFn]:
    """Random combinations of the first m vectors of u."""
    out = []
    for rng in streams(rng_seed, count):
        out.append(linear_combination(rng.standard_normal(m), list(u[:m])))
    return out


# ---------------------------------------------------------------------------
# numerics on a common grid


class _Numerics:
    def __init__(self, frame: Frame, extra: Sequence[PiecewiseFn] = ()):
        exps = frame.expansions
        fns = [x for e in exps for x in e.items] + [e.u for e in exps] + list(frame.duals) + list(extra)
        self.frame = frame
        self.grid = Grid.of(fns)
        self.w = self.grid.lengths()
        self.X = [self.grid.matrix(e.items) for e in exps]
        self.A = [np.asarray(e.coeffs) for e in exps]
        self.U = self.grid.matrix([e.u for e in exps])
        self.D = self.grid.matrix(frame.duals)

    def values(self, x: PiecewiseFn) -> np.ndarray:
        return self.grid.values(x)

    def coefficients(self, xv: np.ndarray) -> np.ndarray:
        return self.D @ (xv * self.w)

    def norm(self, v: np.ndarray, axis=-1) -> np.ndarray:
        return np.sqrt(np.sum(v * v * self.w, axis=axis))

    def _block_terms(self, c: np.ndarray):
        S = np.zeros(self.grid.cells)
        for k, (e, X, a, cn) in enumerate(zip(self.frame.expansions, self.X, self.A, c)):
            P = np.cumsum((cn / e.N) * a[:, None] * X, axis=0)
            yield k, e, S, P
            S = S + e.N * P[-1]

    def block_rows(self, c: np.ndarray, chunk: int = ROW_CHUNK) -> Iterator[tuple[int, DictionaryExpansion, np.ndarray]]:
        """Partial sums S_(n,i,j) x as rows in (i, j) order, a few i at a time."""
        for k, e, S, P in self._block_terms(c):
            step = max(1, chunk // max(P.size, 1))
            for i0 in range(0, e.N, step):
                i = np.arange(i0, min(i0 + step, e.N))
                rows = S + i[:, None, None] * P[-1] + P[None, :, :]
                yield k, e, rows.reshape(-1, self.grid.cells)

    def block_errors(self, xv: np.ndarray, c: np.ndarray) -> Iterator[tuple[int, DictionaryExpansion, np.ndarray, np.ndarray]]:
        """Per block, ||x - S_(n,i,j) x|| over (i, j) and the block-end sum.

        With D_j = x - S - P_j and F = P_J the error is ||D_j - i F||, expanded
        as a quadratic in i; the block end is computed directly.
        """
        for k, e, S, P in self._block_terms(c):
            D = xv - S - P
            F = P[-1]
            dd = np.sum(D * D * self.w, axis=1)
            df = D @ (F * self.w)
            ff = float(np.sum(F * F * self.w))
            i = np.arange(e.N)[:, None]
            err = np.sqrt(np.maximum(dd - 2 * i * df + i * i * ff, 0.0)).reshape(-1)
            end = S + e.N * F
            err[-1] = self.norm(xv - end)
            yield k, e, err, end

    def tail_envelopes(self, xv: np.ndarray, c: np.ndarray) -> np.ndarray:
        """Row m: pointwise max over m <= m1 <= m2 <= K of |sum_{m1}^{m2} c u|, and |x - sum_{<m} c u|."""
        K = len(c)
        terms = c[:, None] * self.U
        prefix = np.vstack([np.zeros(self.grid.cells), np.cumsum(terms, axis=0)])
        env = np.zeros((K, self.grid.cells))
        for m1 in range(K):
            seg = np.abs(prefix[m1 + 1 :] - prefix[m1]).max(axis=0)
            env[m1] = np.maximum(seg, np.abs(xv - prefix[m1]))
        return env


def error_traces(frame: Frame, xs: Sequence[PiecewiseFn]) -> list[np.ndarray]:
    """||x - S_k x||_2 for every prefix k = 1..len(frame)."""
    num = _Numerics(frame, xs)
    out = []
    for x in xs:
        xv = num.values(x)
        c = num.coefficients(xv)
        out.append(np.concatenate([err for _, _, err, _ in num.block_errors(xv, c)] or [np.zeros(0)]))
    return out


def _order_ok(frame: Frame) -> bool:
    key = frame.order_key()
    return all(a < b for a, b in itertools.pairwise(key))


def _frame_structure(frame: Frame, report: CertReport) -> None:
    id_err = max((e.identity_error() for e in frame.expansions), default=0.0)
    report.add(Check("expansion_identity", "u_n = sum_j a_{j,n} x_{j,n}", id_err, 1e-10))
    report.add(flag("order", "order key strictly increasing lexicographically", _order_ok(frame)))
    report.add(flag("positivity", "every frame vector is non-negative", all(x.is_nonnegative() for e in frame.expansions for x in e.items)))


def verify_frame(frame: Frame, test_vectors: Sequence[PiecewiseFn], tol: float = 1e-8) -> CertReport:
    report = CertReport("frame", {"blocks": len(frame.expansions), "length": len(frame), "tol": tol, "vectors": len(test_vectors)})
    _frame_structure(frame, report)
    slack = min((e.N - e.C for e in frame.expansions), default=0.0)
    report.add(Check("redundancy", "N_n - C_n >= 0 for every block", slack, 0.0, "ge", RULE_SLACK))
    num = _Numerics(frame, test_vectors)

    def one(x):
        xv = num.values(x)
        c = num.coefficients(xv)
        env = num.tail_envelopes(xv, c)
        tau = num.norm(env)
        basis_sums = np.cumsum(c[:, None] * num.U, axis=0)
        trace, ends, end_dev, three = [], [], 0.0, -math.inf
        for k, e, err, end in num.block_errors(xv, c):
            trace.append(err)
            ends.append(err[-1])
            end_dev = max(end_dev, float(np.abs(end - basis_sums[k]).max()))
            three = max(three, float(err.max() - 3 * tau[k]))
        trace = np.concatenate(trace) if trace else np.zeros(0)
        rise = max((b - a for a, b in itertools.pairwise(ends)), default=0.0)
        return trace, float(trace[-1]) if trace.size else 0.0, rise, end_dev, three

    results = pmap(one, test_vectors)
    report.artifacts["traces"] = [r[0] for r in results]
    final = max((r[1] for r in results), default=0.0)
    report.add(Check("final_error", "||x - S x|| at the last prefix", final, tol))
    report.add(Check("block_monotone", "errors at block ends non-increasing", max((r[2] for r in results), default=0.0), 0.0, "le", 1e-12))
    report.add(Check("block_sums", "block-end sums equal basis partial sums", max((r[3] for r in results), default=0.0), 1e-10))
    report.add(Check("three_term", "prefix error minus 3 tau_n in block n", max((r[4] for r in results), default=0.0), 0.0, "le", 1e-12))
    report.observations["final_errors"] = [r[1] for r in results]
    report.observations["C"] = [e.C for e in frame.expansions]
    report.observations["N"] = [e.N for e in frame.expansions]
    report.observations["C_method"] = sorted({e.C_method for e in frame.expansions})
    return report


# ---------------------------------------------------------------------------
# u-frames


@dataclass
class Regulator:
    """v = sum_{n<=K} 2^-n v_n/||v_n||; the omitted tail has norm at most 2^-K."""

    v: PiecewiseFn
    blocks: int
    tail_bound: float
    w: PiecewiseFn | None = None

    def to_json(self) -> dict:
        return {
            "v": self.v.to_json(),
            "blocks": self.blocks,
            "tail_bound": self.tail_bound,
            "w": None if self.w is None else self.w.to_json(),
        }

    @classmethod
    def from_json(cls, d: dict) -> Regulator:
        w = d.get("w")
        return cls(PiecewiseFn.from_json(d["v"]), d["blocks"], d["tail_bound"], None if w is None else PiecewiseFn.from_json(w))


def uframe_total(expansions: Sequence[DictionaryExpansion], duals: Sequence[PiecewiseFn]) -> list[int]:
    """Block lengths N_n J_n under the u-frame rule."""
    return [_u_rule(e, d)[0] * e.J for e, d in zip(expansions, duals)]


def _u_rule(e: DictionaryExpansion, dual: PiecewiseFn) -> tuple[int, float, float]:
    v_norm = lp_norm(e.v(), 2.0)
    dn = lp_norm(dual, 2.0)
    amax = float(np.abs(e.coeffs).max())
    return uframe_redundancy(e.n, e.C, dn, v_norm, amax), uframe_bound(e.n, dn, v_norm, amax), v_norm


def build_uframe(
    expansions: Sequence[DictionaryExpansion],
    duals: Sequence[PiecewiseFn],
    w: PiecewiseFn | None = None,
    cap: int = FRAME_CAP,
    max_blocks: int | None = MAX_UFRAME_BLOCKS,
) -> tuple[Frame, Regulator]:
    if max_blocks is not None and len(expansions) > max_blocks:
        raise ValueError(f"u-frames are limited to {max_blocks} blocks")
    if w is not None and not w.is_nonnegative():
        raise ValueError("regulator w must be non-negative")
    total, out, parts = 0, [], []
    for e, d in zip(expansions, duals):
        N, _, v_norm = _u_rule(e, d)
        total += N * e.J
        if total > cap:
            raise RedundancyOverflow(total, cap, e.n)
        out.append(DictionaryExpansion(e.n, e.u, e.items, e.coeffs, e.C, N, e.C_method))
        parts.append((2.0**-e.n / v_norm) * e.v())
    frame = build_frame(out, duals)
    frame.kind = "uframe"
    v = linear_combination([1.0] * len(parts), parts) if parts else PiecewiseFn()
    return frame, Regulator(v, len(out), 2.0 ** -len(out), w)


def haar_uframe(levels: int = 6, blocks: int = 6, dictionary: str = "dyadic-indicators", theta: float = 0.5):
    frame, pert = haar_frame(levels, blocks, dictionary, theta)
    uf, reg = build_uframe(frame.expansions, frame.duals)
    return uf, reg, pert


def prefix_tolerances(K: int, xnorm: float) -> np.ndarray:
    """eps_n = 2^-n ||x|| for n = 1..K."""
    return xnorm * 2.0 ** -np.arange(1, K + 1)


def verify_uframe(
    frame: Frame,
    regulator: Regulator,
    test_vectors: Sequence[PiecewiseFn],
    subsets: int = 50,
    rng_seed: int = 0,
    scale: float = 1.0,
) -> CertReport:
    """Pointwise domination at every prefix and the sub-block bound.

    `scale` multiplies the regulator; values below 1 serve as a negative control.
    """
    K = len(frame.expansions)
    report = CertReport(
        "uframe",
        {"blocks": K, "length": len(frame), "vectors": len(test_vectors), "subsets": subsets, "scale": scale},
        rng_seed=rng_seed,
    )
    _frame_structure(frame, report)
    rule = []
    for e, d in zip(frame.expansions, frame.duals):
        _, bound, _ = _u_rule(e, d)
        report.add(Check(f"redundancy[{e.n}]", "N_n >= 4^n ||u*_n|| ||v_n|| max|a_{j,n}|", e.N, bound, "ge", RULE_SLACK * bound))
        rule.append(bound)
    report.add(flag("v_nonnegative", "regulator v >= 0", regulator.v.is_nonnegative()))
    extra = [regulator.v] + ([regulator.w] if regulator.w is not None else [])
    num = _Numerics(frame, list(test_vectors) + extra)
    vv = scale * num.values(regulator.v)
    wv = None if regulator.w is None else scale * num.values(regulator.w)

    def one(x):
        xv = num.values(x)
        c = num.coefficients(xv)
        xn = float(num.norm(xv))
        eps = prefix_tolerances(K, xn)
        if wv is None:
            env = num.tail_envelopes(xv, c)
            w = scale * (env / eps[:, None]).max(axis=0) if K and xn > 0 else np.zeros_like(xv)
        else:
            w = wv
        reg = np.maximum(vv, w)
        worst = -math.inf
        for k, e, rows in num.block_rows(c):
            excess = np.abs(xv - rows) - 3 * eps[k] * reg
            worst = max(worst, float(excess.max()))
        return worst if K else 0.0

    results = pmap(one, test_vectors)
    report.add(Check("domination", "|x - S_(n,i,j) x| <= 3 eps_n (v or w) at every prefix", max(results, default=0.0), 0.0, "le", 1e-9))
    report.observations["domination_excess"] = results

    worst_sub = -math.inf
    if K and test_vectors:
        for rng in streams(rng_seed, subsets):
            x = test_vectors[int(rng.integers(len(test_vectors)))]
            k = int(rng.integers(K))
            e = frame.expansions[k]
            xv = num.values(x)
            ck = float(num.coefficients(xv)[k])
            pick = rng.random(e.J) < 0.5
            if not pick.any():
                pick[int(rng.integers(e.J))] = True
            s = (ck / e.N) * (num.A[k][pick, None] * num.X[k][pick]).sum(axis=0)
            bound = 2.0 ** -e.n * vv * float(num.norm(xv))
            worst_sub = max(worst_sub, float((np.abs(s) - bound).max()))
    else:
        worst_sub = 0.0
    report.add(Check("sub_block", "|sum_{j in I} N_n^-1 a_{j,n} u*_n(x) x_{j,n}| <= 2^-n v ||x||", worst_sub, 0.0, "le", 1e-9))
    report.observations["rule_bounds"] = rule
    report.observations["N"] = [e.N for e in frame.expansions]
    report.observations["truncation_tail_bound"] = regulator.tail_bound
    return report
