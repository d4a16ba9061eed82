"""Inductive construction of a non-negative basic sequence in Lp(R), 1 < p < inf.

Next to the vectors z_j a Haar type system g_0, g_1, ... on (0,1] is grown.
Step k+1 halves the next parent set E_{j,n-1} so that every function constant
on the current dyadic level L_k has the same distribution on both halves,
embeds an lp seed over equal-distribution pieces G_1..G_2N of supp g+ and
supp g- plus fresh unit intervals, and raises the level.  All block
restrictions to (0,1] then lie in span(h_0..h_M) with M = 2^L - 1, and the
basis projection P_M is the conditional expectation onto level-L cells.
"""

from __future__ import annotations

import json
import math
from collections.abc import Sequence
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import condseed
from .condseed import Infeasible, SeedParams, SeedSystem
from .fnspace import (
    Grid,
    IntervalSet,
    PiecewiseFn,
    Registry,
    distribution_on,
    equal_distribution_split,
    indicator,
    lp_norm,
    pos_neg_parts,
    restrict,
)
from .parallel import streams
from .posbasis_l2 import Embedding, SeedInfeasible, _embedding
from .report import CertReport, Check, flag
from .seqspace import (
    basis_constant_matrix,
    dual_exponent,
    functional_bracket,
    merge_identical_rows,
    min_residual,
    pairing_vector,
    pnorm,
)

UNIT = IntervalSet([(0, 1)])
SHRINK_STEPS = 20


def dual_constant(m: int, p: float) -> float:
    """C_{p,m} with h*_m = C_{p,m} h_m; h_0 = 1_(0,1] is its own dual."""
    if m < 0:
        raise ValueError("index must be non-negative")
    if m == 0:
        return 1.0
    mu = 2.0 ** -m.bit_length()
    return (2 * mu) ** (2 / p - 1)


def haar_position(m: int) -> tuple[int, int]:
    """(n, j) with m = 2^(n-1) + j."""
    if m < 1:
        raise ValueError("index must be positive")
    n = m.bit_length()
    return n, m - 2 ** (n - 1)


def _is_pow2(d: int) -> bool:
    return d > 0 and d & (d - 1) == 0


def dyadic_level(f: PiecewiseFn) -> int:
    """Finest dyadic level among the breakpoints of f inside (0,1]."""
    r = restrict(f, UNIT)
    if r.is_zero():
        return 0
    if not _is_pow2(r.den):
        raise ValueError(f"breakpoints in (0,1] are not dyadic (denominator {r.den})")
    return r.den.bit_length() - 1


def level_ramp(L: int) -> PiecewiseFn:
    """A function with a distinct value on every level-L dyadic cell of (0,1].

    Its distribution on a set records the measure of the set inside each
    cell, so equal distributions for it mean equal distributions for every
    function constant on level-L cells.
    """
    size = 1 << L
    return PiecewiseFn._raw(size, np.arange(size + 1, dtype=np.int64), np.arange(1, size + 1, dtype=float))


def _cell_integrals(f: PiecewiseFn, L: int) -> np.ndarray:
    size = 1 << L
    r = restrict(f, UNIT)
    if r.is_zero():
        return np.zeros(size)
    grid = Grid.of([r, level_ramp(L)])
    cell = np.array([int(v) * size // grid.den for v in grid.nums[:-1]], dtype=np.int64) \
        if grid.nums.dtype == object else grid.nums[:-1] * size // grid.den
    return np.bincount(cell, weights=grid.values(r) * grid.lengths(), minlength=size)


def haar_coefficients(f: PiecewiseFn, L: int, p: float) -> np.ndarray:
    """h*_m(f) = C_{p,m} <h_m, f> for m = 0 .. 2^L - 1."""
    S = _cell_integrals(f, L)
    coef = np.empty(1 << L)
    coef[0] = S.sum()
    for n in range(L, 0, -1):
        amp = 2.0 ** ((n - 1) / p)
        coef[2 ** (n - 1) : 2**n] = dual_constant(2 ** (n - 1), p) * amp * (S[0::2] - S[1::2])
        S = S[0::2] + S[1::2]
    return coef


def haar_synthesis(coef: np.ndarray, p: float) -> np.ndarray:
    """Values on level-L cells of sum_m coef_m h_m (Lp-normalized Haar)."""
    L = int(coef.size).bit_length() - 1
    v = np.array([coef[0]])
    for n in range(1, L + 1):
        amp = (2 * 2.0**-n) ** (-1 / p)
        c = coef[2 ** (n - 1) : 2**n] * amp
        out = np.empty(2 * v.size)
        out[0::2] = v + c
        out[1::2] = v - c
        v = out
    return v


def projection_norm(f: PiecewiseFn, L: int, p: float, method: str = "haar") -> float:
    """||P_M f||_p for M = 2^L - 1.

    'haar' sums the coefficient expansion; 'expectation' averages f over the
    level-L cells.  The two agree because the Haar projection onto a full
    level is the conditional expectation.
    """
    if method == "haar":
        vals = haar_synthesis(haar_coefficients(f, L, p), p)
    elif method == "expectation":
        vals = _cell_integrals(f, L) * (1 << L)
    else:
        raise ValueError("method must be 'haar' or 'expectation'")
    return float(np.sum(np.abs(vals) ** p * 2.0**-L) ** (1 / p))


def equidistributed(sets: Sequence[IntervalSet], L: int) -> bool:
    """Every function constant on level-L cells has one distribution on all the sets."""
    if not sets:
        return True
    ramp = level_ramp(L)
    ref = distribution_on(ramp, sets[0])
    return all(distribution_on(ramp, S) == ref for S in sets[1:])


# ---------------------------------------------------------------------------
# Haar type systems


@dataclass
class HaarTypeSystem:
    p: float
    g: list[PiecewiseFn] = field(default_factory=list)
    E: dict[tuple[int, int], IntervalSet] = field(default_factory=dict)

    @classmethod
    def start(cls, p: float) -> HaarTypeSystem:
        return cls(p, [indicator(0, 1)], {(0, 0): UNIT})

    def parent(self, m: int) -> IntervalSet:
        n, j = haar_position(m)
        return self.E[(j, n - 1)]

    def vector(self, m: int) -> PiecewiseFn:
        if m == 0:
            return indicator(0, 1)
        n, j = haar_position(m)
        amp = 2.0 ** ((n - 1) / self.p)
        return (self.E[(2 * j, n)].indicator() - self.E[(2 * j + 1, n)].indicator()) * amp

    def append(self, left: IntervalSet, right: IntervalSet) -> PiecewiseFn:
        m = len(self.g)
        n, j = haar_position(m)
        self.E[(2 * j, n)] = left
        self.E[(2 * j + 1, n)] = right
        self.g.append(self.vector(m))
        return self.g[-1]

    def check(self) -> dict[str, bool]:
        out = {
            "g0": bool(self.g) and self.g[0] == indicator(0, 1) and self.E.get((0, 0)) == UNIT,
            "partition": True,
            "measure": True,
            "reconstruction": True,
            "dyadic": True,
        }
        for m in range(1, len(self.g)):
            n, j = haar_position(m)
            a, b, par = self.E[(2 * j, n)], self.E[(2 * j + 1, n)], self.E[(j, n - 1)]
            out["partition"] &= a.isdisjoint(b) and (a | b) == par
            out["measure"] &= a.measure() == b.measure() == Fraction(1, 2**n)
            amp = 2.0 ** ((n - 1) / self.p)
            gp, gm = pos_neg_parts(self.g[m])
            out["reconstruction"] &= (
                gp.support() == a and gm.support() == b
                and bool(np.all(gp.values[gp.values != 0] == amp))
                and bool(np.all(gm.values[gm.values != 0] == amp))
            )
            out["dyadic"] &= _is_pow2(a.indicator().den) and _is_pow2(b.indicator().den)
        return {k: bool(v) for k, v in out.items()}

    def to_json(self) -> dict:
        return {"p": self.p, "E": [[j, n, s.to_json()] for (j, n), s in sorted(self.E.items(), key=lambda t: (t[0][1], t[0][0]))],
                "size": len(self.g)}

    @classmethod
    def from_json(cls, d: dict) -> HaarTypeSystem:
        hts = cls(d["p"], [], {(j, n): IntervalSet.from_json(s) for j, n, s in d["E"]})
        hts.g = [hts.vector(m) for m in range(d["size"])]
        return hts


@dataclass
class HaarExtension:
    g: PiecewiseFn
    left: IntervalSet
    right: IntervalSet
    gamma: bool  # equal distribution on both halves for the level-L span
    beta: float  # max |h*_m(g)| over m <= M


def extend_haar_type(state: LpState) -> HaarExtension:
    """Split the next parent set and form g_{k+1}; the state is not modified."""
    hts, p = state.hts, state.p
    m = len(hts.g)
    L = state.levels[-1]
    ramp = level_ramp(L)
    left, right = equal_distribution_split([ramp], hts.parent(m), 2)
    n, _ = haar_position(m)
    g = (left.indicator() - right.indicator()) * 2.0 ** ((n - 1) / p)
    gamma = equidistributed([left, right], L)
    beta = float(np.abs(haar_coefficients(g, L, p)).max())
    return HaarExtension(g, left, right, gamma, beta)


# ---------------------------------------------------------------------------
# state


def default_eps_total(schedule: Sequence[float]) -> float:
    """Smallest two-decimal value strictly above 2 sum eps_j and prod(1 + eps_j) - 1."""
    need = max(2 * math.fsum(schedule), math.prod(1 + e for e in schedule) - 1)
    return math.floor(need * 100 + 1) / 100


def validate_schedule(schedule: Sequence[float], eps_total: float) -> None:
    if not schedule:
        raise ValueError("the schedule needs at least one tolerance")
    if any(not 0 < e <= 1 for e in schedule):
        raise ValueError("tolerances must lie in (0, 1]")
    if not 2 * math.fsum(schedule) < eps_total:
        raise ValueError(f"twice the sum of the schedule must be below eps_total = {eps_total}")
    if not math.prod(1 + e for e in schedule) < 1 + eps_total:
        raise ValueError(f"product of (1 + eps_j) must be below 1 + eps_total = {1 + eps_total}")


@dataclass
class LpStep:
    eps: float
    eps_seed: float
    seed: SeedParams
    start: int
    stop: int
    level: int
    embedding: Embedding
    shrinks: int = 0

    @property
    def N(self) -> int:
        return self.seed.N

    def to_json(self) -> dict:
        return {
            "eps": self.eps,
            "eps_seed": self.eps_seed,
            "seed": {**self.seed.to_dict(), "a": list(self.seed.a)},
            "start": self.start,
            "stop": self.stop,
            "level": self.level,
            "shrinks": self.shrinks,
            "embedding": self.embedding.to_json(),
        }

    @classmethod
    def from_json(cls, d: dict) -> LpStep:
        s = d["seed"]
        seed = SeedParams(s["eps"], s["c"], s["p"], tuple(s["a"]), s["threshold"], s["recipe"], s["theta"])
        return cls(d["eps"], d["eps_seed"], seed, d["start"], d["stop"], d["level"],
                   Embedding.from_json(d["embedding"]), d["shrinks"])


@dataclass
class LpState:
    p: float
    z: list[PiecewiseFn]
    M_index: list[int]
    N_index: list[int]
    levels: list[int]
    hts: HaarTypeSystem
    schedule: list[float]
    eps_total: float
    registry: Registry
    steps: list[LpStep] = field(default_factory=list)
    options: dict = field(default_factory=dict)

    @property
    def k(self) -> int:
        return len(self.steps)

    def block(self, n: int) -> list[PiecewiseFn]:
        """z_j for N_{n-1} < j <= N_n (n >= 1), or [z_0]."""
        if n == 0:
            return self.z[:1]
        return self.z[self.N_index[n - 1] + 1 : self.N_index[n] + 1]

    def to_json(self) -> dict:
        return {
            "construction": "seq-lp",
            "p": self.p,
            "schedule": list(self.schedule),
            "eps_total": self.eps_total,
            "M_index": list(self.M_index),
            "N_index": list(self.N_index),
            "levels": list(self.levels),
            "options": self.options,
            "registry": self.registry.used.to_json(),
            "haar_type": self.hts.to_json(),
            "steps": [s.to_json() for s in self.steps],
            "z": [f.to_json() for f in self.z],
        }

    @classmethod
    def from_json(cls, d: dict) -> LpState:
        return cls(
            p=d["p"],
            z=[PiecewiseFn.from_json(f) for f in d["z"]],
            M_index=list(d["M_index"]),
            N_index=list(d["N_index"]),
            levels=list(d["levels"]),
            hts=HaarTypeSystem.from_json(d["haar_type"]),
            schedule=list(d["schedule"]),
            eps_total=d["eps_total"],
            registry=Registry(IntervalSet.from_json(d["registry"])),
            steps=[LpStep.from_json(s) for s in d["steps"]],
            options=d.get("options", {}),
        )


def init(
    p: float = 3.0,
    schedule: Sequence[float] = (0.9, 0.85, 0.8),
    eps_total: float | None = None,
    theta: float = 0.9,
    tolerance: str = "exact",
    max_seed_n: int = condseed.BUILD_CAP,
) -> LpState:
    """State with z_0 = g_0 = 1_(0,1], M_0 = N_0 = 0.

    tolerance='exact' feeds eps_{k+1} itself to the seed, which suffices
    because ||P_M Psi(x)|| equals |f(x)| exactly; tolerance='strengthened' runs the
    shrinking search for the strengthened bound (2N)^(1/q) eps'' <= eps/(M+1).
    """
    if not 1 < p < math.inf:
        raise ValueError("p must lie in (1, inf)")
    if tolerance not in ("exact", "strengthened"):
        raise ValueError("tolerance must be 'exact' or 'strengthened'")
    schedule = [float(e) for e in schedule]
    eps_total = default_eps_total(schedule) if eps_total is None else float(eps_total)
    validate_schedule(schedule, eps_total)
    options = {"theta": theta, "tolerance": tolerance, "max_seed_n": max_seed_n}
    return LpState(float(p), [indicator(0, 1)], [0], [0], [0], HaarTypeSystem.start(float(p)), schedule,
                   eps_total, Registry(UNIT), options=options)


def seed_tolerance(state: LpState, eps_next: float) -> tuple[float, SeedParams, int]:
    """(eps'', admissible seed parameters, number of halvings)."""
    p, opt = state.p, state.options
    q = dual_exponent(p)
    cap = opt["max_seed_n"]

    def params(e):
        return condseed.coeffs_optimized(e, 1.0, p, opt["theta"], "strict", N_cap=cap, power_of_two=True)

    if opt["tolerance"] == "exact":
        try:
            return eps_next, params(eps_next), 0
        except Infeasible as exc:
            raise SeedInfeasible(f"no lp seed at eps'' = {eps_next}", **exc.to_dict()) from exc
    M = state.M_index[-1]
    goal = eps_next / (M + 1)
    e = goal
    for i in range(SHRINK_STEPS + 1):
        try:
            P = params(e)
        except Infeasible as exc:
            # smaller eps'' only needs a larger N, so the search cannot recover
            raise SeedInfeasible(
                "strengthened bound (2N)^(1/q) eps'' <= eps/(M+1) has no desk-scale solution",
                eps_seed=e, goal=goal, halvings=i, **exc.to_dict(),
            ) from exc
        if (2 * P.N) ** (1 / q) * e <= goal:
            return e, P, i
        e /= 2
    raise SeedInfeasible("strengthened bound not met after the halving budget", eps_seed=e, goal=goal)


def step_lp(state: LpState) -> LpState:
    """Extend the Haar type system by one vector and append one seed block."""
    k = state.k
    if k >= len(state.schedule):
        raise ValueError("the schedule is exhausted")
    eps = state.schedule[k]
    ext = extend_haar_type(state)
    if not ext.gamma or ext.beta > 1e-10:
        raise RuntimeError(f"Haar type extension failed: gamma={ext.gamma}, beta={ext.beta}")
    eps2, params, shrinks = seed_tolerance(state, eps)
    seed = condseed.build_seed(params, "lp")
    N, p = params.N, state.p
    L = state.levels[-1]
    s = (2 * N) ** (1 / p)
    emb = _embedding(ext.g, [level_ramp(L)], N, 1.0, state.registry, scale=(s, s))
    start = len(state.z)
    new = [emb.apply(v.coords()) for v in seed.vectors]
    state.z.extend(new)
    state.hts.append(ext.left, ext.right)
    level = max([dyadic_level(f) for f in new] + [dyadic_level(ext.g), L])
    state.levels.append(level)
    state.M_index.append(2**level - 1)
    state.N_index.append(len(state.z) - 1)
    state.steps.append(LpStep(eps, eps2, params, start, len(state.z), level, emb, shrinks))
    return state


def build(p: float = 3.0, schedule: Sequence[float] = (0.9, 0.85, 0.8), steps: int | None = None, **options) -> LpState:
    state = init(p, schedule, **options)
    for _ in range(len(schedule) if steps is None else steps):
        step_lp(state)
    return state


# ---------------------------------------------------------------------------
# verification


def _seed(step: LpStep) -> SeedSystem:
    return condseed.build_seed(step.seed, "lp")


def _weighted(fns: Sequence[PiecewiseFn], extra: Sequence[PiecewiseFn] = ()):
    """Merged value matrix (cells x functions) and cell weights."""
    allf = list(fns) + list(extra)
    grid = Grid.of(allf)
    V, w = merge_identical_rows(grid.matrix(allf).T, grid.lengths())
    return V[:, : len(fns)], V[:, len(fns) :], w


def factored_dual(step: LpStep, x_seed: np.ndarray, p: float, L: int, n_next: int) -> np.ndarray:
    """h*_m(Psi x) for m <= 2^L - 1 through the factored form 2N s f(x) h*_m(1_{G_1})."""
    N = step.N
    q = dual_exponent(p)
    f_x = (2 * N) ** (-1 / q) * float(np.sum(x_seed[2 * N :]))
    G1 = step.embedding.pieces()[0]
    amp = 2.0 ** ((n_next - 1) / p)
    return 2 * N * amp * f_x * haar_coefficients(G1.indicator(), L, p)


def verify_lp(state: LpState, restarts: int = 8, rng_seed: int = 0, samples: int = 20) -> CertReport:
    p = state.p
    q = dual_exponent(p)
    rep = CertReport(
        "seq-lp",
        {"p": p, "schedule": state.schedule, "eps_total": state.eps_total, "steps": state.k,
         "restarts": restarts, "samples": samples, **state.options},
        rng_seed=rng_seed,
    )
    hts = state.hts.check()
    rep.add(flag("haar_type", "g_0..g_k is an initial segment of a Haar type system (exact)", all(hts.values())))
    rep.add(flag("positivity", "every z_j is >= 0 everywhere (exact)", all(f.is_nonnegative() for f in state.z)))

    for n, st in enumerate(state.steps, start=1):
        L_prev, L = state.levels[n - 1], state.levels[n]
        block = state.block(n)
        g = state.hts.g[n]
        seed = _seed(st)
        emb = st.embedding
        N = st.N
        pos = haar_position(n)[0]

        # (a) g_n lives on Haar indices M_{n-1}+1 .. M_n
        low = float(np.abs(haar_coefficients(g, L_prev, p)).max())
        rep.add(Check(f"a[{n}]", f"h*_m(g_{n}) = 0 for m <= M_{n - 1} and g_{n} in span(h_0..h_M_{n})",
                      low, 0.0, "le", 1e-10))
        rep.add(flag(f"a_level[{n}]", f"g_{n} is level-L_{n} measurable", dyadic_level(g) <= L))

        # (b) restrictions in the Haar prefix, off-(0,1] parts disjoint from earlier blocks
        inside = all(dyadic_level(f) <= L for f in state.z[: st.stop])
        earlier = IntervalSet()
        for f in state.z[: st.start]:
            earlier = earlier | (f.support() - UNIT)
        later = IntervalSet()
        for f in block:
            later = later | (f.support() - UNIT)
        rep.add(flag(f"b[{n}]", f"z_j|(0,1] in span(h_0..h_M_{n}) for j <= N_{n}; off-(0,1] supports of block {n} avoid earlier blocks",
                     inside and later.isdisjoint(earlier)))

        # equal-distribution properties of the split and the pieces
        gp, gm = pos_neg_parts(g)
        gamma = equidistributed([gp.support(), gm.support()], L_prev)
        pieces = emb.pieces()
        same = equidistributed(pieces, L_prev)
        cover = IntervalSet()
        for G in pieces:
            cover = cover | G
        measures = {G.measure() for G in pieces}
        split_ok = gamma and same and cover == g.support() and len(measures) == 1
        rep.add(flag(f"distribution[{n}]", "halves and all G_j carry equal distributions of every level-L_{n-1} function; G_j partition supp g_n",
                     split_ok))
        if not split_ok:
            # Psi is not well defined on a broken partition; the block checks below would be meaningless
            continue

        # Psi: isometry, piece norms, witness image
        iso = 0.0
        for r in streams(rng_seed + 1000 * n, samples):
            v = r.standard_normal(4 * N)
            v /= pnorm(v, p)
            iso = max(iso, abs(lp_norm(emb.apply(v), p) - 1.0))
        rep.add(Check(f"psi_isometry[{n}]", "| ||Psi v|| - ||v|| | for random unit v", iso, 1e-9, "le"))
        piece_dev = 0.0
        for i, G in enumerate(pieces):
            part = gp if i % 2 == 0 else gm
            piece_dev = max(piece_dev, abs(lp_norm(restrict(part, G), p) - (2 * N) ** (-1 / p)))
        wvec = np.zeros(4 * N)
        wvec[2 * N :] = (2 * N) ** (-1 / p) * np.where(np.arange(2 * N) % 2 == 0, 1.0, -1.0)
        img = (emb.apply(wvec) - g).max_abs()
        rep.add(Check(f"psi_pieces[{n}]", "||1_G g+-|| = (2N)^(-1/p) and Psi(witness) = g_n",
                      max(piece_dev, img), 1e-12, "le"))

        # (c) ||P_{M_{n-1}} x|| <= eps_n ||x|| on the block
        X = seed.vectors.matrix
        worst_c, worst_f, fac_err, chain = 0.0, 0.0, 0.0, 0.0
        for r in streams(rng_seed + 1000 * n + 1, samples):
            b = r.standard_normal(2 * N)
            xs = X @ b
            x = emb.apply(xs)
            nx = lp_norm(x, p)
            worst_c = max(worst_c, projection_norm(x, L_prev, p) / nx)
            f_x = (2 * N) ** (-1 / q) * float(np.sum(xs[2 * N :]))
            worst_f = max(worst_f, abs(f_x) / nx)
            direct = haar_coefficients(x, L_prev, p)
            fac = factored_dual(st, xs, p, L_prev, pos)
            fac_err = max(fac_err, float(np.abs(direct - fac).max()))
            chain = max(chain, float(np.abs(direct).max()) / max((2 * N) ** (1 / q) * abs(f_x), 1e-300))
        rep.add(Check(f"c[{n}]", f"||P_M_{n - 1} x|| / ||x|| <= eps_{n} on random block vectors; equals |f(x)| / ||x||",
                      worst_c, st.eps, "le", 1e-6, worst_f, "eq", 1e-9))
        u = pairing_vector(seed.witness_fstar, seed.vectors)
        fb = functional_bracket(u, X, p, probes=[r.standard_normal(2 * N) for r in streams(rng_seed + n, restarts)])
        rep.add(Check(f"c_certified[{n}]", f"2^(-1/q) x dual upper bound of |f*| on the seed span <= eps_{n}",
                      2 ** (-1 / q) * fb.upper, st.eps, "le", 1e-12))
        rep.add(Check(f"haar_dual_factored[{n}]", "h*_m(z) directly and through 2N s f(x) h*_m(1_G1) agree",
                      fac_err, 1e-8, "le"))
        rep.add(Check(f"haar_dual_chain[{n}]", "max_m |h*_m(z)| / ((2N)^(1/q) |f(x)|) <= 1",
                      chain, 1.0, "le", 1e-12))

        # (d) block basis constant
        M_block, _, w_block = _weighted(block)
        bc = basis_constant_matrix(M_block, p, w_block, restarts=restarts, rng_seed=rng_seed + n)
        rep.add(Check(f"d[{n}]", f"basis constant of block {n} (attained lower bound) <= 1 + 4 eps''",
                      bc.value, 1 + 4 * st.eps_seed, "le", 1e-6))

        # (e) distance of g_n to the block, against the explicit witness pushed through Psi
        M_b, v, w_e = _weighted(block, [g])
        dist, _ = min_residual(M_b, v[:, 0], p, w_e)
        wit = 2 ** (-1 / p) / (st.eps_seed * st.seed.A)
        coeffs = -(2 ** (-1 / p)) * seed.explicit_coeffs()
        resid = pnorm(v[:, 0] - M_b @ coeffs, p, w_e)
        rep.add(Check(f"e[{n}]", f"dist(g_{n}, span block {n}) < eps_{n}; at most the witness value 2^(-1/p)/(eps'' A)",
                      dist, st.eps, "le", 0.0, wit, "le", 1e-9))
        rep.add(Check(f"e_witness[{n}]", "explicit combination is exactly 2^(-1/p)/(eps'' A) from g_n",
                      resid, st.eps, "le", 0.0, wit, "eq", 1e-9))
        rep.observations[f"step {n}"] = {"eps": st.eps, "eps_seed": st.eps_seed, "seed_N": N, "level": L,
                                         "M": state.M_index[n], "N_index": state.N_index[n],
                                         "functional_gap": fb.upper - fb.lower, "halvings": st.shrinks}

    M_all, _, w_all = _weighted(state.z)
    bc = basis_constant_matrix(M_all, p, w_all, restarts=restarts, rng_seed=rng_seed)
    bound = 2 * (1 + state.eps_total) ** 2
    rep.add(Check("basis_constant", "global basis constant (attained lower bound) <= 2 (1 + eps)^2",
                  bc.value, bound, "le", 1e-6))
    rep.observations["basis_constant_ratio_to_bound"] = bc.value / bound
    rep.observations["basis_constant_prefix"] = bc.prefix
    rep.observations["dimension"] = len(state.z)
    rep.observations["merged_cells"] = int(M_all.shape[0])
    return rep


def export(state: LpState, path: str | Path, report: CertReport | None = None) -> None:
    data = state.to_json()
    if report is not None:
        data["report"] = report.to_dict()
    Path(path).write_text(json.dumps(data, separators=(",", ":"), allow_nan=False) + "\n")


def load(path: str | Path) -> LpState:
    return LpState.from_json(json.loads(Path(path).read_text()))
