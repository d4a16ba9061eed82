"""Inductive construction of a non-negative basic sequence in L2(R).

Targets are the Haar functions of every unit window, in the order of
``fnspace.iter_haar``.  Each step takes the next target h, forms the residual
y of h against the current span, and (generically) embeds a conditional seed
isometrically over pieces of supp(y+) and supp(y-) plus fresh unit intervals.
The new vectors are non-negative, y lies within eps' of their span, and every
old vector is nearly orthogonal to them.
"""

from __future__ import annotations

import json
import math
from collections.abc import Sequence
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import condseed
from .condseed import Infeasible, SeedSystem
from .fnspace import (
    Grid,
    HaarIndex,
    IntervalSet,
    PiecewiseFn,
    Registry,
    _lcm,
    _mul,
    allocate_fresh_intervals,
    cross_gram,
    gram,
    haar,
    indicator,
    iter_haar,
    lp_norm,
    pos_neg_parts,
    split_cells,
)
from .parallel import streams
from .report import CertReport, Check, flag
from .seqspace import basis_constants_eig, basis_constants_l2, gram_solve

IN_SPAN_TOL = 1e-9
SNAP = 1e-12


class SeedInfeasible(Exception):
    def __init__(self, message: str, smallest_feasible_eps: float | None = None, **info):
        super().__init__(message)
        self.smallest_feasible_eps = smallest_feasible_eps
        self.info = info

    def to_dict(self) -> dict:
        return {"infeasible": True, "reason": str(self), "smallest_feasible_eps": self.smallest_feasible_eps, **self.info}


def default_eps_total(schedule: Sequence[float]) -> float:
    """Smallest two-decimal value strictly above both sum and product - 1."""
    need = max(math.fsum(schedule), math.prod(1 + e for e in schedule) - 1)
    return math.floor(need * 100 + 1) / 100


def validate_schedule(schedule: Sequence[float], eps_total: float) -> None:
    if not schedule:
        raise ValueError("the schedule needs at least one tolerance")
    if any(not (0 < e) for e in schedule):
        raise ValueError("tolerances must be positive")
    if not math.fsum(schedule) < eps_total:
        raise ValueError(f"sum of the schedule must be below eps_total = {eps_total}")
    if not math.prod(1 + e for e in schedule) < 1 + eps_total:
        raise ValueError(f"product of (1 + eps_j) must be below 1 + eps_total = {1 + eps_total}")


def feasible_eps(c: float, n_max: int, theta: float, threshold: str) -> float:
    """Smallest eps for which the 1/n family works with N <= n_max at p = 2."""
    H = math.fsum(1.0 / np.arange(1, n_max + 1))
    cc = c**4 if threshold == "strict" else 1.0
    return (cc * theta * H) ** (-1.0 / 6.0)


@dataclass
class StepRecord:
    kind: str  # 'generic', 'negative-part' or 'in-span'
    target: HaarIndex
    start: int
    stop: int
    eps: float
    eps_prime: float | None = None
    c: float | None = None
    seed_N: int | None = None
    seed_A: float | None = None
    scale: float | None = None
    fresh: list = field(default_factory=list)
    attempts: int = 1
    checks: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "kind": self.kind,
            "target": self.target.to_json(),
            "start": self.start,
            "stop": self.stop,
            "eps": self.eps,
            "eps_prime": self.eps_prime,
            "c": self.c,
            "seed_N": self.seed_N,
            "seed_A": self.seed_A,
            "scale": self.scale,
            "fresh": [s.to_json() for s in self.fresh],
            "attempts": self.attempts,
            "checks": self.checks,
        }

    @classmethod
    def from_json(cls, d: dict) -> StepRecord:
        d = dict(d)
        d["target"] = HaarIndex(*d["target"])
        d["fresh"] = [IntervalSet.from_json(s) for s in d["fresh"]]
        return cls(**d)


@dataclass
class ConstructionState:
    z: list[PiecewiseFn]
    N_index: list[int]
    schedule: list[float]
    eps_total: float
    registry: Registry
    targets: list[HaarIndex]
    steps: list[StepRecord] = field(default_factory=list)
    options: dict = field(default_factory=dict)
    G: np.ndarray | None = field(default=None, repr=False)

    @property
    def k(self) -> int:
        return len(self.steps)

    @property
    def dimension(self) -> int:
        return len(self.z)

    def gram(self) -> np.ndarray:
        if self.G is None or len(self.G) != len(self.z):
            self.G = gram(self.z)
        return self.G

    def bound(self, k: int | None = None) -> float:
        k = self.k if k is None else k
        return math.prod(1 + e for e in self.schedule[:k])

    def to_json(self) -> dict:
        return {
            "construction": "basis-l2",
            "schedule": list(self.schedule),
            "eps_total": self.eps_total,
            "N_index": list(self.N_index),
            "targets": [t.to_json() for t in self.targets],
            "registry": self.registry.used.to_json(),
            "options": self.options,
            "steps": [s.to_json() for s in self.steps],
            "z": [f.to_json() for f in self.z],
        }

    @classmethod
    def from_json(cls, d: dict) -> ConstructionState:
        return cls(
            z=[PiecewiseFn.from_json(f) for f in d["z"]],
            N_index=list(d["N_index"]),
            schedule=list(d["schedule"]),
            eps_total=d["eps_total"],
            registry=Registry(IntervalSet.from_json(d["registry"])),
            targets=[HaarIndex(*t) for t in d["targets"]],
            steps=[StepRecord.from_json(s) for s in d["steps"]],
            options=d.get("options", {}),
        )


def init(
    schedule: Sequence[float] = (0.9, 0.85, 0.8, 0.8),
    eps_total: float | None = None,
    shrink: float = 0.25,
    max_seed_n: int = 8,
    theta: float = 0.9,
    threshold: str = "strict",
    retries: int = 3,
) -> ConstructionState:
    """State holding z_1 = 1_(0,1]; schedule[i] is the tolerance of target i+2."""
    schedule = [float(e) for e in schedule]
    eps_total = default_eps_total(schedule) if eps_total is None else float(eps_total)
    validate_schedule(schedule, eps_total)
    first = next(iter_haar())
    z1 = indicator(0, 1)
    options = {
        "shrink": shrink,
        "max_seed_n": max_seed_n,
        "theta": theta,
        "threshold": threshold,
        "retries": retries,
    }
    return ConstructionState([z1], [1], schedule, eps_total, Registry(IntervalSet([(0, 1)])), [first],
                             options=options)


# ---------------------------------------------------------------------------
# the embedding


@dataclass
class Embedding:
    """Psi from seed coordinates to functions, built on cell pieces of two supports plus unit intervals."""

    N: int
    c: float
    den: int
    plus: tuple  # (lefts per label, width, y+ values per cell)
    minus: tuple
    fresh: list[IntervalSet]
    H0: int
    scale: tuple[float, float] | None = None  # multipliers on the two pieces; L2 default below

    def factors(self) -> tuple[float, float]:
        if self.scale is not None:
            return self.scale
        return math.sqrt(self.N) / self.c, math.sqrt(self.N)

    def __call__(self, e: np.ndarray, f: np.ndarray) -> PiecewiseFn:
        sp, sm = self.factors()
        L, R, V = [], [], []
        left, width, val = self.plus
        for i in np.flatnonzero(f[0::2]):
            lo = left + width * i
            L.append(lo)
            R.append(lo + width)
            V.append(f[2 * i] * sp * val)
        left, width, val = self.minus
        for i in np.flatnonzero(f[1::2]):
            lo = left + width * i
            L.append(lo)
            R.append(lo + width)
            V.append(f[2 * i + 1] * sm * val)
        for j in np.flatnonzero(e):
            base = (self.H0 + int(j)) * self.den
            L.append(np.array([base], dtype=np.int64) if base < 2**62 else np.array([base], dtype=object))
            R.append(L[-1] + self.den)
            V.append(np.array([e[j]]))
        if not L:
            return PiecewiseFn()
        if any(a.dtype == object for a in L):
            L = [a.astype(object) for a in L]
            R = [a.astype(object) for a in R]
        return PiecewiseFn.from_pieces(self.den, np.concatenate(L), np.concatenate(R), np.concatenate(V))

    def apply(self, x: np.ndarray) -> PiecewiseFn:
        return self(x[: 2 * self.N], x[2 * self.N :])

    def pieces(self) -> list[IntervalSet]:
        """G_1, ..., G_2N: odd labels inside the positive support, even inside the negative one."""
        out = []
        for i in range(self.N):
            for left, width, _ in (self.plus, self.minus):
                lo = left + width * i
                out.append(IntervalSet.from_arrays(self.den, lo, lo + width))
        return out

    def to_json(self) -> dict:
        def part(t):
            return [[int(v) for v in t[0]], [int(v) for v in t[1]], [float(v) for v in t[2]]]

        return {"N": self.N, "c": self.c, "den": self.den, "plus": part(self.plus), "minus": part(self.minus),
                "fresh": [H.to_json() for H in self.fresh], "H0": self.H0,
                "scale": None if self.scale is None else list(self.scale)}

    @classmethod
    def from_json(cls, d: dict) -> Embedding:
        def ints(v):
            return np.array(v, dtype=np.int64) if max(map(abs, v), default=0) < 2**62 else np.array(v, dtype=object)

        def part(t):
            return ints(t[0]), ints(t[1]), np.array(t[2], dtype=float)

        return cls(d["N"], d["c"], d["den"], part(d["plus"]), part(d["minus"]),
                   [IntervalSet.from_json(H) for H in d["fresh"]], d["H0"],
                   None if d["scale"] is None else tuple(d["scale"]))


def _embedding(
    y: PiecewiseFn,
    context: Sequence[PiecewiseFn],
    N: int,
    c: float,
    registry: Registry,
    scale: tuple[float, float] | None = None,
) -> Embedding:
    yp, ym = pos_neg_parts(y)
    sp = split_cells([y, *context], yp.support(), N)
    sm = split_cells([y, *context], ym.support(), N)
    fresh = allocate_fresh_intervals(registry, 2 * N)
    H0 = int(fresh[0].inf())
    den = _lcm(sp.den, sm.den)
    plus = (_mul(sp.left, den // sp.den), _mul(sp.width, den // sp.den), sp.cell_values[0])
    minus = (_mul(sm.left, den // sm.den), _mul(sm.width, den // sm.den), -sm.cell_values[0])
    return Embedding(N, c, den, plus, minus, fresh, H0, scale)


def _residual(state: ConstructionState, h: PiecewiseFn):
    """Coefficients and residual of h against span(z), on a common grid."""
    G = state.gram()
    grid = Grid.of(state.z + [h])
    b = cross_gram(state.z, [h], grid)[:, 0]
    coef = gram_solve(G, b)
    vals = grid.values(h)
    for ci, zi in zip(coef, state.z):
        vals = vals - ci * grid.values(zi)
    top = np.abs(vals).max(initial=0.0)
    vals[np.abs(vals) <= SNAP * top] = 0.0
    return coef, grid.function(vals)


def _append(state: ConstructionState, new: list[PiecewiseFn]) -> None:
    G = state.gram()
    cross = cross_gram(state.z, new)
    inner = gram(new)
    k, m = len(G), len(new)
    out = np.empty((k + m, k + m))
    out[:k, :k] = G
    out[:k, k:] = cross
    out[k:, :k] = cross.T
    out[k:, k:] = inner
    state.z.extend(new)
    state.G = out


def _distance(state: ConstructionState, h: PiecewiseFn, upto: int | None = None) -> float:
    z = state.z[:upto] if upto else state.z
    G = state.gram()[: len(z), : len(z)]
    grid = Grid.of(z + [h])
    b = cross_gram(z, [h], grid)[:, 0]
    coef = gram_solve(G, b)
    vals = grid.values(h)
    for ci, zi in zip(coef, z):
        vals = vals - ci * grid.values(zi)
    return float(np.sqrt(np.sum(vals**2 * grid.lengths())))


def step(state: ConstructionState, rng_seed: int = 0) -> ConstructionState:
    """Process the next Haar target in place and return the state."""
    k = state.k
    if k >= len(state.schedule):
        raise ValueError("the schedule is exhausted")
    eps = state.schedule[k]
    it = iter_haar()
    target = [next(it) for _ in range(len(state.targets) + 1)][-1]
    h = haar(target, 2.0)
    # every target support counts as used, so fresh intervals stay clear of later windows
    state.registry.add(h.support())
    start = len(state.z)
    _, r = _residual(state, h)
    rn = lp_norm(r, 2)

    if rn < IN_SPAN_TOL * lp_norm(h, 2):
        H = allocate_fresh_intervals(state.registry, 1)[0]
        _append(state, [H.indicator()])
        rec = StepRecord("in-span", target, start, len(state.z), eps, fresh=[H])
    else:
        rp, rm = pos_neg_parts(r)
        if lp_norm(rp, 2) > lp_norm(rm, 2):
            r = -r
            rp, rm = rm, rp
        s = lp_norm(rm, 2)
        y = r * (1.0 / s)
        yp, ym = pos_neg_parts(y)
        c = lp_norm(yp, 2)
        if yp.is_zero():
            _append(state, [ym])
            rec = StepRecord("negative-part", target, start, len(state.z), eps, c=0.0, scale=s)
        else:
            rec = _generic_step(state, target, y, min(c, 1.0), s, eps, rng_seed)
    state.targets.append(target)
    state.N_index.append(len(state.z))
    state.steps.append(rec)
    return state


def _generic_step(state, target, y, c, s, eps, rng_seed) -> StepRecord:
    opt = state.options
    theta, threshold = opt["theta"], opt["threshold"]
    floor = feasible_eps(c, opt["max_seed_n"], theta, threshold)
    eps_p = min(eps, max(opt["shrink"] * eps, floor))
    context = list(state.z)
    snapshot = (list(state.z), state.G, Registry(state.registry.used))
    start = len(state.z)
    last_error = None
    for attempt in range(1, opt["retries"] + 2):
        try:
            params = condseed.coeffs_optimized(eps_p, c, 2.0, theta, threshold)
            seed = condseed.build_seed(params, "l2")
        except (Infeasible, ValueError) as exc:
            last_error = exc
            break
        emb = _embedding(y, context, params.N, c, state.registry)
        new = [emb.apply(v.coords()) for v in seed.vectors]
        _append(state, new)
        checks = _step_checks(state, target, seed, emb, start, eps, rng_seed)
        if checks["passed"]:
            return StepRecord("generic", target, start, len(state.z), eps, eps_p, c, params.N, params.A, s,
                              emb.fresh, attempt, checks)
        state.z, state.G, state.registry.used = snapshot[0][:], snapshot[1], snapshot[2].used
        last_error = RuntimeError(f"post-step checks failed at eps' = {eps_p}: {checks}")
        eps_p /= 2
    raise SeedInfeasible(
        f"step for target {target} could not be completed: {last_error}",
        smallest_feasible_eps=feasible_eps(c, condseed.BUILD_CAP, theta, threshold),
        target=target.to_json(),
        c=c,
        eps=eps,
    )


def _step_checks(state, target, seed: SeedSystem, emb: Embedding, start: int, eps: float, rng_seed: int) -> dict:
    new = state.z[start:]
    positive = all(z.is_nonnegative() for z in new)
    iso = 0.0
    for r in streams(rng_seed, 20):
        v = r.standard_normal(4 * seed.N)
        iso = max(iso, abs(lp_norm(emb.apply(v), 2) - np.linalg.norm(v)))
    # y itself is the image of the witness, so its distance to the new block is the seed's
    dist = _distance(state, haar(target, 2.0))
    bc = float(basis_constants_l2(state.gram()).max())
    bound = state.bound(state.k + 1)
    return {
        "positive": positive,
        "isometry_error": iso,
        "distance": dist,
        "basis_constant": bc,
        "basis_bound": bound,
        "passed": bool(positive and iso <= 1e-9 and dist < eps and bc <= bound + 1e-6),
    }


def build(schedule: Sequence[float], steps: int | None = None, rng_seed: int = 0, **options) -> ConstructionState:
    state = init(schedule, **options)
    for _ in range(len(schedule) if steps is None else steps):
        step(state, rng_seed)
    return state


# ---------------------------------------------------------------------------
# verification


def verify(state: ConstructionState, rng_seed: int = 0, samples: int = 20) -> CertReport:
    rep = CertReport(
        "basis-l2",
        {"schedule": state.schedule, "eps_total": state.eps_total, "steps": state.k, **state.options},
        rng_seed=rng_seed,
    )
    z = state.z
    rep.add(flag("positivity", "every z_j is >= 0 everywhere (exact sign of stored values)",
                 all(f.is_nonnegative() for f in z)))
    rep.add(flag("first_vector", "z_1 = 1_(0,1]", z[0] == indicator(0, 1)))
    rep.add(flag("index_increasing", "N_index strictly increasing",
                 all(b > a for a, b in zip(state.N_index, state.N_index[1:]))))
    G = gram(z)
    state.G = G
    per = basis_constants_l2(G)
    eig = float(basis_constants_eig(G).max())
    bound = state.bound()
    rep.add(Check("basis_constant", "exact basis constant of all z <= prod (1 + eps_j) (eigenvalue cross-check)",
                  float(per.max()), bound, "le", 1e-6, eig, "eq", 1e-8, True))
    for n, t in enumerate(state.targets[1:], start=1):
        upto = state.N_index[n]
        d = _distance(state, haar(t, 2.0), upto)
        rep.add(Check(f"distance[h_{n + 1}]", f"dist(h_{n + 1}, span z_1..z_{upto}) < eps_{n + 1}",
                      d, state.schedule[n - 1], "le", 0.0))
    for i, rec in enumerate(state.steps, start=1):
        prior = state.z[: rec.start]
        used = IntervalSet()
        for f in prior:
            used = used | f.support()
        for H in rec.fresh:
            if not H.isdisjoint(used):
                rep.add(flag(f"fresh_intervals[step {i}]", "fresh intervals avoid every earlier support", False))
                break
        else:
            rep.add(flag(f"fresh_intervals[step {i}]", "fresh intervals avoid every earlier support", True))
        if rec.kind != "generic":
            continue
        cc = _cross_coupling(G, rec.start, rec.stop, samples, rng_seed + i)
        rep.add(Check(f"cross_coupling[step {i}]", "projection of random unit old-span vectors onto the new block <= 2 eps'",
                      cc["sampled"], 2 * rec.eps_prime, "le", 1e-6))
        rep.observations[f"cross_coupling_sup[step {i}]"] = cc["sup"]
        rep.observations[f"step {i}"] = {"kind": rec.kind, "eps_prime": rec.eps_prime, "c": rec.c, "seed_N": rec.seed_N}
    rep.observations["dimension"] = len(z)
    rep.observations["cells"] = Grid.of(z).cells
    rep.observations["per_prefix_max_at"] = int(np.argmax(per)) + 1
    return rep


def _cross_coupling(G: np.ndarray, start: int, stop: int, samples: int, seed: int) -> dict:
    Goo = G[:start, :start]
    Gno = G[start:stop, :start]
    Gnn = G[start:stop, start:stop]
    worst = 0.0
    for r in streams(seed, samples):
        a = r.standard_normal(start)
        a /= math.sqrt(a @ Goo @ a)
        beta = Gno @ a
        worst = max(worst, math.sqrt(max(beta @ gram_solve(Gnn, beta), 0.0)))
    M = Gno.T @ gram_solve(Gnn, Gno)
    L = np.linalg.cholesky(Goo)
    Li = np.linalg.inv(L)
    sup = math.sqrt(max(np.linalg.eigvalsh(Li @ M @ Li.T).max(), 0.0))
    return {"sampled": worst, "sup": sup}


# ---------------------------------------------------------------------------
# persistence


def export(state: ConstructionState, path: str | Path, report: CertReport | None = None) -> None:
    data = state.to_json()
    if report is not None:
        data["report"] = report.to_dict()
    Path(path).write_text(json.dumps(data, separators=(",", ":"), allow_nan=False) + "\n")


def load(path: str | Path) -> ConstructionState:
    return ConstructionState.from_json(json.loads(Path(path).read_text()))
