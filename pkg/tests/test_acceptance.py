"""Acceptance gate: twelve criteria at their stated tolerances.

Each criterion builds its construction, checks it against independent
reference values and records one PASS/FAIL line (printed in the pytest
terminal summary).  The final criterion reruns the others and compares
their JSON reports byte for byte.
"""

import contextlib
import io
import json
import math
import time
from fractions import Fraction

import numpy as np
import pytest
import scipy.linalg as sla
from oracles import double_integral

from posbasis import cli, condseed, frames, posbasis_l2, posseq_lp
from posbasis.fnspace import cross_gram, gram, haar, lp_norm
from posbasis.report import CertReport

SUMMARY: list[str] = []
REPORTS: dict[int, str] = {}


def record(n: int, title: str, ok: bool, detail: str = "") -> None:
    SUMMARY.append(f"criterion {n:2d} {'PASS' if ok else 'FAIL'}  {title}" + (f"  ({detail})" if detail else ""))


# independent reference computations


def lstsq_distance(X: np.ndarray, y: np.ndarray) -> float:
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    return float(np.linalg.norm(y - X @ coef))


def prefix_constant_gep(G: np.ndarray) -> float:
    """max_m ||P_m|| from the generalized eigenproblem (E_m G E_m) v = lambda G v."""
    n = len(G)
    worst = 1.0
    for m in range(1, n):
        A = np.zeros_like(G)
        A[:m, :m] = G[:m, :m]
        lam = sla.eigh(A, G, eigvals_only=True)
        worst = max(worst, math.sqrt(max(lam.max(), 0.0)))
    return worst


def family_ratio_l2(beta, eps, c, A):
    return eps * c * (beta + A) / math.sqrt(1 + (beta + A) ** 2 + eps**2 * c**2 * beta**2 + eps**2 * A**2)


# the criteria, each returning (ok, detail, report JSON without timings)


def crit_seed_l2():
    t0 = time.perf_counter()
    P = condseed.coeffs_optimized(0.8, 1.0, 2.0, 0.9, "strict")
    s = condseed.build_seed(P, "l2")
    rep = condseed.certify_seed(s, restarts=16, rng_seed=0)
    elapsed = time.perf_counter() - t0
    X, y = s.vectors.matrix, s.witness_y.coords()
    A = math.fsum(P.a)
    wd = 1 / (P.eps * A)
    resid = float(np.linalg.norm(X @ s.explicit_coeffs() - y))
    dist = lstsq_distance(X, y)
    return s, rep, elapsed, resid, wd, dist


def criterion_1():
    s, rep, elapsed, resid, wd, dist = crit_seed_l2()
    ok = s.N <= 64 and abs(resid - wd) <= 1e-9 and dist <= wd + 1e-12 and elapsed < 5 and rep.passed
    return ok, f"N={s.N} residual={resid:.12g} 1/(eps A)={wd:.12g} dist={dist:.6g} t={elapsed:.2f}s", rep.to_json()


def criterion_2():
    s, rep, *_ = crit_seed_l2()
    P = s.params
    X, x = s.vectors.matrix, s.witness_x.coords()
    coef, *_ = np.linalg.lstsq(X, x, rcond=None)
    proj = float(np.linalg.norm(X @ coef))
    A = math.fsum(P.a)
    beta = (1 + P.eps**2 * A**2) / (P.eps**2 * P.c**2 * A)
    oracle = family_ratio_l2(beta, P.eps, P.c, A)
    ok = abs(proj - oracle) <= 1e-6 * oracle and proj <= 3 * P.c * P.eps and rep["projection_norm"].passed
    return ok, f"||Px||={proj:.12g} beta-oracle={oracle:.12g} 3c eps={3 * P.c * P.eps}", rep.to_json()


def criterion_3():
    s, rep, *_ = crit_seed_l2()
    eps = s.params.eps
    X = s.vectors.matrix
    exact = prefix_constant_gep(X.T @ X)
    pre = condseed.prefix_inequality(s, trials=200, rng_seed=0)
    ok = 1.0 <= exact <= 1 + 4 * eps and pre <= 1 + 4 * eps and rep["basis_constant"].passed
    return ok, f"basis constant={exact:.9g} prefix ratio={pre:.6g} bound={1 + 4 * eps}", rep.to_json()


def criterion_4():
    t0 = time.perf_counter()
    P = condseed.coeffs_optimized(0.9, 1.0, 3.0, 0.9, "strict")
    s = condseed.build_seed(P, "lp")
    rep = condseed.certify_seed(s, restarts=64, rng_seed=0)
    elapsed = time.perf_counter() - t0
    X, y = s.vectors.matrix, s.witness_y.coords()
    wd = 1 / (P.eps * math.fsum(P.a))
    resid = float(np.sum(np.abs(X @ s.explicit_coeffs() - y) ** 3) ** (1 / 3))
    ok = (rep["functional_sup"].computed <= P.eps and rep["functional_dual_bound"].computed <= P.eps
          and abs(resid - wd) <= 1e-9 and rep["basis_constant"].computed <= 1 + 4 * P.eps
          and elapsed < 60 and rep.passed)
    return ok, f"sup |f*| <= {rep['functional_dual_bound'].computed:.6g} residual={resid:.12g} t={elapsed:.2f}s", rep.to_json()


def criterion_5():
    rows, ok = {}, True
    for p in (2.0, 3.0):
        quad = double_integral(p)
        bound = condseed.integral_bound(p)
        rows[str(p)] = {"quadrature": quad, "closed_form_bound": bound}
        ok &= quad <= bound + 1e-6
    detail = ", ".join(f"p={k}: {v['quadrature']:.6g} <= {v['closed_form_bound']:.6g}" for k, v in rows.items())
    return ok, detail, json.dumps(rows, sort_keys=True)


L2_SCHEDULE = [0.9, 0.85, 0.8, 0.8]


def criterion_6():
    t0 = time.perf_counter()
    st = posbasis_l2.build(L2_SCHEDULE, 4)
    rep = posbasis_l2.verify(st)
    elapsed = time.perf_counter() - t0
    z = st.z
    G = gram(z)
    exact = prefix_constant_gep(G) if len(z) <= 400 else float("nan")
    bound = math.prod(1 + e for e in L2_SCHEDULE)
    dists = []
    for n, t in enumerate(st.targets[1:], start=1):
        upto = st.N_index[n]
        h = haar(t, 2.0)
        g = cross_gram(z[:upto], [h])[:, 0]
        Gs = G[:upto, :upto]
        d2 = lp_norm(h, 2.0) ** 2 - g @ sla.solve(Gs, g, assume_a="pos")
        dists.append(math.sqrt(max(d2, 0.0)))
    ok = (all(f.is_nonnegative() for f in z) and all(d < e for d, e in zip(dists, L2_SCHEDULE))
          and exact <= bound + 1e-6 and len(z) <= 10**4 and elapsed < 120 and rep.passed)
    return ok, f"dim={len(z)} basis constant={exact:.6g} <= {bound:.6g} dists={[round(d, 4) for d in dists]} t={elapsed:.1f}s", rep.to_json()


def criterion_7():
    st = posseq_lp.build(3.0, (0.9, 0.85, 0.8))
    rep = posseq_lp.verify_lp(st)
    bound = 2 * (1 + st.eps_total) ** 2
    iso = max(c.computed for c in rep.checks if c.name.startswith("psi_isometry"))
    conds = [c for c in rep.checks if c.name[:2] in ("a[", "b[", "c[", "d[", "e[")]
    ok = rep.passed and len(conds) == 15 and rep["basis_constant"].computed <= bound + 1e-6 and iso <= 1e-9
    return ok, f"basis constant={rep['basis_constant'].computed:.6g} <= {bound:.6g} isometry dev={iso:.2g}", rep.to_json()


def criterion_8():
    frame, pert = frames.haar_frame(6, 8)
    xs = frames.random_span_vectors(pert.u, 8, 20, rng_seed=0)
    rep = frames.verify_frame(frame, xs, tol=1e-8)
    worst_rise, worst_final = 0.0, 0.0
    ends = np.cumsum(frame.block_lengths()) - 1
    for tr in rep.artifacts["traces"]:
        worst_rise = max(worst_rise, float(np.max(np.diff(tr[ends]), initial=0.0)))
        worst_final = max(worst_final, float(tr[-1]))
    ok = rep.passed and len(xs) == 20 and worst_final <= 1e-8 and worst_rise <= 1e-12
    return ok, f"final error={worst_final:.3g} block-end rise={worst_rise:.2g}", rep.to_json()


def criterion_9():
    te = frames.translate_dictionary_expansion(0, Fraction(1, 2), p=2.0, M=200)
    resid = te.residual_norm()
    tele = all(frames.telescoping_holds(n, Fraction(1, 2)) for n in range(50))
    ces = frames.cesaro_identity_exact(200, Fraction(1, 2))
    ok = abs(resid - 0.05) <= 1e-12 and abs(te.error - 0.05) <= 1e-12 and tele and ces
    return ok, f"residual={resid!r} telescoping={tele}", json.dumps({"residual": resid, "closed_form": te.error, "telescoping": tele, "cesaro": ces})


def criterion_10():
    frame, reg, pert = frames.haar_uframe(6, 6)
    xs = frames.random_span_vectors(pert.u, 4, 10, rng_seed=0)
    rep = frames.verify_uframe(frame, reg, xs, subsets=50, rng_seed=0)
    rules = [c for c in rep.checks if c.name.startswith("redundancy[")]
    ok = rep.passed and len(rules) == 6 and rep["domination"].passed and rep["sub_block"].passed
    return ok, f"length={len(frame)} N={[e.N for e in frame.expansions]}", rep.to_json()


def criterion_11():
    buf = io.StringIO()
    with contextlib.redirect_stdout(buf):
        code = cli.main(["seed", "--epsilon", "0.25", "--p", "2"])
    payload = json.loads(buf.getvalue())
    ln_needed = payload["ln_N_required"]
    frontier = 0.25**-6 - 1
    ratio = ln_needed / frontier
    ok = code == 2 and payload["infeasible"] and 0.1 <= ratio <= 10
    return ok, f"exit={code} ln N required={ln_needed:.1f} frontier ln N >= {frontier:.0f} ratio={ratio:.3f}", buf.getvalue()


CRITERIA = {
    1: ("seed exactness, p=2 eps=0.8", criterion_1),
    2: ("seed projection norm", criterion_2),
    3: ("seed basis constant", criterion_3),
    4: ("lp seed, p=3 eps=0.9", criterion_4),
    5: ("double integral bound", criterion_5),
    6: ("L2 engine, 4 steps", criterion_6),
    7: ("Lp engine, p=3, 3 steps", criterion_7),
    8: ("Haar frame reconstruction", criterion_8),
    9: ("translate Cesaro means", criterion_9),
    10: ("u-frame domination", criterion_10),
    11: ("infeasibility honesty", criterion_11),
}


@pytest.mark.parametrize("n", sorted(CRITERIA))
def test_criterion(n):
    title, fn = CRITERIA[n]
    ok, detail, text = fn()
    REPORTS[n] = text
    record(n, title, ok, detail)
    assert ok, detail


def test_criterion_12_determinism():
    diffs = []
    for n, (_, fn) in sorted(CRITERIA.items()):
        first = REPORTS.get(n)
        if first is None:
            first = fn()[2]
        again = fn()[2]
        if first != again:
            diffs.append(n)
    record(12, "determinism (byte-identical reruns)", not diffs, f"differing: {diffs}" if diffs else "all 11 identical")
    assert not diffs


def test_reports_carry_no_timings():
    # determinism relies on reports without wall-clock fields
    assert CertReport("x", {}).to_dict().get("timings") is None
