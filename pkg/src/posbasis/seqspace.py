"""Finite-dimensional lp machinery for the seed systems.

The ambient space is lp(Z_2N) + lp(Z_2N) with coordinates (e_1..e_2N, f_1..f_2N).
The numerical routines below work for any weighted norm
    ||x|| = (sum_i w_i |x_i|^p)^(1/p)
on coordinate vectors, so the same code serves step functions sampled on a
cell grid (w = cell lengths) and plain sequences (w = 1).  A subspace is given
by a matrix whose columns span it.
"""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
from scipy.optimize import minimize

from .parallel import pmap, streams

COND_LIMIT = 1e12
RANK_TOL = 1e-10
GRAD_TOL = 1e-10


class IllConditioned(ValueError):
    pass


class LinearDependence(ValueError):
    pass


class NoConvergence(RuntimeError):
    pass


def dual_exponent(p: float) -> float:
    if p <= 1:
        raise ValueError("p must exceed 1")
    return p / (p - 1.0)


def pnorm(x: np.ndarray, p: float, w: np.ndarray | None = None) -> float:
    a = np.abs(np.asarray(x, dtype=float))
    top = a.max(initial=0.0)
    if top == 0.0:
        return 0.0
    t = (a / top) ** p
    if w is not None:
        t = t * w
    return float(top * np.sum(t) ** (1.0 / p))


# ---------------------------------------------------------------------------
# vectors


@dataclass(frozen=True)
class BlockVec:
    """A vector of lp(Z_2N) + lp(Z_2N)."""

    N: int
    e: np.ndarray
    f: np.ndarray
    p: float = 2.0

    def __post_init__(self):
        e = np.array(self.e, dtype=float)
        f = np.array(self.f, dtype=float)
        if e.shape != (2 * self.N,) or f.shape != (2 * self.N,):
            raise ValueError(f"both blocks must have length {2 * self.N}")
        e.flags.writeable = False
        f.flags.writeable = False
        object.__setattr__(self, "e", e)
        object.__setattr__(self, "f", f)

    @classmethod
    def zeros(cls, N: int, p: float = 2.0) -> BlockVec:
        return cls(N, np.zeros(2 * N), np.zeros(2 * N), p)

    @classmethod
    def from_coords(cls, N: int, x: np.ndarray, p: float = 2.0) -> BlockVec:
        x = np.asarray(x, dtype=float)
        return cls(N, x[: 2 * N], x[2 * N :], p)

    def coords(self) -> np.ndarray:
        return np.concatenate((self.e, self.f))

    def norm(self, p: float | None = None) -> float:
        return pnorm(self.coords(), self.p if p is None else p)

    def _like(self, x: np.ndarray) -> BlockVec:
        return BlockVec.from_coords(self.N, x, self.p)

    def __add__(self, other: BlockVec) -> BlockVec:
        return self._like(self.coords() + other.coords())

    def __sub__(self, other: BlockVec) -> BlockVec:
        return self._like(self.coords() - other.coords())

    def __neg__(self) -> BlockVec:
        return self._like(-self.coords())

    def __mul__(self, s: float) -> BlockVec:
        return self._like(self.coords() * float(s))

    __rmul__ = __mul__

    def __eq__(self, other) -> bool:
        if not isinstance(other, BlockVec):
            return NotImplemented
        return self.N == other.N and self.p == other.p and np.array_equal(self.coords(), other.coords())

    __hash__ = None

    def to_json(self) -> dict:
        return {"N": self.N, "p": self.p, "e": self.e.tolist(), "f": self.f.tolist()}


def cyclic_shift(v: BlockVec, m: int) -> BlockVec:
    """Rotate both blocks right by m (indices mod 2N)."""
    return BlockVec(v.N, np.roll(v.e, m), np.roll(v.f, m), v.p)


class SpanBasis:
    """An ordered, linearly independent list of BlockVec."""

    def __init__(self, vectors: Sequence[BlockVec], rank_tol: float = RANK_TOL):
        vectors = list(vectors)
        if not vectors:
            raise ValueError("a span basis needs at least one vector")
        N, p = vectors[0].N, vectors[0].p
        if any(v.N != N or v.p != p for v in vectors):
            raise ValueError("all vectors must share N and p")
        X = np.column_stack([v.coords() for v in vectors])
        smin = np.linalg.svd(X, compute_uv=False).min()
        if smin < rank_tol:
            raise LinearDependence(f"smallest singular value {smin:.3e} below {rank_tol:g}")
        self.vectors = tuple(vectors)
        self.N = N
        self.p = p
        self.matrix = X
        self.matrix.flags.writeable = False

    def __len__(self) -> int:
        return len(self.vectors)

    def __getitem__(self, i):
        return self.vectors[i]

    def combine(self, b: Sequence[float]) -> BlockVec:
        return BlockVec.from_coords(self.N, self.matrix @ np.asarray(b, dtype=float), self.p)


# ---------------------------------------------------------------------------
# L2: Gram systems


def gram_matrix(M: np.ndarray, w: np.ndarray | None = None) -> np.ndarray:
    G = M.T @ (M if w is None else M * w[:, None])
    return 0.5 * (G + G.T)


def check_conditioning(G: np.ndarray) -> float:
    cond = float(np.linalg.cond(G))
    if not np.isfinite(cond) or cond > COND_LIMIT:
        raise IllConditioned(f"Gram condition number {cond:.3e} exceeds {COND_LIMIT:g}")
    return cond


def gram_solve(G: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    check_conditioning(G)
    return sla.cho_solve(sla.cho_factor(G), rhs)


def project_l2(M: np.ndarray, v: np.ndarray, w: np.ndarray | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Coefficients and image of the weighted-L2 orthogonal projection of v."""
    rhs = M.T @ (v if w is None else w * v)
    c = gram_solve(gram_matrix(M, w), rhs)
    return c, M @ c


def orthoproject_l2(v: BlockVec, S: SpanBasis) -> tuple[BlockVec, float]:
    if v.p != 2 or S.p != 2:
        raise ValueError("orthogonal projection needs p = 2")
    _, x = project_l2(S.matrix, v.coords())
    P = BlockVec.from_coords(v.N, x, 2.0)
    return P, P.norm()


def basis_constants_l2(G: np.ndarray) -> np.ndarray:
    """Norm of every prefix projection b -> b[:m] for the Gram matrix G.

    With G = R^T R, the m-th projection has norm sqrt(1 + ||R12 R22^-1||^2).
    Entry m-1 of the result is the norm for prefix length m; the last entry is 1.
    """
    check_conditioning(G)
    R = sla.cholesky(G)
    Rinv = sla.solve_triangular(R, np.eye(len(G)))
    k = len(G)
    out = np.ones(k)
    for m in range(1, k):
        K = R[:m, m:] @ Rinv[m:, m:]
        out[m - 1] = np.sqrt(1.0 + np.linalg.norm(K, 2) ** 2)
    return out


def basis_constants_eig(G: np.ndarray) -> np.ndarray:
    """Same quantities from the generalized eigenproblem (G_m, G)."""
    check_conditioning(G)
    k = len(G)
    out = np.ones(k)
    for m in range(1, k):
        Gm = np.zeros_like(G)
        Gm[:m, :m] = G[:m, :m]
        lam = sla.eigh(Gm, G, eigvals_only=True, subset_by_index=[k - 1, k - 1])[0]
        out[m - 1] = np.sqrt(max(lam, 1.0))
    return out


# ---------------------------------------------------------------------------
# p-norm distance


def _residual_min(M, v, p, w, tol, max_iter):
    k = M.shape[1]
    ww = np.ones(len(v)) if w is None else w
    sw = np.sqrt(ww)
    b = np.linalg.lstsq(M * sw[:, None], v * sw, rcond=None)[0]
    if p == 2:
        return b, 0.0

    def phi(b):
        return float(np.sum(ww * np.abs(v - M @ b) ** p))

    def grad(r):
        return -p * (M.T @ (ww * np.abs(r) ** (p - 1) * np.sign(r)))

    f = phi(b)
    g = grad(v - M @ b)
    for _ in range(max_iter):
        gnorm = float(np.abs(g).max())
        if gnorm <= tol:
            return b, gnorm
        r = v - M @ b
        a = np.maximum(np.abs(r), 1e-12 if p < 2 else 0.0)
        H = p * (p - 1) * gram_matrix(M, ww * a ** (p - 2))
        H[np.diag_indices(k)] += 1e-14 * max(np.trace(H) / k, 1e-300)
        try:
            d = sla.solve(H, -g, assume_a="pos")
        except (np.linalg.LinAlgError, sla.LinAlgError):
            d = -g
        slope = float(g @ d)
        if slope >= 0:
            d, slope = -g, -float(g @ g)
        t = 1.0
        floor = 8 * np.finfo(float).eps * max(f, 1e-300)
        while True:
            fn = phi(b + t * d)
            if fn <= f + 1e-4 * t * slope + floor:
                break
            t *= 0.5
            if t < 1e-20:
                raise NoConvergence(f"line search failed with gradient {gnorm:.3e}")
        b_new = b + t * d
        g_new = grad(v - M @ b_new)
        if fn >= f and np.abs(g_new).max() >= gnorm:
            # no further progress is representable in floating point
            last = float(np.abs(g_new).max())
            if last <= tol * 1e3:
                return b_new, last
            raise NoConvergence(f"stalled with gradient {last:.3e} above {tol:g}")
        b, f, g = b_new, fn, g_new
    gnorm = float(np.abs(g).max())
    if gnorm <= tol:
        return b, gnorm
    raise NoConvergence(f"no convergence after {max_iter} Newton steps, gradient {gnorm:.3e}")


def min_residual(
    M: np.ndarray,
    v: np.ndarray,
    p: float,
    w: np.ndarray | None = None,
    tol: float = GRAD_TOL,
    max_iter: int = 500,
) -> tuple[float, np.ndarray]:
    """min over b of ||v - M b||_p, solved on the rescaled problem.

    The vector and the columns are normalized first so the gradient tolerance
    refers to a problem of unit scale.  Returns (distance, b).
    """
    if p <= 1:
        raise ValueError("p must exceed 1")
    v = np.asarray(v, dtype=float)
    s = pnorm(v, p, w)
    k = M.shape[1]
    if s == 0.0:
        return 0.0, np.zeros(k)
    cols = np.array([pnorm(M[:, j], p, w) for j in range(k)])
    cols[cols == 0] = 1.0
    bhat, _ = _residual_min(M / cols, v / s, p, w, tol, max_iter)
    b = bhat * s / cols
    return pnorm(v - M @ b, p, w), b


def dist_to_span(v: BlockVec, S: SpanBasis, p: float | None = None) -> tuple[float, np.ndarray]:
    p = S.p if p is None else p
    return min_residual(S.matrix, v.coords(), p)


# ---------------------------------------------------------------------------
# functional norms on a subspace


@dataclass
class FunctionalBound:
    lower: float
    upper: float
    exact: float | None
    argmax: np.ndarray = field(repr=False)


def functional_bracket(
    u: np.ndarray,
    M: np.ndarray,
    p: float,
    w: np.ndarray | None = None,
    probes: Sequence[np.ndarray] = (),
) -> FunctionalBound:
    """Bracket sup |u.b| / ||M b||_p from both sides.

    The primal side minimizes ||M b|| subject to u.b = 1 (convex); the attained
    ratio is a lower bound.  The dual side turns the minimizer into a norming
    functional xi with M^T(w xi) = u, whose q-norm is an upper bound.  Probe
    coefficient vectors only ever raise the lower bound.
    """
    u = np.asarray(u, dtype=float)
    k = M.shape[1]
    q = dual_exponent(p)
    if not np.any(u):
        return FunctionalBound(0.0, 0.0, 0.0 if p == 2 else None, np.zeros(k))
    b0 = u / (u @ u)
    if k == 1:
        b = b0
    else:
        Z = sla.null_space(u[None, :])
        _, t = min_residual(M @ Z, M @ b0, p, w)
        b = b0 - Z @ t
    x = M @ b
    lower = abs(u @ b) / pnorm(x, p, w)
    best = b
    for probe in probes:
        probe = np.asarray(probe, dtype=float)
        n = pnorm(M @ probe, p, w)
        if n > 0 and abs(u @ probe) / n > lower:
            lower, best = abs(u @ probe) / n, probe
    xn = pnorm(x, p, w)
    xi = np.sign(x) * (np.abs(x) / xn) ** (p - 1) / xn / abs(u @ b)
    xi *= np.sign(u @ b)
    ww = np.ones(len(x)) if w is None else w
    G = gram_matrix(M, w)
    res = u - M.T @ (ww * xi)
    try:
        xi = xi + M @ gram_solve(G, res)
        upper = max(pnorm(xi, q, w), lower)
    except IllConditioned:
        upper = float("inf")
    exact = None
    if p == 2:
        exact = float(np.sqrt(u @ gram_solve(G, u)))
    return FunctionalBound(float(lower), float(upper), exact, best)


def pairing_vector(g: BlockVec, S: SpanBasis) -> np.ndarray:
    """Action of the dual vector g on each basis vector."""
    return S.matrix.T @ g.coords()


def functional_sup(
    g: BlockVec,
    S: SpanBasis,
    p: float | None = None,
    restarts: int = 8,
    rng_seed: int = 0,
    starts: Sequence[np.ndarray] = (),
) -> float:
    """Lower bound for the norm of g restricted to span(S).

    The convex primal solve gives the attained ratio; random coefficient probes
    and any structured starts are evaluated too and the best ratio wins.  For
    p = 2 the Gram value is computed and must agree within 1e-6.
    """
    p = S.p if p is None else p
    u = pairing_vector(g, S)
    probes = list(starts) + [r.standard_normal(len(S)) for r in streams(rng_seed, restarts)]
    fb = functional_bracket(u, S.matrix, p, probes=probes)
    if fb.exact is not None and abs(fb.lower - fb.exact) > 1e-6 * max(1.0, fb.exact):
        raise NoConvergence(f"functional supremum {fb.lower} disagrees with Gram value {fb.exact}")
    return fb.lower


# ---------------------------------------------------------------------------
# basis constants


def prefix_ratio(M: np.ndarray, b: np.ndarray, m: int, p: float, w=None) -> float:
    full = pnorm(M @ b, p, w)
    return pnorm(M[:, :m] @ b[:m], p, w) / full if full > 0 else 0.0


def _maximize_prefix(M, m, p, w, b0):
    ww = np.ones(M.shape[0]) if w is None else w
    Mm = M[:, :m]

    def neg_log_ratio(b):
        x = M @ b
        y = Mm @ b[:m]
        nx = np.sum(ww * np.abs(x) ** p)
        ny = np.sum(ww * np.abs(y) ** p)
        if nx <= 0 or ny <= 0:
            return 0.0, np.zeros_like(b)
        gx = M.T @ (ww * np.abs(x) ** (p - 1) * np.sign(x)) / nx
        gy = np.zeros_like(b)
        gy[:m] = Mm.T @ (ww * np.abs(y) ** (p - 1) * np.sign(y)) / ny
        return -(np.log(ny) - np.log(nx)) / p, -(gy - gx)

    res = minimize(neg_log_ratio, b0, jac=True, method="L-BFGS-B", options={"maxiter": 500, "gtol": 1e-12})
    b = res.x
    return prefix_ratio(M, b, m, p, w), b


@dataclass
class BasisConstantEstimate:
    value: float
    prefix: int
    coeffs: np.ndarray = field(repr=False)
    per_prefix: np.ndarray = field(repr=False)
    exact: bool


def basis_constant_matrix(
    M: np.ndarray,
    p: float,
    w: np.ndarray | None = None,
    restarts: int = 16,
    rng_seed: int = 0,
) -> BasisConstantEstimate:
    k = M.shape[1]
    G = gram_matrix(M, w)
    l2 = basis_constants_l2(G)
    if p == 2:
        m = int(np.argmax(l2)) + 1
        return BasisConstantEstimate(float(max(1.0, l2.max())), m, np.zeros(k), l2, True)
    if k == 1:
        return BasisConstantEstimate(1.0, 1, np.ones(1), np.ones(1), False)
    # structured starts: the top L2 generalized eigenvector of each prefix
    tasks = []
    for m in range(1, k):
        Gm = np.zeros_like(G)
        Gm[:m, :m] = G[:m, :m]
        _, vec = sla.eigh(Gm, G, subset_by_index=[k - 1, k - 1])
        tasks.append((m, vec[:, 0]))
    for r in streams(rng_seed, restarts):
        tasks.append((int(r.integers(1, k)), r.standard_normal(k)))
    results = pmap(lambda t: _maximize_prefix(M, t[0], p, w, t[1]), tasks)
    per = np.ones(k)
    best, arg = 1.0, (k, np.ones(k))
    for (m, _), (val, b) in zip(tasks, results):
        per[m - 1] = max(per[m - 1], val)
        if val > best:
            best, arg = val, (m, b)
    return BasisConstantEstimate(float(best), arg[0], arg[1], per, False)


def basis_constant(S: SpanBasis, p: float | None = None, restarts: int = 16, rng_seed: int = 0) -> float:
    """Exact for p = 2; a certified lower bound (attained ratio) otherwise."""
    p = S.p if p is None else p
    return basis_constant_matrix(S.matrix, p, restarts=restarts, rng_seed=rng_seed).value


def merge_identical_rows(M: np.ndarray, w: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Collapse equal rows of M, adding their weights.

    Every weighted p-norm of M @ b is unchanged, so distances and basis
    constants can be computed on the (usually far smaller) merged matrix.
    """
    keep = np.any(M != 0, axis=1)
    M, w = M[keep], w[keep]
    if M.shape[0] == 0:
        return M, w
    rows, inv = np.unique(M, axis=0, return_inverse=True)
    return rows, np.bincount(inv.ravel(), weights=w, minlength=rows.shape[0])
