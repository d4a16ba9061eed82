"""Exact piecewise-constant functions on the real line.

Breakpoints are exact rationals stored as integer numerators over one common
integer denominator; values are doubles.  Every interval is half-open on the
left, (a, b], and a function is zero outside its breakpoint range.

The numerators live in an int64 array while they fit comfortably and switch to
an object array of Python ints before multiplication could overflow, so refining
by huge denominators never loses exactness.
"""

from __future__ import annotations

import bisect
import math
from collections.abc import Iterable, Iterator, Sequence
from dataclasses import dataclass
from fractions import Fraction
from functools import reduce
from itertools import count as _count
from itertools import pairwise

import numpy as np

_SAFE = 2**62


class NotPiecewiseConstantOnS(ValueError):
    """An input to the equal-distribution split is not a simple function."""


def as_fraction(x) -> Fraction:
    """Parse an int, Fraction, exact float or 'num/den' string."""
    if isinstance(x, Fraction):
        return x
    if isinstance(x, (int, np.integer)):
        return Fraction(int(x))
    if isinstance(x, str):
        return Fraction(x.strip())
    if isinstance(x, float):
        if not math.isfinite(x):
            raise ValueError(f"breakpoint must be finite, got {x!r}")
        return Fraction(x)
    raise TypeError(f"cannot read {x!r} as an exact rational")


def format_fraction(x: Fraction) -> str:
    return f"{x.numerator}/{x.denominator}"


# ---------------------------------------------------------------------------
# integer-array helpers


def _mul(nums: np.ndarray, k: int) -> np.ndarray:
    if k == 1:
        return nums
    if nums.dtype != object:
        top = int(np.abs(nums).max()) if nums.size else 0
        if top * k < _SAFE:
            return nums * np.int64(k)
        nums = nums.astype(object)
    return nums * k


def _shrink(nums: np.ndarray) -> np.ndarray:
    """Return an int64 copy when the values allow it."""
    if nums.dtype == object and nums.size:
        if max(abs(int(nums.min())), abs(int(nums.max()))) < _SAFE:
            return nums.astype(np.int64)
    elif nums.dtype == object:
        return np.zeros(0, dtype=np.int64)
    return nums


def _gcd_all(nums: np.ndarray, start: int) -> int:
    if nums.dtype == object:
        return reduce(math.gcd, (int(v) for v in nums), start)
    return math.gcd(int(np.gcd.reduce(nums)) if nums.size else 0, start)


def _lcm(a: int, b: int) -> int:
    return a // math.gcd(a, b) * b


def _same_kind(a: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    if a.dtype == b.dtype:
        return a, b
    return a.astype(object), b.astype(object)


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr.flags.writeable = False
    return arr


# ---------------------------------------------------------------------------
# PiecewiseFn


class PiecewiseFn:
    """A compactly supported step function with exact rational breakpoints."""

    __slots__ = ("den", "nums", "values")

    def __init__(self, breakpoints: Sequence = (), values: Sequence[float] = ()):
        bps = [as_fraction(b) for b in breakpoints]
        vals = np.asarray(values, dtype=float)
        if len(bps) == 0 and vals.size == 0:
            self._set(*_canonical(1, np.zeros(0, dtype=np.int64), vals))
            return
        if vals.shape != (len(bps) - 1,):
            raise ValueError("need exactly one value per interval between breakpoints")
        if any(b >= c for b, c in pairwise(bps)):
            raise ValueError("breakpoints must be strictly increasing")
        den = reduce(_lcm, (b.denominator for b in bps), 1)
        nums = np.array([b.numerator * (den // b.denominator) for b in bps], dtype=object)
        self._set(*_canonical(den, _shrink(nums), vals))

    def _set(self, den, nums, values):
        object.__setattr__(self, "den", den)
        object.__setattr__(self, "nums", _frozen(nums))
        object.__setattr__(self, "values", _frozen(values))

    def __setattr__(self, name, value):
        raise AttributeError("PiecewiseFn is immutable")

    def __reduce__(self):
        return PiecewiseFn._raw, (self.den, self.nums, self.values)

    def __copy__(self):
        return self

    def __deepcopy__(self, memo):
        return self

    @classmethod
    def _raw(cls, den: int, nums: np.ndarray, values: np.ndarray) -> PiecewiseFn:
        out = cls.__new__(cls)
        out._set(*_canonical(int(den), nums, np.asarray(values, dtype=float)))
        return out

    @classmethod
    def zero(cls) -> PiecewiseFn:
        return cls()

    @classmethod
    def from_pieces(cls, den: int, lefts, rights, values) -> PiecewiseFn:
        """Assemble from non-overlapping pieces (l/den, r/den] carrying values.

        Gaps between pieces are filled with zero.
        """
        lefts = np.asarray(lefts)
        rights = np.asarray(rights)
        values = np.asarray(values, dtype=float)
        if lefts.size == 0:
            return cls()
        lefts, rights = _same_kind(lefts, rights)
        if np.any(rights <= lefts):
            raise ValueError("every piece needs positive length")
        order = np.argsort(lefts, kind="stable")
        lefts, rights, values = lefts[order], rights[order], values[order]
        if np.any(lefts[1:] < rights[:-1]):
            raise ValueError("pieces overlap")
        gap = np.flatnonzero(lefts[1:] > rights[:-1])
        if gap.size:
            lefts = np.concatenate((lefts, rights[gap]))
            values = np.concatenate((values, np.zeros(gap.size)))
            order = np.argsort(lefts, kind="stable")
            lefts, values = lefts[order], values[order]
        nums = np.concatenate((lefts, rights[-1:]))
        return cls._raw(den, nums, values)

    # -- views --------------------------------------------------------------

    @property
    def breakpoints(self) -> list[Fraction]:
        return [Fraction(int(n), self.den) for n in self.nums]

    def intervals(self) -> Iterator[tuple[Fraction, Fraction, float]]:
        bps = self.breakpoints
        for a, b, v in zip(bps, bps[1:], self.values):
            yield a, b, float(v)

    def is_zero(self) -> bool:
        return self.values.size == 0

    def is_nonnegative(self) -> bool:
        return bool(np.all(self.values >= 0.0))

    def support(self) -> IntervalSet:
        return IntervalSet._from_fn(self)

    def max_abs(self) -> float:
        return float(np.abs(self.values).max()) if self.values.size else 0.0

    def __call__(self, t) -> float:
        t = as_fraction(t)
        if self.is_zero():
            return 0.0
        k = Fraction(int(self.nums[0]), self.den)
        if t <= k:
            return 0.0
        i = bisect.bisect_left([int(n) for n in self.nums], t * self.den) - 1
        if i >= self.values.size:
            return 0.0
        return float(self.values[i])

    # -- arithmetic ---------------------------------------------------------

    def __eq__(self, other) -> bool:
        if not isinstance(other, PiecewiseFn):
            return NotImplemented
        return (
            self.den == other.den
            and self.nums.shape == other.nums.shape
            and bool(np.all(self.nums == other.nums))
            and bool(np.array_equal(self.values, other.values))
        )

    __hash__ = None

    def __add__(self, other: PiecewiseFn) -> PiecewiseFn:
        if not isinstance(other, PiecewiseFn):
            return NotImplemented
        grid = Grid.of([self, other])
        return grid.function(grid.values(self) + grid.values(other))

    def __sub__(self, other: PiecewiseFn) -> PiecewiseFn:
        if not isinstance(other, PiecewiseFn):
            return NotImplemented
        grid = Grid.of([self, other])
        return grid.function(grid.values(self) - grid.values(other))

    def __neg__(self) -> PiecewiseFn:
        return PiecewiseFn._raw(self.den, self.nums, -self.values)

    def __mul__(self, s) -> PiecewiseFn:
        if isinstance(s, PiecewiseFn):
            grid = Grid.of([self, s])
            return grid.function(grid.values(self) * grid.values(s))
        return PiecewiseFn._raw(self.den, self.nums, self.values * float(s))

    __rmul__ = __mul__

    def __abs__(self) -> PiecewiseFn:
        return PiecewiseFn._raw(self.den, self.nums, np.abs(self.values))

    def __repr__(self) -> str:
        if self.is_zero():
            return "PiecewiseFn(0)"
        parts = [f"({a},{b}]:{v:g}" for a, b, v in self.intervals()]
        if len(parts) > 6:
            parts = parts[:3] + ["..."] + parts[-2:]
        return "PiecewiseFn(" + ", ".join(parts) + ")"

    # -- serialization ------------------------------------------------------

    def to_json(self) -> list:
        if self.is_zero():
            return []
        bps = _format_points(self.nums, self.den)
        return [[bps[i], bps[i + 1], float(v)] for i, v in enumerate(self.values.tolist()) if v != 0.0]

    @classmethod
    def from_json(cls, data: Iterable) -> PiecewiseFn:
        triples = [(_parse_point(a), _parse_point(b), float(v)) for a, b, v in data]
        if not triples:
            return cls()
        den = reduce(_lcm, {d for (_, d), (_, e), _ in triples for d in (d, e)}, 1)
        lefts = _shrink(np.array([n * (den // d) for (n, d), _, _ in triples], dtype=object))
        rights = _shrink(np.array([n * (den // d) for _, (n, d), _ in triples], dtype=object))
        return cls.from_pieces(den, lefts, rights, [v for _, _, v in triples])


def _format_points(nums: np.ndarray, den: int) -> list[str]:
    """'num/den' in lowest terms for each nums[i]/den."""
    if nums.dtype != object:
        g = np.gcd(nums, np.int64(den))
        return [f"{n}/{d}" for n, d in zip((nums // g).tolist(), (den // g).tolist())]
    return [format_fraction(Fraction(int(n), den)) for n in nums]


def _parse_point(x) -> tuple[int, int]:
    if isinstance(x, str) and "/" in x:
        n, d = x.split("/")
        n, d = int(n), int(d)
        if d <= 0:
            raise ValueError(f"bad rational {x!r}")
        return n, d
    f = as_fraction(x)
    return f.numerator, f.denominator


def _canonical(den: int, nums: np.ndarray, values: np.ndarray):
    values = np.asarray(values, dtype=float) + 0.0
    empty = (1, np.zeros(0, dtype=np.int64), np.zeros(0))
    if values.size == 0:
        return empty
    if not np.all(np.isfinite(values)):
        raise ValueError("values must be finite")
    nz = np.flatnonzero(values)
    if nz.size == 0:
        return empty
    lo, hi = int(nz[0]), int(nz[-1])
    values = values[lo : hi + 1]
    nums = nums[lo : hi + 2]
    keep = np.flatnonzero(np.concatenate(([True], values[1:] != values[:-1])))
    nums = np.concatenate((nums[keep], nums[-1:]))
    values = values[keep]
    g = _gcd_all(nums, den)
    if g > 1:
        nums = nums // g
        den //= g
    return den, _shrink(nums), np.ascontiguousarray(values)


# ---------------------------------------------------------------------------
# common refinement


@dataclass(frozen=True)
class Grid:
    """Union of the breakpoints of several functions on one denominator.

    Cell i is (nums[i]/den, nums[i+1]/den].  Every function whose breakpoints
    are among the grid points is constant on each cell.
    """

    den: int
    nums: np.ndarray

    @classmethod
    def of(cls, fns: Sequence[PiecewiseFn], extra: Sequence[np.ndarray] = ()) -> Grid:
        den = reduce(_lcm, (f.den for f in fns), 1)
        arrays = [_mul(f.nums, den // f.den) for f in fns if not f.is_zero()]
        arrays += list(extra)
        if not arrays:
            return cls(den, np.zeros(0, dtype=np.int64))
        if any(a.dtype == object for a in arrays):
            arrays = [a.astype(object) for a in arrays]
        return cls(den, _shrink(np.unique(np.concatenate(arrays))))

    @property
    def cells(self) -> int:
        return max(self.nums.size - 1, 0)

    def widths(self) -> np.ndarray:
        """Exact cell widths as integers over den."""
        return np.diff(self.nums)

    def lengths(self) -> np.ndarray:
        w = self.widths()
        if w.dtype == object:
            return np.array([float(Fraction(int(x), self.den)) for x in w])
        return w.astype(float) / self.den

    def values(self, f: PiecewiseFn) -> np.ndarray:
        out = np.zeros(self.cells)
        if f.is_zero() or self.cells == 0:
            return out
        fn = _mul(f.nums, self.den // f.den)
        fn, grid = _same_kind(fn, self.nums[:-1])
        idx = np.searchsorted(fn, grid, side="right") - 1
        ok = (idx >= 0) & (idx < f.values.size)
        out[ok] = f.values[idx[ok]]
        return out

    def matrix(self, fns: Sequence[PiecewiseFn]) -> np.ndarray:
        out = np.empty((len(fns), self.cells))
        for i, f in enumerate(fns):
            out[i] = self.values(f)
        return out

    def function(self, values: np.ndarray) -> PiecewiseFn:
        if self.cells == 0:
            return PiecewiseFn()
        return PiecewiseFn._raw(self.den, self.nums, values)

    def refines(self, f: PiecewiseFn) -> bool:
        if f.is_zero():
            return True
        if self.den % f.den:
            return False
        fn = _mul(f.nums, self.den // f.den)
        fn, grid = _same_kind(fn, self.nums)
        pos = np.searchsorted(grid, fn)
        return bool(np.all(pos < grid.size) and np.all(grid[np.minimum(pos, grid.size - 1)] == fn))


def lp_norm(f: PiecewiseFn, p: float) -> float:
    if not math.isfinite(p) or p < 1:
        raise ValueError("p must be finite and at least 1")
    if f.is_zero():
        return 0.0
    w = Grid(f.den, f.nums).lengths()
    a = np.abs(f.values)
    scale = a.max()
    return float(scale * np.sum((a / scale) ** p * w) ** (1.0 / p))


def pairing(f: PiecewiseFn, g: PiecewiseFn) -> float:
    """The integral of f*g over the common refinement."""
    if f.is_zero() or g.is_zero():
        return 0.0
    grid = Grid.of([f, g])
    return float(np.sum(grid.values(f) * grid.values(g) * grid.lengths()))


CHUNK = 1 << 15


def _chunked(grid: Grid, fns: Sequence[PiecewiseFn]):
    """Yield (lengths, values matrix) over consecutive blocks of cells."""
    for s in range(0, grid.cells, CHUNK):
        sub = Grid(grid.den, grid.nums[s : min(s + CHUNK, grid.cells) + 1])
        yield sub.lengths(), sub.matrix(fns)


def cross_gram(A: Sequence[PiecewiseFn], B: Sequence[PiecewiseFn], grid: Grid | None = None) -> np.ndarray:
    """Matrix of pairings <a_i, b_j> on the common refinement, built blockwise."""
    grid = grid or Grid.of(list(A) + list(B))
    out = np.zeros((len(A), len(B)))
    for lengths, V in _chunked(grid, list(A) + list(B)):
        out += (V[: len(A)] * lengths) @ V[len(A) :].T
    return out


def gram(fns: Sequence[PiecewiseFn], grid: Grid | None = None) -> np.ndarray:
    """Matrix of pairings of all functions, computed on one refinement."""
    grid = grid or Grid.of(fns)
    out = np.zeros((len(fns), len(fns)))
    for lengths, V in _chunked(grid, fns):
        out += (V * lengths) @ V.T
    return 0.5 * (out + out.T)


def linear_combination(coeffs: Sequence[float], fns: Sequence[PiecewiseFn]) -> PiecewiseFn:
    grid = Grid.of(fns)
    acc = np.zeros(grid.cells)
    for c, f in zip(coeffs, fns):
        if c != 0.0:
            acc += float(c) * grid.values(f)
    return grid.function(acc)


def translate(f: PiecewiseFn, shift) -> PiecewiseFn:
    shift = as_fraction(shift)
    den = _lcm(f.den, shift.denominator)
    nums = _mul(f.nums, den // f.den)
    step = shift.numerator * (den // shift.denominator)
    if nums.dtype != object and abs(step) + (int(np.abs(nums).max()) if nums.size else 0) >= _SAFE:
        nums = nums.astype(object)
    return PiecewiseFn._raw(den, nums + step, f.values)


def pos_neg_parts(f: PiecewiseFn) -> tuple[PiecewiseFn, PiecewiseFn]:
    return (
        PiecewiseFn._raw(f.den, f.nums, np.maximum(f.values, 0.0)),
        PiecewiseFn._raw(f.den, f.nums, np.maximum(-f.values, 0.0)),
    )


def maximum(f: PiecewiseFn, g: PiecewiseFn) -> PiecewiseFn:
    grid = Grid.of([f, g])
    return grid.function(np.maximum(grid.values(f), grid.values(g)))


def indicator(a, b) -> PiecewiseFn:
    return PiecewiseFn([a, b], [1.0])


# ---------------------------------------------------------------------------
# IntervalSet


class IntervalSet:
    """A finite disjoint union of half-open intervals (a, b]."""

    __slots__ = ("_ind",)

    def __init__(self, intervals: Iterable[tuple] = ()):
        pairs = [(as_fraction(a), as_fraction(b)) for a, b in intervals]
        pairs = [(a, b) for a, b in pairs if b > a]
        if not pairs:
            object.__setattr__(self, "_ind", PiecewiseFn())
            return
        den = reduce(_lcm, (x.denominator for ab in pairs for x in ab), 1)
        lefts = _shrink(np.array([a.numerator * (den // a.denominator) for a, _ in pairs], dtype=object))
        rights = _shrink(np.array([b.numerator * (den // b.denominator) for _, b in pairs], dtype=object))
        object.__setattr__(self, "_ind", _cover(den, lefts, rights))

    def __setattr__(self, name, value):
        raise AttributeError("IntervalSet is immutable")

    def __reduce__(self):
        return IntervalSet._from_fn, (self._ind,)

    def __copy__(self):
        return self

    def __deepcopy__(self, memo):
        return self

    @classmethod
    def _from_fn(cls, f: PiecewiseFn) -> IntervalSet:
        out = cls.__new__(cls)
        object.__setattr__(out, "_ind", PiecewiseFn._raw(f.den, f.nums, (f.values != 0).astype(float)))
        return out

    @classmethod
    def from_arrays(cls, den: int, lefts, rights) -> IntervalSet:
        lefts, rights = _same_kind(np.asarray(lefts), np.asarray(rights))
        out = cls.__new__(cls)
        object.__setattr__(out, "_ind", _cover(int(den), lefts, rights))
        return out

    def indicator(self) -> PiecewiseFn:
        return self._ind

    def is_empty(self) -> bool:
        return self._ind.is_zero()

    def __iter__(self):
        return iter(self.intervals())

    def intervals(self) -> list[tuple[Fraction, Fraction]]:
        return [(a, b) for a, b, v in self._ind.intervals() if v != 0.0]

    def measure(self) -> Fraction:
        f = self._ind
        if f.is_zero():
            return Fraction(0)
        widths = np.diff(f.nums)
        total = sum(int(w) for w, v in zip(widths, f.values) if v != 0.0)
        return Fraction(total, f.den)

    def sup(self) -> Fraction | None:
        return None if self.is_empty() else Fraction(int(self._ind.nums[-1]), self._ind.den)

    def inf(self) -> Fraction | None:
        return None if self.is_empty() else Fraction(int(self._ind.nums[0]), self._ind.den)

    def _combine(self, other: IntervalSet, op) -> IntervalSet:
        grid = Grid.of([self._ind, other._ind])
        a = grid.values(self._ind) != 0
        b = grid.values(other._ind) != 0
        return IntervalSet._from_fn(grid.function(op(a, b).astype(float)))

    def union(self, other: IntervalSet) -> IntervalSet:
        return self._combine(other, np.logical_or)

    def intersection(self, other: IntervalSet) -> IntervalSet:
        return self._combine(other, np.logical_and)

    def difference(self, other: IntervalSet) -> IntervalSet:
        return self._combine(other, lambda a, b: a & ~b)

    __or__ = union
    __and__ = intersection
    __sub__ = difference

    def isdisjoint(self, other: IntervalSet) -> bool:
        return self.intersection(other).is_empty()

    def contains(self, other: IntervalSet) -> bool:
        return other.difference(self).is_empty()

    def __eq__(self, other) -> bool:
        if not isinstance(other, IntervalSet):
            return NotImplemented
        return self._ind == other._ind

    __hash__ = None

    def __repr__(self) -> str:
        ivs = self.intervals()
        body = ", ".join(f"({a}, {b}]" for a, b in ivs[:6])
        if len(ivs) > 6:
            body += f", ... ({len(ivs)} intervals)"
        return f"IntervalSet({body})"

    def to_json(self) -> list:
        return [[format_fraction(a), format_fraction(b)] for a, b in self.intervals()]

    @classmethod
    def from_json(cls, data: Iterable) -> IntervalSet:
        return cls([(a, b) for a, b in data])


def _cover(den: int, lefts: np.ndarray, rights: np.ndarray) -> PiecewiseFn:
    """Indicator of the union of (l, r] over all given pairs."""
    if lefts.size == 0:
        return PiecewiseFn()
    grid = np.unique(np.concatenate(_same_kind(lefts, rights)))
    starts = np.searchsorted(grid, lefts)
    stops = np.searchsorted(grid, rights)
    delta = np.zeros(grid.size, dtype=np.int64)
    np.add.at(delta, starts, 1)
    np.add.at(delta, stops, -1)
    covered = np.cumsum(delta)[:-1] > 0
    return PiecewiseFn._raw(den, _shrink(grid), covered.astype(float))


def restrict(f: PiecewiseFn, S: IntervalSet) -> PiecewiseFn:
    return f * S.indicator()


# ---------------------------------------------------------------------------
# distributions


@dataclass(frozen=True)
class Distribution:
    """Finite multiset of (value, measure) pairs, zero value excluded."""

    masses: tuple[tuple[float, Fraction], ...]

    def as_dict(self) -> dict[float, Fraction]:
        return dict(self.masses)

    def total(self) -> Fraction:
        return sum((m for _, m in self.masses), Fraction(0))

    def __len__(self) -> int:
        return len(self.masses)


def _distribution(vals: np.ndarray, widths: np.ndarray, den: int) -> Distribution:
    keep = vals != 0.0
    vals, widths = vals[keep], widths[keep]
    if vals.size == 0:
        return Distribution(())
    uniq, inv = np.unique(vals, return_inverse=True)
    if widths.dtype == object:
        acc = [0] * uniq.size
        for i, w in zip(inv, widths):
            acc[i] += int(w)
    else:
        acc64 = np.zeros(uniq.size, dtype=np.int64)
        np.add.at(acc64, inv, widths)
        acc = [int(a) for a in acc64]
    return Distribution(tuple((float(v), Fraction(a, den)) for v, a in zip(uniq, acc)))


def distribution_on(f: PiecewiseFn, S: IntervalSet) -> Distribution:
    ind = S.indicator()
    grid = Grid.of([f, ind])
    inside = grid.values(ind) != 0
    vals = grid.values(f)
    vals = np.where(inside, vals, 0.0)
    return _distribution(vals, grid.widths(), grid.den)


@dataclass(frozen=True)
class Split:
    """Constancy cells of several functions inside S, each cut into N pieces.

    Working denominator is ``den``; cell c spans (left[c], left[c] + N*width[c]]
    and its i-th piece is (left[c] + i*width[c], left[c] + (i+1)*width[c]].
    ``cell_values[k][c]`` is the value of the k-th input function on cell c.
    """

    den: int
    N: int
    left: np.ndarray
    width: np.ndarray
    cell_values: tuple[np.ndarray, ...]

    def piece(self, i: int) -> tuple[np.ndarray, np.ndarray]:
        lo = self.left + self.width * i
        return lo, lo + self.width

    def part(self, i: int) -> IntervalSet:
        lo, hi = self.piece(i)
        return IntervalSet.from_arrays(self.den, lo, hi)


def split_cells(fns: Sequence[PiecewiseFn], S: IntervalSet, N: int) -> Split:
    if not isinstance(N, (int, np.integer)) or N < 1:
        raise ValueError("N must be a positive integer")
    N = int(N)
    for f in fns:
        if not isinstance(f, PiecewiseFn):
            raise NotPiecewiseConstantOnS(f"{type(f).__name__} is not a piecewise-constant function")
    ind = S.indicator()
    grid = Grid.of(list(fns) + [ind])
    inside = np.flatnonzero(grid.values(ind) != 0)
    left = _mul(grid.nums, N)[:-1][inside]
    width = grid.widths()[inside]
    vals = tuple(grid.values(f)[inside] for f in fns)
    return Split(grid.den * N, N, left, width, vals)


def equal_distribution_split(fns: Sequence[PiecewiseFn], S: IntervalSet, N: int) -> list[IntervalSet]:
    """Partition S into N sets on which every input has the same distribution."""
    sp = split_cells(fns, S, N)
    return [sp.part(i) for i in range(sp.N)]


# ---------------------------------------------------------------------------
# Haar functions


@dataclass(frozen=True, order=True)
class HaarIndex:
    window: int
    level: int
    position: int = 0

    def __post_init__(self):
        if self.level < 0:
            raise ValueError("level must be non-negative")
        limit = 1 if self.level == 0 else 2 ** (self.level - 1)
        if not 0 <= self.position < limit:
            raise ValueError(f"position {self.position} out of range for level {self.level}")

    def to_json(self) -> list[int]:
        return [self.window, self.level, self.position]


def haar(idx: HaarIndex, p: float) -> PiecewiseFn:
    """Lp-normalized Haar function on (window, window + 1]."""
    n = idx.window
    if idx.level == 0:
        return indicator(n, n + 1)
    den = 2**idx.level
    a = n * den + 2 * idx.position
    amp = 2.0 ** ((idx.level - 1) / p)
    return PiecewiseFn._raw(den, np.array([a, a + 1, a + 2], dtype=np.int64), np.array([amp, -amp]))


def unit_haar_index(m: int) -> HaarIndex:
    """Standard flat index on (0,1]: 0 is the indicator, 2^(n-1)+j is level n, position j."""
    if m < 0:
        raise ValueError("index must be non-negative")
    if m == 0:
        return HaarIndex(0, 0, 0)
    n = m.bit_length()
    return HaarIndex(0, n, m - 2 ** (n - 1))


def spiral(rank: int) -> int:
    """0, -1, 1, -2, 2, ..."""
    return -((rank + 1) // 2) if rank % 2 else rank // 2


def iter_haar() -> Iterator[HaarIndex]:
    for diag in _count():
        for rank in range(diag + 1):
            level = diag - rank
            window = spiral(rank)
            for pos in range(1 if level == 0 else 2 ** (level - 1)):
                yield HaarIndex(window, level, pos)


def haar_enumerate(count: int) -> list[HaarIndex]:
    if count < 1:
        raise ValueError("count must be at least 1")
    it = iter_haar()
    return [next(it) for _ in range(count)]


# ---------------------------------------------------------------------------
# fresh intervals


class Registry:
    """Mutable record of every interval used so far (single writer)."""

    def __init__(self, used: IntervalSet | None = None):
        self.used = used if used is not None else IntervalSet()

    def add(self, s: IntervalSet) -> None:
        self.used = self.used.union(s)

    def __repr__(self) -> str:
        return f"Registry({self.used!r})"


def allocate_fresh_intervals(registry: Registry, count: int) -> list[IntervalSet]:
    sup = registry.used.sup()
    K = 2 if sup is None else max(2, math.ceil(sup))
    out = [IntervalSet([(K + i, K + i + 1)]) for i in range(count)]
    if count:
        registry.add(IntervalSet([(K, K + count)]))
    return out
