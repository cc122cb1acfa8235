"""Hamming-cube ground types: points, subsets with exact measure, tails, sections.

Coordinate ``i`` (1-based) of a point is bit ``i-1`` of its integer encoding,
so the encoding ``sum_i bits_i * 2**(i-1)`` is a bijection onto ``0..2**n-1``.
Measures are exact ``Fraction`` objects with a power-of-two denominator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from numbers import Rational
from typing import Iterable, Sequence

import numpy as np

from .config import DEFAULT_CAPS, RepresentationTooLarge
from .rng import bernoulli_mask, derive_key, hash_words


def as_fraction(x) -> Fraction:
    """Exact rational from int/Fraction/``"p/q"`` string; floats go through ``str``."""
    if isinstance(x, Fraction):
        return x
    if isinstance(x, (int, Rational)):
        return Fraction(x)
    if isinstance(x, float):
        return Fraction(str(x))
    return Fraction(str(x).strip())


def popcount(x: int) -> int:
    return int(x).bit_count()


# ---------------------------------------------------------------- points


@dataclass(frozen=True)
class CubePoint:
    n: int
    value: int

    def __post_init__(self):
        if self.n < 0:
            raise ValueError("dimension must be nonnegative")
        if not 0 <= self.value < (1 << self.n) and not (self.n == 0 and self.value == 0):
            raise ValueError(f"encoding {self.value} out of range for n={self.n}")

    @classmethod
    def from_bits(cls, bits: Sequence[int]) -> "CubePoint":
        value = 0
        for i, b in enumerate(bits):
            if b not in (0, 1):
                raise ValueError("bits must be 0/1")
            value |= int(b) << i
        return cls(len(bits), value)

    @classmethod
    def parse(cls, text: str) -> "CubePoint":
        """Parse a binary string with coordinate 1 leftmost."""
        return cls.from_bits([int(c) for c in text.strip()])

    @property
    def bits(self) -> tuple[int, ...]:
        return tuple((self.value >> i) & 1 for i in range(self.n))

    @property
    def weight(self) -> int:
        return popcount(self.value)

    def __str__(self) -> str:
        return "".join(str(b) for b in self.bits)


def format_point(value: int, n: int) -> str:
    return "".join("1" if (value >> i) & 1 else "0" for i in range(n))


def parse_point(text: str) -> int:
    return CubePoint.parse(text).value


def hamming_distance(a: CubePoint, b: CubePoint) -> int:
    if a.n != b.n:
        raise ValueError(f"dimension mismatch: {a.n} != {b.n}")
    return popcount(a.value ^ b.value)


@lru_cache(maxsize=32)
def weight_array(n: int) -> np.ndarray:
    """Hamming weight of every encoding in ``Q_n`` (read-only)."""
    w = np.bitwise_count(np.arange(1 << n, dtype=np.uint64)).astype(np.int16)
    w.setflags(write=False)
    return w


# ---------------------------------------------------------------- subsets


class CubeSubset:
    """Subset of ``Q_n`` in dense (bool array) or sparse (sorted encodings) form.

    Immutable once built. ``measure()`` is exact.
    """

    __slots__ = ("n", "_dense", "_sparse", "card")

    def __init__(self, n: int, dense: np.ndarray | None = None, sparse: Sequence[int] | None = None):
        if (dense is None) == (sparse is None):
            raise ValueError("give exactly one of dense/sparse")
        self.n = n
        if dense is not None:
            arr = np.asarray(dense, dtype=bool)
            if arr.shape != (1 << n,):
                raise ValueError(f"dense array must have length 2^{n}")
            if arr.flags.writeable:
                arr = arr.copy()
                arr.setflags(write=False)
            self._dense = arr
            self._sparse = None
            self.card = int(np.count_nonzero(arr))
        else:
            pts = tuple(int(p) for p in sparse)
            if any(b <= a for a, b in zip(pts, pts[1:])):
                raise ValueError("sparse list must be strictly increasing")
            if pts and (pts[0] < 0 or pts[-1] >= (1 << n)):
                raise ValueError("sparse encoding out of range")
            self._dense = None
            self._sparse = pts
            self.card = len(pts)

    # construction helpers
    @classmethod
    def from_points(cls, n: int, points: Iterable[int], dense: bool | None = None) -> "CubeSubset":
        pts = sorted(set(int(p) for p in points))
        if dense is None:
            dense = n <= 16
        if dense:
            arr = np.zeros(1 << n, dtype=bool)
            if pts:
                arr[np.asarray(pts, dtype=np.int64)] = True
            return cls(n, dense=arr)
        return cls(n, sparse=pts)

    @classmethod
    def full(cls, n: int) -> "CubeSubset":
        return cls(n, dense=np.ones(1 << n, dtype=bool))

    @classmethod
    def empty(cls, n: int) -> "CubeSubset":
        return cls(n, dense=np.zeros(1 << n, dtype=bool))

    @property
    def is_dense(self) -> bool:
        return self._dense is not None

    def dense(self, dense_limit: int | None = None) -> np.ndarray:
        """Read-only membership array; converts sparse sets when ``n`` allows."""
        if self._dense is not None:
            return self._dense
        limit = DEFAULT_CAPS.dense_limit if dense_limit is None else dense_limit
        if self.n > limit:
            raise RepresentationTooLarge(f"representation too large: n={self.n} > dense limit {limit}")
        arr = np.zeros(1 << self.n, dtype=bool)
        if self._sparse:
            arr[np.asarray(self._sparse, dtype=np.int64)] = True
        arr.setflags(write=False)
        return arr

    def points(self) -> np.ndarray | tuple[int, ...]:
        """Sorted encodings (numpy array when dense, tuple of ints when sparse)."""
        if self._dense is not None:
            return np.flatnonzero(self._dense)
        return self._sparse

    def point_list(self) -> list[int]:
        return [int(p) for p in self.points()]

    def to_sparse(self) -> "CubeSubset":
        return self if self._sparse is not None else CubeSubset(self.n, sparse=self.point_list())

    def to_dense(self, dense_limit: int | None = None) -> "CubeSubset":
        return self if self._dense is not None else CubeSubset(self.n, dense=self.dense(dense_limit))

    def __contains__(self, x) -> bool:
        v = x.value if isinstance(x, CubePoint) else int(x)
        if self._dense is not None:
            return 0 <= v < (1 << self.n) and bool(self._dense[v])
        i = _bisect(self._sparse, v)
        return i < len(self._sparse) and self._sparse[i] == v

    def __len__(self) -> int:
        return self.card

    def __eq__(self, other) -> bool:
        if not isinstance(other, CubeSubset):
            return NotImplemented
        if self.n != other.n or self.card != other.card:
            return False
        if self.is_dense and other.is_dense:
            return bool(np.array_equal(self._dense, other._dense))
        return self.point_list() == other.point_list()

    __hash__ = None

    def measure(self) -> Fraction:
        return Fraction(self.card, 1 << self.n)

    def measure_at_least(self, delta) -> bool:
        return self.measure() >= as_fraction(delta)

    def measure_greater(self, delta) -> bool:
        return self.measure() > as_fraction(delta)

    def __and__(self, other: "CubeSubset") -> "CubeSubset":
        _same_dim(self, other)
        if self.is_dense or other.is_dense:
            return CubeSubset(self.n, dense=self.dense() & other.dense())
        return CubeSubset(self.n, sparse=sorted(set(self._sparse) & set(other._sparse)))

    def __or__(self, other: "CubeSubset") -> "CubeSubset":
        _same_dim(self, other)
        if self.is_dense or other.is_dense:
            return CubeSubset(self.n, dense=self.dense() | other.dense())
        return CubeSubset(self.n, sparse=sorted(set(self._sparse) | set(other._sparse)))

    def complement(self) -> "CubeSubset":
        return CubeSubset(self.n, dense=~self.dense())

    def __repr__(self) -> str:
        kind = "dense" if self.is_dense else "sparse"
        return f"CubeSubset(n={self.n}, {kind}, card={self.card})"


def _bisect(seq: Sequence[int], v: int) -> int:
    lo, hi = 0, len(seq)
    while lo < hi:
        mid = (lo + hi) // 2
        if seq[mid] < v:
            lo = mid + 1
        else:
            hi = mid
    return lo


def _same_dim(a: CubeSubset, b: CubeSubset) -> None:
    if a.n != b.n:
        raise ValueError(f"dimension mismatch: {a.n} != {b.n}")


def random_subset(n: int, p, seed: int) -> CubeSubset:
    """Bernoulli(p) subset of ``Q_n`` from the counter-based hash stream."""
    key = derive_key(seed, n, 0xB3)
    return CubeSubset(n, dense=bernoulli_mask(key, 0, 1 << n, as_fraction(p)))


def random_subset_of_size(n: int, card: int, seed: int) -> CubeSubset:
    """Uniform random subset with exactly ``card`` points (smallest hash words win)."""
    if not 0 <= card <= (1 << n):
        raise ValueError("card out of range")
    words = hash_words(derive_key(seed, n, 0x51), 0, 1 << n)
    arr = np.zeros(1 << n, dtype=bool)
    if card:
        chosen = np.argpartition(words, card - 1)[:card] if card < (1 << n) else np.arange(1 << n)
        arr[chosen] = True
    return CubeSubset(n, dense=arr)


# ---------------------------------------------------------------- tails


@dataclass(frozen=True)
class TailTable:
    n: int
    cumulative: tuple[int, ...]

    def upto(self, t) -> int:
        """Number of points of weight <= t."""
        j = math.floor(as_fraction(t))
        if j < 0:
            return 0
        return self.cumulative[min(j, self.n)]


@lru_cache(maxsize=256)
def tail_table(n: int) -> TailTable:
    acc, out = 0, []
    for j in range(n + 1):
        acc += math.comb(n, j)
        out.append(acc)
    return TailTable(n, tuple(out))


def _check_unit(eps: Fraction, name: str = "eps") -> None:
    if not 0 <= eps <= 1:
        raise ValueError(f"{name} must lie in [0, 1], got {eps}")


def tail_size(eps, n: int) -> Fraction:
    """Measure of the points of weight <= (1-eps) n / 2 (closed tail)."""
    eps = as_fraction(eps)
    _check_unit(eps)
    return Fraction(tail_table(n).upto((1 - eps) * Fraction(n, 2)), 1 << n)


def upper_tail_size(eps, n: int) -> Fraction:
    """Measure of the points of weight >= (1+eps) n / 2."""
    eps = as_fraction(eps)
    _check_unit(eps)
    t = (1 + eps) * Fraction(n, 2)
    below = tail_table(n).upto(math.ceil(t) - 1)
    return Fraction((1 << n) - below, 1 << n)


def hoeffding_bound(eps, n: int) -> float:
    e = float(as_fraction(eps))
    return math.exp(-e * e * n / 2)


def rational_le_float(q: Fraction, x: float) -> bool:
    """``q <= x`` with ``x`` rounded one ulp upward first."""
    return q <= Fraction(math.nextafter(x, math.inf))


def shell_distances(n: int, eps1) -> list[int]:
    """Distances d with (1-eps1) n/2 < d < (1+eps1) n/2 (strict both sides)."""
    eps1 = as_fraction(eps1)
    _check_unit(eps1, "eps1")
    lo, hi = (1 - eps1) * Fraction(n, 2), (1 + eps1) * Fraction(n, 2)
    return [d for d in range(n + 1) if lo < d < hi]


def shell_size(n: int, eps1) -> int:
    return sum(math.comb(n, d) for d in shell_distances(n, eps1))


def central_shell(x: CubePoint, eps1, dense_limit: int | None = None) -> CubeSubset:
    """Points whose distance to ``x`` is strictly inside ((1-eps1) n/2, (1+eps1) n/2)."""
    n = x.n
    limit = DEFAULT_CAPS.dense_limit if dense_limit is None else dense_limit
    if n > limit:
        raise RepresentationTooLarge(f"representation too large: n={n} > dense limit {limit}")
    allowed = np.zeros(n + 1, dtype=bool)
    allowed[shell_distances(n, eps1)] = True
    w = weight_array(n)
    idx = np.arange(1 << n, dtype=np.int64) ^ x.value
    return CubeSubset(n, dense=allowed[w[idx]])


# ---------------------------------------------------------------- neighborhoods, sections


def _expand_once(cur: np.ndarray, n: int) -> np.ndarray:
    new = cur.copy()
    for i in range(n):
        new |= cur.reshape(-1, 2, 1 << i)[:, ::-1, :].reshape(-1)
    return new


def neighborhood_radius(D: CubeSubset, radius: int, dense_limit: int | None = None) -> CubeSubset:
    """All points within Hamming distance ``radius`` of ``D`` (BFS over the cube graph)."""
    cur = np.array(D.dense(dense_limit), dtype=bool)
    for _ in range(max(0, radius)):
        if cur.all() or not cur.any():
            break
        nxt = _expand_once(cur, D.n)
        if np.array_equal(nxt, cur):
            break
        cur = nxt
    return CubeSubset(D.n, dense=cur)


def epsilon_neighborhood(D: CubeSubset, eps, dense_limit: int | None = None) -> CubeSubset:
    """``{x : exists x' in D, |x - x'| <= eps * n}``."""
    eps = as_fraction(eps)
    _check_unit(eps)
    return neighborhood_radius(D, math.floor(eps * D.n), dense_limit)


def section_matrix(D: CubeSubset, n: int) -> np.ndarray:
    """View of ``D`` as a (2^(D.n-n), 2^n) array indexed [rest, leading block]."""
    if not 0 <= n <= D.n:
        raise ValueError(f"cannot split Q_{D.n} with a leading block of size {n}")
    return D.dense().reshape(1 << (D.n - n), 1 << n)


def section(D: CubeSubset, x: CubePoint) -> CubeSubset:
    """``{y : (x, y) in D}`` with ``x`` on the leading (lowest) coordinates."""
    N = D.n - x.n
    if N < 0:
        raise ValueError(f"dimension mismatch: section point has n={x.n} > {D.n}")
    if D.is_dense:
        return CubeSubset(N, dense=section_matrix(D, x.n)[:, x.value])
    mask = (1 << x.n) - 1
    return CubeSubset(N, sparse=[p >> x.n for p in D.point_list() if p & mask == x.value])
