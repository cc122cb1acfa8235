"""Embedding maps, exact distortion, undistorted copies of cubes and block copies."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations
from typing import Iterable, Iterator, Sequence

import numpy as np

from .config import DEFAULT_CAPS, CapExceeded
from .cube_core import CubeSubset, as_fraction, popcount, shell_distances, shell_size, weight_array
from .spaces import CubeSpace


class NotInjectiveError(ValueError):
    pass


@dataclass(frozen=True)
class EmbeddingMap:
    """Map from ``domain`` (points of ``source``) to ``images`` (points of ``target``)."""

    source: object
    target: object
    images: tuple
    domain: tuple = None

    def __post_init__(self):
        if self.domain is None:
            object.__setattr__(self, "domain", tuple(self.source.points()))
        if len(self.domain) != len(self.images):
            raise ValueError("domain and images have different lengths")

    @classmethod
    def from_dict(cls, source, target, mapping: dict) -> "EmbeddingMap":
        dom = tuple(source.points())
        return cls(source, target, tuple(mapping[p] for p in dom), dom)

    def as_dict(self) -> dict:
        return dict(zip(self.domain, self.images))

    def __call__(self, p):
        return self.as_dict()[p]

    def is_injective(self) -> bool:
        return len(set(self.images)) == len(self.images)


@dataclass(frozen=True)
class DistortionReport:
    expansion: Fraction
    contraction: Fraction
    distortion: Fraction
    expansion_pair: tuple
    contraction_pair: tuple


def _pair_arrays(f: EmbeddingMap):
    m = len(f.domain)
    if m < 2:
        raise ValueError("distortion needs at least two source points")
    ds = f.source.distance_matrix(list(f.domain))
    dt = f.target.distance_matrix(list(f.images))
    iu = np.triu_indices(m, 1)
    return iu, ds[iu], dt[iu]


def distortion(f: EmbeddingMap) -> DistortionReport:
    """Exact bi-Lipschitz distortion (max expansion times max contraction)."""
    iu, s, t = _pair_arrays(f)
    zero = np.flatnonzero(t == 0)
    if zero.size:
        i, j = iu[0][zero[0]], iu[1][zero[0]]
        raise NotInjectiveError(f"points {f.domain[i]!r} and {f.domain[j]!r} share an image")
    best_exp = best_con = None
    exp_idx = con_idx = None
    for sv in np.unique(s):
        sel = np.flatnonzero(s == sv)
        hi = sel[np.argmax(t[sel])]
        lo = sel[np.argmin(t[sel])]
        e = Fraction(int(t[hi]), int(sv))
        c = Fraction(int(sv), int(t[lo]))
        if best_exp is None or e > best_exp or (e == best_exp and hi < exp_idx):
            best_exp, exp_idx = e, hi
        if best_con is None or c > best_con or (c == best_con and lo < con_idx):
            best_con, con_idx = c, lo

    def pair(k):
        return (f.domain[iu[0][k]], f.domain[iu[1][k]])

    return DistortionReport(best_exp, best_con, best_exp * best_con, pair(exp_idx), pair(con_idx))


# ---------------------------------------------------------------- undistorted copies


def block_mask(block: Iterable[int]) -> int:
    m = 0
    for c in block:
        m |= 1 << (c - 1)
    return m


def mask_block(mask: int) -> tuple[int, ...]:
    return tuple(i + 1 for i in range(mask.bit_length()) if (mask >> i) & 1)


@dataclass(frozen=True)
class UndistortedForm:
    """``alpha -> b XOR sum_{alpha_i = 1} 1_{I_i}`` with disjoint blocks of size ``r``."""

    N: int
    b: int
    blocks: tuple[tuple[int, ...], ...]
    r: int

    def __post_init__(self):
        seen = set()
        for blk in self.blocks:
            if len(blk) != self.r:
                raise ValueError("all blocks must have size r")
            if seen & set(blk):
                raise ValueError("blocks must be pairwise disjoint")
            if any(not 1 <= c <= self.N for c in blk):
                raise ValueError("block coordinate out of range")
            seen |= set(blk)

    @property
    def k(self) -> int:
        return len(self.blocks)

    def images(self) -> tuple[int, ...]:
        masks = [block_mask(b) for b in self.blocks]
        out = []
        for alpha in range(1 << self.k):
            v = self.b
            for i, m in enumerate(masks):
                if (alpha >> i) & 1:
                    v ^= m
            out.append(v)
        return tuple(out)

    def as_map(self) -> EmbeddingMap:
        return EmbeddingMap(CubeSpace(self.k), CubeSpace(self.N), self.images())

    def image_key(self) -> tuple[int, ...]:
        """Key for unlabeled deduplication: the sorted image set."""
        return tuple(sorted(self.images()))


@dataclass(frozen=True)
class NotUndistorted:
    pair: tuple[int, int]
    source_distance: int
    target_distance: int
    r: int


def canonical_form(f: EmbeddingMap) -> UndistortedForm | NotUndistorted:
    """Recover (b, I_1..I_k, r) for a rescaled isometry ``Q_k -> Q_N``, or a violating pair."""
    k, N = f.source.n, f.target.n
    img = [int(v) for v in f.images]
    if list(f.domain) != list(range(1 << k)):
        img = [int(f(a)) for a in range(1 << k)]
    b = img[0]
    r = popcount(img[1] ^ b) if k >= 1 else 0
    if k >= 1 and r == 0:
        return NotUndistorted((0, 1), 1, 0, 0)
    src = np.arange(1 << k, dtype=np.uint64)
    tgt = np.asarray(img, dtype=np.uint64)
    ds = np.bitwise_count(src[:, None] ^ src[None, :]).astype(np.int64)
    dt = np.bitwise_count(tgt[:, None] ^ tgt[None, :]).astype(np.int64)
    bad = np.argwhere(np.triu(dt != r * ds, 1))
    if bad.size:
        i, j = (int(v) for v in bad[0])
        return NotUndistorted((i, j), int(ds[i, j]), int(dt[i, j]), r)
    blocks = tuple(mask_block(img[1 << i] ^ b) for i in range(k))
    return UndistortedForm(N, b, blocks, r)


def count_undistorted(k: int, N: int, r: int) -> int:
    """Number of vertex-labeled forms (b, I_1..I_k) with |I_i| = r."""
    if r * k > N:
        return 0
    return (1 << N) * math.factorial(N) // (math.factorial(r) ** k * math.factorial(N - r * k))


def _ordered_blocks(k: int, coords: tuple[int, ...], r: int) -> Iterator[tuple[tuple[int, ...], ...]]:
    if k == 0:
        yield ()
        return
    for first in combinations(coords, r):
        rest = tuple(c for c in coords if c not in first)
        for tail in _ordered_blocks(k - 1, rest, r):
            yield (first,) + tail


def generate_undistorted(
    k: int,
    N: int,
    r: int,
    filter: CubeSubset | None = None,
    cap: int | None = None,
    force: bool = False,
) -> Iterator[UndistortedForm]:
    """All vertex-labeled rescaled-isometric copies of ``Q_k`` in ``Q_N`` with factor ``r``.

    Order: ``b`` by encoding, then block tuples lexicographically. With ``filter``
    only copies whose whole image lies in the set are emitted.
    """
    if r < 1:
        raise ValueError("rescaling r must be >= 1")
    if r * k > N:
        raise ValueError(f"r*k = {r * k} exceeds N = {N}")
    cap = DEFAULT_CAPS.enumeration_cap if cap is None else cap
    predicted = count_undistorted(k, N, r)
    if predicted > cap and not force:
        raise CapExceeded("generate_undistorted", predicted, cap)
    block_list = list(_ordered_blocks(k, tuple(range(1, N + 1)), r))
    for b in range(1 << N):
        if filter is not None and b not in filter:
            continue
        for blocks in block_list:
            form = UndistortedForm(N, b, blocks, r)
            if filter is None or all(v in filter for v in form.images()):
                yield form


def unique_images(forms: Iterable[UndistortedForm]) -> Iterator[UndistortedForm]:
    """Drop forms whose (unlabeled) image set was already emitted."""
    seen = set()
    for f in forms:
        key = f.image_key()
        if key not in seen:
            seen.add(key)
            yield f


@dataclass
class SearchStats:
    nodes: int = 0
    forms_checked: int = 0
    found: int = 0


def _r_values(r_range) -> list[int]:
    if isinstance(r_range, int):
        rs = [r_range]
    elif isinstance(r_range, range):
        rs = list(r_range)
    else:
        lo, hi = r_range
        rs = list(range(int(lo), int(hi) + 1))
    if not rs or min(rs) < 1:
        raise ValueError("r_range must be a nonempty range of integers >= 1")
    return rs


def iter_copies(
    D: CubeSubset,
    k: int,
    r_range,
    cap: int | None = None,
    stats: SearchStats | None = None,
) -> Iterator[UndistortedForm]:
    """Depth-first enumeration of forms with image inside ``D``.

    Yields in the same order as filtering ``generate_undistorted`` per ``r``
    (``r`` ascending outermost), but only walks blocks whose corners stay in ``D``.
    """
    N = D.n
    rs = _r_values(r_range)
    cap = DEFAULT_CAPS.enumeration_cap if cap is None else cap
    stats = SearchStats() if stats is None else stats
    pts = D.point_list()
    member = D.dense() if D.is_dense else None
    pset = None if member is not None else set(pts)

    def inside(v: int) -> bool:
        return bool(member[v]) if member is not None else v in pset

    for r in rs:
        if r * k > N:
            continue
        if member is not None:
            masks = np.fromiter(
                (block_mask(c) for c in combinations(range(1, N + 1), r)), dtype=np.int64, count=math.comb(N, r)
            )
        for b in pts:
            if member is not None:
                cand = [int(m) for m in masks[member[b ^ masks]]]
            else:
                cand = sorted((b ^ y for y in pts if popcount(b ^ y) == r), key=mask_block)
            stats.nodes += 1 + len(cand)
            if stats.nodes > cap:
                raise CapExceeded("copy search", stats.nodes, cap)
            yield from _extend(b, [b], [], 0, cand, k, r, N, inside, stats, cap)


def _extend(b, corners, chosen, used, cand, k, r, N, inside, stats, cap):
    if len(chosen) == k:
        stats.forms_checked += 1
        stats.found += 1
        yield UndistortedForm(N, b, tuple(mask_block(m) for m in chosen), r)
        return
    for u in cand:
        if u & used:
            continue
        stats.nodes += 1
        if stats.nodes > cap:
            raise CapExceeded("copy search", stats.nodes, cap)
        new = [c ^ u for c in corners]
        if all(inside(v) for v in new):
            yield from _extend(b, corners + new, chosen + [u], used | u, cand, k, r, N, inside, stats, cap)
        else:
            stats.forms_checked += 1


def find_copy_brute(
    D: CubeSubset,
    k: int,
    r_range,
    cap: int | None = None,
    stats: SearchStats | None = None,
) -> UndistortedForm | None:
    """First undistorted copy of ``Q_k`` inside ``D`` with rescaling in ``r_range``, else None."""
    if k * min(_r_values(r_range)) > D.n:
        raise ValueError("k * min(r_range) exceeds the dimension")
    return next(iter_copies(D, k, r_range, cap, stats), None)


# ---------------------------------------------------------------- block copies


@dataclass(frozen=True)
class BlockCopySpec:
    """Pairs (x0^i, x1^i) in Q_n; concatenation X(alpha) puts block i on coords (i-1)n+1..in."""

    k: int
    n: int
    pairs: tuple[tuple[int, int], ...]
    eps1: Fraction = Fraction(0)

    def __post_init__(self):
        if len(self.pairs) != self.k:
            raise ValueError("need exactly k pairs")
        dists = [popcount(a ^ b) for a, b in self.pairs]
        if self.eps1 > 0:
            allowed = set(shell_distances(self.n, self.eps1))
            if any(d not in allowed for d in dists):
                raise ValueError(f"block distances {dists} outside the open shell")
        elif len(set(dists)) > 1:
            raise ValueError("equitable block copy needs equal block distances")

    def block_distances(self) -> list[int]:
        return [popcount(a ^ b) for a, b in self.pairs]

    def concatenation(self, alpha: int) -> int:
        v = 0
        for i, pair in enumerate(self.pairs):
            v |= pair[(alpha >> i) & 1] << (i * self.n)
        return v

    def concatenations(self) -> list[int]:
        return [self.concatenation(a) for a in range(1 << self.k)]


def _fwht(a: np.ndarray) -> np.ndarray:
    a = a.astype(np.int64).copy()
    h = 1
    while h < a.size:
        v = a.reshape(-1, 2, h)
        x, y = v[:, 0, :].copy(), v[:, 1, :].copy()
        v[:, 0, :] = x + y
        v[:, 1, :] = x - y
        h *= 2
    return a


def pair_count_by_distance(member: np.ndarray, n: int) -> np.ndarray:
    """``out[d]`` = number of ordered pairs (x, x') in the set at distance d."""
    if n > 20:
        raise ValueError("autocorrelation counting is limited to n <= 20")
    f = _fwht(member)
    corr = _fwht(f * f) >> n
    return np.bincount(weight_array(n), weights=corr, minlength=n + 1).round().astype(np.int64)


def _count_block_tuples(member: np.ndarray, k: int, n: int, shell: list[int], budget: list[int]) -> int:
    if k == 1:
        counts = pair_count_by_distance(member, n)
        return int(sum(counts[d] for d in shell))
    M = member.reshape(-1, 1 << n)
    total = 0
    cols = [np.ascontiguousarray(M[:, y]) for y in range(1 << n)]
    for y in range(1 << n):
        if not cols[y].any():
            continue
        for yp in range(1 << n):
            if popcount(y ^ yp) not in shell:
                continue
            budget[0] -= M.shape[0]
            if budget[0] < 0:
                raise CapExceeded("block_pair_measure", -budget[0], 0)
            V = cols[y] & cols[yp]
            if V.any():
                total += _count_block_tuples(V, k - 1, n, shell, budget)
    return total


def block_pair_count(D: CubeSubset, k: int, n: int, eps1, cap: int | None = None) -> int:
    """|V^{k,n}_{eps1}(D)|: k-tuples of shell pairs with every concatenation in D."""
    if D.n != k * n:
        raise ValueError(f"D must live in Q_{k * n}, got Q_{D.n}")
    cap = DEFAULT_CAPS.enumeration_cap if cap is None else cap
    shell = shell_distances(n, eps1)
    return _count_block_tuples(np.asarray(D.dense(), dtype=bool), k, n, shell, [cap])


def block_pair_total(k: int, n: int, eps1) -> int:
    return ((1 << n) * shell_size(n, eps1)) ** k


def block_pair_measure(D: CubeSubset, k: int, n: int, eps1, cap: int | None = None) -> Fraction:
    """Fraction of shell k-tuples whose 2^k concatenations all lie in ``D``."""
    total = block_pair_total(k, n, as_fraction(eps1))
    if total == 0:
        raise ValueError("the eps1-shell is empty for this n")
    return Fraction(block_pair_count(D, k, n, eps1, cap), total)
