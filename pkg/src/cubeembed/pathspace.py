"""Path spaces [N]: porosity search, Cantor-type adversarial sets, exact low-distortion search."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterator

import numpy as np

from .config import DEFAULT_CAPS
from .cube_core import as_fraction
from .embedding import EmbeddingMap, distortion
from .rng import bernoulli_mask, derive_key
from .spaces import PathSpace


@dataclass(frozen=True)
class PathSubset:
    n: int
    members: tuple[int, ...]

    def __post_init__(self):
        m = tuple(int(v) for v in self.members)
        if any(b <= a for a, b in zip(m, m[1:])):
            raise ValueError("members must be strictly increasing")
        if m and (m[0] < 1 or m[-1] > self.n):
            raise ValueError(f"members must lie in [1, {self.n}]")
        object.__setattr__(self, "members", m)

    @classmethod
    def full(cls, n: int) -> "PathSubset":
        return cls(n, tuple(range(1, n + 1)))

    def measure(self) -> Fraction:
        return Fraction(len(self.members), self.n)

    def __len__(self) -> int:
        return len(self.members)

    def __contains__(self, v) -> bool:
        return v in set(self.members)

    @classmethod
    def random(cls, n: int, p, seed: int) -> "PathSubset":
        """Bernoulli(p) subset of [n] from the same hash stream as cube sets."""
        mask = bernoulli_mask(derive_key(seed, n, 0x9A), 1, n + 1, as_fraction(p))
        return cls(n, tuple(int(v) for v in np.flatnonzero(mask) + 1))

    def within(self, lo: int, hi: int) -> list[int]:
        a = np.searchsorted(self.members, lo, side="left")
        b = np.searchsorted(self.members, hi, side="right")
        return list(self.members[a:b])


# ---------------------------------------------------------------- Cantor construction


@dataclass(frozen=True)
class CantorNode:
    level: int
    lo: int
    hi: int
    removed: tuple[int, int] | None  # removed middle [a, b], None for a leaf
    slack: Fraction  # max(0, diameter - (2/3)^level n)

    @property
    def length(self) -> int:
        return self.hi - self.lo + 1

    def children(self) -> tuple[tuple[int, int], tuple[int, int]] | None:
        if self.removed is None:
            return None
        return (self.lo, self.removed[0] - 1), (self.removed[1] + 1, self.hi)


@dataclass
class CantorTrace:
    n: int
    k: int
    levels: list[list[tuple[int, int]]] = field(default_factory=list)
    nodes: list[CantorNode] = field(default_factory=list)
    level_ratios: list[Fraction] = field(default_factory=list)

    @property
    def depth(self) -> int:
        return len(self.levels) - 1

    def density(self) -> Fraction:
        out = Fraction(1)
        for r in self.level_ratios:
            out *= r
        return out

    def nominal_density(self) -> float:
        """(1 - 4/k)^M with M the number of levels actually built."""
        return (1 - 4 / self.k) ** self.depth

    def max_slack(self) -> Fraction:
        return max((nd.slack for nd in self.nodes), default=Fraction(0))

    def parents(self) -> list[CantorNode]:
        return [nd for nd in self.nodes if nd.removed is not None]

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "k": self.k,
            "levels": [[list(iv) for iv in lvl] for lvl in self.levels],
            "removed": [
                {"level": nd.level, "parent": [nd.lo, nd.hi], "removed": list(nd.removed)}
                for nd in self.nodes
                if nd.removed is not None
            ],
            "level_ratios": [f"{r.numerator}/{r.denominator}" for r in self.level_ratios],
            "density": f"{self.density().numerator}/{self.density().denominator}",
            "max_slack": str(self.max_slack()),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def _split(lo: int, hi: int, k: int) -> tuple[int, int] | None:
    L = hi - lo + 1
    m = (4 * L) // k
    a = (L - m) // 2
    if m == 0 or a == 0:
        return None
    return lo + a, lo + a + m - 1


def cantor_build(n: int, k: int) -> tuple[PathSubset, CantorTrace]:
    """Repeatedly delete the middle floor(4L/k) points of every interval.

    An interval stops splitting once the middle would be empty or a side
    would vanish; it is then carried unchanged to the final set.
    """
    if k < 5:
        raise ValueError("need k >= 5 so that 4/k < 1")
    if n < 1:
        raise ValueError("n must be positive")
    trace = CantorTrace(n, k)
    current = [(1, n)]
    trace.levels.append(list(current))
    level = 0
    scale = Fraction(1)
    while True:
        splits = [_split(lo, hi, k) for lo, hi in current]
        for (lo, hi), mid in zip(current, splits):
            trace.nodes.append(CantorNode(level, lo, hi, mid, max(Fraction(0), (hi - lo) - scale * n)))
        if all(mid is None for mid in splits):
            break
        nxt = []
        for (lo, hi), mid in zip(current, splits):
            nxt.extend([(lo, hi)] if mid is None else [(lo, mid[0] - 1), (mid[1] + 1, hi)])
        before = sum(hi - lo + 1 for lo, hi in current)
        after = sum(hi - lo + 1 for lo, hi in nxt)
        trace.level_ratios.append(Fraction(after, before))
        current = nxt
        level += 1
        scale *= Fraction(2, 3)
        trace.levels.append(list(current))
    members = tuple(v for lo, hi in current for v in range(lo, hi + 1))
    return PathSubset(n, members), trace


# ---------------------------------------------------------------- exact low-distortion search


@dataclass
class SearchOutcome:
    status: str  # found | none | inconclusive
    images: tuple | None = None
    nodes: int = 0
    distortion: Fraction | None = None


def _exact_ratio_ok(dist: np.ndarray, idx: tuple[int, ...], T: Fraction) -> tuple[bool, Fraction]:
    hi = lo = None
    k = len(idx)
    for i in range(k):
        for j in range(i + 1, k):
            r = Fraction(int(dist[idx[i], idx[j]]), j - i)
            hi = r if hi is None or r > hi else hi
            lo = r if lo is None or r < lo else lo
    if lo == 0:
        return False, Fraction(0)
    d = hi / lo
    return d <= T, d


def iter_low_distortion_paths(
    dist: np.ndarray, k: int, max_distortion, cap: int | None = None, counter: list | None = None
) -> Iterator[tuple[int, ...]]:
    """All injective maps [k] -> targets (as index tuples) with distortion <= ``max_distortion``.

    ``dist`` is the target distance matrix. Branch and bound over f(1), f(2), ...:
    the ratio |f(i)-f(j)|/|i-j| extremes only widen as points are added, so a
    partial map whose max/min ratio exceeds the bound is cut. Float pruning
    uses a small slack; every emitted map is confirmed exactly.
    """
    T = as_fraction(max_distortion)
    Tf = float(T) * (1 + 1e-9)
    cap = DEFAULT_CAPS.enumeration_cap if cap is None else cap
    counter = [0] if counter is None else counter
    m = dist.shape[0]
    distf = dist.astype(np.float64)
    if k == 1:
        for v in range(m):
            yield (v,)
        return

    def rec(assigned: list[int], cur_max: float, cur_min: float):
        t = len(assigned)
        if t == k:
            if _exact_ratio_ok(dist, tuple(assigned), T)[0]:
                yield tuple(assigned)
            return
        if t == 0:
            for v in range(m):
                counter[0] += 1
                if counter[0] > cap:
                    raise _CapHit()
                yield from rec([v], 0.0, math.inf)
            return
        a = np.asarray(assigned)
        ratios = distf[a] / (t - np.arange(t))[:, None]
        mx = np.maximum(ratios.max(axis=0), cur_max)
        mn = np.minimum(ratios.min(axis=0), cur_min)
        ok = (mn > 0) & (mx <= Tf * mn)
        for v in np.flatnonzero(ok):
            counter[0] += 1
            if counter[0] > cap:
                raise _CapHit()
            yield from rec(assigned + [int(v)], float(mx[v]), float(mn[v]))

    yield from rec([], 0.0, math.inf)


class _CapHit(Exception):
    pass


def search_paths(dist: np.ndarray, k: int, max_distortion, cap: int | None = None) -> SearchOutcome:
    counter = [0]
    try:
        for idx in iter_low_distortion_paths(dist, k, max_distortion, cap, counter):
            _, d = _exact_ratio_ok(dist, idx, as_fraction(max_distortion))
            return SearchOutcome("found", idx, counter[0], d)
    except _CapHit:
        return SearchOutcome("inconclusive", None, counter[0])
    return SearchOutcome("none", None, counter[0])


def all_paths(dist: np.ndarray, k: int, max_distortion, cap: int | None = None) -> list[tuple[int, ...]] | None:
    """Every qualifying map, or None if the node cap was hit."""
    try:
        return list(iter_low_distortion_paths(dist, k, max_distortion, cap))
    except _CapHit:
        return None


def path_distortion_search(D: PathSubset, k: int, max_distortion, cap: int | None = None):
    """First map [k] -> D (in DFS order) with distortion <= ``max_distortion``.

    Returns ``(status, EmbeddingMap | None, nodes)``.
    """
    pts = np.asarray(D.members, dtype=np.int64)
    if k > len(pts):
        return "none", None, 0
    dist = np.abs(pts[:, None] - pts[None, :])
    out = search_paths(dist, k, max_distortion, cap)
    if out.status != "found":
        return out.status, None, out.nodes
    f = EmbeddingMap(PathSpace(k), PathSpace(D.n), tuple(int(pts[i]) for i in out.images))
    if k >= 2:
        assert distortion(f).distortion <= as_fraction(max_distortion)
    return "found", f, out.nodes


# ---------------------------------------------------------------- porosity


@dataclass(frozen=True)
class GapNode:
    lo: int
    hi: int
    empty_index: int  # 1-based i with I_i disjoint from D
    empty_interval: tuple[int, int]


@dataclass(frozen=True)
class LeafNode:
    lo: int
    hi: int
    reason: str  # short | sparse | rounding


@dataclass
class PorosityResult:
    embedding: EmbeddingMap | None
    gaps: list[GapNode] = field(default_factory=list)
    leaves: list[LeafNode] = field(default_factory=list)
    distortion: Fraction | None = None
    interval: tuple[int, int] | None = None

    @property
    def success(self) -> bool:
        return self.embedding is not None


def target_intervals(lo: int, hi: int, k: int, eps) -> list[tuple[int, int]]:
    """I_i = [p_i - rho, p_i + rho], p_i = lo + floor(i L/(3k) + L/3), rho = floor(eps L / (18k))."""
    eps = as_fraction(eps)
    L = hi - lo + 1
    rho = math.floor(eps * L / (18 * k))
    out = []
    for i in range(1, k + 1):
        p = lo + math.floor(Fraction(i * L, 3 * k) + Fraction(L, 3))
        out.append((p - rho, p + rho))
    return out


def porosity_embed(D: PathSubset, k: int, eps) -> PorosityResult:
    """Descend through empty target intervals until every I_i meets D.

    On success the smallest element of each I_i & D is chosen and the map
    is verified at distortion <= 1 + eps. Without success, ``gaps`` holds
    every empty interval found (a porosity certificate) and ``leaves`` the
    intervals where the descent stopped.
    """
    eps = as_fraction(eps)
    if k < 2 or not 0 < eps <= 1:
        raise ValueError("need k >= 2 and 0 < eps <= 1")
    res = PorosityResult(None)
    stack = [(1, D.n)]
    while stack:
        lo, hi = stack.pop()
        if hi - lo + 1 < 3 * k:
            res.leaves.append(LeafNode(lo, hi, "short"))
            continue
        if len(D.within(lo, hi)) < k:
            res.leaves.append(LeafNode(lo, hi, "sparse"))
            continue
        ivs = target_intervals(lo, hi, k, eps)
        hits = [D.within(a, b) for a, b in ivs]
        empty = next((i for i, h in enumerate(hits) if not h), None)
        if empty is None:
            f = EmbeddingMap(PathSpace(k), PathSpace(D.n), tuple(h[0] for h in hits))
            d = distortion(f).distortion
            if d <= 1 + eps:
                res.embedding, res.distortion, res.interval = f, d, (lo, hi)
                return res
            res.leaves.append(LeafNode(lo, hi, "rounding"))
            continue
        a, b = ivs[empty]
        res.gaps.append(GapNode(lo, hi, empty + 1, (a, b)))
        # left side is explored first
        stack.append((b + 1, hi))
        stack.append((lo, a - 1))
    return res


def verify_gaps(D: PathSubset, res: PorosityResult) -> bool:
    """Re-check that every certified interval is disjoint from D."""
    return all(not D.within(g.empty_interval[0], g.empty_interval[1]) for g in res.gaps)
