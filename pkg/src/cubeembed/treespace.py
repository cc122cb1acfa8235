"""Binary trees Tree(N): metric, measure, medians, level-set sets, path stability, replicas.

Vertices are 0/1 strings; the root is ``""`` and a vertex's level is its length.
Tree level ``l`` corresponds to the path point ``l + 1`` when a set of levels is
read as a subset of [N].
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from itertools import product

import numpy as np

from .cube_core import as_fraction
from .embedding import EmbeddingMap, distortion
from .pathspace import CantorTrace, PathSubset, cantor_build
from .spaces import PathSpace, TreeSpace, common_prefix_len


@dataclass(frozen=True)
class TreeVertex:
    word: str

    def __post_init__(self):
        if set(self.word) - {"0", "1"}:
            raise ValueError(f"not a binary word: {self.word!r}")

    @property
    def level(self) -> int:
        return len(self.word)

    def child(self, b: int) -> "TreeVertex":
        return TreeVertex(self.word + str(b))

    def __str__(self) -> str:
        return self.word or "."


def _w(v) -> str:
    return v.word if isinstance(v, TreeVertex) else v


def lca(a, b) -> str:
    a, b = _w(a), _w(b)
    return a[: common_prefix_len(a, b)]


def tree_distance(a, b) -> int:
    a, b = _w(a), _w(b)
    return len(a) + len(b) - 2 * common_prefix_len(a, b)


def tripod_median(a, b, c) -> str:
    """Deepest of the three pairwise LCAs; lies on all three geodesics."""
    a, b, c = _w(a), _w(b), _w(c)
    m = max((lca(a, b), lca(a, c), lca(b, c)), key=len)
    for x, y in ((a, b), (a, c), (b, c)):
        assert tree_distance(x, y) == tree_distance(x, m) + tree_distance(m, y)
    return m


def geodesic(a, b) -> list[str]:
    """Vertices from ``a`` up to lca(a, b) and down to ``b``."""
    a, b = _w(a), _w(b)
    top = common_prefix_len(a, b)
    up = [a[:i] for i in range(len(a), top - 1, -1)]
    down = [b[:i] for i in range(top + 1, len(b) + 1)]
    return up + down


def distance_to_geodesic(v, a, b) -> Fraction:
    """min over w on the a-b geodesic of d(v, w); half the Gromov excess."""
    return Fraction(tree_distance(v, a) + tree_distance(v, b) - tree_distance(a, b), 2)


# ---------------------------------------------------------------- subsets


class TreeSubset:
    """Subset of Tree(n): an explicit vertex set, or every vertex on a set of levels."""

    def __init__(self, n: int, members=None, levels=None):
        if (members is None) == (levels is None):
            raise ValueError("give exactly one of members/levels")
        self.n = n
        if members is not None:
            ms = frozenset(_w(v) for v in members)
            if any(len(w) >= n or set(w) - {"0", "1"} for w in ms):
                raise ValueError(f"vertex outside Tree({n})")
            self.members, self.levels = ms, None
        else:
            ls = frozenset(int(l) for l in levels)
            if any(not 0 <= l < n for l in ls):
                raise ValueError(f"level outside 0..{n - 1}")
            self.members, self.levels = None, ls

    @property
    def is_level_set(self) -> bool:
        return self.levels is not None

    def __contains__(self, v) -> bool:
        w = _w(v)
        if self.levels is not None:
            return len(w) in self.levels and len(w) < self.n
        return w in self.members

    def measure(self) -> Fraction:
        if self.levels is not None:
            return Fraction(len(self.levels), self.n)
        return sum((Fraction(1, 1 << len(w)) for w in self.members), Fraction(0)) / self.n

    def vertices(self, limit: int = 1 << 20) -> list[str]:
        """Explicit vertex list ordered by level then lexicographically."""
        if self.levels is None:
            return sorted(self.members, key=lambda w: (len(w), w))
        total = sum(1 << l for l in self.levels)
        if total > limit:
            raise ValueError(f"level set has {total} vertices (limit {limit})")
        return ["".join(bits) for l in sorted(self.levels) for bits in product("01", repeat=l)]

    def level_path(self) -> PathSubset:
        """Occupied levels as a subset of [n] (level l -> point l + 1)."""
        ls = self.levels if self.levels is not None else {len(w) for w in self.members}
        return PathSubset(self.n, tuple(sorted(l + 1 for l in ls)))


def tree_level_set(n: int, k: int) -> tuple[TreeSubset, CantorTrace]:
    """All vertices whose level l has l + 1 in the path Cantor set for (n, k)."""
    D_path, trace = cantor_build(n, k)
    return level_set_from_path(D_path), trace


def level_set_from_path(D_path: PathSubset) -> TreeSubset:
    return TreeSubset(D_path.n, levels=[v - 1 for v in D_path.members])


# ---------------------------------------------------------------- geodesic stability


LEMMA_DISTORTION = Fraction(1001, 1000)
CLOSENESS = Fraction(1, 100)
TIGHT_CLOSENESS = Fraction(5, 10000)


@dataclass
class ClosenessReport:
    r: Fraction
    distortion: Fraction
    closeness: list[Fraction]
    median_gaps: list[int]
    closeness_ok: bool
    median_ok: bool
    tight_median_ok: bool
    chain_ok: bool
    level_monotone_halves: bool

    @property
    def passes(self) -> bool:
        return self.closeness_ok and self.median_ok


class DistortionPrecondition(ValueError):
    pass


def geodesic_closeness_check(f: EmbeddingMap, r=None, max_distortion=LEMMA_DISTORTION) -> ClosenessReport:
    """Check that a low-distortion path [k] -> Tree(N) hugs the geodesic f(1) -> f(k).

    ``r`` is the rescaling: r|i-j| <= d(f(i), f(j)) <= max_distortion * r |i-j|.
    If omitted, the smallest ratio d/|i-j| is used.
    """
    if not isinstance(f.source, PathSpace) or not isinstance(f.target, TreeSpace):
        raise TypeError("expected a map from a path into a tree")
    k = f.source.n
    pts = [f.as_dict()[i] for i in range(1, k + 1)]
    T = as_fraction(max_distortion)
    ratios = [Fraction(tree_distance(pts[i], pts[j]), j - i) for i in range(k) for j in range(i + 1, k)]
    if r is None:
        r = min(ratios)
    r = as_fraction(r)
    if min(ratios) < r or max(ratios) > T * r:
        raise DistortionPrecondition(f"map is not within [r, {T} r] for r = {r}")
    d = distortion(f).distortion
    a, b = pts[0], pts[-1]
    close = [distance_to_geodesic(p, a, b) for p in pts]
    g = [a] + [tripod_median(pts[i - 1], pts[i], pts[i + 1]) for i in range(1, k - 1)] + [b]
    gaps = [tree_distance(pts[i], g[i]) for i in range(1, k - 1)]
    chain_ok = all(
        tree_distance(g[i], g[i + 2]) == tree_distance(g[i], g[i + 1]) + tree_distance(g[i + 1], g[i + 2])
        for i in range(k - 2)
    )
    # level profile along the geodesic: up to the lca, then down
    top = len(lca(a, b))
    lv = [len(x) for x in g]
    turn = min(range(k), key=lambda i: (lv[i], i))
    halves = all(x >= y for x, y in zip(lv[:turn], lv[1 : turn + 1])) and all(
        x <= y for x, y in zip(lv[turn:], lv[turn + 1 :])
    )
    return ClosenessReport(
        r=r,
        distortion=d,
        closeness=close,
        median_gaps=gaps,
        closeness_ok=all(c <= CLOSENESS * r for c in close),
        median_ok=all(x <= CLOSENESS * r for x in gaps),
        tight_median_ok=all(x <= TIGHT_CLOSENESS * r for x in gaps),
        chain_ok=chain_ok,
        level_monotone_halves=halves and lv[turn] >= top,
    )


def level_sequence(f: EmbeddingMap) -> list[int]:
    """Path points l(f(i)) + 1 for i = 1..k."""
    return [len(f.as_dict()[i]) + 1 for i in range(1, f.source.n + 1)]


# ---------------------------------------------------------------- replicas


@dataclass
class ReplicaReport:
    valid: bool
    violations: list[str] = field(default_factory=list)


def replica_verify(f: EmbeddingMap) -> ReplicaReport:
    """Level consistency plus immediate branching: f(w0) below f(w)0 and f(w1) below f(w)1."""
    if not isinstance(f.source, TreeSpace) or not isinstance(f.target, TreeSpace):
        raise TypeError("expected a map between trees")
    fm = f.as_dict()
    out: list[str] = []
    by_level: dict[int, set[int]] = {}
    for w, img in fm.items():
        by_level.setdefault(len(w), set()).add(len(img))
    for l, imgs in sorted(by_level.items()):
        if len(imgs) > 1:
            out.append(f"level {l} maps to levels {sorted(imgs)}")
    for w, img in fm.items():
        if len(w) + 1 >= f.source.n:
            continue
        for c in "01":
            child = fm[w + c]
            if not child.startswith(img + c):
                out.append(f"f({w + c or '.'}) = {child or '.'} is not below f({w or '.'}){c}")
    return ReplicaReport(not out, out)


def tree_distance_matrix(pts: list[str]) -> np.ndarray:
    return TreeSpace(max((len(p) for p in pts), default=0) + 1).distance_matrix(pts)
