from collections import deque
from fractions import Fraction

from hypothesis import given
from hypothesis import strategies as st

from cubeembed.embedding import EmbeddingMap
from cubeembed.spaces import PathSpace, TreeSpace
from cubeembed.treespace import (
    TreeSubset,
    distance_to_geodesic,
    geodesic,
    geodesic_closeness_check,
    lca,
    replica_verify,
    tree_distance,
    tree_level_set,
    tripod_median,
)

words = st.text("01", max_size=7)


def bfs_distances(n, src):
    dist = {src: 0}
    q = deque([src])
    while q:
        v = q.popleft()
        nbrs = ([v[:-1]] if v else []) + ([v + "0", v + "1"] if len(v) < n - 1 else [])
        for u in nbrs:
            if u not in dist:
                dist[u] = dist[v] + 1
                q.append(u)
    return dist


def test_distance_matches_bfs_small():
    pts = TreeSpace(6).points()
    for a in pts:
        d = bfs_distances(6, a)
        assert all(tree_distance(a, b) == d[b] for b in pts)


@given(words, words, words)
def test_median_identities(a, b, c):
    m = tripod_median(a, b, c)
    for x, y in ((a, b), (a, c), (b, c)):
        assert tree_distance(x, y) == tree_distance(x, m) + tree_distance(m, y)


@given(words, words, words)
def test_distance_to_geodesic(v, a, b):
    assert distance_to_geodesic(v, a, b) == min(tree_distance(v, w) for w in geodesic(a, b))
    assert lca(a, b) in geodesic(a, b)


def test_measure_and_level_sets():
    S, tr = tree_level_set(27, 6)
    assert S.measure() == Fraction(len(S.levels), 27)
    assert S.level_path().members == tuple(sorted(l + 1 for l in S.levels))
    explicit = TreeSubset(5, members=["", "0", "1"])
    assert explicit.measure() == Fraction(2, 5)
    assert TreeSubset(5, levels=[0, 1]).vertices() == ["", "0", "1"]


def test_closeness_on_geodesic_path():
    # points spaced by 2 along the geodesic from 0000 up to the root and down to 1111
    path = ["0000", "00", "", "11", "1111"]
    f = EmbeddingMap(PathSpace(5), TreeSpace(6), tuple(path))
    rep = geodesic_closeness_check(f)
    assert rep.r == 2 and rep.passes and rep.chain_ok and rep.tight_median_ok


def test_closeness_detects_detour():
    f = EmbeddingMap(PathSpace(3), TreeSpace(8), ("0000", "01", "0011"))
    rep = geodesic_closeness_check(f, max_distortion=10)
    assert not rep.closeness_ok


def _doubling(n):
    src = TreeSpace(n)
    return EmbeddingMap(src, TreeSpace(2 * n), tuple("".join(c * 2 for c in w) for w in src.points()))


def test_replica_verifier():
    assert replica_verify(_doubling(4)).valid
    f = _doubling(3)
    imgs = list(f.images)
    imgs[1], imgs[2] = imgs[2], imgs[1]  # swap the images of "0" and "1"
    bad = EmbeddingMap(f.source, f.target, tuple(imgs))
    rep = replica_verify(bad)
    assert not rep.valid and rep.violations
