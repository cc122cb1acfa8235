from fractions import Fraction
from itertools import product

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cubeembed.config import CapExceeded
from cubeembed.cube_core import CubeSubset, random_subset
from cubeembed.embedding import (
    BlockCopySpec,
    EmbeddingMap,
    NotInjectiveError,
    NotUndistorted,
    UndistortedForm,
    block_pair_count,
    canonical_form,
    count_undistorted,
    distortion,
    find_copy_brute,
    generate_undistorted,
    iter_copies,
    pair_count_by_distance,
    unique_images,
)
from cubeembed.spaces import CubeSpace, PathSpace


def test_identity_has_distortion_one():
    f = EmbeddingMap(CubeSpace(3), CubeSpace(3), tuple(range(8)))
    assert distortion(f).distortion == 1


def test_path_distortion_value():
    f = EmbeddingMap(PathSpace(3), PathSpace(10), (1, 2, 5))
    rep = distortion(f)
    assert rep.expansion == 3 and rep.contraction == 1 and rep.distortion == 3


def test_non_injective_rejected():
    f = EmbeddingMap(PathSpace(3), PathSpace(10), (1, 1, 5))
    with pytest.raises(NotInjectiveError):
        distortion(f)


def test_counts_match_formula():
    assert len(list(generate_undistorted(1, 3, 2))) == 24 == count_undistorted(1, 3, 2)
    assert len(list(generate_undistorted(2, 4, 1))) == count_undistorted(2, 4, 1)
    assert count_undistorted(2, 2, 1) == 8


def test_generator_rejects_bad_parameters():
    with pytest.raises(ValueError):
        list(generate_undistorted(2, 3, 2))
    with pytest.raises(ValueError):
        list(generate_undistorted(1, 3, 0))
    with pytest.raises(CapExceeded):
        list(generate_undistorted(2, 10, 2, cap=100))


@given(st.integers(1, 3), st.integers(0, 10**6))
@settings(max_examples=30)
def test_canonical_form_round_trip(k, seed):
    rng = np.random.default_rng(seed)
    r = int(rng.integers(1, 3))
    N = k * r + int(rng.integers(0, 3))
    perm = rng.permutation(np.arange(1, N + 1))
    blocks = tuple(tuple(sorted(int(c) for c in perm[i * r:(i + 1) * r])) for i in range(k))
    form = UndistortedForm(N, int(rng.integers(0, 1 << N)), blocks, r)
    assert canonical_form(form.as_map()) == form
    assert distortion(form.as_map()).distortion == 1


def test_canonical_form_reports_violation():
    f = EmbeddingMap(CubeSpace(2), CubeSpace(4), (0, 1, 2, 15))
    assert isinstance(canonical_form(f), NotUndistorted)


def test_unique_images_collapses_relabelings():
    forms = list(generate_undistorted(2, 3, 1))
    # each unlabeled square is hit by 8 labelings (4 base points, 2 block orders)
    assert len(list(unique_images(forms))) * 8 == len(forms)


@given(st.integers(0, 10**6))
@settings(max_examples=25)
def test_dfs_agrees_with_filtered_generator(seed):
    D = random_subset(6, Fraction(3, 5), seed)
    for r in (1, 2):
        want = list(generate_undistorted(2, 6, r, filter=D))
        assert list(iter_copies(D, 2, r)) == want
        assert list(iter_copies(D.to_sparse(), 2, r)) == want


def test_find_copy_full_and_empty():
    full = CubeSubset.full(4)
    assert find_copy_brute(full, 2, (1, 2)).r == 1
    assert find_copy_brute(CubeSubset.empty(4), 2, (1, 2)) is None
    with pytest.raises(ValueError):
        find_copy_brute(full, 3, (2, 2))


def test_find_copy_cap():
    with pytest.raises(CapExceeded):
        find_copy_brute(CubeSubset.full(8), 4, (2, 2), cap=5)


@given(st.integers(1, 7), st.integers(0, 10**6))
@settings(max_examples=30)
def test_pair_counts_by_distance(n, seed):
    member = np.asarray(random_subset(n, Fraction(1, 2), seed).dense())
    pts = np.flatnonzero(member)
    brute = np.zeros(n + 1, dtype=np.int64)
    for a, b in product(pts, pts):
        brute[bin(int(a) ^ int(b)).count("1")] += 1
    assert np.array_equal(pair_count_by_distance(member, n), brute)


def test_block_pair_count_full_cube():
    # every ordered pair in the open shell of each block works
    n, k = 4, 2
    D = CubeSubset.full(n * k)
    from cubeembed.embedding import block_pair_total

    assert block_pair_count(D, k, n, Fraction(1, 2)) == block_pair_total(k, n, Fraction(1, 2))


def test_block_copy_spec_concatenation():
    spec = BlockCopySpec(2, 3, ((0b000, 0b011), (0b001, 0b111)), Fraction(1, 2))
    assert spec.block_distances() == [2, 2]
    assert spec.concatenation(0) == 0b001_000
    assert spec.concatenation(3) == 0b111_011
    with pytest.raises(ValueError):
        BlockCopySpec(1, 3, ((0, 0b111),), Fraction(1, 2))
