import json
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cubeembed.cli import run
from cubeembed.cube_core import CubeSubset, random_subset
from cubeembed.embedding import EmbeddingMap
from cubeembed.formats import (
    FormatError,
    dense_hex,
    read_emb,
    read_pset,
    read_qset,
    read_tset,
    write_emb,
    write_pset,
    write_qset,
    write_tset,
)
from cubeembed.pathspace import PathSubset
from cubeembed.spaces import CubeSpace, TreeSpace
from cubeembed.treespace import TreeSubset


def test_dense_hex_bit_order():
    # encodings 0 and 5 of Q_3: bits 0 and 5 -> digits "1" then "2"
    assert dense_hex(np.array([1, 0, 0, 0, 0, 1, 0, 0], dtype=bool)) == "12"
    assert dense_hex(np.array([0, 1], dtype=bool)) == "2"


@given(st.integers(0, 9), st.integers(0, 10**6), st.booleans())
@settings(max_examples=40)
def test_qset_round_trip(n, seed, dense):
    dense = dense or n == 0
    D = random_subset(n, Fraction(1, 2), seed)
    text = write_qset(D, ["a comment"], "dense" if dense else "sparse")
    assert read_qset(text) == D


def test_qset_sparse_point_syntax():
    D = CubeSubset.from_points(3, [1], dense=False)
    assert write_qset(D).splitlines()[-1] == "100"


def test_qset_rejects_garbage():
    with pytest.raises(FormatError):
        read_qset("QSET v1\nN=3\nrepr=dense\nzz\n")
    with pytest.raises(FormatError):
        read_qset("QSET v1\nN=1\nrepr=dense\n4\n")


def test_pset_tset_emb_round_trips():
    P = PathSubset(10, (1, 4, 9))
    assert read_pset(write_pset(P)).members == P.members
    T = TreeSubset(4, members=["", "01", "1"])
    assert read_tset(write_tset(T)).members == T.members
    L = TreeSubset(6, levels=[0, 3])
    assert read_tset(write_tset(L)).levels == L.levels
    assert read_tset(write_tset(L, explicit=True)).members == frozenset(L.vertices())
    f = EmbeddingMap(CubeSpace(2), CubeSpace(4), (0, 3, 12, 15))
    g = read_emb(write_emb(f))
    assert g.images == f.images and g.domain == f.domain
    t = EmbeddingMap(TreeSpace(2), TreeSpace(3), ("", "00", "11"))
    assert read_emb(write_emb(t)).images == t.images


def _run(argv, capsys):
    code = run(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_tails_example(capsys):
    code, out, _ = _run(["tails", "--n", "4", "--eps", "1/2"], capsys)
    assert code == 0 and "5/16" in out and "0.606530659713" in out
    assert out.startswith("# cubeembed")


def test_usage_errors(capsys):
    assert _run(["nonsense"], capsys)[0] == 3
    assert _run(["gen-random", "--n", "4", "--p", "1/2"], capsys)[0] == 3  # no seed
    assert _run(["verify-embedding", "--emb", "/does/not/exist"], capsys)[0] == 3


def test_identity_verification(tmp_path, capsys):
    f = EmbeddingMap(CubeSpace(3), CubeSpace(3), tuple(range(8)))
    p = tmp_path / "id.emb"
    p.write_text(write_emb(f))
    code, out, _ = _run(["verify-embedding", "--emb", str(p)], capsys)
    assert code == 0 and "\n1/1," in out


def test_cantor_then_oracle(tmp_path, capsys):
    pset = tmp_path / "c.pset"
    assert _run(["gen-cantor", "--n", "243", "--k", "8", "--out", str(pset)], capsys)[0] == 0
    assert _run(["path-oracle", "--set", str(pset), "--k", "8", "--max-distortion", "2"], capsys)[0] == 1


def test_find_copy_and_certify_exit_codes(tmp_path, capsys):
    empty = tmp_path / "e.qset"
    empty.write_text(write_qset(CubeSubset.empty(4)))
    assert _run(["find-copy", "--set", str(empty), "--k", "2", "--r-max", "2"], capsys)[0] == 1
    code, out, _ = _run(["certify", "--set", str(empty), "--k", "2", "--r-max", "2"], capsys)
    assert code == 1 and '"status": "certified"' in out
    full = tmp_path / "f.qset"
    full.write_text(write_qset(CubeSubset.full(10)))
    code, *_ = _run(["certify", "--set", str(full), "--k", "3", "--r-max", "3", "--enumeration-cap", "3"], capsys)
    assert code == 2


def test_rerun_reproduces_bytes(tmp_path, capsys):
    a, b = tmp_path / "a.qset", tmp_path / "b.qset"
    argv = ["gen-random", "--n", "14", "--p", "2/5", "--seed", "9", "--workers", "4", "--out", str(a)]
    assert _run(argv, capsys)[0] == 0
    assert _run(["rerun", str(a), "--out", str(b), "--workers", "1"], capsys)[0] == 0
    assert a.read_bytes() == b.read_bytes()


def test_tree_check_modes(tmp_path, capsys):
    m = tmp_path / "p.map"
    m.write_text("1 -> 0000\n2 -> 00\n3 -> .\n4 -> 11\n5 -> 1111\n")
    code, out, _ = _run(["tree-check", "--map", str(m), "--N", "6"], capsys)
    assert code == 0 and json.loads(out.split("\n", 2)[2])["passes"]
    src = TreeSpace(3)
    e = tmp_path / "t.emb"
    e.write_text(write_emb(EmbeddingMap(src, TreeSpace(6), tuple("".join(c * 2 for c in w) for w in src.points()))))
    assert _run(["tree-check", "--emb", str(e)], capsys)[0] == 0


def test_chain_and_enflo(capsys):
    assert _run(["chain", "--gamma", "1e-4", "--N", "100000000"], capsys)[0] == 0
    assert _run(["chain", "--gamma", "0.5", "--N", "100"], capsys)[0] == 1
    code, out, _ = _run(["enflo", "--k", "6", "--format", "json"], capsys)
    rows = json.loads(out.split("\n", 2)[2])
    assert code == 0 and rows[0]["diagonal_sum"] == rows[0]["edge_sum"] == 6 * 32
