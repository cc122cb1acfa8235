"""Text formats: QSET, PSET, TSET and EMB (all version 1).

Every reader skips lines starting with ``#``; writers use them for the
reproducibility header (see ``cli``).
"""

from __future__ import annotations

import numpy as np

from .cube_core import CubeSubset, format_point, parse_point
from .embedding import EmbeddingMap
from .pathspace import PathSubset
from .spaces import make_space
from .treespace import TreeSubset

_HEX = np.array(list("0123456789abcdef"))


class FormatError(ValueError):
    pass


def _content_lines(text: str) -> list[str]:
    return [ln.strip() for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]


def _expect(lines: list[str], i: int, prefix: str) -> str:
    if i >= len(lines) or not lines[i].startswith(prefix):
        got = lines[i] if i < len(lines) else "<eof>"
        raise FormatError(f"expected {prefix!r} on content line {i + 1}, got {got!r}")
    return lines[i][len(prefix):]


def header_lines(comments: list[str] | None) -> str:
    return "".join(f"# {c}\n" for c in comments or [])


# ---------------------------------------------------------------- QSET


def dense_hex(member: np.ndarray) -> str:
    """Bit i of the set is bit (i mod 4) of hex digit i // 4."""
    nbits = len(member)
    padded = np.zeros(max(4, -(-nbits // 8) * 8), dtype=bool)
    padded[:nbits] = member
    by = np.packbits(padded, bitorder="little")
    digits = np.empty(2 * len(by), dtype=np.uint8)
    digits[0::2], digits[1::2] = by & 0xF, by >> 4
    return "".join(_HEX[digits[: max(1, -(-nbits // 4))]])


def parse_dense_hex(text: str, n: int) -> np.ndarray:
    nbits = 1 << n
    want = max(1, -(-nbits // 4))
    if len(text) != want:
        raise FormatError(f"dense payload should have {want} hex digits, got {len(text)}")
    try:
        digits = np.frombuffer(bytes.fromhex("".join(f"0{c}" for c in text)), dtype=np.uint8)
    except ValueError as e:
        raise FormatError(f"bad hex payload: {e}") from None
    bits = ((digits[:, None] >> np.arange(4)) & 1).astype(bool).ravel()
    if bits[nbits:].any():
        raise FormatError("padding bits beyond 2^N are set")
    return bits[:nbits]


def write_qset(D: CubeSubset, comments: list[str] | None = None, repr: str | None = None) -> str:
    repr = repr or ("dense" if D.is_dense else "sparse")
    out = header_lines(comments) + f"QSET v1\nN={D.n}\nrepr={repr}\n"
    if repr == "dense":
        return out + dense_hex(D.dense()) + "\n"
    if D.n == 0:
        raise FormatError("sparse QSET cannot express the point of Q_0; use repr=dense")
    return out + "".join(format_point(p, D.n) + "\n" for p in D.point_list())


def read_qset(text: str) -> CubeSubset:
    lines = _content_lines(text)
    if not lines or lines[0] != "QSET v1":
        raise FormatError("missing 'QSET v1' magic line")
    n = int(_expect(lines, 1, "N="))
    rep = _expect(lines, 2, "repr=")
    if rep == "dense":
        if len(lines) != 4:
            raise FormatError("dense QSET needs exactly one payload line")
        return CubeSubset(n, dense=parse_dense_hex(lines[3], n))
    if rep != "sparse":
        raise FormatError(f"unknown repr {rep!r}")
    pts = []
    for ln in lines[3:]:
        if len(ln) != n or set(ln) - {"0", "1"}:
            raise FormatError(f"bad point {ln!r} for N={n}")
        pts.append(parse_point(ln))
    return CubeSubset.from_points(n, pts, dense=False)


# ---------------------------------------------------------------- PSET


def write_pset(D: PathSubset, comments: list[str] | None = None) -> str:
    return header_lines(comments) + f"PSET v1\nN={D.n}\n" + "".join(f"{v}\n" for v in D.members)


def read_pset(text: str) -> PathSubset:
    lines = _content_lines(text)
    if not lines or lines[0] != "PSET v1":
        raise FormatError("missing 'PSET v1' magic line")
    n = int(_expect(lines, 1, "N="))
    return PathSubset(n, tuple(sorted(int(x) for x in lines[2:])))


# ---------------------------------------------------------------- TSET


def write_tset(D: TreeSubset, comments: list[str] | None = None, explicit: bool = False) -> str:
    """Level sets are written symbolically as ``levels=...`` unless ``explicit``."""
    out = header_lines(comments) + f"TSET v1\nN={D.n}\n"
    if D.is_level_set and not explicit:
        return out + "levels=" + ",".join(str(l) for l in sorted(D.levels)) + "\n"
    return out + "".join((w or ".") + "\n" for w in D.vertices())


def read_tset(text: str) -> TreeSubset:
    lines = _content_lines(text)
    if not lines or lines[0] != "TSET v1":
        raise FormatError("missing 'TSET v1' magic line")
    n = int(_expect(lines, 1, "N="))
    if len(lines) > 2 and lines[2].startswith("levels="):
        body = lines[2][len("levels="):]
        return TreeSubset(n, levels=[int(x) for x in body.split(",") if x])
    space = make_space("tree", n)
    return TreeSubset(n, members=[space.parse(ln) for ln in lines[2:]])


# ---------------------------------------------------------------- EMB


def write_emb(f: EmbeddingMap, comments: list[str] | None = None) -> str:
    kind = f.source.kind
    if f.target.kind != kind:
        raise FormatError("EMB v1 needs source and target of the same kind")
    out = header_lines(comments) + f"EMB v1\nspace={kind}\nk={f.source.n}\nN={f.target.n}\n"
    return out + "".join(f"{f.source.format(a)} -> {f.target.format(b)}\n" for a, b in zip(f.domain, f.images))


def read_emb(text: str) -> EmbeddingMap:
    lines = _content_lines(text)
    if not lines or lines[0] != "EMB v1":
        raise FormatError("missing 'EMB v1' magic line")
    kind = _expect(lines, 1, "space=")
    k = int(_expect(lines, 2, "k="))
    N = int(_expect(lines, 3, "N="))
    src, tgt = make_space(kind, k), make_space(kind, N)
    dom, imgs = [], []
    for ln in lines[4:]:
        a, sep, b = ln.partition("->")
        if not sep:
            raise FormatError(f"bad map line {ln!r}")
        dom.append(src.parse(a.strip()))
        imgs.append(tgt.parse(b.strip()))
    if len(set(dom)) != len(dom):
        raise FormatError("a source point appears twice")
    return EmbeddingMap(src, tgt, tuple(imgs), tuple(dom))
