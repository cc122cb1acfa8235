"""Finite metric spaces used as embedding sources and targets.

Points are plain Python values: ints for cubes (encodings) and paths
(1..n), binary strings for trees (root is ``""``).
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product

import numpy as np

from .cube_core import format_point, parse_point, popcount


@dataclass(frozen=True)
class CubeSpace:
    n: int
    kind = "cube"

    def points(self) -> list[int]:
        return list(range(1 << self.n))

    def distance(self, a: int, b: int) -> int:
        return popcount(a ^ b)

    def distance_matrix(self, pts) -> np.ndarray:
        arr = np.asarray(pts, dtype=np.uint64)
        return np.bitwise_count(arr[:, None] ^ arr[None, :]).astype(np.int64)

    def format(self, p: int) -> str:
        return format_point(p, self.n)

    def parse(self, text: str) -> int:
        if len(text.strip()) != self.n:
            raise ValueError(f"expected a {self.n}-bit string, got {text!r}")
        return parse_point(text)


@dataclass(frozen=True)
class PathSpace:
    n: int
    kind = "path"

    def points(self) -> list[int]:
        return list(range(1, self.n + 1))

    def distance(self, a: int, b: int) -> int:
        return abs(a - b)

    def distance_matrix(self, pts) -> np.ndarray:
        arr = np.asarray(pts, dtype=np.int64)
        return np.abs(arr[:, None] - arr[None, :])

    def format(self, p: int) -> str:
        return str(p)

    def parse(self, text: str) -> int:
        v = int(text)
        if not 1 <= v <= self.n:
            raise ValueError(f"path point {v} outside [1, {self.n}]")
        return v


def common_prefix_len(a: str, b: str) -> int:
    m = min(len(a), len(b))
    i = 0
    while i < m and a[i] == b[i]:
        i += 1
    return i


@dataclass(frozen=True)
class TreeSpace:
    """Complete binary tree with levels 0..n-1; vertices are 0/1 strings."""

    n: int
    kind = "tree"

    def points(self) -> list[str]:
        out = []
        for level in range(self.n):
            out.extend("".join(bits) for bits in product("01", repeat=level))
        return out

    def distance(self, a: str, b: str) -> int:
        return len(a) + len(b) - 2 * common_prefix_len(a, b)

    def distance_matrix(self, pts) -> np.ndarray:
        m = len(pts)
        out = np.zeros((m, m), dtype=np.int64)
        for i in range(m):
            for j in range(i + 1, m):
                out[i, j] = out[j, i] = self.distance(pts[i], pts[j])
        return out

    def format(self, p: str) -> str:
        return p if p else "."

    def parse(self, text: str) -> str:
        text = text.strip()
        w = "" if text == "." else text
        if set(w) - {"0", "1"} or len(w) >= self.n:
            raise ValueError(f"not a vertex of Tree({self.n}): {text!r}")
        return w


def make_space(kind: str, n: int):
    try:
        return {"cube": CubeSpace, "path": PathSpace, "tree": TreeSpace}[kind](n)
    except KeyError:
        raise ValueError(f"unknown space kind {kind!r}") from None
