"""Entropy and Harper arithmetic, Enflo-type sums, and the distortion lower-bound chain."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache

import numpy as np

from .cube_core import as_fraction


def entropy(p: float) -> float:
    """Binary entropy in bits, with 0 log(1/0) = 0."""
    p = float(p)
    if not 0 <= p <= 1:
        raise ValueError(f"p must lie in [0, 1], got {p}")
    out = 0.0
    for q in (p, 1 - p):
        if q > 0:
            out -= q * math.log2(q)
    return out


def entropy_inverse(y: float, tol: float = 1e-12) -> float:
    """The p in [0, 1/2] with h(p) = y, by bisection."""
    y = float(y)
    if not 0 <= y <= 1:
        raise ValueError(f"y must lie in [0, 1], got {y}")
    lo, hi = 0.0, 0.5
    while hi - lo > tol:
        mid = (lo + hi) / 2
        if entropy(mid) < y:
            lo = mid
        else:
            hi = mid
    return (lo + hi) / 2


@lru_cache(maxsize=128)
def _ball_table(N: int) -> tuple[int, ...]:
    acc, out = 0, []
    for s in range(N + 1):
        acc += math.comb(N, s)
        out.append(acc)
    return tuple(out)


def ball_size(N: int, r: int) -> int:
    """|Ball(r)| in Q_N (exact)."""
    if r < 0:
        return 0
    return _ball_table(N)[min(r, N)]


def ball_entropy_holds(N: int, p: float) -> bool:
    """sum_{s <= pN} C(N, s) <= 2^(h(p) N), compared in log2 with a 1e-12 margin."""
    total = ball_size(N, math.floor(p * N))
    return math.log2(total) <= entropy(p) * N + 1e-12


def harper_inflation(N: int, start_card: int, eps3) -> int:
    """|Ball(r + floor(eps3 N))| for the largest r with |Ball(r)| <= start_card."""
    if not 0 <= start_card <= (1 << N):
        raise ValueError("start_card must lie in [0, 2^N]")
    eps3 = as_fraction(eps3)
    table = _ball_table(N)
    r = -1
    for s, size in enumerate(table):
        if size <= start_card:
            r = s
        else:
            break
    if r < 0:
        return 0
    return ball_size(N, r + math.floor(eps3 * N))


# ---------------------------------------------------------------- Enflo sums


@dataclass(frozen=True)
class EnfloWitness:
    """Images of Q_k as real vectors (row alpha = f(alpha)), or a distance matrix."""

    k: int
    p: float
    images: np.ndarray | None = None
    distances: np.ndarray | None = None

    @classmethod
    def identity(cls, k: int, p: float = 2) -> "EnfloWitness":
        alpha = np.arange(1 << k)
        return cls(k, p, images=((alpha[:, None] >> np.arange(k)) & 1).astype(np.int64))


@dataclass
class EnfloReport:
    diagonal_sum: object
    edge_sum: object
    ratio: float
    implied_type_constant: float
    exact: bool


def _dist_p(w: EnfloWitness, a: int, b: int):
    if w.distances is not None:
        return float(w.distances[a, b]) ** w.p
    diff = w.images[a] - w.images[b]
    if w.p == 2 and np.issubdtype(w.images.dtype, np.integer):
        return int(np.dot(diff, diff))
    return float(np.linalg.norm(diff.astype(float))) ** w.p


def enflo_check(w: EnfloWitness) -> EnfloReport:
    """Diagonal sum over the 2^(k-1) unordered antipodal pairs versus the edge sum."""
    k = w.k
    full = (1 << k) - 1
    diag = sum(_dist_p(w, a, a ^ full) for a in range(1 << k) if a < a ^ full)
    edges = sum(_dist_p(w, a, a | (1 << i)) for a in range(1 << k) for i in range(k) if not (a >> i) & 1)
    exact = isinstance(diag, int) and isinstance(edges, int)
    ratio = float(Fraction(diag, edges)) if exact else diag / edges
    return EnfloReport(diag, edges, ratio, ratio ** (1 / w.p), exact)


def distortion_lower_bound(k: int, p: float, T_p: float) -> float:
    """k^(1 - 1/p) / T_p."""
    if k < 1 or p <= 1 or T_p <= 0:
        raise ValueError("need k >= 1, p > 1, T_p > 0")
    return k ** (1 - 1 / p) / T_p


def exponent_algebra(p) -> dict:
    """Compare gamma^(-(1/2)(1-1/p)) with the density exponent 2p/(p-1).

    Inverting alpha ~ gamma^(-(1/2)(1-1/p)) gives gamma ~ alpha^(-2p/(p-1)); the
    product of the two exponents must be exactly -1.
    """
    p = as_fraction(p)
    if p <= 1:
        raise ValueError("p must exceed 1")
    e_gamma = -Fraction(1, 2) * (1 - 1 / p)
    e_alpha = 2 * p / (p - 1)
    return {
        "gamma_exponent": e_gamma,
        "density_exponent": e_alpha,
        "product": e_gamma * e_alpha,
        "consistent": e_gamma * e_alpha == -1,
    }


# ---------------------------------------------------------------- density to distortion chain

# 1 - h(1/2 - b) >= (2/ln 2) b^2, so C = 0.6 gives 1 - h(1/2 - C sqrt(g)) >= 1.04 g
# as long as C sqrt(g) <= 1/2, i.e. g <= 0.694.
DEFAULT_C = 0.6
GAMMA_VALID_MAX = (0.5 / DEFAULT_C) ** 2
DRIVER_CONSTANT = 4 * 18**2 * 4  # C eps^-2 k^3 log(1/delta) at eps = delta = 1/2


def default_small_c(C: float = DEFAULT_C) -> float:
    """c with c gamma^(-3/2) = 5184 k^3 at k = 1/(36 C sqrt(gamma))."""
    return DRIVER_CONSTANT / (36 * C) ** 3


@dataclass
class ChainReport:
    gamma: float
    N: int
    p: float
    T_p: float
    C: float
    c: float
    eps3: float = 0.0
    k: int = 0
    ledger: list[dict] = field(default_factory=list)
    lower_bound: float | None = None
    vacuous: bool = True

    @property
    def ok(self) -> bool:
        return all(e["holds"] for e in self.ledger)

    def failed(self) -> list[str]:
        return [e["name"] for e in self.ledger if not e["holds"]]

    def add(self, name: str, lhs, rhs, holds: bool, note: str = "") -> None:
        self.ledger.append({"name": name, "lhs": lhs, "rhs": rhs, "holds": bool(holds), "note": note})

    def to_json(self) -> str:
        d = {k: v for k, v in self.__dict__.items() if k != "ledger"}
        d["ok"] = self.ok
        d["ledger"] = self.ledger
        return json.dumps(d, sort_keys=True, indent=2, default=str)


def density_distortion_chain(gamma: float, N: int, p: float, T_p: float, C: float = DEFAULT_C, c: float | None = None) -> ChainReport:
    """Walk the inequality chain: entropy margin, Harper inflation, block-copy size, Enflo bound."""
    c = default_small_c(C) if c is None else c
    rep = ChainReport(gamma, N, p, T_p, C, c)
    rep.add("gamma in (0,1)", gamma, "(0,1)", 0 < gamma < 1)
    if not 0 < gamma < 1:
        return rep
    rep.add("gamma in validated range for C", gamma, GAMMA_VALID_MAX, gamma <= (0.5 / C) ** 2)
    eps3 = C * math.sqrt(gamma)
    rep.eps3 = eps3
    rep.add("1/2 - eps3 > 0", 0.5 - eps3, 0, eps3 < 0.5)
    if eps3 >= 0.5:
        return rep
    h = entropy(0.5 - eps3)
    rep.add("h(1/2 - C sqrt(gamma)) < 1 - gamma", h, 1 - gamma, h < 1 - gamma)
    k = max(1, math.ceil(1 / (36 * eps3)))
    rep.k = k
    rep.add("k >= 2 (non-degenerate cube)", k, 2, k >= 2)
    rep.add("N >= c gamma^(-3/2)", N, c * gamma**-1.5, N >= c * gamma**-1.5)
    rep.add("N >= 5184 k^3 (driver size at eps = delta = 1/2)", N, DRIVER_CONSTANT * k**3, N >= DRIVER_CONSTANT * k**3)
    # Harper: |D| >= 2^((1-gamma)N) dominates Ball(r0); inflating by eps3 N must reach N/2
    pN = math.floor((0.5 - eps3) * N)
    shift = math.floor(eps3 * N)
    if N <= 4096:
        log_ball = math.log2(ball_size(N, pN))
        rep.add("2^((1-gamma)N) > |Ball((1/2-eps3)N)|", (1 - gamma) * N, log_ball, (1 - gamma) * N > log_ball)
        r0 = max(s for s in range(N + 1) if math.log2(ball_size(N, s)) <= (1 - gamma) * N)
        inflated = ball_size(N, r0 + shift)
        rep.add("mu(D_eps3) >= 1/2 via Harper", float(Fraction(inflated, 1 << N)), 0.5, 2 * inflated >= (1 << N))
    else:
        rep.add("h(1/2-eps3) N < (1-gamma) N", entropy(0.5 - eps3) * N, (1 - gamma) * N, entropy(0.5 - eps3) < 1 - gamma)
        # |Ball(r)| <= 2^(h(r/N) N), so any r with h(r/N) <= 1 - gamma is dominated by D
        r0 = math.floor(N * entropy_inverse(1 - gamma)) - 1
        rep.add("r0 + eps3 N >= N/2", r0 + shift, N / 2, 2 * (r0 + shift) >= N)
    lb = distortion_lower_bound(k, p, T_p) / 2
    rep.lower_bound = lb
    # a 2-distorted Q_k inside D costs at most a factor 2; a value below 1 is merely vacuous
    rep.vacuous = lb <= 1
    alg = exponent_algebra(Fraction(p).limit_denominator(10**6))
    rep.add("exponent algebra consistent", str(alg["product"]), "-1", alg["consistent"])
    return rep


def entropy_margin_ratio(beta: float) -> float:
    """(1 - h(1/2 - beta)) / beta^2."""
    return (1 - entropy(0.5 - beta)) / beta**2
