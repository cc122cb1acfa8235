"""Constructive upper-bound algorithms.

* ``best_intersecting_pair`` / ``inductive_step`` / ``build_rescaling2_copy``:
  the rescaling-2 recursion (pair of sections at distance 2, intersect, recurse).
* ``find_block_copy`` / ``lift_block_copy`` / ``embed_cube_driver``:
  roughly equitable block copies in the neighbourhood of a dense set, then a
  nearest-point lift back into the set with a (1+eps) distortion guarantee.

Nothing returned here is trusted from construction alone: every embedding is
re-verified with ``canonical_form`` or ``distortion`` before it is handed out.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from itertools import combinations

import numpy as np

from .config import DEFAULT_CAPS, Caps, CapExceeded
from .cube_core import (
    CubeSubset,
    as_fraction,
    neighborhood_radius,
    popcount,
    section_matrix,
    shell_distances,
    tail_size,
    weight_array,
)
from .embedding import BlockCopySpec, EmbeddingMap, UndistortedForm, canonical_form, distortion
from .spaces import CubeSpace


class PreconditionError(ValueError):
    pass


class LiftBoundViolation(AssertionError):
    """A lifted map broke the two-sided bound; indicates a bookkeeping bug."""


def frac_str(q: Fraction) -> str:
    return f"{q.numerator}/{q.denominator}"


# ---------------------------------------------------------------- pair selection


def _gram(cols: np.ndarray) -> np.ndarray:
    """Exact inner products of boolean columns (float32 while counts stay below 2^24)."""
    dt = np.float32 if cols.shape[0] < (1 << 24) else np.float64
    c = cols.astype(dt)
    return c.T @ c


def best_intersecting_pair(events, delta=None, best_effort: bool = False) -> tuple[int, int, Fraction]:
    """Lexicographically first pair ``i < j`` maximizing ``mu(A_i & A_j)``.

    ``events`` is a list of CubeSubsets over one space. With ``delta`` given, the
    averaging preconditions (mean measure >= delta, more than 2/delta events)
    are checked unless ``best_effort`` is set.
    """
    m = len(events)
    if m < 2:
        raise PreconditionError("need at least two events")
    n = events[0].n
    if any(e.n != n for e in events):
        raise ValueError("events live in different cubes")
    cols = np.stack([np.asarray(e.dense()) for e in events], axis=1)
    if delta is not None and not best_effort:
        delta = as_fraction(delta)
        avg = Fraction(sum(e.card for e in events), m << n)
        problems = []
        if avg < delta:
            problems.append(f"average measure {frac_str(avg)} < delta {frac_str(delta)}")
        if not m > 2 / delta:
            problems.append(f"m = {m} is not > 2/delta = {float(2 / delta):.6g}")
        if problems:
            raise PreconditionError("; ".join(problems))
    G = _gram(cols)
    G[np.tril_indices(m)] = -1
    flat = int(np.argmax(G))
    i, j = divmod(flat, m)
    return i, j, Fraction(int(G[i, j]), 1 << n)


# ---------------------------------------------------------------- inductive step


def gamma(delta) -> int:
    """``max(8 ln(4/delta), 8/delta)`` rounded up."""
    delta = as_fraction(delta)
    ln_inv = math.log(delta.denominator) - math.log(delta.numerator)
    return max(math.ceil(8 * (math.log(4) + ln_inv)), math.ceil(8 / delta))


def delta_sequence(delta, k: int) -> list[Fraction]:
    """delta_1 = delta, delta_{i+1} = delta_i^2 / 2 (exact)."""
    out = [as_fraction(delta)]
    for _ in range(k - 1):
        out.append(out[-1] ** 2 / 2)
    return out


def n_required(k: int, delta) -> int:
    """N(k, delta) = 2 + sum_i gamma(delta_i), each summand ceiled."""
    return 2 + sum(gamma(d) for d in delta_sequence(delta, k))


@lru_cache(maxsize=64)
def _layer_masks(n: int, j: int) -> np.ndarray:
    """Encodings of the j-subsets of [n] in ``combinations`` order."""
    return np.fromiter(
        (sum(1 << c for c in comb) for comb in combinations(range(n), j)), dtype=np.int64, count=math.comb(n, j)
    )


@dataclass(frozen=True)
class StepResult:
    x0: int
    x1: int
    section: CubeSubset
    layer: int
    star: int
    layer_average: Fraction


def inductive_step(D: CubeSubset, n: int, delta, best_effort: bool = False) -> StepResult:
    """Split ``D`` as Q_n x Q_N (leading block = coordinates 1..n) and find x0, x1 at distance 2.

    Returns the pair plus ``D_x0 & D_x1`` over Q_N.
    """
    delta = as_fraction(delta)
    N = D.n - n
    if N < 0:
        raise ValueError(f"block of size {n} does not fit in Q_{D.n}")
    if not best_effort:
        t_ln = 8 * math.log(4 / delta)
        t_inv = 8 / delta
        if n < t_ln or n < t_inv:
            raise PreconditionError(
                f"n = {n} below max(8 ln(4/delta) = {t_ln:.6g}, 8/delta = {float(t_inv):.6g})"
            )
        if D.measure() < delta:
            raise PreconditionError(f"mu(D) = {frac_str(D.measure())} < delta = {frac_str(delta)}")
    S = section_matrix(D, n)
    counts = S.sum(axis=0, dtype=np.int64)
    w = weight_array(n)
    # middle strip |j - n/2| < n/4, i.e. |4j - 2n| < n
    layers = [j for j in range(1, n + 1) if abs(4 * j - 2 * n) < n]
    if not layers:
        raise PreconditionError(f"no usable layer in the middle strip for n = {n}")
    layer_sum = np.bincount(w, weights=counts, minlength=n + 1)
    best_j, best_avg = None, None
    for j in layers:
        avg = Fraction(int(round(layer_sum[j])), math.comb(n, j))
        if best_avg is None or avg > best_avg:
            best_j, best_avg = j, avg
    j = best_j
    ys = _layer_masks(n, j - 1)
    star_sum = np.zeros(ys.size, dtype=np.int64)
    for i in range(n):
        bit = 1 << i
        free = (ys & bit) == 0
        star_sum[free] += counts[ys[free] | bit]
    y = int(ys[int(np.argmax(star_sum))])
    star = [y | (1 << i) for i in range(n) if not (y >> i) & 1]
    events = [CubeSubset(N, dense=S[:, x]) for x in star]
    a, b, _ = best_intersecting_pair(events, best_effort=True)
    x0, x1 = star[a], star[b]
    assert popcount(x0 ^ x1) == 2 and popcount(x0) == popcount(x1) == j
    sec = CubeSubset(N, dense=S[:, x0] & S[:, x1])
    return StepResult(x0, x1, sec, j, y, best_avg / (1 << N))


# ---------------------------------------------------------------- rescaling-2 builder


@dataclass(frozen=True)
class TraceStep:
    n: int
    x0: int
    x1: int
    density_before: Fraction
    density_after: Fraction
    delta: Fraction

    def squares_ok(self) -> bool:
        return self.density_after > self.density_before**2 / 2

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "x0": self.x0,
            "x1": self.x1,
            "density_before": frac_str(self.density_before),
            "density_after": frac_str(self.density_after),
            "delta": frac_str(self.delta),
            "squares_ok": self.squares_ok(),
        }


@dataclass
class InductiveTrace:
    steps: list[TraceStep] = field(default_factory=list)
    final_tail: int | None = None
    tail_dim: int | None = None

    def to_jsonl(self) -> str:
        lines = [json.dumps(s.to_json(), sort_keys=True) for s in self.steps]
        lines.append(json.dumps({"final_tail": self.final_tail, "tail_dim": self.tail_dim}, sort_keys=True))
        return "\n".join(lines) + "\n"


@dataclass
class Rescaling2Result:
    success: bool
    trace: InductiveTrace
    blocks: list[int]
    guaranteed: bool
    embedding: EmbeddingMap | None = None
    form: UndistortedForm | None = None
    failure: str | None = None


def split_blocks(N: int, k: int, delta) -> tuple[list[int], bool]:
    """Block sizes n_1..n_k and whether the N(k, delta) guarantee applies."""
    gammas = [gamma(d) for d in delta_sequence(delta, k)]
    if N >= 2 + sum(gammas):
        return gammas, True
    avail = N - 2
    if avail < 2 * k:
        raise PreconditionError(f"N = {N} too small for {k} blocks of size >= 2 plus a tail of 2")
    total = sum(gammas)
    sizes = [max(2, (g * avail) // total) for g in gammas]
    while sum(sizes) > avail:
        i = max(range(k), key=lambda t: sizes[t])
        sizes[i] -= 1
    return sizes, False


def build_rescaling2_copy(D: CubeSubset, k: int, delta, blocks: list[int] | None = None) -> Rescaling2Result:
    """Isometric copy of Q_k with rescaling 2 inside ``D`` via repeated inductive steps.

    Block i occupies the next ``blocks[i]`` coordinates; the remaining tail
    coordinates carry a point ``y`` of the final intersection.
    """
    delta = as_fraction(delta)
    if blocks is None:
        blocks, guaranteed = split_blocks(D.n, k, delta)
    else:
        guaranteed = D.n >= n_required(k, delta) and list(blocks) == [gamma(d) for d in delta_sequence(delta, k)]
    guaranteed = guaranteed and D.measure() > delta
    deltas = delta_sequence(delta, k)
    trace = InductiveTrace()
    cur = D
    pairs = []
    for i in range(k):
        before = cur.measure()
        step = inductive_step(cur, blocks[i], deltas[i], best_effort=True)
        after = step.section.measure()
        trace.steps.append(TraceStep(blocks[i], step.x0, step.x1, before, after, deltas[i]))
        pairs.append((step.x0, step.x1))
        cur = step.section
        if cur.card == 0:
            return Rescaling2Result(False, trace, blocks, guaranteed, failure=f"residual density 0 after step {i + 1}")
    y = int(cur.points()[0])
    trace.final_tail, trace.tail_dim = y, cur.n
    offsets = np.cumsum([0] + list(blocks))
    images = []
    for alpha in range(1 << k):
        v = 0
        for i, (x0, x1) in enumerate(pairs):
            v |= (x1 if (alpha >> i) & 1 else x0) << int(offsets[i])
        images.append(v | (y << int(offsets[k])))
    f = EmbeddingMap(CubeSpace(k), CubeSpace(D.n), tuple(images))
    form = canonical_form(f)
    if not isinstance(form, UndistortedForm) or form.r != 2 or any(v not in D for v in images):
        raise AssertionError("rescaling-2 builder produced an invalid copy")
    return Rescaling2Result(True, trace, blocks, guaranteed, f, form)


# ---------------------------------------------------------------- block copies


def delta_k_log(k: int, n: int, eps1) -> float:
    """ln of delta_k = (2^k W(eps1, n))^(1/2^(k-1))."""
    W = tail_size(eps1, n)
    if W == 0:
        return -math.inf
    lnW = math.log(W.numerator) - math.log(W.denominator)
    return (k * math.log(2) + lnW) / 2 ** (k - 1)


def delta_k(k: int, n: int, eps1) -> float:
    return math.exp(delta_k_log(k, n, eps1))


def block_copy_guaranteed(D: CubeSubset, k: int, n: int, eps1) -> bool:
    eps1 = as_fraction(eps1)
    if not (k <= n and eps1 * eps1 * n >= 4 and 3 * k < eps1 * eps1 * n):
        return False
    mu = D.measure()
    return mu > 0 and math.log(mu.numerator) - math.log(mu.denominator) > delta_k_log(k, n, eps1)


@dataclass
class BlockCopyResult:
    spec: BlockCopySpec | None
    sampled: bool
    level_measures: list[Fraction]
    guaranteed: bool
    failure: str | None = None


def _shell_mask(n: int, eps1) -> np.ndarray:
    allowed = np.zeros(n + 1, dtype=bool)
    allowed[shell_distances(n, eps1)] = True
    return allowed


def _first_pair(member: np.ndarray, n: int, allowed: np.ndarray):
    pts = np.flatnonzero(member)
    w = weight_array(n)
    for y in pts:
        ok = allowed[w[pts ^ y]]
        if ok.any():
            return int(y), int(pts[np.argmax(ok)])
    return None


def find_block_copy(
    D: CubeSubset, k: int, eps1, caps: Caps = DEFAULT_CAPS, seed: int = 0
) -> BlockCopyResult:
    """Greedy averaging search for k shell pairs whose 2^k concatenations lie in ``D``.

    At each level the first block's pair (y, y') with the largest
    ``V = {x : (y, x), (y', x) in D}`` is chosen (Gram matrix of the section
    columns, first maximum in enumeration order); the search continues in V.
    """
    if D.n % k:
        raise ValueError(f"Q_{D.n} does not split into {k} equal blocks")
    n = D.n // k
    eps1 = as_fraction(eps1)
    allowed = _shell_mask(n, eps1)
    if not allowed.any():
        return BlockCopyResult(None, False, [], False, "empty shell")
    guaranteed = block_copy_guaranteed(D, k, n, eps1)
    member = np.asarray(D.dense(caps.dense_limit))
    pairs: list[tuple[int, int]] = []
    levels: list[Fraction] = [D.measure()]
    sampled = False
    w = weight_array(n)
    rng = np.random.default_rng(seed)
    for level in range(k, 1, -1):
        M = member.reshape(-1, 1 << n)
        rows = M.shape[0]
        if rows * (1 << (2 * n)) <= caps.gram_cap:
            G = _gram(M)
            ys = np.arange(1 << n)
            G[~allowed[w[ys[:, None] ^ ys[None, :]]]] = -1
            flat = int(np.argmax(G))
            y, yp = divmod(flat, 1 << n)
            best = int(G[y, yp])
        else:
            sampled = True
            s = max(1, min(caps.sample_budget, caps.gram_cap // max(rows, 1)))
            dists = np.flatnonzero(allowed)
            best, y, yp = -1, 0, 0
            for _ in range(s):
                a = int(rng.integers(1 << n))
                d = int(rng.choice(dists))
                flip = int(sum(1 << int(c) for c in rng.choice(n, size=d, replace=False)))
                cnt = int(np.count_nonzero(M[:, a] & M[:, a ^ flip]))
                if cnt > best:
                    best, y, yp = cnt, a, a ^ flip
        if best <= 0:
            return BlockCopyResult(None, sampled, levels, guaranteed, f"no shell pair at block {k - level + 1}")
        pairs.append((y, yp))
        member = M[:, y] & M[:, yp]
        levels.append(Fraction(best, rows))
    last = _first_pair(member, n, allowed)
    if last is None:
        return BlockCopyResult(None, sampled, levels, guaranteed, f"no shell pair at block {k}")
    pairs.append(last)
    spec = BlockCopySpec(k, n, tuple(pairs), eps1)
    if any(v not in D for v in spec.concatenations()):
        raise AssertionError("block copy failed membership re-check")
    return BlockCopyResult(spec, sampled, levels, guaranteed)


# ---------------------------------------------------------------- lift


@dataclass(frozen=True)
class LiftParams:
    eps1: Fraction
    eps2: Fraction
    k: int
    n: int

    def __post_init__(self):
        object.__setattr__(self, "eps1", as_fraction(self.eps1))
        object.__setattr__(self, "eps2", as_fraction(self.eps2))
        if self.eps > Fraction(1, 4):
            raise PreconditionError(f"eps = 9(eps1 + eps2 k) = {frac_str(self.eps)} exceeds 1/4")
        if self.r <= 0:
            raise PreconditionError("rescaling r must be positive")

    @property
    def eps(self) -> Fraction:
        return 9 * (self.eps1 + self.eps2 * self.k)

    @property
    def r(self) -> Fraction:
        return Fraction(self.n, 2) * (1 - self.eps1 - 4 * self.eps2 * self.k)

    @property
    def radius(self) -> int:
        """Perturbation radius eps2 * (k n) in Q_{kn}."""
        return math.floor(self.eps2 * self.k * self.n)


def nearest_point(D: CubeSubset, x: int) -> tuple[int, int]:
    """Closest point of ``D`` to ``x`` (smallest encoding on ties) and its distance."""
    pts = np.asarray(D.points(), dtype=np.uint64)
    if pts.size == 0:
        raise ValueError("empty set has no nearest point")
    d = np.bitwise_count(pts ^ np.uint64(x))
    i = int(np.argmin(d))
    return int(pts[i]), int(d[i])


def lift_block_copy(D: CubeSubset, spec: BlockCopySpec, params: LiftParams) -> EmbeddingMap:
    """Replace each concatenation X(alpha) by its nearest point Y(alpha) in ``D``."""
    if (spec.k, spec.n) != (params.k, params.n) or D.n != spec.k * spec.n:
        raise ValueError("spec, params and D disagree on (k, n)")
    lo, hi = Fraction(spec.n, 2) * (1 - params.eps1), Fraction(spec.n, 2) * (1 + params.eps1)
    if any(not lo <= d <= hi for d in spec.block_distances()):
        raise PreconditionError("block distances outside the eps1 window")
    images = []
    for X in spec.concatenations():
        y, d = nearest_point(D, X)
        if d > params.radius:
            raise PreconditionError(f"concatenation {X} is {d} > {params.radius} away from D")
        images.append(y)
    f = EmbeddingMap(CubeSpace(spec.k), CubeSpace(D.n), tuple(images))
    ds = f.source.distance_matrix(list(f.domain))
    dt = f.target.distance_matrix(list(f.images))
    r, top = params.r, params.r * (1 + params.eps)
    iu = np.triu_indices(len(images), 1)
    for a, b in zip(*iu):
        s, t = int(ds[a, b]), int(dt[a, b])
        if not (r * s <= t <= top * s):
            raise LiftBoundViolation(f"pair ({a}, {b}): {t} not in [{r * s}, {top * s}]")
    return f


# ---------------------------------------------------------------- driver


def driver_threshold(eps, delta, k: int) -> float:
    """4 * 18^2 * eps^-2 * k^3 * log2(1/delta)."""
    eps, delta = float(as_fraction(eps)), float(as_fraction(delta))
    return 4 * 18**2 * k**3 * math.log2(1 / delta) / eps**2


@dataclass
class DriverResult:
    success: bool
    stage: str
    params: dict
    densities: dict
    guaranteed: bool
    embedding: EmbeddingMap | None = None
    distortion: Fraction | None = None
    sampled: bool = False

    def report(self) -> dict:
        out = {
            "success": self.success,
            "stage": self.stage,
            "guaranteed": self.guaranteed,
            "sampled": self.sampled,
            "params": {k: (frac_str(v) if isinstance(v, Fraction) else v) for k, v in self.params.items()},
            "densities": {k: frac_str(v) for k, v in self.densities.items()},
        }
        if self.distortion is not None:
            out["distortion"] = frac_str(self.distortion)
        return out


def embed_cube_driver(
    D: CubeSubset, k: int, eps, delta, caps: Caps = DEFAULT_CAPS, seed: int = 0
) -> DriverResult:
    """(1+eps)-bi-Lipschitz copy of Q_k in ``D``, or a report of the stage that failed."""
    eps, delta = as_fraction(eps), as_fraction(delta)
    # eps = 1/4 is admitted: the lift step only needs eps <= 1/4, the
    # threshold theorem wants it strictly smaller (see ``guaranteed``).
    if not 0 < eps <= Fraction(1, 4):
        raise PreconditionError("eps must lie in (0, 1/4]")
    if not D.measure() > delta:
        raise PreconditionError(f"mu(D) = {frac_str(D.measure())} is not > delta = {frac_str(delta)}")
    N = D.n
    n = N // k
    eps1, eps2 = eps / 18, eps / (18 * k)
    params = {"k": k, "N": N, "n": n, "eps": eps, "eps1": eps1, "eps2": eps2, "delta": delta}
    guaranteed = eps < Fraction(1, 4) and N >= driver_threshold(eps, delta, k)
    densities = {"D": D.measure()}
    if n < 1:
        return DriverResult(False, "split", params, densities, guaranteed)
    lp = LiftParams(eps1, eps2, k, n)
    assert lp.eps == eps
    params.update({"r": lp.r, "radius": lp.radius})
    t = N - n * k
    rows = np.asarray(D.dense(caps.dense_limit)).reshape(1 << t, 1 << (n * k))
    counts = rows.sum(axis=1)
    suffix = int(np.argmax(counts))
    Dr = CubeSubset(n * k, dense=rows[suffix])
    densities["restricted"] = Dr.measure()
    Dn = neighborhood_radius(Dr, lp.radius, caps.dense_limit)
    densities["neighborhood"] = Dn.measure()
    found = find_block_copy(Dn, k, eps1, caps, seed)
    if found.spec is None:
        for i, m in enumerate(found.level_measures):
            densities[f"level{i}"] = m
        return DriverResult(False, "block-copy", params, densities, guaranteed, sampled=found.sampled)
    g = lift_block_copy(Dr, found.spec, lp)
    images = tuple(v | (suffix << (n * k)) for v in g.images)
    f = EmbeddingMap(CubeSpace(k), CubeSpace(N), images)
    rep = distortion(f)
    if rep.distortion > 1 + eps or any(v not in D for v in images):
        raise LiftBoundViolation(f"driver output fails verification (distortion {rep.distortion})")
    return DriverResult(True, "done", params, densities, guaranteed, f, rep.distortion, found.sampled)
