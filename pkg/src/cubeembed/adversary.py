"""Dense sets without undistorted cube copies, plus the numeric regimes that certify them."""

from __future__ import annotations

import hashlib
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from fractions import Fraction

import numpy as np

from .config import DEFAULT_CAPS, CapExceeded
from .cube_core import CubeSubset, as_fraction
from .embedding import SearchStats, UndistortedForm, _r_values, find_copy_brute
from .rng import bernoulli_mask, derive_key


@dataclass(frozen=True)
class RandomSetRecipe:
    n: int
    p: Fraction
    seed: int
    mode: str = "plain"
    k: int | None = None
    r_range: tuple[int, int] | None = None
    max_attempts: int = 1000
    delta: Fraction | None = None

    def __post_init__(self):
        object.__setattr__(self, "p", as_fraction(self.p))
        if self.delta is not None:
            object.__setattr__(self, "delta", as_fraction(self.delta))
        # p = 1 is admitted so the full cube is expressible; p = 0 is not.
        if not 0 < self.p <= 1:
            raise ValueError(f"inclusion probability must lie in (0, 1], got {self.p}")
        if self.mode not in ("plain", "rejection"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.mode == "rejection":
            if self.k is None or self.r_range is None or self.delta is None:
                raise ValueError("rejection mode needs k, r_range and delta")
            lo, hi = self.r_range
            if lo < 1 or hi < lo:
                raise ValueError("r_range must satisfy 1 <= lo <= hi")

    @classmethod
    def for_density(cls, n: int, delta, seed: int, **kw) -> "RandomSetRecipe":
        """Recipe with the p = 3 delta / 2 inclusion probability."""
        delta = as_fraction(delta)
        return cls(n, min(Fraction(3, 2) * delta, Fraction(1)), seed, delta=delta, **kw)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["p"] = f"{self.p.numerator}/{self.p.denominator}"
        if self.delta is not None:
            d["delta"] = f"{self.delta.numerator}/{self.delta.denominator}"
        if self.r_range is not None:
            d["r_range"] = list(self.r_range)
        return d


def _bernoulli_parallel(key: int, total: int, p: Fraction, workers: int) -> np.ndarray:
    if workers <= 1 or total < (1 << 16):
        return bernoulli_mask(key, 0, total, p)
    bounds = np.linspace(0, total, workers + 1).astype(np.int64)
    with ThreadPoolExecutor(workers) as ex:
        parts = list(ex.map(lambda ab: bernoulli_mask(key, int(ab[0]), int(ab[1]), p), zip(bounds, bounds[1:])))
    return np.concatenate(parts)


def plain_sample(n: int, p, seed: int, attempt: int = 0, workers: int = 1) -> CubeSubset:
    """Bernoulli(p) set; the hash key folds in (seed, n, attempt) so the result ignores ``workers``."""
    key = derive_key(seed, n, attempt, 0xAD)
    return CubeSubset(n, dense=_bernoulli_parallel(key, 1 << n, as_fraction(p), workers))


@dataclass
class SampleResult:
    subset: CubeSubset | None
    attempts: int
    rejected_density: int = 0
    rejected_copy: int = 0
    last_stats: SearchStats | None = None

    @property
    def success(self) -> bool:
        return self.subset is not None


def sample_set(recipe: RandomSetRecipe, workers: int = 1, cap: int | None = None) -> SampleResult:
    """Draw the recipe's set; in rejection mode keep drawing until it is dense and copy-free."""
    if recipe.mode == "plain":
        return SampleResult(plain_sample(recipe.n, recipe.p, recipe.seed, 0, workers), 1)
    res = SampleResult(None, 0)
    for attempt in range(recipe.max_attempts):
        res.attempts = attempt + 1
        D = plain_sample(recipe.n, recipe.p, recipe.seed, attempt, workers)
        if D.measure() < recipe.delta:
            res.rejected_density += 1
            continue
        stats = SearchStats()
        if find_copy_brute(D, recipe.k, recipe.r_range, cap, stats) is None:
            res.subset, res.last_stats = D, stats
            return res
        res.rejected_copy += 1
    return res


# ---------------------------------------------------------------- P_bad


@dataclass(frozen=True)
class PBad:
    log_density_term: float
    log_copy_term: float
    log_total: float

    @property
    def density_term(self) -> float:
        return math.exp(self.log_density_term)

    @property
    def copy_term(self) -> float:
        return math.exp(min(self.log_copy_term, 700.0))

    @property
    def total(self) -> float:
        return math.exp(min(self.log_total, 700.0))

    @property
    def below_one(self) -> bool:
        return self.log_total < 0


def p_bad(n: int, k: int, delta) -> PBad:
    """exp(-delta 2^n / 12) + (2(k+1))^n (3 delta / 2)^(2^k), natural logs throughout."""
    d = float(as_fraction(delta))
    if not 0 < d < 1:
        raise ValueError("delta must lie in (0, 1)")
    a = -d * 2.0**n / 12
    b = n * math.log(2 * (k + 1)) + 2.0**k * math.log(1.5 * d)
    hi = max(a, b)
    total = hi + math.log(math.exp(a - hi) + math.exp(b - hi))
    return PBad(a, b, total)


def p_bad_regime_n(k: int, delta) -> float:
    """2^k log2(1/delta) / (5 log2 k)."""
    d = float(as_fraction(delta))
    return 2.0**k * math.log2(1 / d) / (5 * math.log2(k))


# ---------------------------------------------------------------- LLL budget


def _max_int_with_log_at_most(log_bound: float) -> int:
    """Largest integer N >= 0 with ln N <= log_bound (N = 0 if none)."""
    if log_bound < 0:
        return 0
    cand = math.floor(math.exp(min(log_bound, 700.0)))
    while cand > 0 and math.log(cand) > log_bound + 1e-12:
        cand -= 1
    while math.log(cand + 1) <= log_bound - 1e-12:
        cand += 1
    return cand


@dataclass(frozen=True)
class LllBudget:
    k: int
    R: int
    delta: Fraction
    log_p_event: float
    n_lll: int
    n_lll_e: int
    n_density: int
    density_bound: float
    n_density_exact: int
    shape_bound: float
    n_max: int

    @property
    def p_event(self) -> float:
        return math.exp(self.log_p_event)

    def log_d(self, N: int) -> float:
        """ln of the overlap bound 2^k R N^(Rk)."""
        return self.k * math.log(2) + math.log(self.R) + self.R * self.k * math.log(N) if N > 0 else -math.inf

    def lll_condition(self, N: int) -> bool:
        """4 d p <= 1 (with p = delta^(2^k))."""
        return N > 0 and math.log(4) + self.log_d(N) + self.log_p_event <= 1e-12

    def to_dict(self) -> dict:
        d = asdict(self)
        d["delta"] = f"{self.delta.numerator}/{self.delta.denominator}"
        d["p_event"] = self.p_event
        if self.n_max > 0:
            d["log_d_at_n_max"] = self.log_d(self.n_max)
        return d


def lll_certificate(k: int, R: int, delta) -> LllBudget:
    """Largest N meeting both the 4dp <= 1 condition and the density-survival display.

    ``n_lll_e`` uses e p d <= 1 instead of 4 p d <= 1; ``n_density_exact`` solves
    delta/12 > 2 delta^(2^k) R N^(Rk) directly, and ``shape_bound`` is the
    closed-form lower-bound expression 2^-k/(12R) 2^(log2(1/delta) 2^k/(Rk)).
    """
    delta = as_fraction(delta)
    if k < 1 or R < 1 or not 0 < delta < Fraction(1, 2):
        raise ValueError("need k >= 1, R >= 1 and 0 < delta < 1/2")
    L = math.log(delta.denominator) - math.log(delta.numerator)  # ln(1/delta)
    Rk = R * k
    log_p = -(2.0**k) * L
    # 4 * 2^k * R * N^(Rk) * delta^(2^k) <= 1
    n_lll = _max_int_with_log_at_most((-math.log(4) - k * math.log(2) - math.log(R) - log_p) / Rk)
    n_lll_e = _max_int_with_log_at_most((-1.0 - k * math.log(2) - math.log(R) - log_p) / Rk)
    # N <= (2^-k / 12R) e^(ln(1/delta)(2^k - 1)/(Rk)), as displayed
    log_disp = -k * math.log(2) - math.log(12 * R) + L * (2.0**k - 1) / Rk
    n_density = _max_int_with_log_at_most(log_disp)
    # delta/12 > 2 delta^(2^k) R N^(Rk) solved for N
    log_exact = (L * (2.0**k - 1) - math.log(24 * R)) / Rk
    n_density_exact = _max_int_with_log_at_most(log_exact - 1e-12)
    log_shape = -k * math.log(2) - math.log(12 * R) + L * 2.0**k / Rk
    return LllBudget(
        k, R, delta, log_p, n_lll, n_lll_e, n_density, math.exp(min(log_disp, 700.0)),
        n_density_exact, math.exp(min(log_shape, 700.0)), min(n_lll, n_density),
    )


# ---------------------------------------------------------------- certification


@dataclass
class Certificate:
    status: str  # certified | counterexample | inconclusive
    k: int
    r_range: tuple[int, int]
    n: int
    card: int
    stats: SearchStats
    form: UndistortedForm | None = None
    note: str | None = None

    @property
    def exit_code(self) -> int:
        return {"counterexample": 0, "certified": 1, "inconclusive": 2}[self.status]

    def to_json(self, recipe: RandomSetRecipe | None = None, set_text: str | None = None) -> str:
        out = {
            "status": self.status,
            "k": self.k,
            "r_range": list(self.r_range),
            "N": self.n,
            "card": self.card,
            "stats": asdict(self.stats),
        }
        if self.form is not None:
            out["form"] = {"b": self.form.b, "blocks": [list(b) for b in self.form.blocks], "r": self.form.r}
        if self.note:
            out["note"] = self.note
        if recipe is not None:
            out["recipe"] = recipe.to_dict()
        if set_text is not None:
            out["set_sha256"] = hashlib.sha256(set_text.encode()).hexdigest()
        return json.dumps(out, sort_keys=True, indent=2)


def certify_no_copy(D: CubeSubset, k: int, r_range, cap: int | None = None) -> Certificate:
    """Exhaustively decide whether ``D`` holds an undistorted copy of Q_k with r in ``r_range``."""
    rs = _r_values(r_range)
    rr = (min(rs), max(rs))
    stats = SearchStats()
    cap = DEFAULT_CAPS.enumeration_cap if cap is None else cap
    if k * rr[0] > D.n:
        return Certificate("certified", k, rr, D.n, D.card, stats, note="k * r exceeds N: no form exists")
    try:
        form = find_copy_brute(D, k, rr, cap, stats)
    except CapExceeded as e:
        return Certificate("inconclusive", k, rr, D.n, D.card, stats, note=str(e))
    if form is None:
        return Certificate("certified", k, rr, D.n, D.card, stats)
    return Certificate("counterexample", k, rr, D.n, D.card, stats, form)
