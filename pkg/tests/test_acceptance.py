"""Acceptance criteria, one test each; every test logs a PASS/FAIL line with its timing.

Tolerances and sizes are pinned here. Criteria 2 and 6 are known to fail as
stated; see the notes in their tests and the README.
"""

import subprocess
import sys
import time
from collections import deque
from fractions import Fraction
from itertools import combinations_with_replacement

import numpy as np

from cubeembed.adversary import RandomSetRecipe, certify_no_copy, sample_set
from cubeembed.builder import LiftBoundViolation, build_rescaling2_copy, embed_cube_driver
from cubeembed.cube_core import (
    CubePoint,
    central_shell,
    epsilon_neighborhood,
    random_subset,
    random_subset_of_size,
    section,
    tail_size,
    upper_tail_size,
    weight_array,
)
from cubeembed.embedding import (
    EmbeddingMap,
    UndistortedForm,
    canonical_form,
    count_undistorted,
    distortion,
    generate_undistorted,
)
from cubeembed.formats import write_pset, write_qset
from cubeembed.pathspace import PathSubset, all_paths, cantor_build, path_distortion_search, porosity_embed, verify_gaps
from cubeembed.spaces import PathSpace, TreeSpace
from cubeembed.treespace import geodesic_closeness_check, tree_distance, tripod_median
from cubeembed.typebounds import (
    EnfloWitness,
    ball_entropy_holds,
    distortion_lower_bound,
    enflo_check,
    entropy,
    entropy_inverse,
)

# pinned parameters
EPS_GRID = [Fraction(i, 16) for i in range(1, 17)]
CONC_EPS = [Fraction(i, 8) for i in range(1, 5)]
CONC_SAMPLES = 500
FORM_CASES = [(1, 3, 1), (1, 3, 2), (1, 3, 3), (2, 4, 1), (2, 4, 2), (2, 5, 2)]
C4_N, C4_DELTA, C4_SEEDS = 19, Fraction(51, 100), range(100)
C5_N, C5_K, C5_EPS, C5_MU, C5_SEEDS = 24, 2, Fraction(1, 4), Fraction(9, 10), range(50)
C6_N, C6_K, C6_DELTA, C6_SEEDS, C6_ATTEMPTS, C6_NEEDED = 10, 2, Fraction(1, 20), range(100), 1000, 95
CANTOR_CASES = [(6, 200), (8, 243)]
C8_SETS = 100
TREE_CLOSE_K = (3, 4, 5)
ROUND_TRIP_TOL = 1e-10


def _record(log, n, ok, detail, t0, budget):
    dt = time.perf_counter() - t0
    ok = ok and dt <= budget
    log.append(f"criterion {n:>2}: {'PASS' if ok else 'FAIL'}  {detail}  [{dt:.1f}s / {budget:.0f}s]")
    return ok


def _card_at_least(n, mu):
    return -((-mu.numerator << n) // mu.denominator)


# ---------------------------------------------------------------- 1


def test_c01_exact_combinatorics(acceptance_log):
    t0 = time.perf_counter()
    bad = []
    for n in range(1, 15):
        w = weight_array(n)
        for eps in EPS_GRID:
            lo = int(np.count_nonzero(w <= (1 - eps) * Fraction(n, 2)))
            if tail_size(eps, n) != Fraction(lo, 1 << n) or upper_tail_size(eps, n) != tail_size(eps, n):
                bad.append(("tail", n, eps))
            for x in (0, (1 << n) - 1, (0x5A5A & ((1 << n) - 1))):
                if central_shell(CubePoint(n, x), eps).measure() != 1 - 2 * tail_size(eps, n):
                    bad.append(("shell", n, eps, x))
        for split in range(0, n + 1):
            D = random_subset(n, Fraction(2, 5), 1000 + n)
            secs = [section(D, CubePoint(split, x)) for x in range(1 << split)]
            if sum(s.card for s in secs) != D.card:
                bad.append(("section", n, split))
    ok = _record(acceptance_log, 1, not bad, f"tail/shell/section identities, {len(bad)} mismatches", t0, 60)
    assert ok, bad[:5]


# ---------------------------------------------------------------- 2


def test_c02_concentration_lemma(acceptance_log):
    """D drawn with |D| uniform in [W 2^n, 2^n], radius floor(eps n) as in the neighbourhood definition."""
    t0 = time.perf_counter()
    viol = []
    for n in range(1, 15):
        for eps in CONC_EPS:
            W = tail_size(eps, n)
            lo = _card_at_least(n, W)
            rng = np.random.default_rng([n, eps.numerator, eps.denominator])
            for s in range(CONC_SAMPLES):
                card = int(rng.integers(lo, (1 << n) + 1))
                D = random_subset_of_size(n, card, 7919 * s + n)
                if epsilon_neighborhood(D, eps).measure() < 1 - W:
                    viol.append((n, eps, card))
    cells = sorted({(n, str(e)) for n, e, _ in viol})
    ok = _record(acceptance_log, 2, not viol, f"{len(viol)} violations in cells {cells[:8]}", t0, 120)
    assert ok, f"{len(viol)} violations; cells {cells}"


# ---------------------------------------------------------------- 3


def _brute_isometries(k, N, r):
    pts = np.arange(1 << N, dtype=np.uint64)
    grids = np.meshgrid(*([pts] * (1 << k)), indexing="ij")
    cols = [g.ravel() for g in grids]
    keep = np.ones(cols[0].shape, dtype=bool)
    for a in range(1 << k):
        for b in range(a + 1, 1 << k):
            keep &= np.bitwise_count(cols[a] ^ cols[b]) == r * bin(a ^ b).count("1")
    return {tuple(int(c[i]) for c in cols) for i in np.flatnonzero(keep)}


def test_c03_generator_oracle(acceptance_log):
    t0 = time.perf_counter()
    bad = []
    counts = {}
    for k, N, r in FORM_CASES:
        gen = [f.images() for f in generate_undistorted(k, N, r)]
        brute = _brute_isometries(k, N, r)
        counts[(k, N, r)] = len(gen)
        if len(set(gen)) != len(gen) or set(gen) != brute or len(gen) != count_undistorted(k, N, r):
            bad.append((k, N, r, len(gen), len(brute)))
    ok = counts[(1, 3, 2)] == 24 and not bad
    ok = _record(acceptance_log, 3, ok, f"forms per case {counts}", t0, 60)
    assert ok, bad


# ---------------------------------------------------------------- 4


def c4_set(seed):
    return random_subset_of_size(C4_N, (C4_DELTA.numerator << C4_N) // C4_DELTA.denominator + 1, seed)


def test_c04_rescaling2_completeness(acceptance_log):
    t0 = time.perf_counter()
    good = 0
    for seed in C4_SEEDS:
        D = c4_set(seed)
        res = build_rescaling2_copy(D, 1, C4_DELTA)
        form = canonical_form(res.embedding) if res.success else None
        if (
            res.success
            and res.guaranteed
            and isinstance(form, UndistortedForm)
            and form.r == 2
            and all(v in D for v in res.embedding.images)
            and all(s.squares_ok() for s in res.trace.steps)
        ):
            good += 1
    ok = _record(acceptance_log, 4, good == len(C4_SEEDS), f"{good}/{len(C4_SEEDS)} verified copies", t0, 300)
    assert ok


# ---------------------------------------------------------------- 5


def c5_set(seed):
    return random_subset_of_size(C5_N, (C5_MU.numerator << C5_N) // C5_MU.denominator + 1, seed)


def test_c05_driver_soundness(acceptance_log):
    t0 = time.perf_counter()
    successes = verified = violations = 0
    for seed in C5_SEEDS:
        D = c5_set(seed)
        try:
            res = embed_cube_driver(D, C5_K, C5_EPS, C5_MU, seed=seed)
        except LiftBoundViolation:
            violations += 1
            continue
        if res.success:
            successes += 1
            f = res.embedding
            if distortion(f).distortion <= 1 + C5_EPS and all(v in D for v in f.images):
                verified += 1
    ok = verified == successes and violations == 0
    detail = f"{successes}/{len(C5_SEEDS)} succeeded, {verified} verified, {violations} lift violations"
    ok = _record(acceptance_log, 5, ok, detail, t0, 600)
    assert ok


# ---------------------------------------------------------------- 6


def c6_recipe(seed):
    return RandomSetRecipe.for_density(
        C6_N, C6_DELTA, seed, mode="rejection", k=C6_K, r_range=(1, C6_N // C6_K), max_attempts=C6_ATTEMPTS
    )


def test_c06_random_lower_bound_regime(acceptance_log):
    """Full rescaling range r = 1..N/k, as the undistorted-copy definition allows any r."""
    t0 = time.perf_counter()
    good = 0
    for seed in C6_SEEDS:
        res = sample_set(c6_recipe(seed))
        if res.success:
            D = res.subset
            cert = certify_no_copy(D, C6_K, (1, C6_N // C6_K))
            good += cert.status == "certified" and D.measure() >= C6_DELTA
    ok = _record(acceptance_log, 6, good >= C6_NEEDED, f"{good}/{len(C6_SEEDS)} seeds certified", t0, 600)
    assert ok


# ---------------------------------------------------------------- 7


def test_c07_cantor(acceptance_log):
    t0 = time.perf_counter()
    notes, ok = [], True
    for k, n in CANTOR_CASES:
        D, trace = cantor_build(n, k)
        status, _, nodes = path_distortion_search(D, k, 2)
        ok &= status == "none" and D.measure() == trace.density()
        checked = 0
        for nd in trace.parents():
            (a, b), (c, d) = nd.children()
            pts = D.within(nd.lo, nd.hi)
            dist = np.abs(np.subtract.outer(pts, pts))
            maps = all_paths(dist, k, 2) if len(pts) >= k else []
            ok &= maps is not None
            for idx in maps or []:
                img = [pts[i] for i in idx]
                ok &= all(a <= v <= b for v in img) or all(c <= v <= d for v in img)
                checked += 1
        notes.append(f"(k={k},n={n}) {status} in {nodes} nodes, density {D.measure()}, {checked} parent-interval maps")
    ok = _record(acceptance_log, 7, ok, "; ".join(notes), t0, 600)
    assert ok


# ---------------------------------------------------------------- 8


def c8_case(i):
    rng = np.random.default_rng([8, i])
    N = int(rng.integers(50, 2001))
    p = Fraction(int(rng.integers(5, 91)), 100)
    k = int(rng.integers(2, 7))
    eps = [Fraction(1, 4), Fraction(1, 2), Fraction(1)][i % 3]
    return N, p, k, eps, PathSubset.random(N, p, 800 + i)


def test_c08_porosity(acceptance_log):
    t0 = time.perf_counter()
    wins = fails = bad = 0
    for i in range(C8_SETS):
        N, p, k, eps, D = c8_case(i)
        res = porosity_embed(D, k, eps)
        if res.success:
            wins += 1
            f = res.embedding
            bad += not (distortion(f).distortion <= 1 + eps and all(v in D for v in f.images))
        else:
            fails += 1
            bad += not verify_gaps(D, res)
    ok = _record(acceptance_log, 8, bad == 0, f"{wins} embeddings, {fails} certificates, {bad} bad", t0, 120)
    assert ok


# ---------------------------------------------------------------- 9


def _bfs(n, src):
    dist = {src: 0}
    q = deque([src])
    while q:
        v = q.popleft()
        for u in ([v[:-1]] if v else []) + ([v + "0", v + "1"] if len(v) < n - 1 else []):
            if u not in dist:
                dist[u] = dist[v] + 1
                q.append(u)
    return dist


def test_c09_trees(acceptance_log):
    t0 = time.perf_counter()
    bad = 0
    rng = np.random.default_rng(9)
    for n in range(1, 11):
        pts = TreeSpace(n).points()
        sources = pts if n <= 7 else [pts[i] for i in rng.choice(len(pts), 40, replace=False)]
        for a in sources:
            d = _bfs(n, a)
            bad += sum(tree_distance(a, b) != d[b] for b in pts)
    med_checked = 0
    for n in range(1, 8):
        for a, b, c in combinations_with_replacement(TreeSpace(n).points(), 3):
            m = tripod_median(a, b, c)
            med_checked += 1
            for x, y in ((a, b), (a, c), (b, c)):
                bad += tree_distance(x, y) != tree_distance(x, m) + tree_distance(m, y)
    T = TreeSpace(8)
    tp = T.points()
    dmat = T.distance_matrix(tp)
    paths = 0
    for k in TREE_CLOSE_K:
        for idx in all_paths(dmat, k, Fraction(1001, 1000)):
            f = EmbeddingMap(PathSpace(k), T, tuple(tp[i] for i in idx))
            bad += not geodesic_closeness_check(f).passes
            paths += 1
    ok = _record(acceptance_log, 9, bad == 0, f"{med_checked} tripods, {paths} near-isometric paths, {bad} bad", t0, 300)
    assert ok


# ---------------------------------------------------------------- 10


def test_c10_numerics(acceptance_log):
    t0 = time.perf_counter()
    ys = np.linspace(0, 1, 2001)
    rt = max(abs(entropy(entropy_inverse(y)) - y) for y in ys)
    # the ball-entropy bound is a statement for p <= 1/2
    ball_ok = all(ball_entropy_holds(N, i / 200) for N in range(1, 31) for i in range(1, 101))
    enflo_ok = all(
        (lambda r: r.exact and r.diagonal_sum == r.edge_sum == k * 2 ** (k - 1))(enflo_check(EnfloWitness.identity(k)))
        for k in range(1, 11)
    )
    lb = distortion_lower_bound(4, 2, 1)
    ok = rt <= ROUND_TRIP_TOL and ball_ok and enflo_ok and lb == 2
    detail = f"round-trip {rt:.2e}, ball bound {ball_ok}, Enflo identity {enflo_ok}, lower bound {lb}"
    ok = _record(acceptance_log, 10, ok, detail, t0, 60)
    assert ok


# ---------------------------------------------------------------- 11


def _cli(*argv, cwd):
    return subprocess.run([sys.executable, "-m", "cubeembed", *argv], cwd=cwd, capture_output=True, check=False)


def _body(text):
    return "".join(ln + "\n" for ln in text.splitlines() if not ln.startswith("#"))


def test_c11_reproducibility(acceptance_log, tmp_path):
    t0 = time.perf_counter()
    runs = {
        "c02": ["gen-random", "--n", "14", "--card", "5000", "--seed", "3"],
        "c04": ["gen-random", "--n", str(C4_N), "--card", str(c4_set(0).card), "--seed", "0"],
        "c05": ["gen-random", "--n", str(C5_N), "--card", str(c5_set(1).card), "--seed", "1"],
        "c06": ["gen-random", "--n", str(C6_N), "--delta", "1/20", "--seed", "2", "--mode", "rejection",
                "--k", str(C6_K), "--r-min", "1", "--r-max", "1", "--workers", "3"],
        "c06b": ["gen-random", "--n", "20", "--p", "3/40", "--seed", "4", "--workers", "4"],
        "c08": ["gen-random-path", "--n", str(c8_case(0)[0]), "--p", str(c8_case(0)[1]), "--seed", "800"],
    }
    problems = []
    for name, argv in runs.items():
        first = tmp_path / f"{name}.txt"
        r = _cli(*argv, "--out", str(first), cwd=tmp_path)
        if r.returncode != 0:
            problems.append(f"{name}: exit {r.returncode}")
            continue
        for w in (1, 2, 4):
            again = tmp_path / f"{name}.w{w}.txt"
            rr = _cli("rerun", str(first), "--out", str(again), "--workers", str(w), cwd=tmp_path)
            if rr.returncode != 0 or again.read_bytes() != first.read_bytes():
                problems.append(f"{name}: rerun at {w} workers differs")
    # the CLI artifacts hold the very sets the library-level runs above use
    if _body((tmp_path / "c04.txt").read_text()) != write_qset(c4_set(0)):
        problems.append("c04 artifact differs from the acceptance set")
    if _body((tmp_path / "c05.txt").read_text()) != write_qset(c5_set(1)):
        problems.append("c05 artifact differs from the acceptance set")
    if _body((tmp_path / "c08.txt").read_text()) != write_pset(c8_case(0)[4]):
        problems.append("c08 artifact differs from the acceptance set")
    qset = tmp_path / "c04.txt"
    emb = tmp_path / "c04.emb"
    r = _cli("build-cube", "--set", str(qset), "--k", "1", "--mode", "rescaling2", "--delta", "51/100", "--out", str(emb), cwd=tmp_path)
    rr = _cli("rerun", str(emb), "--out", str(tmp_path / "c04b.emb"), cwd=tmp_path)
    if r.returncode != 0 or rr.returncode != 0 or emb.read_bytes() != (tmp_path / "c04b.emb").read_bytes():
        problems.append("build-cube rerun differs")
    ok = _record(acceptance_log, 11, not problems, f"{len(runs) + 1} artifacts, problems: {problems or 'none'}", t0, 600)
    assert ok, problems
