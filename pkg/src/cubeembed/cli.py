"""Batch driver: one subcommand per construction, search or check.

Exit codes: 0 success, 1 valid negative result, 2 inconclusive (cap hit),
3 usage or input error. Every artifact starts with ``#`` lines holding the
full config; ``cubeembed rerun ARTIFACT`` replays it.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import __version__
from .adversary import RandomSetRecipe, certify_no_copy, lll_certificate, sample_set
from .builder import PreconditionError, build_rescaling2_copy, embed_cube_driver, frac_str
from .config import CapExceeded, Caps, RepresentationTooLarge
from .cube_core import (
    as_fraction,
    epsilon_neighborhood,
    random_subset_of_size,
    hoeffding_bound,
    shell_size,
    tail_size,
    upper_tail_size,
)
from .embedding import EmbeddingMap, NotInjectiveError, distortion, find_copy_brute
from .formats import FormatError, read_emb, read_pset, read_qset, write_emb, write_pset, write_qset, write_tset
from .pathspace import PathSubset, cantor_build, path_distortion_search, porosity_embed
from .spaces import PathSpace, TreeSpace
from .treespace import DistortionPrecondition, geodesic_closeness_check, replica_verify, tree_level_set
from .typebounds import EnfloWitness, density_distortion_chain, enflo_check

EXIT_OK, EXIT_NEGATIVE, EXIT_INCONCLUSIVE, EXIT_USAGE = 0, 1, 2, 3
HANDLERS: dict = {}

# arguments that choose where output goes or how fast it is computed, never what it is
_NOT_CONFIG = {"out", "trace", "workers", "handler"}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _g12(x) -> str:
    return format(float(x), ".12g")


def _fmt(v):
    if isinstance(v, Fraction):
        return frac_str(v)
    if isinstance(v, float):
        return _g12(v)
    return v


def _config(args) -> dict:
    return {k: v for k, v in sorted(vars(args).items()) if k not in _NOT_CONFIG}


def _header(args) -> list[str]:
    return [f"cubeembed {__version__} {args.command}", "config=" + json.dumps(_config(args), sort_keys=True)]


def _caps(args) -> Caps:
    return Caps(
        dense_limit=args.dense_limit,
        enumeration_cap=args.enumeration_cap,
        gram_cap=args.gram_cap,
        sample_budget=args.sample_budget,
    )


def _table(args, rows: list[dict]) -> str:
    head = "".join(f"# {c}\n" for c in _header(args))
    rows = [{k: _fmt(v) for k, v in r.items()} for r in rows]
    if args.format == "json":
        return head + json.dumps(rows, indent=2, sort_keys=True, default=str) + "\n"
    buf = io.StringIO()
    keys = list(rows[0]) if rows else []
    w = csv.DictWriter(buf, fieldnames=keys, lineterminator="\n", extrasaction="ignore")
    w.writeheader()
    w.writerows(rows)
    return head + buf.getvalue()


def _json_artifact(args, obj) -> str:
    return "".join(f"# {c}\n" for c in _header(args)) + json.dumps(obj, indent=2, sort_keys=True, default=_fmt) + "\n"


def _read(path: str) -> str:
    try:
        return Path(path).read_text()
    except OSError as e:
        raise UsageError(f"cannot read {path}: {e.strerror}") from None


def _note(msg: str) -> None:
    print(msg, file=sys.stderr)


# ---------------------------------------------------------------- handlers


def cmd_tails(args):
    rows = []
    for n in args.n:
        for e in args.eps:
            eps = as_fraction(e)
            rows.append({
                "n": n,
                "eps": eps,
                "tail": tail_size(eps, n),
                "upper_tail": upper_tail_size(eps, n),
                "shell_measure": Fraction(shell_size(n, eps), 1 << n),
                "hoeffding_bound": hoeffding_bound(eps, n),
            })
    return EXIT_OK, _table(args, rows)


def cmd_neighborhood(args):
    D = read_qset(_read(args.set))
    Dn = epsilon_neighborhood(D, as_fraction(args.eps), args.dense_limit)
    _note(f"mu(D) = {frac_str(D.measure())}, mu(D_eps) = {frac_str(Dn.measure())}")
    return EXIT_OK, write_qset(Dn, _header(args))


def cmd_build_cube(args):
    D = read_qset(_read(args.set))
    if args.mode == "rescaling2":
        res = build_rescaling2_copy(D, args.k, as_fraction(args.delta))
        side = res.trace.to_jsonl()
        if not res.success:
            _note(f"no copy: {res.failure}")
            return EXIT_NEGATIVE, None, side
        _note(f"rescaling-2 copy found (guaranteed={res.guaranteed}, blocks={res.blocks})")
        return EXIT_OK, write_emb(res.embedding, _header(args)), side
    if args.seed is None:
        raise UsageError("--mode driver needs an explicit --seed")
    res = embed_cube_driver(D, args.k, as_fraction(args.eps), as_fraction(args.delta), _caps(args), args.seed)
    side = json.dumps(res.report(), sort_keys=True, indent=2) + "\n"
    if not res.success:
        _note(f"driver stopped at stage {res.stage!r}")
        return EXIT_NEGATIVE, None, side
    _note(f"driver copy found, distortion {frac_str(res.distortion)}")
    return EXIT_OK, write_emb(res.embedding, _header(args)), side


def cmd_find_copy(args):
    D = read_qset(_read(args.set))
    try:
        form = find_copy_brute(D, args.k, (args.r_min, args.r_max), args.enumeration_cap)
    except CapExceeded as e:
        _note(str(e))
        return EXIT_INCONCLUSIVE, None
    if form is None:
        _note("none")
        return EXIT_NEGATIVE, None
    return EXIT_OK, write_emb(form.as_map(), _header(args))


def _recipe(args) -> RandomSetRecipe:
    if (args.p is None) == (args.delta is None):
        raise UsageError("give exactly one of --p and --delta")
    kw = dict(mode=args.mode, max_attempts=args.max_attempts)
    if args.mode == "rejection":
        if args.k is None or args.delta is None:
            raise UsageError("rejection mode needs --k and --delta")
        kw.update(k=args.k, r_range=(args.r_min, args.r_max if args.r_max is not None else args.n // args.k))
    if args.delta is not None:
        return RandomSetRecipe.for_density(args.n, as_fraction(args.delta), args.seed, **kw)
    return RandomSetRecipe(args.n, as_fraction(args.p), args.seed, **kw)


def cmd_gen_random(args):
    if args.card is not None:
        if args.p is not None or args.delta is not None or args.mode != "plain":
            raise UsageError("--card excludes --p, --delta and rejection mode")
        D = random_subset_of_size(args.n, args.card, args.seed)
        return EXIT_OK, write_qset(D, _header(args), args.repr)
    recipe = _recipe(args)
    try:
        res = sample_set(recipe, workers=args.workers, cap=args.enumeration_cap)
    except CapExceeded as e:
        _note(str(e))
        return EXIT_INCONCLUSIVE, None
    if not res.success:
        _note(f"no acceptable set in {res.attempts} attempts "
              f"({res.rejected_density} too sparse, {res.rejected_copy} with a copy)")
        return EXIT_NEGATIVE, None
    _note(f"accepted after {res.attempts} attempt(s); mu = {frac_str(res.subset.measure())}")
    return EXIT_OK, write_qset(res.subset, _header(args) + [f"attempts={res.attempts}"], args.repr)


def cmd_gen_random_path(args):
    D = PathSubset.random(args.n, as_fraction(args.p), args.seed)
    _note(f"{len(D)} points")
    return EXIT_OK, write_pset(D, _header(args))


def cmd_certify(args):
    text = _read(args.set)
    D = read_qset(text)
    cert = certify_no_copy(D, args.k, (args.r_min, args.r_max), args.enumeration_cap)
    _note(cert.status)
    body = "".join(f"# {c}\n" for c in _header(args)) + cert.to_json(set_text=text) + "\n"
    return cert.exit_code, body


def cmd_lll(args):
    b = lll_certificate(args.k, args.R, as_fraction(args.delta))
    return EXIT_OK, _table(args, [b.to_dict()])


def cmd_gen_cantor(args):
    D, trace = cantor_build(args.n, args.k)
    _note(f"{len(D)} points, density {frac_str(D.measure())}, depth {trace.depth}")
    return EXIT_OK, write_pset(D, _header(args)), trace.to_json() + "\n"


def cmd_embed_path(args):
    D = read_pset(_read(args.set))
    res = porosity_embed(D, args.k, as_fraction(args.eps))
    if res.success:
        _note(f"embedded in [{res.interval[0]}, {res.interval[1]}] at distortion {frac_str(res.distortion)}")
        return EXIT_OK, write_emb(res.embedding, _header(args))
    cert = {
        "gaps": [dataclasses.asdict(g) for g in res.gaps],
        "leaves": [dataclasses.asdict(l) for l in res.leaves],
    }
    _note(f"no embedding; {len(res.gaps)} empty intervals certified")
    return EXIT_NEGATIVE, _json_artifact(args, cert)


def cmd_path_oracle(args):
    D = read_pset(_read(args.set))
    status, f, nodes = path_distortion_search(D, args.k, as_fraction(args.max_distortion), args.enumeration_cap)
    _note(f"{status} after {nodes} nodes")
    if status == "found":
        return EXIT_OK, write_emb(f, _header(args))
    return (EXIT_NEGATIVE if status == "none" else EXIT_INCONCLUSIVE), None


def cmd_gen_tree(args):
    S, trace = tree_level_set(args.n, args.k)
    _note(f"levels {sorted(S.levels)}; measure {frac_str(S.measure())}")
    return EXIT_OK, write_tset(S, _header(args), explicit=args.explicit), trace.to_json() + "\n"


def cmd_tree_check(args):
    """Replica check for a tree-to-tree EMB, or closeness check for a path given by ``--map``."""
    if (args.emb is None) == (args.map is None):
        raise UsageError("give exactly one of --emb and --map")
    if args.emb is not None:
        f = read_emb(_read(args.emb))
        if not isinstance(f.source, TreeSpace) or set(f.domain) != set(f.source.points()):
            raise UsageError("--emb must map every vertex of a tree")
        rep = replica_verify(f)
        out = {"kind": "replica", "valid": rep.valid, "violations": rep.violations}
        return (EXIT_OK if rep.valid else EXIT_NEGATIVE), _json_artifact(args, out)
    if args.N is None:
        raise UsageError("--map needs --N")
    pts = []
    for ln in _read(args.map).splitlines():
        ln = ln.strip()
        if ln and not ln.startswith("#"):
            i, _, v = ln.partition("->")
            pts.append((int(i), v.strip()))
    pts.sort()
    if [i for i, _ in pts] != list(range(1, len(pts) + 1)):
        raise UsageError("path points must be 1..k, each once")
    tree = TreeSpace(args.N)
    f = EmbeddingMap(PathSpace(len(pts)), tree, tuple(tree.parse(v) for _, v in pts))
    try:
        rep = geodesic_closeness_check(f, as_fraction(args.r) if args.r else None)
    except DistortionPrecondition as e:
        _note(str(e))
        return EXIT_NEGATIVE, None
    out = {
        "kind": "closeness",
        "passes": rep.passes,
        "r": rep.r,
        "distortion": rep.distortion,
        "closeness": rep.closeness,
        "median_gaps": rep.median_gaps,
        "tight_median_ok": rep.tight_median_ok,
        "chain_ok": rep.chain_ok,
    }
    return (EXIT_OK if rep.passes else EXIT_NEGATIVE), _json_artifact(args, out)


def cmd_enflo(args):
    p = as_fraction(args.p)
    pf = 2 if p == 2 else float(p)
    if args.images:
        rows = np.loadtxt(args.images, delimiter=",", comments="#", ndmin=2)
        if rows.shape[0] != 1 << args.k:
            raise UsageError(f"--images needs 2^{args.k} rows, got {rows.shape[0]}")
        if np.all(rows == np.round(rows)):
            rows = rows.astype(np.int64)
        w = EnfloWitness(args.k, pf, images=rows)
    else:
        w = EnfloWitness.identity(args.k, pf)
    rep = enflo_check(w)
    return EXIT_OK, _table(args, [dataclasses.asdict(rep)])


def cmd_chain(args):
    rep = density_distortion_chain(args.gamma, args.N, args.p, args.T, args.C, args.c)
    body = "".join(f"# {c}\n" for c in _header(args)) + rep.to_json() + "\n"
    if not rep.ok:
        _note("failed: " + "; ".join(rep.failed()))
    return (EXIT_OK if rep.ok else EXIT_NEGATIVE), body


def cmd_verify_embedding(args):
    f = read_emb(_read(args.emb))
    try:
        rep = distortion(f)
    except NotInjectiveError as e:
        _note(f"not injective: {e}")
        return EXIT_NEGATIVE, None
    row = {
        "distortion": rep.distortion,
        "expansion": rep.expansion,
        "contraction": rep.contraction,
        "expansion_pair": " ".join(map(f.source.format, rep.expansion_pair)),
        "contraction_pair": " ".join(map(f.source.format, rep.contraction_pair)),
    }
    _note(f"distortion {frac_str(rep.distortion)}")
    return EXIT_OK, _table(args, [row])


# ---------------------------------------------------------------- parser


def _add_caps(p):
    d = Caps()
    g = p.add_argument_group("caps")
    g.add_argument("--dense-limit", type=int, default=d.dense_limit)
    g.add_argument("--enumeration-cap", type=int, default=d.enumeration_cap)
    g.add_argument("--gram-cap", type=int, default=d.gram_cap)
    g.add_argument("--sample-budget", type=int, default=d.sample_budget)


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="cubeembed", description="Dense-subset embedding experiments.")
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add(name, handler, help, side=False, fmt=False):
        p = sub.add_parser(name, help=help)
        p.set_defaults(handler=handler)
        HANDLERS[name] = handler
        p.add_argument("--out", help="artifact path (default stdout)")
        if side:
            p.add_argument("--trace", help="path for the trace / report side artifact")
        if fmt:
            p.add_argument("--format", choices=("csv", "json"), default="csv")
        _add_caps(p)
        return p

    p = add("tails", cmd_tails, "tail sizes, shell measures and Hoeffding bounds", fmt=True)
    p.add_argument("--n", type=int, nargs="+", required=True)
    p.add_argument("--eps", nargs="+", required=True)

    p = add("neighborhood", cmd_neighborhood, "eps-neighbourhood of a QSET")
    p.add_argument("--set", required=True)
    p.add_argument("--eps", required=True)

    p = add("build-cube", cmd_build_cube, "rescaling-2 builder or (1+eps) driver", side=True)
    p.add_argument("--set", required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--mode", choices=("rescaling2", "driver"), default="driver")
    p.add_argument("--delta", required=True)
    p.add_argument("--eps", default="1/4")
    p.add_argument("--seed", type=int)

    p = add("find-copy", cmd_find_copy, "exhaustive search for an undistorted copy")
    p.add_argument("--set", required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--r-min", type=int, default=1)
    p.add_argument("--r-max", type=int, required=True)

    p = add("gen-random", cmd_gen_random, "seeded random subset of Q_n")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--p")
    p.add_argument("--delta")
    p.add_argument("--card", type=int, help="exact cardinality instead of Bernoulli inclusion")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--mode", choices=("plain", "rejection"), default="plain")
    p.add_argument("--k", type=int)
    p.add_argument("--r-min", type=int, default=1)
    p.add_argument("--r-max", type=int)
    p.add_argument("--max-attempts", type=int, default=1000)
    p.add_argument("--repr", choices=("dense", "sparse"), default="dense")
    p.add_argument("--workers", type=int, default=1)

    p = add("gen-random-path", cmd_gen_random_path, "seeded Bernoulli subset of [n]")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--p", required=True)
    p.add_argument("--seed", type=int, required=True)

    p = add("certify", cmd_certify, "certify that a QSET holds no undistorted copy")
    p.add_argument("--set", required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--r-min", type=int, default=1)
    p.add_argument("--r-max", type=int, required=True)

    p = add("lll", cmd_lll, "local-lemma size budget", fmt=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--R", type=int, required=True)
    p.add_argument("--delta", required=True)

    p = add("gen-cantor", cmd_gen_cantor, "Cantor-type subset of [n]", side=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--k", type=int, required=True)

    p = add("embed-path", cmd_embed_path, "porosity descent for [k] in a PSET")
    p.add_argument("--set", required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--eps", required=True)

    p = add("path-oracle", cmd_path_oracle, "branch-and-bound search for a low-distortion [k]")
    p.add_argument("--set", required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--max-distortion", required=True)

    p = add("gen-tree", cmd_gen_tree, "level-set subset of Tree(n)", side=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--explicit", action="store_true", help="list vertices instead of levels")

    p = add("tree-check", cmd_tree_check, "replica or geodesic-closeness check in Tree(N)")
    p.add_argument("--emb", help="tree-to-tree EMB file")
    p.add_argument("--map", help="path into a tree: lines 'i -> vertex' for i = 1..k")
    p.add_argument("--N", type=int, help="tree depth parameter for --map")
    p.add_argument("--r", help="rescaling for --map (default: smallest ratio)")

    p = add("enflo", cmd_enflo, "Enflo diagonal and edge sums", fmt=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--p", default="2")
    p.add_argument("--images", help="CSV with 2^k rows, row alpha = image of alpha")

    p = add("chain", cmd_chain, "density-to-distortion inequality chain")
    p.add_argument("--gamma", type=float, required=True)
    p.add_argument("--N", type=int, required=True)
    p.add_argument("--p", type=float, default=2.0)
    p.add_argument("--T", type=float, default=1.0)
    p.add_argument("--C", type=float, default=0.6)
    p.add_argument("--c", type=float)

    p = add("verify-embedding", cmd_verify_embedding, "exact distortion of an EMB file", fmt=True)
    p.add_argument("--emb", required=True)

    p = sub.add_parser("rerun", help="replay the config header of an artifact")
    p.add_argument("artifact")
    p.add_argument("--out")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(handler=None)
    return ap


def config_from_artifact(text: str) -> dict:
    for ln in text.splitlines():
        if ln.startswith("# config="):
            return json.loads(ln[len("# config="):])
    raise UsageError("artifact has no config header")


def _args_from_config(cfg: dict, out, workers) -> argparse.Namespace:
    handler = HANDLERS.get(cfg.get("command"))
    if handler is None:
        raise UsageError(f"cannot replay command {cfg.get('command')!r}")
    return argparse.Namespace(**cfg, handler=handler, out=out, trace=None, workers=workers)


def _emit(path, text) -> None:
    if text is None:
        return
    if path:
        Path(path).write_text(text)
    else:
        sys.stdout.write(text)


def run(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
        if args.command == "rerun":
            cfg = config_from_artifact(_read(args.artifact))
            args = _args_from_config(cfg, args.out, args.workers)
        res = args.handler(args)
    except UsageError as e:
        print(f"cubeembed: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as e:  # --help / --version
        return int(e.code or 0)
    except (FormatError, PreconditionError, RepresentationTooLarge, ValueError) as e:
        print(f"cubeembed: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    code, artifact, *side = res
    _emit(args.out, artifact)
    if side and getattr(args, "trace", None):
        Path(args.trace).write_text(side[0])
    return code


def main() -> None:
    sys.exit(run())
