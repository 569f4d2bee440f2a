"""pink-forge command line.

Exit codes: 0 pass, 1 fail or violation, 2 resource cap exceeded, 3 usage.
"""

from __future__ import annotations

import argparse
import os
import random
import sys
from collections.abc import Sequence
from pathlib import Path

import numpy as np

from . import __version__, dickson, groupfile, identities
from .errors import (
    CapExceeded,
    ConstructionFailed,
    DomainError,
    HypothesisUnmet,
    LemmaViolation,
    NonConvergence,
    NotNormalSylow,
    PrecisionMismatch,
    PreconditionError,
    UnclassifiableError,
)
from .group_engine import (
    DEFAULT_CAP,
    FiniteGroup,
    _unique_rows,
    closure,
    commutator_ball_check,
    goursat_combine,
    graph_defect,
)
from .modlattice import ModLattice, conj_saturate
from .padic_matrix import GroupElement
from .padic_scalar import vee
from .pink_analyzer import (
    INCONCLUSIVE,
    VERIFIED,
    VIOLATION,
    _min_ball_level,
    first_reduction,
    k_found,
    lie_algebra,
    main_theorem_harness,
    pink_proell_check,
)
from .sampler import diagonal_construction, sample_groups

EXIT_PASS, EXIT_FAIL, EXIT_RESOURCE, EXIT_USAGE = 0, 1, 2, 3
VERDICTS = (VERIFIED, INCONCLUSIVE, VIOLATION)
CHECKS = ("pink-proell", "commutator", "goursat", "conj-saturate", "graph-defect",
          "first-reduction", "main-theorem", "identities")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _default_cap() -> int:
    env = os.environ.get("PINK_FORGE_CAP")
    if env is None:
        return DEFAULT_CAP
    try:
        return int(env)
    except ValueError:
        raise UsageError(f"PINK_FORGE_CAP must be an integer, got {env!r}") from None


def _levels(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


# ---------------------------------------------------------------- output


class Report:
    def __init__(self, command: str, cap: int, ring: tuple[int, int, int] | None):
        self.rows: list[tuple[str, str]] = [("tool", f"pink-forge {__version__}"), ("command", command)]
        if ring is not None:
            self.ring(*ring)
        self.rows += [("cap", str(cap)), ("verdicts", ",".join(VERDICTS))]

    def ring(self, p: int, m: int, n: int):
        self.rows += [("prime", str(p)), ("precision", str(m)), ("factors", str(n))]

    def add(self, key: str, value) -> None:
        if isinstance(value, bool):
            value = str(value).lower()
        self.rows.append((key, str(value)))

    def extend(self, pairs) -> None:
        for k, v in pairs:
            if (k, str(v)) not in self.rows:
                self.add(k, v)

    def render(self, fmt: str) -> str:
        sep = "=" if fmt == "machine" else ": "
        return "".join(f"{k}{sep}{v}\n" for k, v in self.rows)


def _status(report: Report, ok: bool) -> int:
    report.add("status", "pass" if ok else "fail")
    return EXIT_PASS if ok else EXIT_FAIL


# ---------------------------------------------------------------- inputs


def _load(args) -> groupfile.GroupFile:
    if not args.file:
        raise UsageError("--file is required")
    try:
        return groupfile.read(args.file)
    except OSError as exc:
        raise UsageError(f"cannot read {args.file}: {exc.strerror}") from None


def _need(args, *names):
    missing = [f"--{n}" for n in names if getattr(args, n) is None]
    if missing:
        raise UsageError(f"missing {', '.join(missing)}")


def _generators(args, default_ball: int) -> list[GroupElement]:
    """Generators from --file, else the ball B(--ball)^n at (--l, --m)."""
    if args.file:
        return _load(args).elements()
    _need(args, "l", "m")
    from .group_engine import ball_tuple_generators

    n = args.n or 1
    ball = default_ball if args.ball is None else args.ball
    gens = ball_tuple_generators(args.l, args.m, (ball,) * n)
    return gens or [GroupElement.identity(args.l, args.m, n)]


def _ring_of(gens: Sequence[GroupElement]) -> tuple[int, int, int]:
    g = gens[0]
    return g.prime, g.precision, g.n


def _group(args, default_ball: int) -> FiniteGroup:
    return closure(_generators(args, default_ball), args.cap)


def _smallest_ball(p: int) -> int:
    return 0 if p >= 5 else 1 + vee(p)


# ---------------------------------------------------------------- commands


def cmd_closure(args) -> tuple[Report, int]:
    gf = _load(args)
    G = closure(gf.elements(), args.cap)
    rep = Report("closure", args.cap, (gf.prime, gf.precision, gf.factors))
    rep.add("order", G.order)
    rep.add("image_order", G.image.shape[0])
    rep.add("kernel_order", G.kernel.shape[0])
    if args.dump:
        for row in G.elements(args.cap):
            rep.add("element", ",".join(map(str, row.tolist())))
    return rep, _status(rep, True)


def _lattice_rows(rep: Report, lat: ModLattice):
    rep.add("lie_precision", lat.precision)
    if not lat.basis:
        rep.add("basis", "0")
    for row in lat.basis:
        rep.add("basis", ",".join(map(str, row)))


def cmd_lie(args) -> tuple[Report, int]:
    gf = _load(args)
    lat = lie_algebra(gf.elements())
    rep = Report("lie", args.cap, (gf.prime, gf.precision, gf.factors))
    _lattice_rows(rep, lat)
    kf = k_found(lat)
    rep.add("k_found", "none" if kf is None else kf)
    return rep, _status(rep, True)


def cmd_classify(args) -> tuple[Report, int]:
    gf = _load(args)
    G = closure(gf.elements(), args.cap)
    p = gf.prime
    rep = Report("classify", args.cap, (p, gf.precision, gf.factors))
    labels = []
    for t in range(gf.factors):
        rows = _unique_rows(G.image[:, 4 * t:4 * t + 4] % p, p)[0]
        label = str(dickson.classify_rows(rows, p))
        labels.append(label)
        rep.add(f"type[{t + 1}]", label)
        rep.add(f"order[{t + 1}]", rows.shape[0])
    ok = True
    if gf.expected_type is not None:
        ok = gf.expected_type == ",".join(labels)
        rep.add("expected_type", gf.expected_type)
    return rep, _status(rep, ok)


def check_pink_proell(args, rep: Report) -> int:
    _need(args, "k")
    G = _group(args, default_ball=1)
    rep.ring(G.prime, G.precision, G.n)
    result = pink_proell_check(G, args.k)
    rep.extend(result.pairs())
    return _status(rep, result.verdict != VIOLATION)


def check_commutator(args, rep: Report) -> int:
    _need(args, "l", "m", "s")
    rep.ring(args.l, args.m, len(args.s))
    level, ok = commutator_ball_check(args.l, args.m, args.s, args.cap, args.method)
    rep.add("levels", ",".join(map(str, args.s)))
    rep.add("method", args.method)
    rep.add("target_level", level)
    verdict = INCONCLUSIVE if ok is None else VERIFIED if ok else VIOLATION
    rep.add("verdict", verdict)
    return _status(rep, verdict != VIOLATION)


def check_goursat(args, rep: Report) -> int:
    if args.file:
        gens = _load(args).elements()
    else:
        _need(args, "l", "m")
        gens = diagonal_construction(args.l, args.m, args.n or 3, 1 if args.ball is None else args.ball)
    p, m, n = _ring_of(gens)
    rep.ring(p, m, n)
    s_off = args.s if args.s else [1 if args.ball is None else args.ball]
    if len(s_off) != 1:
        raise UsageError("goursat takes a single off-diagonal level --s")
    s = [[0 if i == j else s_off[0] for j in range(n)] for i in range(n)]
    result = goursat_combine(gens, s, args.cap)
    rep.add("pair_level", s_off[0])
    rep.add("levels", ",".join(map(str, result.levels)))
    rep.add("verified", ",".join("inconclusive" if v is None else str(v).lower() for v in result.verified))
    for k, comms in sorted(result.witnesses.items()):
        rep.add(f"witnesses[{k + 1}]", len(comms))
    rep.add("verdict", result.verdict)
    return _status(rep, result.verdict != VIOLATION)


def random_lattice(rng: random.Random, p: int, m: int, t: int) -> ModLattice:
    """A random sublattice of sl2 that is nonzero mod l^(t+1)."""
    q = p**m
    while True:
        vecs = [[rng.randrange(q) for _ in range(3)] for _ in range(rng.randint(1, 2))]
        W = ModLattice.span(p, m, 3, vecs)
        if not W.project(t + 1).is_zero():
            return W


def check_conj_saturate(args, rep: Report) -> int:
    _need(args, "l", "m")
    p, m = args.l, args.m
    v = vee(p)
    s = (args.s or [2 if p == 2 else 1])[0]
    rep.ring(p, m, 1)
    rng = random.Random(args.seed)
    count = args.count or 20
    done = 0
    for _ in range(count):
        t = rng.randrange(0, m - 4 * s - 4 * v) if args.t is None else args.t
        conj_saturate(random_lattice(rng, p, m, t), s, t)
        done += 1
    rep.add("s", s)
    rep.add("samples", done)
    rep.add("verdict", VERIFIED)
    return _status(rep, True)


def check_graph_defect(args, rep: Report) -> int:
    _need(args, "t")
    gens = _load(args).elements()
    rep.ring(*_ring_of(gens))
    wit = graph_defect(gens, args.t, args.cap)
    rep.add("t", args.t)
    rep.add("graph_of_isomorphism", wit is None)
    if wit is not None:
        rep.add("witness", ",".join(map(str, wit.key())))
    return _status(rep, True)


def check_first_reduction(args, rep: Report) -> int:
    G = closure(_load(args).elements(), args.cap)
    rep.ring(G.prime, G.precision, G.n)
    n1 = args.n1 if args.n1 is not None else _min_ball_level(G, 0)
    n2 = args.n2 if args.n2 is not None else _min_ball_level(G, 1)
    if n1 is None or n2 is None:
        raise UsageError("no ball below the precision in some factor; pass --n1/--n2")
    rep.add("n1", n1)
    rep.add("n2", n2)
    result = first_reduction(G, max(n1, 1), max(n2, 1))
    rep.extend(result.pairs())
    return _status(rep, result.verdict != VIOLATION)


def check_main_theorem(args, rep: Report) -> int:
    _need(args, "k")
    if args.file:
        G = _group(args, 0)
    else:
        _need(args, "l")
        G = _group(args, _smallest_ball(args.l))
    rep.ring(G.prime, G.precision, G.n)
    result = main_theorem_harness(G, args.k)
    rep.extend(result.pairs())
    return _status(rep, result.verdict != VIOLATION)


def check_identities(args, rep: Report) -> int:
    entries = identities.load_catalog(args.catalog)
    results = identities.run_catalog(entries, args.l, args.m)
    if args.l is not None and args.m is not None:
        rep.ring(args.l, args.m, 1)
    rep.add("catalog", args.catalog)
    names = []
    for r in results:
        if r.name not in names:
            names.append(r.name)
    for name in names:
        mine = [r for r in results if r.name == name]
        bad = [r for r in mine if not r.ok]
        rep.add(f"identity[{name}]", f"{len(mine) - len(bad)}/{len(mine)}")
        for r in bad:
            rep.add("failure", f"{name} " + " ".join(f"{k}={v}" for k, v in r.params) + f" {r.detail}")
    rep.add("instances", len(results))
    ok = bool(results) and all(r.ok for r in results)
    rep.add("verdict", VERIFIED if ok else VIOLATION)
    return _status(rep, ok)


_CHECKS = {
    "pink-proell": check_pink_proell,
    "commutator": check_commutator,
    "goursat": check_goursat,
    "conj-saturate": check_conj_saturate,
    "graph-defect": check_graph_defect,
    "first-reduction": check_first_reduction,
    "main-theorem": check_main_theorem,
    "identities": check_identities,
}


def cmd_check(args) -> tuple[Report, int]:
    rep = Report(f"check {args.name}", args.cap, None)
    return rep, _CHECKS[args.name](args, rep)


def cmd_sample(args) -> tuple[Report | None, int]:
    _need(args, "l", "m")
    n = args.n or 1
    count = args.count or 1
    ball = 1 if args.ball is None else args.ball
    samples = sample_groups(args.l, args.m, n, count, args.seed, proell=args.proell, ball=ball)
    files = [groupfile.GroupFile.from_elements(s.generators, label=s.label) for s in samples]
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        rep = Report("sample", args.cap, (args.l, args.m, n))
        rep.add("seed", args.seed)
        for i, gf in enumerate(files):
            path = out / f"sample-{i:03d}.grp"
            groupfile.write(str(path), gf)
            rep.add("file", path.name)
        return rep, _status(rep, True)
    sys.stdout.write("\n".join(groupfile.dumps(gf) for gf in files))
    return None, EXIT_PASS


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--file", help="group file")
    common.add_argument("--cap", type=int, default=None, help="element cap (default 2^24 or $PINK_FORGE_CAP)")
    common.add_argument("--l", type=int, help="the prime l")
    common.add_argument("--m", type=int, help="precision m")
    common.add_argument("--n", type=int, help="number of SL2 factors")
    common.add_argument("--k", type=int, help="Lie algebra level k")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--count", type=int)
    common.add_argument("--ball", type=int, help="ball level of the default or sampled group")
    common.add_argument("--format", choices=("text", "machine"), default="text")

    parser = _Parser(prog="pink-forge", description="Finite-level checks of large-image statements for SL2(Z_l)^n.")
    parser.add_argument("--version", action="version", version=f"pink-forge {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("closure", parents=[common], help="enumerate the group generated by a file")
    p.add_argument("--dump", action="store_true", help="list every element")
    p.set_defaults(func=cmd_closure)
    sub.add_parser("lie", parents=[common], help="Howell basis of the Lie algebra").set_defaults(func=cmd_lie)
    sub.add_parser("classify", parents=[common], help="Dickson type of each factor mod l").set_defaults(
        func=cmd_classify)

    p = sub.add_parser("check", parents=[common], help="run a named check")
    p.add_argument("name", choices=CHECKS)
    p.add_argument("--s", type=_levels, help="comma-separated ball levels")
    p.add_argument("--t", type=int, help="level t")
    p.add_argument("--n1", type=int)
    p.add_argument("--n2", type=int)
    p.add_argument("--method", choices=("enumerate", "frattini"), default="enumerate",
                   help="commutator check: exact closure or sifted witnesses")
    p.add_argument("--catalog", default="default", help="identity catalog: 'default' or a JSON path")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("sample", parents=[common], help="emit random group files")
    p.add_argument("--proell", action="store_true", help="sample pro-l groups")
    p.add_argument("--out", help="directory for sample-NNN.grp files (default: stdout)")
    p.set_defaults(func=cmd_sample)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # usage errors, --help, --version
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    fmt = args.format
    try:
        if args.cap is None:
            args.cap = _default_cap()
        if args.cap < 1:
            raise UsageError("--cap must be positive")
        rep, code = args.func(args)
    except UsageError as exc:
        print(f"pink-forge: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except CapExceeded as exc:
        print(f"pink-forge: resource: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    except (DomainError, PrecisionMismatch, PreconditionError) as exc:
        print(f"pink-forge: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except LemmaViolation as exc:
        rep = Report(args.command, args.cap, None)
        rep.add("error", exc)
        if exc.certificate is not None:
            rep.add("certificate", _flatten(exc.certificate))
        rep.add("verdict", VIOLATION)
        _status(rep, False)
        sys.stdout.write(rep.render(fmt))
        return EXIT_FAIL
    except (HypothesisUnmet, NonConvergence, ConstructionFailed, NotNormalSylow, UnclassifiableError) as exc:
        rep = Report(args.command, args.cap, None)
        rep.add("error", f"{type(exc).__name__}: {exc}")
        _status(rep, False)
        sys.stdout.write(rep.render(fmt))
        return EXIT_FAIL
    if rep is not None:
        sys.stdout.write(rep.render(fmt))
    return code


def _flatten(obj) -> str:
    if isinstance(obj, dict):
        return ";".join(f"{k}:{_flatten(v)}" for k, v in obj.items())
    if isinstance(obj, (list, tuple, np.ndarray)):
        return "[" + ",".join(_flatten(x) for x in obj) + "]"
    return str(obj)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
