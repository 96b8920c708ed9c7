"""Command line interface: ``treeflag <command> [options]``.

Exit status is 0 on success, 2 on unparsable input and 1 when a computation
fails or a certificate is rejected.  Defaults can be set through the
environment variables TREEFLAG_LEVEL, TREEFLAG_TOL, TREEFLAG_THREADS,
TREEFLAG_SLICES and TREEFLAG_DENOM.
"""

import argparse
from fractions import Fraction
import json
import logging
import os
import sys

from . import __version__
from .certify import CertificateError, load_certificate, round_solution, verify_certificate
from .flags import downward, glue_product
from .hierarchy import block_signature, build_level, format_signature
from .profiles import ProfileSpec, outer_approximation
from .sdp import assemble_inducibility_sdp, export_sdpa, solve
from .trees import ParseError, TreeError, enumerate_trees, parse_tree

log = logging.getLogger("treeflag")


def fmt(x):
    """Floats are printed with 7 significant digits."""
    return "%.7g" % x


def _env(name, default, kind=str):
    raw = os.environ.get("TREEFLAG_" + name)
    if raw is None:
        return default
    try:
        return kind(raw)
    except ValueError:
        raise SystemExit("bad value for TREEFLAG_%s: %r" % (name, raw))


def _emit(args, payload, text):
    if args.json:
        print(json.dumps(payload, indent=1))
    else:
        print(text)


def cmd_enumerate(args):
    trees = enumerate_trees(args.leaves)
    enc = [t.encoding(args.unicode) for t in trees]
    _emit(args, {"leaves": args.leaves, "count": len(trees), "trees": enc}, "\n".join(enc))


def cmd_product(args):
    f1, f2 = parse_tree(args.f1), parse_tree(args.f2)
    q = glue_product(f1, f2, args.level)
    if args.unlabel:
        q = downward(q)
    terms = [{"coef": str(c), "flag": t.encoding(args.unicode)} for t, c in q.items()]
    _emit(args, {"f1": f1.encoding(), "f2": f2.encoding(), "unlabeled": bool(args.unlabel),
                 "terms": terms}, q.to_lines(args.unicode))


def cmd_blocks(args):
    h = build_level(args.level)
    sig = block_signature(h)
    total = sum(s * m for s, m in sig)
    if args.dump:
        with open(args.dump, "w") as fh:
            for b in h.blocks:
                fh.write("type %s size %d\n" % (b.sigma.encoding(), b.size))
                for i, f in enumerate(b.flags):
                    fh.write("  flag %d %s\n" % (i, f.encoding()))
                for i in range(b.size):
                    for j in range(i, b.size):
                        fh.write("  entry %d %d: %s\n" % (i, j, " + ".join(
                            "%s %s" % (c, t.encoding()) for t, c in b.entry(i, j).items())))
    _emit(args, {"level": args.level,
                 "signature": [{"size": s, "count": m} for s, m in sig],
                 "total_flags": total},
          "%s  (%d flags)" % (format_signature(sig), total))


def cmd_inducibility(args):
    tree = parse_tree(args.tree)
    inst = assemble_inducibility_sdp(tree, args.level)
    sol = solve(inst, tol=args.tol, max_iter=args.max_iter)
    if args.export:
        export_sdpa(inst, args.export)
    payload = {"tree": tree.encoding(), "level": args.level, "value": sol.primal_objective,
               "dual_value": sol.dual_objective, "status": sol.status,
               "iterations": sol.iterations}
    text = "I_%d(%s) = %s  [%s, %d iterations]" % (args.level, tree.encoding(args.unicode),
                                                    fmt(sol.primal_objective), sol.status,
                                                    sol.iterations)
    if args.certificate:
        cert = round_solution(inst, sol, denom_bound=args.denom)
        with open(args.certificate, "w") as fh:
            fh.write(cert.to_json() + "\n")
        payload["rigorous_bound"] = str(cert.bound)
        text += "\nrigorous bound %s (%s)" % (fmt(float(cert.bound)), cert.bound)
    _emit(args, payload, text)
    return 0 if sol.status == "optimal" else 1


def cmd_verify(args):
    try:
        cert = load_certificate(args.cert)
    except (OSError, ValueError) as exc:
        raise ParseError(str(exc))
    res = verify_certificate(cert)
    payload = {"valid": res.valid, "bound": str(res.bound), "level": cert.level,
               "message": res.message}
    if res.mismatch:
        payload["mismatch"] = {"tree": res.mismatch[0].encoding(), "coefficient": str(res.mismatch[1])}
    text = ("valid: target <= %s at level %d" % (res.bound, cert.level) if res.valid
            else "invalid: %s" % res.message)
    _emit(args, payload, text)
    return 0 if res.valid else 1


def _parse_endpoints(text):
    try:
        return [Fraction(v) for v in text.split(",")]
    except (ValueError, ZeroDivisionError):
        raise ParseError("bad endpoint list %r" % text)


def cmd_profile(args):
    spec = ProfileSpec(parse_tree(args.x), parse_tree(args.y), args.level)
    ends = _parse_endpoints(args.endpoints) if args.endpoints else None
    res = outer_approximation(spec, slices=args.slices, endpoints=ends, threads=args.threads)
    csv_text = res.to_csv(args.out)
    if args.svg:
        res.to_svg(args.svg)
    rows = [dict(zip(["slice_lo", "slice_hi", "lower_slope", "lower_intercept", "upper_slope",
                      "upper_intercept", "status_lower", "status_upper",
                      "conjectured_upper_at_mid"], r)) for r in res.rows()]
    _emit(args, {"x_tree": spec.x_tree.encoding(), "y_tree": spec.y_tree.encoding(),
                 "level": spec.level, "slices": rows}, csv_text.rstrip("\n"))


def cmd_export(args):
    tree = parse_tree(args.tree)
    inst = assemble_inducibility_sdp(tree, args.level)
    export_sdpa(inst, args.out)
    _emit(args, {"tree": tree.encoding(), "level": args.level, "out": args.out,
                 "constraints": inst.n_constraints},
          "wrote %s (%d constraints)" % (args.out, inst.n_constraints))


def build_parser():
    def common_options(suppress):
        # options may come before or after the subcommand
        c = argparse.ArgumentParser(add_help=False)
        d = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
        c.add_argument("--json", action="store_true", default=d(False),
                       help="machine-readable output")
        c.add_argument("--unicode", action="store_true", default=d(False),
                       help="print leaves as •")
        c.add_argument("--threads", type=int,
                       default=d(_env("THREADS", os.cpu_count() or 1, int)))
        c.add_argument("-v", "--verbose", action="store_true", default=d(False))
        return c

    common = common_options(True)
    ap = argparse.ArgumentParser(prog="treeflag", parents=[common_options(False)],
                                 description="Flag algebra bounds for binary tree densities.")
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)
    level = _env("LEVEL", None, int)
    tol = _env("TOL", 1e-8, float)

    p = sub.add_parser("enumerate", parents=[common], help="list trees with n leaves")
    p.add_argument("--leaves", "-n", type=int, required=True)
    p.set_defaults(func=cmd_enumerate)

    p = sub.add_parser("product", parents=[common], help="gluing product of two flags")
    p.add_argument("--f1", required=True)
    p.add_argument("--f2", required=True)
    p.add_argument("--level", type=int, default=None, help="expand to this many leaves")
    p.add_argument("--unlabel", action="store_true", help="apply the averaging operator")
    p.set_defaults(func=cmd_product)

    p = sub.add_parser("blocks", parents=[common], help="block signature of a level")
    p.add_argument("--level", type=int, required=level is None, default=level)
    p.add_argument("--dump", help="write all blocks to this file")
    p.set_defaults(func=cmd_blocks)

    p = sub.add_parser("inducibility", parents=[common], help="upper bound on an inducibility")
    p.add_argument("--tree", required=True)
    p.add_argument("--level", type=int, required=level is None, default=level)
    p.add_argument("--tol", type=float, default=tol)
    p.add_argument("--max-iter", type=int, default=200)
    p.add_argument("--export", help="also write the SDP in SDPA format")
    p.add_argument("--certificate", help="round and write a rational certificate")
    p.add_argument("--denom", type=int, default=_env("DENOM", 10 ** 12, int))
    p.set_defaults(func=cmd_inducibility)

    p = sub.add_parser("verify", parents=[common], help="check a certificate exactly")
    p.add_argument("--cert", required=True)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("profile", parents=[common], help="outer approximation of a profile")
    p.add_argument("--x", required=True)
    p.add_argument("--y", required=True)
    p.add_argument("--level", type=int, required=level is None, default=level)
    p.add_argument("--slices", type=int, default=_env("SLICES", 100, int))
    p.add_argument("--endpoints", help="comma separated slice endpoints, e.g. 4/7,5/8,1")
    p.add_argument("--out", help="CSV output path")
    p.add_argument("--svg", help="SVG output path")
    p.set_defaults(func=cmd_profile)

    p = sub.add_parser("export", parents=[common], help="write an inducibility SDP (SDPA)")
    p.add_argument("--tree", required=True)
    p.add_argument("--level", type=int, required=level is None, default=level)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_export)
    return ap


def main(argv=None):
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args) or 0
    except ParseError as exc:
        print("treeflag: parse error: %s" % exc, file=sys.stderr)
        return 2
    except (TreeError, CertificateError, ValueError, ArithmeticError, OSError) as exc:
        print("treeflag: error: %s" % exc, file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
