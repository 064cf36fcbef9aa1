"""Command-line front end: ``cfregions {region,member,gaussian,simulate}``."""

from __future__ import annotations

import argparse
import logging
import math
import os
import sys
import tempfile
from pathlib import Path

from .achievability import (
    TaskError,
    gaussian_cf_rates,
    gaussian_cf_region,
    joint_region,
    seq_region,
)
from .gflin import BudgetExceeded, GfMatrix, parse_matrix
from .regions import (
    RateRegion,
    format_region,
    format_vertices_csv,
    intersect_all,
    tightest_violation,
    union_all,
    witness_polytope,
)
from .simulator import (
    IntegralityError,
    SimConfig,
    csv_header,
    csv_row,
    nonincreasing_within_ci,
    run_trials,
)
from .specfile import LoadedSpec, SpecFileError, load_spec

EXIT_OK, EXIT_OUTSIDE, EXIT_INPUT, EXIT_BUDGET = 0, 1, 2, 3

log = logging.getLogger("cfregions")


class InputError(ValueError):
    pass


def write_atomic(path: str | Path, text: str) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _floats(text: str, what: str, count: int | None = None) -> list[float]:
    try:
        vals = [float(v) for v in text.replace(" ", "").split(",") if v != ""]
    except ValueError:
        raise InputError(f"{what}: cannot parse {text!r} as comma-separated numbers") from None
    if count is not None and len(vals) != count:
        raise InputError(f"{what}: expected {count} values, got {len(vals)}")
    if not all(math.isfinite(v) for v in vals):
        raise InputError(f"{what}: values must be finite")
    return vals


def _matrix(text: str, q: int, k: int, what: str) -> GfMatrix:
    try:
        m = parse_matrix(text, q, k)
    except ValueError as exc:
        raise InputError(f"{what}: {exc}") from None
    if m.cols != k:
        raise InputError(f"{what}: expected {k} columns, got {m.cols}")
    return m


def build_region(
    loaded: LoadedSpec, fixed_b: list[str] | None, max_lb: int | None, seq: bool, all_bases: bool = False
) -> RateRegion:
    """Region of a spec file: intersection over receivers of each receiver's region."""
    q, k = loaded.spec.q, loaded.K
    bs = [_matrix(b, q, k, "--fixed-b") for b in fixed_b] if fixed_b else None
    if seq and not bs:
        raise InputError("--seq needs at least one --fixed-b matrix")
    parts = []
    for task in loaded.tasks:
        try:
            if seq:
                parts.append(union_all([seq_region(task, b) for b in bs], k))
            else:
                parts.append(joint_region(task, b_list=bs, max_lb=max_lb, bases="all" if all_bases else "rref"))
        except TaskError as exc:
            raise InputError(str(exc)) from None
    return intersect_all(parts)


def _add_region_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("spec", help="channel spec file (YAML)")
    p.add_argument("--fixed-b", action="append", metavar="MATRIX", help='restrict to this B, e.g. "1,0,0;0,1,1" (repeatable)')
    p.add_argument("--max-lb", type=int, default=None, help="largest number of rows of B to enumerate")
    p.add_argument("--seq", action="store_true", help="sequential decoding of the rows of each --fixed-b matrix")
    p.add_argument("--all-bases", action="store_true", help="enumerate every basis of each span of B, not just its RREF")


def cmd_region(args) -> int:
    loaded = load_spec(args.spec)
    region = build_region(loaded, args.fixed_b, args.max_lb, args.seq, args.all_bases)
    text = format_region(region)
    if args.out:
        write_atomic(args.out, text)
        if region.k <= 3:
            vpath = args.vertices or f"{args.out}.vertices.csv"
            write_atomic(vpath, format_vertices_csv(region))
    else:
        sys.stdout.write(text)
        if args.vertices and region.k <= 3:
            write_atomic(args.vertices, format_vertices_csv(region))
    n_cons = sum(len(p.halfspaces) for p in region.polytopes)
    print(f"polytopes: {len(region.polytopes)} constraints: {n_cons}", file=sys.stderr if not args.out else sys.stdout)
    return EXIT_OK


def cmd_member(args) -> int:
    loaded = load_spec(args.spec)
    rates = _floats(",".join(args.rates), "rates", loaded.K)
    if any(r < 0 for r in rates):
        raise InputError("rates must be nonnegative")
    if args.margin < 0:
        raise InputError("--margin must be nonnegative")
    point = [r + args.margin for r in rates]
    region = build_region(loaded, args.fixed_b, args.max_lb, args.seq, args.all_bases)
    idx = witness_polytope(region, point)
    if idx is not None:
        print(f"inside (polytope {idx + 1})")
        return EXIT_OK
    worst = tightest_violation(region, point)
    if worst is None:
        print("outside (region is empty)")
    else:
        pi, hs, viol = worst
        print(f"outside: violated {hs.label()} rhs={hs.rhs:.9g} by {viol:.9g} (polytope {pi + 1})")
    return EXIT_OUTSIDE


def cmd_gaussian(args) -> int:
    h = _floats(args.h, "--h", 2)
    p = _floats(args.p, "--p", 2)
    a = _floats(args.a, "--a", 2)
    if any(v != int(v) for v in a):
        raise InputError("--a must be integers")
    a = [int(v) for v in a]
    if p[0] <= 0 or p[1] <= 0:
        raise InputError(f"powers must be positive, got {p}")
    if a[0] == 0 or a[1] == 0:
        raise InputError("both integer coefficients must be nonzero")
    r1, r2 = gaussian_cf_rates(h, p[0], p[1], a)
    print(f"R_1 <= {r1:.9g}")
    print(f"R_2 <= {r2:.9g}")
    if args.out:
        write_atomic(args.out, format_region(gaussian_cf_region(h, p[0], p[1], a)))
    return EXIT_OK


def cmd_simulate(args) -> int:
    loaded = load_spec(args.spec)
    if len(loaded.tasks) > 1:
        raise InputError("simulation supports a single receiver")
    task = loaded.task
    k = loaded.K
    coeff = _matrix(args.coeff, task.q, k, "--coeff") if args.coeff else task.coeff
    rates = _floats(args.rates, "--rates", k)
    aux = _floats(args.aux_rates, "--aux-rates", k) if args.aux_rates else None
    results = []
    rows = []
    for n in args.n:
        try:
            cfg = SimConfig(task.spec, coeff, n, rates, aux, args.eps, args.eps_prime, args.trials, args.seed)
        except IntegralityError as exc:
            raise InputError(str(exc)) from None
        except ValueError as exc:
            raise InputError(str(exc)) from None
        res = run_trials(cfg)
        results.append(res)
        rows.append(csv_row(res))
        lo, hi = res.wilson()
        rate = "nan" if res.trials == 0 else f"{res.rate:.4f}"
        print(f"n={n} errors={res.errors}/{res.trials} rate={rate} wilson95=[{lo:.4f}, {hi:.4f}] cover_failures={res.cover_failures}")
    if len(results) > 1:
        ok = nonincreasing_within_ci(results)
        print(f"trend: {'non-increasing' if ok else 'increasing'} (95% Wilson intervals)")
    if args.out:
        out = Path(args.out)
        prev = out.read_text() if out.exists() else csv_header(k) + "\n"
        write_atomic(out, prev + "".join(r + "\n" for r in rows))
    else:
        print(csv_header(k))
        for r in rows:
            print(r)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cfregions", description="Compute-forward rate regions for DM-MACs.")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("region", help="compute a rate region and write its facets")
    _add_region_flags(p)
    p.add_argument("--out", help="region file (default: stdout)")
    p.add_argument("--vertices", help="vertices CSV path (default: <out>.vertices.csv when K <= 3)")
    p.set_defaults(func=cmd_region)

    p = sub.add_parser("member", help="test whether a rate tuple is in the region")
    _add_region_flags(p)
    p.add_argument("rates", nargs="+", help="K rates, comma- or space-separated")
    p.add_argument("--margin", type=float, default=0.0, help="added to every rate before the test")
    p.set_defaults(func=cmd_member)

    p = sub.add_parser("gaussian", help="closed-form two-user Gaussian compute-forward bounds")
    p.add_argument("--h", required=True, help="channel gains h1,h2")
    p.add_argument("--p", required=True, help="powers P1,P2")
    p.add_argument("--a", required=True, help="integer coefficients a1,a2")
    p.add_argument("--out", help="region file")
    p.set_defaults(func=cmd_gaussian)

    p = sub.add_parser("simulate", help="Monte Carlo error rate of the nested linear coding scheme")
    p.add_argument("spec", help="channel spec file (YAML)")
    p.add_argument("--n", type=int, nargs="+", required=True, help="block lengths")
    p.add_argument("--rates", required=True, help="message rates R_1,..,R_K in bits")
    p.add_argument("--aux-rates", help="auxiliary rates (default 0)")
    p.add_argument("--coeff", help="override the spec's coefficient matrix A")
    p.add_argument("--eps", type=float, default=0.1)
    p.add_argument("--eps-prime", type=float, default=0.05)
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="CSV file to append to (default: stdout)")
    p.set_defaults(func=cmd_simulate)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
    try:
        return args.func(args)
    except (SpecFileError, InputError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except BudgetExceeded as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
