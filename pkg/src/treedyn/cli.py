"""Command-line front end.

Exit codes: 0 success, 1 validation failure, 2 input or parse error,
3 internal invariant violation.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from fractions import Fraction
from typing import List, Optional, Sequence

from treedyn import chainrec, fileformat, orbits, seqentropy
from treedyn.errors import ConsistencyError, InputError, ParseError, PreconditionError
from treedyn.examples import build_counterexample
from treedyn.fileformat import format_number
from treedyn.plmap import factor
from treedyn.space import TreePoint, collapse

EXIT_OK, EXIT_INVALID, EXIT_INPUT, EXIT_INTERNAL = 0, 1, 2, 3


def _numbers(text: str) -> List[str]:
    return [t.strip() for t in text.split(",") if t.strip()]


def _load(args):
    fmap = fileformat.load(args.file)
    if args.numeric == "float":
        fmap = fmap.to_float()
    elif args.numeric == "rational" and not fmap.exact:
        raise InputError("a float map cannot be read in rational mode")
    return fmap


def _num(tree, text: str):
    return fileformat.parse_number(text, tree.numeric)


def _point(tree, text: str) -> TreePoint:
    try:
        edge, off = text.split(":")
        return tree.point(int(edge), _num(tree, off))
    except ValueError:
        raise InputError(f"points are written edge:offset, got {text!r}") from None


def _ball(tree, text: str) -> seqentropy.Ball:
    try:
        edge, off, radius = text.split(":")
        return seqentropy.Ball(tree.point(int(edge), _num(tree, off)), _num(tree, radius))
    except ValueError:
        raise InputError(f"balls are written edge:offset:radius, got {text!r}") from None


def _samples(fmap, args):
    if args.seed is not None:
        return seqentropy.random_samples(fmap.tree, args.samples, args.seed)
    return seqentropy.uniform_samples(fmap.tree, args.samples)


def _emit(obj: dict, args, csv_header: Optional[Sequence] = None, csv_rows=None) -> None:
    text = json.dumps(obj, sort_keys=True, indent=2)
    print(text)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
        if csv_header is not None:
            stem, _ = os.path.splitext(args.out)
            with open(stem + ".csv", "w", newline="", encoding="utf-8") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(csv_header)
                w.writerows(csv_rows)


def cmd_validate(args) -> int:
    with open(args.file, encoding="utf-8") as fh:
        report = fileformat.validate_text(fh.read())
    _emit(report.to_json(), args)
    return EXIT_OK if report.ok else EXIT_INVALID


def cmd_cr(args) -> int:
    fmap = _load(args)
    mesh = _num(fmap.tree, args.mesh)
    if args.epsilon:
        report = chainrec.recurrence_report(fmap, mesh, [_num(fmap.tree, e) for e in _numbers(args.epsilon)],
                                            args.horizon, relative=False)
    else:
        report = chainrec.recurrence_report(fmap, mesh, horizon=args.horizon)
    grid = report.grid
    rows = []
    for k, c in enumerate(grid.cells):
        rows.append([k, c.edge, format_number(c.offset)]
                    + [int(k in report.chain_recurrent[e]) for e in report.epsilons]
                    + [int(k in report.nonwandering)])
    header = ["cell", "edge", "offset"] + [f"cr_{format_number(e)}" for e in report.epsilons] + ["nonwandering"]
    _emit(report.to_json(), args, header, rows)
    return EXIT_OK


def entropy_estimate(fmap, sequence: str, n_max: int, epsilons: Sequence[float], samples: int,
                     seed: Optional[int] = None, restrict_to_cr: bool = False, mesh=None):
    """The computation behind ``treedyn entropy`` (also used by the tests)."""
    seq = seqentropy.TimeSequence.parse(sequence)
    if restrict_to_cr:
        grid = chainrec.build_grid(fmap.tree, mesh)
        cells = chainrec.chain_recurrent_cells(chainrec.build_eps_chain_graph(fmap, grid, grid.mesh))
        if not cells:
            raise InputError("no chain-recurrent cells at this mesh")
        return seqentropy.entropy_on_restriction(fmap, cells, grid, seq, n_max, epsilons)
    pts = (seqentropy.random_samples(fmap.tree, samples, seed) if seed is not None
           else seqentropy.uniform_samples(fmap.tree, samples))
    return seqentropy.h_A_estimate(fmap, pts, seq, n_max, epsilons)


def cmd_entropy(args) -> int:
    fmap = _load(args)
    eps = [float(Fraction(e)) for e in _numbers(args.epsilon or "1/64,1/128")]
    est = entropy_estimate(fmap, args.sequence, args.nmax, eps, args.samples, args.seed,
                           args.restrict_to_cr, _num(fmap.tree, args.mesh))
    out = est.to_json()
    out["restricted_to_cr"] = bool(args.restrict_to_cr)
    _emit(out, args, seqentropy.CSV_HEADER, est.csv_rows())
    return EXIT_OK


def cmd_independence(args) -> int:
    fmap = _load(args)
    if not (args.U and args.V):
        raise InputError("--U and --V are required")
    U, V = _ball(fmap.tree, args.U), _ball(fmap.tree, args.V)
    cert = seqentropy.independence_search(fmap, _samples(fmap, args), U, V, args.horizon, args.kmax)
    _emit(cert.to_json(), args)
    return EXIT_OK


def cmd_counterexample(args) -> int:
    if args.N < 1:
        raise InputError("N must be >= 1")
    spec = build_counterexample(args.N)
    if not args.out:
        print(fileformat.dumps(spec.fmap), end="")
        return EXIT_OK
    fileformat.dump(spec.fmap, args.out)
    print(json.dumps({"N": args.N, "path": args.out, "vertices": len(spec.tree.vertices),
                      "edges": len(spec.tree.edges)}, sort_keys=True))
    return EXIT_OK


def cmd_iterate(args) -> int:
    fmap = _load(args)
    p = _point(fmap.tree, args.point)
    rec = orbits.orbit(fmap, p, args.horizon)
    rep = orbits.detect_period(fmap, p, args.horizon)
    out = {
        "orbit": [[q.edge, format_number(q.offset)] for q in rec.points],
        "periodicity": rep.to_json(),
    }
    rows = [[n, q.edge, format_number(q.offset)] for n, q in enumerate(rec.points)]
    _emit(out, args, ["n", "edge", "offset"], rows)
    return EXIT_OK


def cmd_factor(args) -> int:
    fmap = _load(args)
    if not args.collapse:
        raise InputError("--collapse needs a comma-separated list of edge ids")
    proj = collapse(fmap.tree, [int(e) for e in _numbers(args.collapse)])
    g = factor(fmap, proj)
    g.name = (fmap.name + "-factor") if fmap.name else "factor"
    text = fileformat.dumps(g)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
        print(json.dumps({"path": args.out, "collapsed_vertex": proj.vertex,
                          "edges": len(g.tree.edges)}, sort_keys=True))
    else:
        print(text, end="")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="treedyn", description="Dynamics of piecewise-linear tree maps.")
    sub = parser.add_subparsers(dest="command", required=True)

    def with_file(p):
        p.add_argument("file", help="map definition file")
        p.add_argument("--numeric", choices=("rational", "float"), default=None,
                       help="arithmetic mode (default: as declared in the file)")
        p.add_argument("--out", default=None, help="write JSON here and CSV next to it")
        return p

    p = sub.add_parser("validate", help="parse and check a map file")
    p.add_argument("file")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_validate)

    p = with_file(sub.add_parser("cr", help="chain-recurrent and non-wandering cells"))
    p.add_argument("--mesh", default="1/64", help="grid mesh (default 1/64)")
    p.add_argument("--epsilon", default=None,
                   help="comma-separated absolute epsilons (default 4,2,1 times the mesh)")
    p.add_argument("--horizon", type=int, default=32, help="return horizon for non-wandering (default 32)")
    p.set_defaults(func=cmd_cr)

    p = with_file(sub.add_parser("entropy", help="sequence entropy estimate"))
    p.add_argument("--sequence", default="full", help="full, pow2 or custom:<a1,a2,...> (default full)")
    p.add_argument("--nmax", type=int, default=12, help="largest n (default 12)")
    p.add_argument("--epsilon", default=None, help="comma-separated epsilons (default 1/64,1/128)")
    p.add_argument("--samples", type=int, default=4096, help="number of sample points (default 4096)")
    p.add_argument("--seed", type=int, default=None, help="random samples from this seed (default: uniform)")
    p.add_argument("--restrict-to-cr", action="store_true",
                   help="use the chain-recurrent cell centres (epsilon = mesh) as samples")
    p.add_argument("--mesh", default="1/128", help="grid mesh for --restrict-to-cr (default 1/128)")
    p.set_defaults(func=cmd_entropy)

    p = with_file(sub.add_parser("independence", help="independence certificate search"))
    p.add_argument("--U", required=True, help="ball edge:offset:radius")
    p.add_argument("--V", required=True, help="ball edge:offset:radius")
    p.add_argument("--horizon", type=int, default=12, help="largest time (default 12)")
    p.add_argument("--kmax", type=int, default=8, help="largest certificate size sought (default 8)")
    p.add_argument("--samples", type=int, default=4096, help="number of sample points (default 4096)")
    p.add_argument("--seed", type=int, default=None, help="random samples from this seed (default: uniform)")
    p.set_defaults(func=cmd_independence)

    p = sub.add_parser("counterexample", help="write the level-N dendrite map")
    p.add_argument("N", type=int)
    p.add_argument("--out", default=None, help="output file (default stdout)")
    p.set_defaults(func=cmd_counterexample)

    p = with_file(sub.add_parser("iterate", help="orbit and period of a point"))
    p.add_argument("--point", required=True, help="edge:offset")
    p.add_argument("--horizon", type=int, default=64, help="number of steps (default 64)")
    p.set_defaults(func=cmd_iterate)

    p = sub.add_parser("factor", help="collapse an invariant subtree and write the induced map")
    p.add_argument("file")
    p.add_argument("--collapse", required=True, help="comma-separated edge ids of the subtree")
    p.add_argument("--numeric", choices=("rational", "float"), default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_factor)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ParseError, InputError, PreconditionError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except ConsistencyError as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except Exception as exc:  # noqa: BLE001
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
