"""Command-line entry points.

Exit codes: 0 success, 1 usage / input / IO error, 2 failed verdict
(certificate, convergence or stability check).
"""
from __future__ import annotations

import argparse
import csv
import itertools
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import io
from .certify import certify, contraction_factor, hur_constant
from .dsl import ExpressionError, evaluate, parse, print_canonical
from .solver import solve
from .stability import (
    CertificateIncomplete,
    InvalidPhi,
    PerturbationSpec,
    SPACE_VARS,
    check_hur,
    default_tol_disc,
    make_perturbed,
    quadrature_error_estimate,
)

log = logging.getLogger("vhstab")

EXIT_OK, EXIT_ERROR, EXIT_FAIL = 0, 1, 2

SWEEP_PARAMS = ("l_g", "l_h", "N", "l_1", "l_2", "m")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


def _out_dir(args) -> Path | None:
    if args.out is None:
        return None
    path = Path(args.out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _emit(args, name: str, payload: dict) -> None:
    text = io.dumps(payload)
    out = _out_dir(args)
    if out is not None:
        (out / name).write_text(text)
    sys.stdout.write(text)


def _load(args) -> io.LoadedProblem:
    if not args.problem:
        raise UsageError("a problem file is required (-p/--problem)")
    return io.load_problem(args.problem)


def cmd_solve(args) -> int:
    lp = _load(args)
    tol = args.tol if args.tol is not None else lp.tol
    max_iter = args.max_iter if args.max_iter is not None else lp.max_iter
    report = solve(lp.instance, tol=tol, max_iter=max_iter)
    _emit(args, "solve.json", io.solve_report_dict(report))
    out = _out_dir(args)
    if out is not None:
        io.write_field(report.u_star, out / "u_star.csv")
    if not report.converged:
        log.error("no convergence after %d iterations", report.iterations)
        return EXIT_FAIL
    return EXIT_OK


def cmd_certify(args) -> int:
    lp = _load(args)
    cert = certify(lp.instance, samples=args.samples, seed=args.seed)
    _emit(args, "certificate.json", io.certificate_dict(cert))
    if not cert.passed:
        failed = sorted(k for k, v in cert.flags.items() if not v)
        log.error("certificate failed: %s", ", ".join(failed))
        return EXIT_FAIL
    return EXIT_OK


def cmd_stability(args) -> int:
    lp = _load(args)
    p = lp.instance
    base = lp.perturbation or PerturbationSpec.from_strings("1", 0.1)
    spec = PerturbationSpec(
        parse(args.shape, SPACE_VARS) if args.shape else base.shape,
        args.epsilon if args.epsilon is not None else base.epsilon,
        parse(args.phi, SPACE_VARS) if args.phi else base.phi,
    )
    cert = certify(p, samples=args.samples, seed=args.seed)
    report = solve(p, tol=lp.tol, max_iter=lp.max_iter)
    if not report.converged:
        log.error("solver did not converge; stability check skipped")
        return EXIT_FAIL
    quad = quadrature_error_estimate(p, report.u_star)
    if args.tol_disc is not None:
        tol_disc, source = args.tol_disc, "command line"
    elif lp.tol_disc is not None:
        tol_disc, source = lp.tol_disc, "problem file"
    else:
        tol_disc, source = default_tol_disc(report.tol, quad), "2 * (solver tol + quadrature error estimate)"
    u = make_perturbed(report.u_star, spec)
    try:
        st = check_hur(p, u, report.u_star, cert, spec, tol_disc)
    except CertificateIncomplete as err:
        log.error("%s", err)
        _emit(args, "stability.json", {"certificate": io.certificate_dict(cert), "hur_holds": False})
        return EXIT_FAIL

    payload = io.stability_report_dict(st)
    payload["tol_disc_source"] = source
    payload["quadrature_error_estimate"] = quad
    payload["perturbation"] = {
        "shape": print_canonical(spec.shape),
        "epsilon": spec.epsilon,
        "phi": None if spec.phi is None else print_canonical(spec.phi),
    }
    payload["certificate"] = io.certificate_dict(cert)
    payload["solve"] = {"converged": report.converged, "iterations": report.iterations}
    _emit(args, "stability.json", payload)
    out = _out_dir(args)
    if out is not None and args.fields:
        for name, f in (
            ("residual", st.residual_field),
            ("phi", st.phi_field),
            ("diff", st.diff_field),
            ("bound", st.bound_field),
        ):
            io.write_field(f, out / f"{name}.csv")
    if not cert.passed:
        log.error("certificate failed")
        return EXIT_FAIL
    if not st.hur_holds:
        log.error("stability bound violated (admissible=%s, min_slack=%.3e)", st.admissible, st.min_slack)
        return EXIT_FAIL
    return EXIT_OK


def _parse_range(spec: str) -> tuple[str, list[float]]:
    try:
        name, rng = spec.split("=", 1)
        parts = rng.split(":")
        if len(parts) == 3:
            lo, hi, num = float(parts[0]), float(parts[1]), int(parts[2])
            values = list(np.linspace(lo, hi, num))
        else:
            values = [float(v) for v in rng.split(",")]
    except ValueError:
        raise UsageError(f"bad --vary value {spec!r}; use name=lo:hi:num or name=v1,v2,...") from None
    name = name.strip()
    if name not in SWEEP_PARAMS:
        raise UsageError(f"cannot sweep {name!r}; choose from {', '.join(SWEEP_PARAMS)}")
    return name, values


def _sweep_point(point: dict[str, float]) -> list:
    q = contraction_factor(point["l_g"], point["l_h"], point["l_1"], point["l_2"])
    lgN = point["l_g"] * point["N"]
    C = hur_constant(lgN, point["m"])
    return [q, q < 1, lgN < 1, C]


def cmd_sweep(args) -> int:
    base = dict.fromkeys(SWEEP_PARAMS, 0.0)
    if args.problem:
        lip = _load(args).instance.lip
        base = {k: getattr(lip, k) for k in SWEEP_PARAMS}
    axes = [_parse_range(v) for v in args.vary or []]
    if not axes:
        raise UsageError("sweep needs at least one --vary")
    names = [a[0] for a in axes]
    points = []
    for combo in itertools.product(*(a[1] for a in axes)):
        point = dict(base)
        point.update(zip(names, combo))
        points.append(point)
    with ThreadPoolExecutor(max_workers=max(1, args.threads)) as pool:
        rows = list(pool.map(_sweep_point, points))

    out = _out_dir(args)
    target = open(out / "sweep.csv", "w", newline="") if out is not None else sys.stdout
    try:
        w = csv.writer(target, lineterminator="\n")
        w.writerow(names + ["q", "C8_pass", "ii_pass", "C_hur"])
        for point, (q, c8, ii, C) in zip(points, rows):
            w.writerow(
                [f"{point[n]:.17g}" for n in names]
                + [f"{q:.17g}", str(c8).lower(), str(ii).lower(), "" if C is None else f"{C:.17g}"]
            )
    finally:
        if target is not sys.stdout:
            target.close()
    return EXIT_OK


def cmd_eval_expr(args) -> int:
    bindings = {}
    for item in args.bind or []:
        try:
            name, value = item.split("=", 1)
            bindings[name.strip()] = float(value)
        except ValueError:
            raise UsageError(f"bad --bind value {item!r}; use name=value") from None
    e = parse(args.expression)
    if args.canonical:
        print(print_canonical(e))
    print(format(evaluate(e, bindings), ".17g"))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-p", "--problem", help="problem file (JSON)")
    common.add_argument("-o", "--out", help="output directory for reports and fields")
    common.add_argument("--seed", type=int, default=0, help="seed for sampled Lipschitz checks")
    common.add_argument("--threads", type=int, default=1, help="worker threads (sweep)")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = _Parser(prog="vhstab", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("solve", parents=[common], help="Picard iteration to the fixed point")
    p.add_argument("--tol", type=float)
    p.add_argument("--max-iter", type=int)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("certify", parents=[common], help="validate declared constants")
    p.add_argument("--samples", type=int, default=1000)
    p.set_defaults(func=cmd_certify)

    p = sub.add_parser("stability", parents=[common], help="perturb u* and check |u-u*| <= C phi")
    p.add_argument("--shape", help="perturbation profile in x, y, z")
    p.add_argument("--epsilon", type=float)
    p.add_argument("--phi", help="explicit phi in x, y, z (default: derived envelope)")
    p.add_argument("--tol-disc", type=float)
    p.add_argument("--samples", type=int, default=1000)
    p.add_argument("--fields", action="store_true", help="dump residual/phi/diff/bound CSVs")
    p.set_defaults(func=cmd_stability)

    p = sub.add_parser("sweep", parents=[common], help="map the contraction / stability region")
    p.add_argument("--vary", action="append", metavar="NAME=LO:HI:NUM")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("eval-expr", parents=[common], help="evaluate an expression")
    p.add_argument("expression")
    p.add_argument("--bind", action="append", metavar="NAME=VALUE")
    p.add_argument("--canonical", action="store_true", help="also print the canonical form")
    p.set_defaults(func=cmd_eval_expr)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        return args.func(args)
    except (UsageError, io.ProblemFileError, ExpressionError, InvalidPhi, OSError) as err:
        print(f"vhstab {args.command}: error: {err}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
