"""Command line entry point: ``wcspbound INSTANCE [options]``.

Exit status: 0 success, 1 failed ``--verify`` check, 2 usage error,
3 unreadable instance, 4 instance too large for ``--verify``, 5 stopped by
``--time-limit-s`` or ``--max-iters`` (the printed bound is still valid).
"""
from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path

from .core import OracleScaleError
from .optimizer import SOLVER_MODES, SolverConfig, solve
from .oracle import brute_force_optimum, is_reparametrization, is_superreparametrization
from .wcspio import ParseError, parse_native, parse_wcsp_file

EXIT_OK, EXIT_USAGE, EXIT_PARSE, EXIT_SCALE, EXIT_PARTIAL = 0, 2, 3, 4, 5


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="wcspbound",
        description="Upper bound for a maximization WCSP by iterative super-reparametrization.",
    )
    p.add_argument("input", type=Path, help=".wcsp cost function network file, or a native document")
    p.add_argument("--mode", choices=sorted(SOLVER_MODES), default="vsac-sr")
    p.add_argument("--theta-init", default="auto", help="initial activity threshold or 'auto'")
    p.add_argument("--theta-factor", type=float, default=10.0)
    p.add_argument("--theta-min", type=float, default=1e-6)
    p.add_argument("--stall-window", type=int, default=20)
    p.add_argument("--stall-eps", type=float, default=1e-15)
    p.add_argument("--max-iters", type=int, default=None)
    p.add_argument("--time-limit-s", type=float, default=None)
    p.add_argument("--log-csv", type=Path, default=None, help="write per-iteration records here")
    p.add_argument("--verify", action="store_true", help="check the result by enumeration (small instances)")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def load_instance(path: Path):
    data = path.read_bytes()
    if path.suffix == ".wcsp":
        return parse_wcsp_file(data)
    return parse_native(data)


def write_log(path: Path, records) -> None:
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["k", "bound", "theta", "alpha", "cert_nnz", "elapsed"])
        for r in records:
            w.writerow([r.k, repr(r.bound), repr(r.theta), repr(r.alpha), r.cert_nnz, f"{r.elapsed:.6f}"])


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")

    theta_init = args.theta_init
    if theta_init != "auto":
        try:
            theta_init = float(theta_init)
        except ValueError:
            parser.print_usage(sys.stderr)
            print(f"wcspbound: bad --theta-init {args.theta_init!r}", file=sys.stderr)
            return EXIT_USAGE
    try:
        cfg = SolverConfig(
            mode=args.mode,
            theta_init=theta_init,
            theta_factor=args.theta_factor,
            theta_min=args.theta_min,
            stall_window=args.stall_window,
            stall_epsilon=args.stall_eps,
            max_iterations=args.max_iters,
            time_limit=args.time_limit_s,
        )
    except ValueError as exc:
        print(f"wcspbound: {exc}", file=sys.stderr)
        return EXIT_USAGE

    try:
        structure, g = load_instance(args.input)
    except OSError as exc:
        print(f"wcspbound: cannot read {args.input}: {exc.strerror}", file=sys.stderr)
        return EXIT_PARSE
    except (ParseError, ValueError) as exc:
        print(f"wcspbound: {args.input}: {exc}", file=sys.stderr)
        return EXIT_PARSE

    if args.verify:
        try:
            structure.assignment_matrix()
        except OracleScaleError as exc:
            print(f"wcspbound: --verify refused: {exc}", file=sys.stderr)
            return EXIT_SCALE

    rep = solve(structure, g, cfg)
    print(f"{rep.bound:.12g}")
    if args.log_csv is not None:
        write_log(args.log_csv, rep.log)

    if args.verify:
        full, g_full = structure.with_unary_scopes(g)
        opt, _ = brute_force_optimum(structure, g)
        ok = rep.bound >= opt - 1e-9
        if rep.bound > -float("inf"):
            ok &= is_superreparametrization(full, rep.weights, g_full)
            if cfg.mode == "vac":
                ok &= is_reparametrization(full, rep.weights, g_full)
        print(f"verify: optimum {opt:.12g}, checks {'passed' if ok else 'FAILED'}", file=sys.stderr)
        if not ok:
            return 1

    return EXIT_PARTIAL if rep.reason in ("time_limit", "max_iterations") else EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
