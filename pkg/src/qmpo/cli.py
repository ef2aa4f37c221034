"""Command-line interface: ``qmpo {gen,solve,compare,verify,bench}``.

Exit codes: 0 on success (including budget exhaustion, which is reported
in the termination field), 1 on argument, parse or I/O errors, 2 when the
input problem is degenerate or malformed for the solver.
"""

import argparse
from concurrent.futures import ThreadPoolExecutor
import logging
import os
from pathlib import Path
import sys

import numpy as np

from . import reports
from .baselines import BaselineConfig, gpi_solve, rtr_full_solve
from .driver import SolverConfig, rel_obj_diff, solve
from .errors import MatrixMarketError, QmpoError, UndefinedMetricError
from .mmio import write_matrix_market
from .problems import gen_synthetic, load_problem
from .rtr import RtrConfig
from .verification import certify

log = logging.getLogger("qmpo")

SOLVERS = ("lanczos", "gpi", "rtr")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _positive_int(text):
    v = int(text)
    if v <= 0:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return v


def _positive_float(text):
    v = float(text)
    if not v > 0:
        raise argparse.ArgumentTypeError(f"expected a positive number, got {text}")
    return v


def _int_list(text):
    try:
        return [int(t) for t in text.split(",") if t]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _solver_list(text):
    names = [t.strip() for t in text.split(",") if t.strip()]
    bad = [n for n in names if n not in SOLVERS]
    if bad or not names:
        raise argparse.ArgumentTypeError(f"solvers must be drawn from {','.join(SOLVERS)}")
    return names


def _add_problem_args(p):
    p.add_argument("--h", type=Path, help="Matrix Market file with H")
    p.add_argument("--g", type=Path, help="Matrix Market file with G")
    p.add_argument("--n", type=_positive_int, default=2000, help="generated size (no --h/--g)")
    p.add_argument("--l", type=_positive_int, default=10)
    p.add_argument("--density", type=float, default=0.05)
    p.add_argument("--seed", type=int, default=0)


def _add_solver_args(p):
    p.add_argument("--eps-f", type=_positive_float, default=1e-10)
    p.add_argument("--eps-u", type=_positive_float, default=1e-6)
    p.add_argument("--eps-g", type=_positive_float, default=1e-5)
    p.add_argument("--kmax", type=_positive_int, default=1000)
    p.add_argument("--every", type=_positive_int, default=5)
    p.add_argument("--restarts", type=_positive_int, default=1,
                   help="trust-region starts per reduced solve")


def build_parser():
    ap = _Parser(prog="qmpo", description="Block Lanczos solver for quadratic minimization "
                 "with orthogonality constraints.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("gen", help="write a random sparse instance as H.mtx, G.mtx")
    p.add_argument("--n", type=_positive_int, required=True)
    p.add_argument("--l", type=_positive_int, required=True)
    p.add_argument("--density", type=float, default=0.05)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=Path, required=True, help="output directory")

    p = sub.add_parser("solve", help="run block Lanczos on H.mtx, G.mtx")
    p.add_argument("--h", type=Path, required=True)
    p.add_argument("--g", type=Path, required=True)
    _add_solver_args(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--report", type=Path, required=True, help="JSON report path")
    p.add_argument("--history", type=Path, help="checkpoint CSV path")
    p.add_argument("--u-out", type=Path, help="write the solution U (Matrix Market)")

    p = sub.add_parser("compare", help="head-to-head run of several solvers")
    _add_problem_args(p)
    _add_solver_args(p)
    p.add_argument("--solvers", type=_solver_list, default=list(SOLVERS))
    p.add_argument("--out", type=Path, required=True, help="CSV path")
    p.add_argument("--report", type=Path, help="JSON with all solver reports")

    p = sub.add_parser("verify", help="certify the convergence bounds on a small instance")
    p.add_argument("--n", type=_positive_int, default=60)
    p.add_argument("--l", type=_positive_int, default=2)
    p.add_argument("--density", type=float, default=0.1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--restarts", type=_positive_int, default=5)
    p.add_argument("--out", type=Path, required=True, help="certificate JSON path")
    p.add_argument("--csv", type=Path, help="per-step CSV path")

    p = sub.add_parser("bench", help="sweep sizes and block widths of random instances")
    p.add_argument("--sizes", type=_int_list, default=[1000, 2000, 4000])
    p.add_argument("--ls", type=_int_list, default=[10, 20])
    p.add_argument("--density", type=float, default=0.05)
    p.add_argument("--seeds", type=_positive_int, default=1, help="instances per grid point")
    p.add_argument("--solvers", type=_solver_list, default=["lanczos", "gpi"])
    _add_solver_args(p)
    p.add_argument("--out", type=Path, required=True, help="CSV path")
    return ap


def _config(args):
    return SolverConfig(eps_f=args.eps_f, eps_u=args.eps_u, eps_g=args.eps_g, k_max=args.kmax,
                        solve_every=args.every, rtr=RtrConfig(restarts=args.restarts),
                        seed=getattr(args, "seed", 0))


def _workers():
    try:
        return max(1, int(os.environ.get("QMPO_THREADS", "1")))
    except ValueError:
        return 1


def _problem(args):
    if (args.h is None) != (args.g is None):
        raise UsageError("--h and --g must be given together")
    if args.h is not None:
        return load_problem(args.h, args.g)
    return gen_synthetic(args.n, args.l, args.density, args.seed)


def _run_solver(name, problem, cfg):
    if name == "lanczos":
        return solve(problem, cfg)
    if name == "gpi":
        return gpi_solve(problem, BaselineConfig(seed=cfg.seed))
    return rtr_full_solve(problem, cfg.rtr, seed=cfg.seed)


def _run_all(names, problem, cfg):
    workers = min(_workers(), len(names))
    if workers == 1:
        return [_run_solver(nm, problem, cfg) for nm in names]
    with ThreadPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(lambda nm: _run_solver(nm, problem, cfg), names))


def compare_rows(names, reps):
    """CSV rows with relative objective difference against the best solver."""
    f = [r.unscaled_objective for r in reps]
    best = min(f)
    rows = []
    for nm, r, fi in zip(names, reps, f):
        try:
            err = rel_obj_diff(fi, best)
        except UndefinedMetricError:
            err = float("nan")
        rows.append((nm, fi, err, r.unscaled_kkt, r.wall_ms, r.steps, r.termination))
    return rows


def cmd_gen(args):
    prob = gen_synthetic(args.n, args.l, args.density, args.seed)
    args.out.mkdir(parents=True, exist_ok=True)
    write_matrix_market(args.out / "H.mtx", prob.H.data, symmetric=True, comment=prob.name)
    write_matrix_market(args.out / "G.mtx", prob.G, symmetric=False, comment=prob.name)
    print(f"wrote {args.out / 'H.mtx'} and {args.out / 'G.mtx'} (n={args.n}, l={args.l})")
    return 0


def cmd_solve(args):
    prob = load_problem(args.h, args.g)
    cfg = _config(args)
    rep = solve(prob, cfg)
    reports.write_json(args.report, reports.report_dict(rep, prob, cfg))
    if args.history:
        reports.write_text(args.history, reports.history_csv(rep))
    if args.u_out:
        write_matrix_market(args.u_out, rep.U, symmetric=False)
    print(f"{rep.termination}: f={rep.unscaled_objective:.12g} kkt={rep.unscaled_kkt:.3e} "
          f"k={rep.steps} ({rep.wall_ms:.0f} ms)")
    return 0


def cmd_compare(args):
    prob = _problem(args)
    cfg = _config(args)
    reps = _run_all(args.solvers, prob, cfg)
    rows = compare_rows(args.solvers, reps)
    reports.write_text(args.out, reports.csv_text(reports.COMPARE_HEADER, rows))
    if args.report:
        reports.write_json(args.report, {nm: reports.report_dict(r, prob) for nm, r in
                                         zip(args.solvers, reps)})
    for row in rows:
        print(f"{row[0]:>8}  f={row[1]:.12g}  f_err={row[2]:.2e}  kkt={row[3]:.2e}  {row[4]:.0f} ms")
    return 0


def cmd_verify(args):
    prob = gen_synthetic(args.n, args.l, args.density, args.seed)
    cert = certify(prob, restarts=args.restarts, seed=args.seed)
    reports.write_json(args.out, cert.to_dict())
    if args.csv:
        reports.write_text(args.csv, reports.certificate_csv(cert))
    c = cert.counts()
    print(f"{cert.name}: {c['pass']} pass, {c['fail']} fail, {c['skipped']} skipped")
    for name, k in cert.failures:
        print(f"  fail: {name} at k={k}")
    return 0


def cmd_bench(args):
    cfg = _config(args)
    header = ("n", "l", "seed") + reports.COMPARE_HEADER
    rows = []
    for n in args.sizes:
        for l in args.ls:
            for seed in range(args.seeds):
                prob = gen_synthetic(n, l, args.density, seed)
                reps = _run_all(args.solvers, prob, cfg)
                for row in compare_rows(args.solvers, reps):
                    rows.append((n, l, seed) + row)
                    print(f"n={n} l={l} seed={seed} {row[0]:>8} f_err={row[2]:.2e} "
                          f"kkt={row[3]:.2e} {row[4]:.0f} ms")
    reports.write_text(args.out, reports.csv_text(header, rows))
    return 0


COMMANDS = {"gen": cmd_gen, "solve": cmd_solve, "compare": cmd_compare,
            "verify": cmd_verify, "bench": cmd_bench}


def run(argv=None):
    """Parse ``argv`` and dispatch; returns the process exit code."""
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (UsageError, MatrixMarketError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (QmpoError, ValueError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
