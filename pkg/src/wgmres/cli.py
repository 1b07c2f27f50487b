"""Command-line front end: ``wgmres solve|compare|locp|gen``."""
from __future__ import annotations

import argparse
import json
import statistics
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from . import sparse
from .diagnostics import localization_report, read_eigvecs_file, transform_eigvecs
from .gmres import Method, SolveConfig, solve
from .transform import Transform

EXIT_CONVERGED = 0
EXIT_USAGE = 1
EXIT_BUDGET = 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


@dataclass
class RunSummary:
    method: str
    m: int
    k: int
    power: float
    seed: int
    matvecs: int
    converged: bool
    final_rel_resid2: float
    wall_seconds: float


# --------------------------------------------------------------------------
# argument decoding

def _parse_gen(spec: str):
    parts = spec.split(":")
    if len(parts) < 3 or parts[0] != "gen":
        raise UsageError(f"bad generator spec '{spec}'")
    kind, args = parts[1], parts[2:]
    opts = {}
    for a in args:
        if "=" in a:
            key, val = a.split("=", 1)
            opts[key] = val
        else:
            opts.setdefault("_", a)
    return kind, opts


def load_matrix(spec: str) -> sparse.SparseMatrix:
    if spec.startswith("gen:"):
        kind, opts = _parse_gen(spec)
        try:
            if kind == "laplacian2d":
                return sparse.gen_laplacian_2d(int(opts["N"]))
            if kind == "convdiff":
                return sparse.gen_convdiff_2d(int(opts["N"]))
            if kind == "diag":
                return sparse.gen_diag([float(v) for v in opts["_"].split(",")])
        except (KeyError, ValueError) as exc:
            raise UsageError(f"bad generator spec '{spec}': {exc}") from None
        raise UsageError(f"unknown generator '{kind}'")
    path = Path(spec)
    if not path.exists():
        raise UsageError(f"matrix file not found: {spec}")
    try:
        return sparse.parse_matrix_market(path.read_bytes())
    except ValueError as exc:
        raise UsageError(f"{spec}: {exc}") from None


def load_rhs(spec: str, n: int) -> np.ndarray:
    if spec == "ones":
        return np.ones(n)
    if spec.startswith("randn:"):
        try:
            return sparse.randn_vector(n, int(spec.split(":", 1)[1]))
        except ValueError:
            raise UsageError(f"bad rhs seed in '{spec}'") from None
    if spec.startswith("file:"):
        path = spec.split(":", 1)[1]
        try:
            b = np.loadtxt(path, dtype=float, ndmin=1)
        except (OSError, ValueError) as exc:
            raise UsageError(f"cannot read rhs file {path}: {exc}") from None
        if b.shape != (n,):
            raise UsageError(f"rhs file has {b.size} entries, matrix has {n} rows")
        return b
    raise UsageError(f"unknown rhs spec '{spec}'")


def _parse_range(text):
    try:
        lo, hi = (float(v) for v in text.split(","))
    except ValueError:
        raise UsageError(f"--random-weights expects LO,HI, got '{text}'") from None
    return lo, hi


def _int_list(text):
    out = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if ".." in part:
            a, b = part.split("..")
            out.extend(range(int(a), int(b) + 1))
        else:
            out.append(int(part))
    return out


def _float_list(text):
    out = []
    for part in text.split(","):
        part = part.strip()
        if ".." in part:
            a, b = part.split("..")
            out.extend(float(v) for v in range(int(a), int(b) + 1))
        elif part:
            out.append(float(part))
    return out


def _make_config(method, m, k, power, tol, max_matvec, seed, random_weights):
    try:
        method = Method(method)
        k = k if method.deflated else 0
        return SolveConfig(method=method, m=m, k_deflate=k, power=power, tol=tol,
                           max_matvec=max_matvec, seed=seed, random_weight_range=random_weights)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _run(A, b, config) -> tuple[RunSummary, object]:
    start = time.perf_counter()
    hist = solve(A, b, config=config)
    elapsed = time.perf_counter() - start
    summary = RunSummary(
        method=config.method.value, m=config.m, k=config.k_deflate, power=config.power,
        seed=config.seed, matvecs=hist.matvecs, converged=hist.converged,
        final_rel_resid2=hist.final_rel_resid2, wall_seconds=elapsed,
    )
    return summary, hist


def write_history_csv(hist, path):
    rel = hist.relative()
    with open(path, "w", newline="\n") as fh:
        fh.write("matvec,cycle,resid2,residW\n")
        for mv, cyc, r2, rw in rel[1:]:
            fh.write(f"{int(mv)},{int(cyc)},{r2:.17g},{rw:.17g}\n")


# --------------------------------------------------------------------------
# commands

def cmd_solve(args) -> int:
    A = load_matrix(args.matrix)
    b = load_rhs(args.rhs, A.nrows)
    rw = _parse_range(args.random_weights) if args.random_weights else None
    config = _make_config(args.method, args.m, args.k, args.power, args.tol, args.max_matvec, args.seed, rw)
    summary, hist = _run(A, b, config)
    if args.history:
        write_history_csv(hist, args.history)
    if args.summary:
        Path(args.summary).write_text(json.dumps(asdict(summary), indent=2) + "\n")
    print(f"{summary.method}: matvecs={summary.matvecs} converged={summary.converged} "
          f"rel_resid2={summary.final_rel_resid2:.3e}")
    return EXIT_CONVERGED if hist.converged else EXIT_BUDGET


def _compare_job(job):
    matrix, rhs, vary_rhs, config = job
    A = load_matrix(matrix)
    b = load_rhs(f"randn:{config.seed}" if vary_rhs else rhs, A.nrows)
    summary, _ = _run(A, b, config)
    return summary


def cmd_compare(args) -> int:
    methods = [s for s in args.methods.split(",") if s.strip()]
    if not methods:
        raise UsageError("--methods must name at least one method")
    m_list = _int_list(args.m_list) if args.m_list else [args.m]
    p_list = _float_list(args.power_list) if args.power_list else [args.power]
    seeds = _int_list(args.seeds) if args.seeds else [args.seed]
    rw = _parse_range(args.random_weights) if args.random_weights else None
    # validate the inputs once before fanning out
    A = load_matrix(args.matrix)
    load_rhs(args.rhs, A.nrows)

    groups = []
    jobs = []
    for method in methods:
        for m in m_list:
            for p in p_list:
                configs = [_make_config(method.strip(), m, args.k, p, args.tol, args.max_matvec, s, rw)
                           for s in seeds]
                groups.append((method.strip(), m, p, len(configs)))
                jobs.extend((args.matrix, args.rhs, args.vary_rhs, c) for c in configs)

    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            summaries = list(pool.map(_compare_job, jobs))
    else:
        summaries = [_compare_job(j) for j in jobs]

    aggregates = []
    pos = 0
    for method, m, p, count in groups:
        chunk = summaries[pos:pos + count]
        pos += count
        mv = [s.matvecs for s in chunk]
        aggregates.append({
            "method": method, "m": m, "k": chunk[0].k, "power": p,
            "median_matvecs": statistics.median(mv), "mean_matvecs": statistics.fmean(mv),
            "converged_runs": sum(s.converged for s in chunk), "runs": count,
        })
    out = {
        "metadata": {"matrix": args.matrix, "rhs": args.rhs, "tol": args.tol,
                     "max_matvec": args.max_matvec, "seeds": seeds, "n": A.nrows},
        "runs": [asdict(s) for s in summaries],
        "aggregates": aggregates,
    }
    text = json.dumps(out, indent=2) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_CONVERGED if all(s.converged for s in summaries) else EXIT_BUDGET


def load_eigvecs(spec):
    if spec.startswith("gen:"):
        kind, opts = _parse_gen(spec)
        if kind != "laplacian2d":
            raise UsageError(f"analytic eigenvectors only for laplacian2d, got '{kind}'")
        try:
            N = int(opts["N"])
            seed = int(opts.get("seed", 0))
            count = int(opts.get("count", min(N * N, 40)))
        except (KeyError, ValueError) as exc:
            raise UsageError(f"bad eigvecs spec '{spec}': {exc}") from None
        return sparse.laplacian_2d_eigenpairs(N, count, sparse.randn_vector(N * N, seed))
    try:
        return read_eigvecs_file(spec)
    except OSError as exc:
        raise UsageError(f"cannot read {spec}: {exc}") from None
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def cmd_locp(args) -> int:
    pairs = load_eigvecs(args.eigvecs)
    vecs = [p.vector for p in pairs]
    if args.transform == "dct":
        vecs = transform_eigvecs(vecs, Transform.cosine(len(vecs[0])))
    p_values = [p for p in _int_list(args.p_list) if p <= len(vecs)]
    if not p_values:
        raise UsageError("no p value fits the number of eigenvectors")
    report = localization_report(vecs, p_values)
    print("p loc_p")
    for p, val in zip(report.p_values, report.loc_values):
        print(f"{p} {val:.6f}")
    return EXIT_CONVERGED


def cmd_gen(args) -> int:
    A = load_matrix(args.spec)
    with open(args.out, "w") as fh:
        sparse.write_matrix_market(A, fh)
    return EXIT_CONVERGED


def _add_solver_flags(p):
    p.add_argument("--matrix", required=True)
    p.add_argument("--rhs", default="randn:0")
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--power", type=float, default=1.0)
    p.add_argument("--random-weights", default=None, metavar="LO,HI")
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--max-matvec", type=int, default=20000)
    p.add_argument("--seed", type=int, default=0)


def build_parser():
    parser = _Parser(prog="wgmres", description="Weighted restarted GMRES experiments.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("solve", help="run one solver")
    _add_solver_flags(p)
    p.add_argument("--method", default="gmres", choices=[m.value for m in Method])
    p.add_argument("--m", type=int, default=20)
    p.add_argument("--history", default=None)
    p.add_argument("--summary", default=None)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("compare", help="run a grid of methods, restarts, powers and seeds")
    _add_solver_flags(p)
    p.add_argument("--methods", required=True)
    p.add_argument("--m", type=int, default=20)
    p.add_argument("--m-list", default=None)
    p.add_argument("--power-list", default=None)
    p.add_argument("--seeds", default=None)
    p.add_argument("--vary-rhs", action="store_true", help="draw the rhs as randn:SEED for every seed")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("locp", help="eigenvector localization table")
    p.add_argument("--eigvecs", required=True)
    p.add_argument("--p-list", default="1..40")
    p.add_argument("--transform", choices=["none", "dct"], default="none")
    p.set_defaults(func=cmd_locp)

    p = sub.add_parser("gen", help="write a generated matrix in Matrix Market format")
    p.add_argument("spec")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"wgmres: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"wgmres: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
