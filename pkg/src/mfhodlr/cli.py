"""Command-line driver: single runs and side-by-side mode comparisons.

A run loads or generates a matrix, optionally row-scales it, orders it,
executes the selected pipeline, and emits a JSON report plus CSV histories.
The reported residual is always recomputed from the original, unscaled
system.
"""

import argparse
import json
import sys
import time
from dataclasses import dataclass, field

import numpy as np

from .krylov import (
    LinearOperator,
    Preconditioner,
    diagonal_preconditioner,
    gmres,
    identity_preconditioner,
    ilut,
)
from .multifrontal import ACCELERATED, CONVENTIONAL, MfParams, mf_factorize, mf_solve
from .ordering import DEFAULT_LEAF_SIZE, build_elimination_tree, nested_dissection
from .problems import MeshSpec, gen_elasticity_hex, gen_poisson7
from .sparse import adjacency_graph, load_matrix_market, row_scale, spmv

MODES = ("mf", "amf", "gmres")
PRECONDS = ("none", "diag", "ilut", "amf")


@dataclass
class RunConfig:
    """One solver invocation: problem source, mode, and parameters."""

    matrix_path: str | None = None
    generator: str | None = None
    mode: str = "mf"
    precond: str = "none"
    n_c: int = 256
    eps: float = 1e-1
    d: int = 1
    n_leaf: int = 64
    k: int = 1
    drop_tol: float = 1e-4
    tol: float = 1e-6
    max_iter: int = 4000
    restart: int = 100
    scale_rows: bool = False
    leaf_size: int = DEFAULT_LEAF_SIZE
    out: str | None = None
    dump_tree: str | None = None

    def problem_key(self):
        return self.matrix_path if self.matrix_path is not None else self.generator

    def validate(self):
        if (self.matrix_path is None) == (self.generator is None):
            raise ValueError("exactly one of --matrix or --gen is required")
        if self.mode not in MODES:
            raise ValueError(f"unknown mode '{self.mode}'")
        if self.precond not in PRECONDS:
            raise ValueError(f"unknown preconditioner '{self.precond}'")


@dataclass
class RunReport:
    """Measured outcome of one run; iterations stays None for direct solves."""

    n: int
    nnz: int
    mode: str
    factor_time_s: float
    solve_time_s: float
    peak_stored_reals: int
    final_relative_residual: float
    iterations: int | None = None
    history_csv: str | None = None
    front_stats_csv: str | None = None

    def to_dict(self):
        doc = {
            "n": self.n,
            "nnz": self.nnz,
            "mode": self.mode,
            "factor_time_s": self.factor_time_s,
            "solve_time_s": self.solve_time_s,
            "peak_stored_reals": self.peak_stored_reals,
            "final_relative_residual": self.final_relative_residual,
        }
        if self.iterations is not None:
            doc["iterations"] = self.iterations
        if self.history_csv is not None:
            doc["history_csv"] = self.history_csv
        if self.front_stats_csv is not None:
            doc["front_stats_csv"] = self.front_stats_csv
        return doc


def parse_generator(spec):
    """``poisson:NX,NY,NZ`` or ``elasticity:NX,NY,NZ[,LAMBDA,MU]``."""
    kind, _, args = spec.partition(":")
    parts = [p for p in args.split(",") if p]
    if kind == "poisson":
        if len(parts) != 3:
            raise ValueError(f"generator '{spec}': expected poisson:NX,NY,NZ")
        nx, ny, nz = (int(p) for p in parts)
        return gen_poisson7(nx, ny, nz)
    if kind == "elasticity":
        if len(parts) not in (3, 5):
            raise ValueError(
                f"generator '{spec}': expected elasticity:NX,NY,NZ[,LAMBDA,MU]"
            )
        nx, ny, nz = (int(p) for p in parts[:3])
        lam, mu = (float(p) for p in parts[3:]) if len(parts) == 5 else (1.0, 1.0)
        return gen_elasticity_hex(MeshSpec(nx, ny, nz, lam, mu))
    raise ValueError(f"unknown generator '{kind}' (use poisson or elasticity)")


def load_problem(config):
    if config.matrix_path is not None:
        A = load_matrix_market(config.matrix_path)
        if A.n_rows != A.n_cols:
            raise ValueError(f"{config.matrix_path}: matrix must be square")
        return A, np.ones(A.n_rows)
    return parse_generator(config.generator)


def mode_label(config):
    if config.mode == "gmres":
        return f"gmres+{config.precond}"
    return {"mf": "direct-conventional", "amf": "direct-accelerated"}[config.mode]


def run(config):
    """Execute one configured run and return its report."""
    config.validate()
    A, b = load_problem(config)
    A_solve, b_solve = A, b
    if config.scale_rows:
        A_solve, b_solve, _ = row_scale(A, b)

    params = MfParams(
        n_c=config.n_c, eps=config.eps, d=config.d, n_leaf=config.n_leaf
    )
    history = None
    stats = None

    t0 = time.perf_counter()
    needs_tree = config.mode in ("mf", "amf") or config.precond == "amf"
    factorization = None
    if needs_tree:
        tree = build_elimination_tree(
            nested_dissection(adjacency_graph(A_solve), leaf_size=config.leaf_size),
            A_solve,
        )
        if config.dump_tree:
            with open(config.dump_tree, "w", encoding="ascii") as fh:
                fh.write(tree.outline() + "\n")
        mf_mode = CONVENTIONAL if config.mode == "mf" else ACCELERATED
        factorization = mf_factorize(A_solve, tree, mf_mode, params)
        stats = factorization.stats
    preconditioner = None
    if config.mode == "gmres":
        if config.precond == "none":
            preconditioner = identity_preconditioner()
        elif config.precond == "diag":
            preconditioner = diagonal_preconditioner(A_solve)
        elif config.precond == "ilut":
            preconditioner = ilut(A_solve, k=config.k, drop_tol=config.drop_tol)
        else:
            preconditioner = Preconditioner(
                lambda v: mf_solve(factorization, v), "accelerated-mf"
            )
    factor_time = time.perf_counter() - t0

    t1 = time.perf_counter()
    iterations = None
    if config.mode in ("mf", "amf"):
        x = mf_solve(factorization, b_solve)
    else:
        op = LinearOperator.from_matrix(A_solve)
        x, history = gmres(
            op, b_solve, M=preconditioner, tol=config.tol,
            max_iter=config.max_iter, restart=config.restart,
        )
        iterations = history.iterations
    solve_time = time.perf_counter() - t1

    # residual honesty: original, unscaled system
    residual = float(np.linalg.norm(spmv(A, x) - b) / np.linalg.norm(b))

    if stats is not None:
        peak = stats.peak_stored_reals
    elif preconditioner is not None:
        peak = preconditioner.stored_reals
    else:
        peak = 0
    report = RunReport(
        n=A.n_rows,
        nnz=A.nnz,
        mode=mode_label(config),
        factor_time_s=factor_time,
        solve_time_s=solve_time,
        peak_stored_reals=int(peak),
        final_relative_residual=residual,
        iterations=iterations,
    )
    if config.out:
        if history is not None:
            report.history_csv = config.out + ".history.csv"
            history.to_csv(report.history_csv)
        if stats is not None:
            report.front_stats_csv = config.out + ".fronts.csv"
            stats.to_csv(report.front_stats_csv)
        with open(config.out, "w", encoding="ascii") as fh:
            json.dump(report.to_dict(), fh, sort_keys=True, indent=2)
            fh.write("\n")
    return report


COMPARE_COLUMNS = ("mode", "factor_time_s", "peak_stored_reals", "iterations",
                   "final_relative_residual")


def compare(configs):
    """Run several configurations of the same problem; returns table rows."""
    if not configs:
        raise ValueError("compare needs at least one configuration")
    keys = {c.problem_key() for c in configs}
    if len(keys) != 1:
        raise ValueError(f"compare requires a shared problem source, got {sorted(keys)}")
    rows = []
    for config in configs:
        report = run(config)
        rows.append(
            {
                "mode": report.mode,
                "factor_time_s": report.factor_time_s,
                "peak_stored_reals": report.peak_stored_reals,
                "iterations": report.iterations,
                "final_relative_residual": report.final_relative_residual,
            }
        )
    return rows


def compare_csv(rows):
    lines = [",".join(COMPARE_COLUMNS)]
    for row in rows:
        lines.append(
            ",".join(
                "" if row[c] is None else
                (f"{row[c]:.6e}" if isinstance(row[c], float) else str(row[c]))
                for c in COMPARE_COLUMNS
            )
        )
    return "\n".join(lines) + "\n"


def compare_text(rows):
    headers = ("mode", "factor[s]", "mem[reals]", "iters", "residual")
    table = [headers]
    for row in rows:
        table.append(
            (
                row["mode"],
                f"{row['factor_time_s']:.3f}",
                str(row["peak_stored_reals"]),
                "-" if row["iterations"] is None else str(row["iterations"]),
                f"{row['final_relative_residual']:.3e}",
            )
        )
    widths = [max(len(r[i]) for r in table) for i in range(len(headers))]
    lines = [
        "  ".join(cell.ljust(widths[i]) for i, cell in enumerate(r)).rstrip()
        for r in table
    ]
    return "\n".join(lines) + "\n"


def add_run_arguments(p):
    p.add_argument("--matrix", help="Matrix Market file path")
    p.add_argument("--gen", help="poisson:NX,NY,NZ or elasticity:NX,NY,NZ[,LAMBDA,MU]")
    p.add_argument("--mode", choices=MODES, default="mf")
    p.add_argument("--precond", choices=PRECONDS, default="none")
    p.add_argument("--nc", type=int, default=256, help="front size threshold")
    p.add_argument("--eps", type=float, default=1e-1, help="low-rank accuracy")
    p.add_argument("--d", type=int, default=1, help="boundary distance depth")
    p.add_argument("--nleaf", type=int, default=64, help="dense leaf size in fronts")
    p.add_argument("--k", type=int, default=1, help="ILUT fill parameter")
    p.add_argument("--droptol", type=float, default=1e-4, help="ILUT drop tolerance")
    p.add_argument("--tol", type=float, default=1e-6, help="GMRES tolerance")
    p.add_argument("--maxit", type=int, default=4000, help="GMRES iteration cap")
    p.add_argument("--restart", type=int, default=100, help="GMRES restart length")
    p.add_argument("--scale-rows", action="store_true", help="row-scale to unit max")
    p.add_argument("--leaf", type=int, default=DEFAULT_LEAF_SIZE,
                   help="nested dissection leaf size")
    p.add_argument("--out", help="report path (JSON; CSVs beside it)")
    p.add_argument("--dump-tree", help="write the elimination tree outline here")


def config_from_args(args):
    return RunConfig(
        matrix_path=args.matrix,
        generator=args.gen,
        mode=args.mode,
        precond=args.precond,
        n_c=args.nc,
        eps=args.eps,
        d=args.d,
        n_leaf=args.nleaf,
        k=args.k,
        drop_tol=args.droptol,
        tol=args.tol,
        max_iter=args.maxit,
        restart=args.restart,
        scale_rows=args.scale_rows,
        leaf_size=args.leaf,
        out=args.out,
        dump_tree=args.dump_tree,
    )


def parse_run_spec(base, spec):
    """Mode spec for compare: e.g. 'mf', 'amf:eps=1e-2,nc=128', 'gmres+ilut:k=2'."""
    head, _, paramstr = spec.partition(":")
    mode, _, precond = head.partition("+")
    if mode not in MODES:
        raise ValueError(f"run spec '{spec}': unknown mode '{mode}'")
    config = RunConfig(**{**base.__dict__})
    config.mode = mode
    config.precond = precond or ("none" if mode == "gmres" else base.precond)
    config.out = None
    fields = {
        "nc": ("n_c", int), "eps": ("eps", float), "d": ("d", int),
        "nleaf": ("n_leaf", int), "k": ("k", int), "droptol": ("drop_tol", float),
        "tol": ("tol", float), "maxit": ("max_iter", int),
        "restart": ("restart", int),
    }
    for item in (p for p in paramstr.split(",") if p):
        key, _, value = item.partition("=")
        if key not in fields:
            raise ValueError(f"run spec '{spec}': unknown parameter '{key}'")
        attr, cast = fields[key]
        setattr(config, attr, cast(value))
    return config


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    if argv and argv[0] not in ("run", "compare", "-h", "--help"):
        argv.insert(0, "run")
    parser = argparse.ArgumentParser(
        prog="mfhodlr",
        description="Multifrontal sparse solver with HODLR-compressed fronts",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="execute one solve")
    add_run_arguments(p_run)
    p_cmp = sub.add_parser("compare", help="run several modes on one problem")
    add_run_arguments(p_cmp)
    p_cmp.add_argument(
        "--run", dest="runs", action="append", default=[],
        metavar="SPEC", help="mode spec, e.g. amf:eps=1e-2,nc=128 (repeatable)",
    )
    args = parser.parse_args(argv)

    try:
        if args.command == "run":
            report = run(config_from_args(args))
            print(json.dumps(report.to_dict(), sort_keys=True, indent=2))
        else:
            base = config_from_args(args)
            specs = args.runs or [base.mode]
            configs = [parse_run_spec(base, spec) for spec in specs]
            rows = compare(configs)
            sys.stdout.write(compare_text(rows))
            if args.out:
                with open(args.out, "w", encoding="ascii") as fh:
                    fh.write(compare_csv(rows))
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
