"""Benchmark harness and CLI.

Runs single solves (``run_solve``), spectral-equivalence measurements
(``run_spectrum``), and whole table/figure sweeps (``run_table``), emitting
CSV rows plus aligned text tables.  The CLI entry point is ``bench`` with
subcommands ``solve``, ``spectrum``, ``table``, and ``ns1d``; exit code 0 on
success, 1 on usage errors, 2 on numerical failures.

Stopping convention: solves run until the squared relative residual
||f - A x||^2 / ||f||^2 drops below 1e-12, i.e. a relative residual of
1e-6.  Reading the reference tolerance on squared norms is what reproduces
the published iteration counts across every table (the plain-norm reading
gives exactly 1.5x those counts); the reported condition number is the
Lanczos estimate of the same run.
"""

from __future__ import annotations

import argparse
import csv
import sys
import time
from dataclasses import dataclass, field

import numpy as np

from . import assembly, ns1d, schwarz, spectral
from .exceptions import NumericalError
from .mesh import (build_structured, build_unstructured, refine_uniform,
                   save_mesh)
from .sparse import pcg

PROBLEMS = ("poisson", "elasticity")
METHODS = ("fem", "esfem", "sse", "nsfem")
PRECONDS = ("none", "m", "mbar", "mbaralt")
MESH_KINDS = ("structured", "unstructured")

VARIANT_OF = {"m": "standard", "mbar": "enhanced", "mbaralt": "hybrid"}

SOLVE_COLUMNS = ("problem", "method", "precond", "mesh", "n", "N", "delta_h",
                 "iters", "kappa_lanczos", "wall_ms")
SPECTRUM_COLUMNS = ("problem", "method", "mesh", "n", "lambda_min",
                    "lambda_max", "kappa")
NS1D_COLUMNS = ("n", "lower_bound", "kappa")

N_SWEEP = (8, 16, 32, 64, 128)          # fine sizes n = 2^3 .. 2^7
COARSE_SWEEP = (2, 4, 8, 16, 32)        # coarse sizes N = 2 .. 2^5
DEFAULT_UNSTRUCTURED_N = 4              # coarse grid behind unstructured runs
PCG_SQUARED_TOL = 1e-12                 # on ||r||^2 / ||f||^2
PCG_TOL = PCG_SQUARED_TOL**0.5
SPECTRUM_TOL = 1e-8

TABLE_IDS = ("T1", "T2", "T3", "T4", "T5", "T6", "T7", "T8",
             "F4", "F5", "F6")


def _is_pow2(k):
    return isinstance(k, (int, np.integer)) and k >= 1 and (k & (k - 1)) == 0


@dataclass(frozen=True)
class ExperimentConfig:
    """One cell of the experiment grid."""

    problem: str = "poisson"
    method: str = "esfem"
    precond: str = "none"
    mesh: str = "structured"
    n: int = 8
    N: int | None = None
    overlap: int = 2
    seed: int = 0

    def __post_init__(self):
        if self.problem not in PROBLEMS:
            raise ValueError(f"problem must be one of {PROBLEMS}")
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}")
        if self.precond not in PRECONDS:
            raise ValueError(f"precond must be one of {PRECONDS}")
        if self.mesh not in MESH_KINDS:
            raise ValueError(f"mesh must be one of {MESH_KINDS}")
        if not _is_pow2(self.n):
            raise ValueError("n must be a power of two")
        if self.overlap not in (1, 2):
            raise ValueError("overlap (delta/h) must be 1 or 2")
        needs_coarse = self.precond != "none" or self.mesh == "unstructured"
        if needs_coarse and self.N is None:
            raise ValueError("this configuration requires a coarse size --cN")
        if self.N is not None:
            if not _is_pow2(self.N) or self.N < 2:
                raise ValueError("N must be a power of two >= 2")
            if self.n <= self.N:
                raise ValueError("need n > N")


def problem_spec(problem):
    if problem == "poisson":
        return assembly.poisson_benchmark()
    return assembly.elasticity_benchmark()


def build_geometry(config):
    """Fine mesh and, when a coarse size is given, the refinement hierarchy."""
    if config.N is None:
        return build_structured(config.n), None
    if config.mesh == "structured":
        coarse = build_structured(config.N)
    else:
        coarse = build_unstructured(config.N, config.seed)
    levels = int(np.log2(config.n // config.N))
    if config.N * 2**levels != config.n:
        raise ValueError("n must be a power-of-two multiple of N")
    hier = refine_uniform(coarse, levels)
    return hier.fine, hier


@dataclass
class SolveRun:
    """Everything a solve produced, for rows, dumps, and tests."""

    config: ExperimentConfig
    report: object
    row: dict
    checksum: str
    matrix: object
    fine_mesh: object
    wall_ms: float


@dataclass
class SpectrumRun:
    config: ExperimentConfig
    estimate: object
    row: dict
    matrix: object
    fine_mesh: object


def _fmt(x):
    return f"{x:.3e}"


def _assemble_system(config, fine, spec):
    """Post-BC system pieces shared by the solve and spectrum paths."""
    need_standard = (config.method == "fem"
                     or config.precond in ("m", "mbaralt"))
    Kbar = assembly.assemble(fine, spec, config.method)
    f = assembly.assemble_load(fine, spec)
    A_red, f_red, free = assembly.apply_dirichlet(Kbar, f, fine, spec)
    K_red = None
    if need_standard:
        if config.method == "fem":
            K_red = A_red
        else:
            K = assembly.assemble_standard(fine, spec)
            K_red = K.submatrix(free)
    return A_red, f_red, free, K_red


def run_solve(config, max_iter=None):
    """Assemble, decompose, precondition, and solve one configuration."""
    spec = problem_spec(config.problem)
    fine, hier = build_geometry(config)
    t0 = time.perf_counter()
    A_red, f_red, free, K_red = _assemble_system(config, fine, spec)

    precond = None
    if config.precond != "none":
        decomp = schwarz.decompose(hier, config.overlap, spec)
        variant = VARIANT_OF[config.precond]
        if variant == "standard":
            precond = schwarz.build_preconditioner(variant, decomp, K_red)
        elif variant == "enhanced":
            precond = schwarz.build_preconditioner(variant, decomp, A_red,
                                                   Kbar=A_red)
        else:
            precond = schwarz.build_preconditioner(variant, decomp, K_red,
                                                   Kbar=A_red)

    _, report = pcg(A_red, f_red, precond, tol=PCG_TOL, max_iter=max_iter)
    wall_ms = 1000.0 * (time.perf_counter() - t0)

    row = {
        "problem": config.problem,
        "method": config.method,
        "precond": config.precond,
        "mesh": config.mesh,
        "n": config.n,
        "N": "" if config.N is None else config.N,
        "delta_h": "" if config.precond == "none" else config.overlap,
        "iters": report.iterations,
        "kappa_lanczos": ("" if report.lanczos_kappa is None
                          else _fmt(report.lanczos_kappa)),
        "wall_ms": f"{wall_ms:.1f}",
    }
    return SolveRun(config, report, row, A_red.checksum(), A_red, fine,
                    wall_ms)


def run_spectrum(config, tol=SPECTRUM_TOL, method="lanczos"):
    """Generalized condition number of the (K, Kbar) pencil, post-BC."""
    if config.method == "fem":
        raise ValueError("spectrum runs need a smoothing method, not 'fem'")
    spec = problem_spec(config.problem)
    fine, _hier = build_geometry(config)
    Kbar = assembly.assemble(fine, spec, config.method)
    K = assembly.assemble_standard(fine, spec)
    free, _ = assembly.free_dofs(fine, spec)
    K_red = K.submatrix(free)
    Kbar_red = Kbar.submatrix(free)
    est = spectral.generalized_kappa(K_red, Kbar_red, tol=tol,
                                     seed=config.seed, method=method)
    row = {
        "problem": config.problem,
        "method": config.method,
        "mesh": config.mesh,
        "n": config.n,
        "lambda_min": _fmt(est.lambda_min),
        "lambda_max": _fmt(est.lambda_max),
        "kappa": _fmt(est.kappa),
    }
    return SpectrumRun(config, est, row, Kbar_red, fine)


class _SweepRunner:
    """Cell runner for table sweeps; shares assembly, decomposition, and
    factorizations across the preconditioner variants of one (n, N) cell."""

    def __init__(self, problem, method, mesh, seed):
        self.problem = problem
        self.method = method
        self.mesh = mesh
        self.seed = seed
        self.spec = problem_spec(problem)

    def _base_config(self, precond, n, N, overlap):
        return ExperimentConfig(problem=self.problem, method=self.method,
                                precond=precond, mesh=self.mesh, n=n, N=N,
                                overlap=overlap, seed=self.seed)

    def none_row(self, n):
        N = DEFAULT_UNSTRUCTURED_N if self.mesh == "unstructured" else None
        config = self._base_config("none", n, N, 2)
        return run_solve(config).row

    def preconditioned_cells(self, n, N, overlap):
        """Rows for the three variants at one (n, N) cell."""
        config = self._base_config("m", n, N, overlap)
        spec = self.spec
        fine, hier = build_geometry(config)
        A_red, f_red, free, K_red = _assemble_system(config, fine, spec)
        decomp = schwarz.decompose(hier, overlap, spec)
        variants = schwarz.build_all_variants(decomp, K_red, A_red)

        rows = {}
        for precond, variant in VARIANT_OF.items():
            t0 = time.perf_counter()
            _, report = pcg(A_red, f_red, variants[variant], tol=PCG_TOL)
            wall_ms = 1000.0 * (time.perf_counter() - t0)
            rows[precond] = {
                "problem": self.problem,
                "method": self.method,
                "precond": precond,
                "mesh": self.mesh,
                "n": n,
                "N": N,
                "delta_h": overlap,
                "iters": report.iterations,
                "kappa_lanczos": _fmt(report.lanczos_kappa),
                "wall_ms": f"{wall_ms:.1f}",
            }
        return rows


@dataclass
class TableResult:
    table_id: str
    kind: str                 # "solve" | "spectrum" | "ns1d"
    rows: list
    text: str
    failures: list = field(default_factory=list)


def _render_columns(header, body):
    widths = [max(len(str(r[i])) for r in [header] + body)
              for i in range(len(header))]
    lines = ["  ".join(str(c).rjust(w) for c, w in zip(row, widths))
             for row in [header] + body]
    return "\n".join(lines) + "\n"


def _solve_table(table_id, problem, method, seed, mesh="structured",
                 overlap=2, progress=None):
    runner = _SweepRunner(problem, method, mesh, seed)
    rows, failures = [], []
    grid = {}                 # (precond, N, n) -> display cell

    for n in N_SWEEP:
        try:
            row = runner.none_row(n)
            rows.append(row)
            grid[("none", "-", n)] = f"{row['iters']} / {row['kappa_lanczos']}"
        except NumericalError as exc:
            failures.append((("none", n), str(exc)))
            grid[("none", "-", n)] = "FAIL"
        if progress:
            progress(f"{table_id}: none n={n}")

    for N in COARSE_SWEEP:
        for n in N_SWEEP:
            if n < 4 * N:
                continue
            try:
                cells = runner.preconditioned_cells(n, N, overlap)
            except NumericalError as exc:
                failures.append(((N, n), str(exc)))
                for precond in VARIANT_OF:
                    grid[(precond, N, n)] = "FAIL"
                continue
            for precond, row in cells.items():
                rows.append(row)
                grid[(precond, N, n)] = (f"{row['iters']} / "
                                         f"{row['kappa_lanczos']}")
            if progress:
                progress(f"{table_id}: N={N} n={n}")

    header = ["precond", "N"] + [f"n={n}" for n in N_SWEEP]
    body = [["none", "-"] + [grid.get(("none", "-", n), "-")
                             for n in N_SWEEP]]
    for precond in VARIANT_OF:
        for N in COARSE_SWEEP:
            body.append([precond, N]
                        + [grid.get((precond, N, n), "-") for n in N_SWEEP])
    caption = (f"{table_id}: {problem} / {method} / {mesh} meshes, "
               f"delta = {overlap}h (iterations / kappa)\n")
    return TableResult(table_id, "solve", rows,
                       caption + _render_columns(header, body), failures)


def _spectrum_table(table_id, problem, methods, meshes, seed, progress=None):
    rows, failures = [], []
    grid = {}
    for method in methods:
        for mesh in meshes:
            for n in N_SWEEP:
                N = DEFAULT_UNSTRUCTURED_N if mesh == "unstructured" else None
                config = ExperimentConfig(problem=problem, method=method,
                                          precond="none", mesh=mesh, n=n,
                                          N=N, seed=seed)
                try:
                    run = run_spectrum(config)
                    rows.append(run.row)
                    grid[(method, mesh, n)] = run.row["kappa"]
                except NumericalError as exc:
                    failures.append(((method, mesh, n), str(exc)))
                    grid[(method, mesh, n)] = "FAIL"
                if progress:
                    progress(f"{table_id}: {method} {mesh} n={n}")
    header = ["method", "mesh"] + [f"n={n}" for n in N_SWEEP]
    body = [[method, mesh] + [grid.get((method, mesh, n), "-")
                              for n in N_SWEEP]
            for method in methods for mesh in meshes]
    caption = f"{table_id}: kappa(K^-1 Kbar), {problem} problem\n"
    return TableResult(table_id, "spectrum", rows,
                       caption + _render_columns(header, body), failures)


def _figure_series(table_id, problem, seed, fixed_ratios, overlaps,
                   meshes=("structured",), progress=None):
    """kappa series for the hybrid preconditioner at fixed n/N ratios."""
    rows, failures = [], []
    body = []
    for method in ("esfem", "sse"):
        for mesh in meshes:
            for ratio in fixed_ratios:
                for overlap in overlaps:
                    for n in N_SWEEP:
                        N = n // ratio
                        if N < 2 or N * ratio != n:
                            continue
                        config = ExperimentConfig(
                            problem=problem, method=method,
                            precond="mbaralt", mesh=mesh, n=n, N=N,
                            overlap=overlap, seed=seed)
                        try:
                            row = run_solve(config).row
                            rows.append(row)
                            body.append([method, mesh, n, N, overlap,
                                         ratio // overlap, row["iters"],
                                         row["kappa_lanczos"]])
                        except NumericalError as exc:
                            failures.append(((method, n, N, overlap),
                                             str(exc)))
                            body.append([method, mesh, n, N, overlap,
                                         ratio // overlap, "FAIL", "-"])
                        if progress:
                            progress(f"{table_id}: {method} n={n} N={N} "
                                     f"d={overlap}")
    header = ["method", "mesh", "n", "N", "delta_h", "H/delta", "iters",
              "kappa"]
    caption = f"{table_id}: hybrid preconditioner, {problem} problem\n"
    return TableResult(table_id, "solve", rows,
                       caption + _render_columns(header, body), failures)


def _ns1d_table(ns=(4, 8, 16, 32, 64)):
    rows = []
    body = []
    for n in ns:
        bound = ns1d.kappa_lower_bound_1d(n)
        kappa = ns1d.true_kappa_1d(n)
        rows.append({"n": n, "lower_bound": _fmt(bound),
                     "kappa": _fmt(kappa)})
        body.append([n, _fmt(bound), _fmt(kappa)])
    text = ("1D node smoothing: kappa lower bound 3n/4 vs dense kappa\n"
            + _render_columns(["n", "lower_bound", "kappa"], body))
    return TableResult("ns1d", "ns1d", rows, text)


def run_table(table_id, seed=0, progress=None):
    """Run the sweep behind one of the paper's tables or figures."""
    tid = table_id.upper()
    if tid == "T1":
        return _spectrum_table(tid, "poisson", ("esfem", "sse"),
                               ("structured", "unstructured"), seed,
                               progress)
    if tid == "T2":
        return _solve_table(tid, "poisson", "esfem", seed, progress=progress)
    if tid == "T3":
        return _solve_table(tid, "poisson", "sse", seed, progress=progress)
    if tid == "T4":
        return _spectrum_table(tid, "elasticity", ("esfem", "sse"),
                               ("structured",), seed, progress)
    if tid == "T5":
        return _solve_table(tid, "elasticity", "esfem", seed,
                            progress=progress)
    if tid == "T6":
        return _solve_table(tid, "elasticity", "sse", seed,
                            progress=progress)
    if tid == "T7":
        return _spectrum_table(tid, "elasticity", ("nsfem",),
                               ("structured",), seed, progress)
    if tid == "T8":
        return _solve_table(tid, "elasticity", "nsfem", seed,
                            progress=progress)
    if tid == "F4":
        return _figure_series(tid, "poisson", seed, fixed_ratios=(4,),
                              overlaps=(2,),
                              meshes=("structured", "unstructured"),
                              progress=progress)
    if tid == "F5":
        return _figure_series(tid, "poisson", seed, fixed_ratios=(32, 64),
                              overlaps=(2, 1), progress=progress)
    if tid == "F6":
        return _figure_series(tid, "elasticity", seed, fixed_ratios=(4,),
                              overlaps=(2,), progress=progress)
    raise ValueError(f"unknown table id {table_id!r}; "
                     f"choose from {', '.join(TABLE_IDS)}")


def write_csv(rows, columns, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(columns))
        writer.writeheader()
        for row in rows:
            writer.writerow({c: row.get(c, "") for c in columns})


# ----------------------------- CLI ---------------------------------------


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _add_common(p, spectrum=False):
    p.add_argument("--problem", choices=PROBLEMS, default="poisson")
    p.add_argument("--method", choices=METHODS,
                   default="esfem" if spectrum else "fem")
    p.add_argument("--mesh", choices=MESH_KINDS, default="structured")
    p.add_argument("--n", type=int, default=8, help="fine size (power of 2)")
    p.add_argument("--cN", type=int, default=None, dest="cN",
                   help="coarse size N (power of 2, >= 2)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None, help="CSV output path")
    p.add_argument("--dump-matrix", default=None,
                   help="write the post-BC system matrix (MatrixMarket)")
    p.add_argument("--dump-mesh", default=None,
                   help="write the fine mesh (plain text)")


def _build_parser():
    parser = _Parser(prog="bench",
                     description="strain-smoothed FEM benchmark harness")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="assemble and solve one configuration")
    _add_common(p)
    p.add_argument("--precond", choices=PRECONDS, default="none")
    p.add_argument("--overlap", type=int, default=2, choices=(1, 2),
                   help="overlap width delta/h")

    p = sub.add_parser("spectrum", help="generalized condition number "
                                        "kappa(K^-1 Kbar)")
    _add_common(p, spectrum=True)

    p = sub.add_parser("table", help="run a full table/figure sweep")
    p.add_argument("table_id", help=f"one of {', '.join(TABLE_IDS)}")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)
    p.add_argument("--quiet", action="store_true")

    p = sub.add_parser("ns1d", help="1D node-smoothing counterexample")
    p.add_argument("--n", type=int, default=None,
                   help="single even n (default: sweep 4..64)")
    p.add_argument("--out", default=None)
    return parser


def _dumps(args, run):
    if args.dump_matrix:
        assembly.export_matrixmarket(run.matrix, args.dump_matrix)
    if args.dump_mesh:
        save_mesh(run.fine_mesh, args.dump_mesh)


def _cmd_solve(args):
    config = ExperimentConfig(problem=args.problem, method=args.method,
                              precond=args.precond, mesh=args.mesh,
                              n=args.n, N=args.cN, overlap=args.overlap,
                              seed=args.seed)
    run = run_solve(config)
    r = run.row
    print(f"{r['problem']}/{r['method']}/{r['precond']}/{r['mesh']} "
          f"n={r['n']} N={r['N'] or '-'} delta/h={r['delta_h'] or '-'}: "
          f"iters={r['iters']} kappa={r['kappa_lanczos'] or 'n/a'} "
          f"({r['wall_ms']} ms)")
    if not run.report.converged:
        raise NumericalError("PCG did not reach the tolerance")
    if args.out:
        write_csv([run.row], SOLVE_COLUMNS, args.out)
    _dumps(args, run)
    return 0


def _cmd_spectrum(args):
    config = ExperimentConfig(problem=args.problem, method=args.method,
                              precond="none", mesh=args.mesh, n=args.n,
                              N=args.cN, seed=args.seed)
    run = run_spectrum(config)
    r = run.row
    print(f"{r['problem']}/{r['method']}/{r['mesh']} n={r['n']}: "
          f"lambda in [{r['lambda_min']}, {r['lambda_max']}], "
          f"kappa={r['kappa']}")
    if args.out:
        write_csv([run.row], SPECTRUM_COLUMNS, args.out)
    _dumps(args, run)
    return 0


def _cmd_table(args):
    progress = None if args.quiet else (
        lambda msg: print(msg, file=sys.stderr))
    result = run_table(args.table_id, seed=args.seed, progress=progress)
    print(result.text)
    if args.out:
        columns = {"solve": SOLVE_COLUMNS, "spectrum": SPECTRUM_COLUMNS,
                   "ns1d": NS1D_COLUMNS}[result.kind]
        write_csv(result.rows, columns, args.out)
    if result.failures:
        for key, msg in result.failures:
            print(f"FAILED cell {key}: {msg}", file=sys.stderr)
        raise NumericalError(f"{len(result.failures)} cells failed")
    return 0


def _cmd_ns1d(args):
    ns = (args.n,) if args.n is not None else (4, 8, 16, 32, 64)
    result = _ns1d_table(ns)
    print(result.text)
    if args.out:
        write_csv(result.rows, NS1D_COLUMNS, args.out)
    return 0


def main(argv=None):
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        handler = {"solve": _cmd_solve, "spectrum": _cmd_spectrum,
                   "table": _cmd_table, "ns1d": _cmd_ns1d}[args.command]
        return handler(args)
    except (_UsageError, ValueError) as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
