"""Command-line runner: ``fracspec <subcommand> --config FILE [options]``.

Every run writes ``manifest.json`` next to its outputs. CSV numbers use the
shortest round-trip representation (``repr`` of a Python float).

Exit codes: 0 success, 1 validation error (bad flags, config or inputs),
2 numerical failure.
"""

from __future__ import annotations

import argparse
import configparser
import json
import logging
import os
import sys
from pathlib import Path
from typing import Callable, Mapping, Sequence

import numpy as np

from . import __version__
from ._accel import backend
from .diagnostics import (
    estimate_monitor,
    laplace_residual,
    oracle_errors,
    random_draws,
    regularity_exponent,
)
from .elliptic_compat import compat_defect, compatible_problem
from .fd_oracle import FDScheme, NumericalFailure
from .mittag_leffler import MLParams, ml_eval
from .problem_model import Problem, ProblemError, load_problem_file
from .spectral_basis import BasisError, Interval, SpectralBasis, build_basis, save_basis
from .weak_solver import SolverError, TimeGrid, evaluate_solution, solve_modes, write_series_csv

log = logging.getLogger("fracspec")

SUBCOMMANDS = (
    "solve", "eigen", "ml-eval", "check-compat", "regularity",
    "oracle-compare", "laplace-check", "monitor",
)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad flags; 2 is reserved for numerical failures here
    def error(self, message):
        raise UsageError(f"{self.format_usage()}{self.prog}: error: {message}")


def _fmt(v) -> str:
    return repr(float(v))


def _write_csv(path: Path, header: Sequence[str], rows) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(v if isinstance(v, str) else _fmt(v) for v in row) + "\n")


# --------------------------------------------------------------------------
# settings


class Settings:
    """Typed access to the ``[solver]`` section."""

    def __init__(self, raw: Mapping[str, str]):
        self.raw = dict(raw)

    def _get(self, key, default, conv):
        if key not in self.raw:
            return default
        try:
            return conv(self.raw[key])
        except ValueError:
            raise ProblemError(f"solver.{key}", f"invalid value {self.raw[key]!r}") from None

    def int(self, key, default=None):
        return self._get(key, default, int)

    def float(self, key, default=None):
        return self._get(key, default, float)

    def str(self, key, default=None):
        return self._get(key, default, lambda s: s.strip())

    def floats(self, key, default=()):
        return self._get(key, tuple(default), lambda s: tuple(float(v) for v in s.split(",") if v.strip()))

    def ints(self, key, default=()):
        return self._get(key, tuple(default), lambda s: tuple(int(v) for v in s.split(",") if v.strip()))

    def flag(self, key, default=False):
        def conv(s):
            s = s.strip().lower()
            if s in ("1", "yes", "true", "on"):
                return True
            if s in ("0", "no", "false", "off"):
                return False
            raise ValueError(s)
        return self._get(key, default, conv)


def _basis(problem: Problem, st: Settings, N: int | None = None) -> SpectralBasis:
    N = N or st.int("N", 64)
    mesh = st.int("mesh", 10 * N if isinstance(problem.domain, Interval) else 64)
    return build_basis(problem.domain, problem.coefficients, problem.chi, N, mesh,
                       trace_method=st.str("trace", "flux"))


def _prepared(problem: Problem, st: Settings, basis: SpectralBasis) -> Problem:
    """Apply ``solver.compatible = yes | velocity``."""
    mode = st.str("compatible", "no").lower()
    if mode in ("no", "0", "false", "off"):
        return problem
    if mode in ("yes", "1", "true", "on"):
        return compatible_problem(problem, basis)
    if mode == "velocity":
        return compatible_problem(problem, basis, velocity=True)
    raise ProblemError("solver.compatible", f"expected yes, no or velocity, got {mode!r}")


def _grid(problem: Problem, st: Settings, n_default: int) -> TimeGrid:
    n = st.int("n_uniform", n_default)
    h_min = st.float("h_min_rel", 1e-8) * problem.T
    return TimeGrid.build(problem.T, n, h_min=h_min)


# --------------------------------------------------------------------------
# subcommands


def cmd_solve(ctx) -> list[str]:
    problem, st = ctx.problem(), ctx.settings
    basis = _basis(problem, st)
    problem = _prepared(problem, st, basis)
    derivs = st.ints("derivatives", ())
    series = solve_modes(problem, basis, _grid(problem, st, 1000), derivatives=derivs,
                         threads=ctx.threads)
    out = ctx.out
    files = ["modes.csv"]
    write_series_csv(series, out / "modes.csv")
    for k in derivs:
        write_series_csv(series, out / f"modes_d{k}.csv", which=k)
        files.append(f"modes_d{k}.csv")

    interval = isinstance(problem.domain, Interval)
    lift = st.flag("lift", interval)
    x = None
    if interval:
        d = problem.domain
        x = np.linspace(d.x0, d.x1, st.int("field_points", 101))
    # field on the uniform grid, thinned to at most field_times rows
    uni = np.flatnonzero((series.t == 0.0) | (series.t >= series.grid.h * (1 - 1e-12)))
    stride = max(1, int(np.ceil((uni.size - 1) / st.int("field_times", 100))))
    rows = uni[::stride]
    if rows[-1] != uni[-1]:
        rows = np.append(rows, uni[-1])
    sub = series.restrict(problem.T)
    sub.t, sub.values = series.t[rows], series.values[rows]
    field_, info = evaluate_solution(sub, basis, x=x, problem=problem, lift=lift)
    with open(out / "field.csv", "w", encoding="utf-8") as fh:
        if interval:
            fh.write("t,x,u\n")
            for tk, row in zip(sub.t, field_):
                for xi, v in zip(x, row):
                    fh.write(f"{_fmt(tk)},{_fmt(xi)},{_fmt(v)}\n")
        else:
            fh.write("t,x,y,u\n")
            for tk, row in zip(sub.t, field_):
                for (xi, yi), v in zip(basis.nodes, row):
                    fh.write(f"{_fmt(tk)},{_fmt(xi)},{_fmt(yi)},{_fmt(v)}\n")
    files.append("field.csv")
    ctx.say(f"solved {basis.N} modes on {series.t.size} times ({series.grid.describe()})")
    ctx.say(f"tail indicator {info['tail_indicator']:.3g}; lifted reconstruction: {lift}")
    return files


def cmd_eigen(ctx) -> list[str]:
    problem, st = ctx.problem(), ctx.settings
    basis = _basis(problem, st)
    save_basis(basis, ctx.out / "basis.txt")
    header = ["n", "lambda"] + [f"trace_{j + 1}" for j in range(basis.n_boundary)]
    if basis.n_boundary > 8:
        header = ["n", "lambda"]
    rows = []
    for n in range(basis.N):
        row = [str(n + 1), basis.eigenvalues[n]]
        if len(header) > 2:
            row += list(basis.traces[n])
        rows.append(row)
    _write_csv(ctx.out / "eigenvalues.csv", header, rows)
    for n in range(min(5, basis.N)):
        ctx.say(f"lambda_{n + 1} = {float(basis.eigenvalues[n])!r}")
    return ["basis.txt", "eigenvalues.csv"]


def _ml_config(ctx):
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"), interpolation=None)
    cp.optionxform = str
    try:
        with open(ctx.args.config, encoding="utf-8") as fh:
            cp.read_string(fh.read())
    except OSError as exc:
        raise ProblemError("config", f"cannot read {ctx.args.config}: {exc.strerror}") from None
    except configparser.Error as exc:
        raise ProblemError("config", f"parse error: {exc}") from None
    for key, value in ctx.overrides.items():
        sec, _, opt = key.rpartition(".")
        sec = sec or "ml"
        if not cp.has_section(sec):
            cp.add_section(sec)
        cp.set(sec, opt, value)
    if not cp.has_section("ml"):
        raise ProblemError("ml", "missing section")
    return cp["ml"]


def cmd_ml_eval(ctx) -> list[str]:
    sec = _ml_config(ctx)
    try:
        a1 = float(sec.get("alpha1", "nan"))
        a2 = float(sec.get("alpha2", "1"))
        if "z" in sec:
            z = np.array([float(v) for v in sec["z"].split(",") if v.strip()])
        else:
            z = np.linspace(float(sec.get("z_start", "-10")), float(sec.get("z_stop", "0")),
                            int(sec.get("z_count", "101")))
    except ValueError as exc:
        raise ProblemError("ml", f"invalid number ({exc})") from None
    E = np.asarray(ml_eval(MLParams(a1, a2), z), dtype=float)
    if not np.all(np.isfinite(E)):
        raise NumericalFailure("non-finite Mittag-Leffler values")
    _write_csv(ctx.out / "ml.csv", ["z", "E"], zip(z, E))
    ctx.say(f"E_{{{a1!r},{a2!r}}} on {z.size} points; range [{E.min():.6g}, {E.max():.6g}]")
    return ["ml.csv"]


def cmd_check_compat(ctx) -> list[str]:
    problem, st = ctx.problem(), ctx.settings
    basis = _basis(problem, st)
    problem = _prepared(problem, st, basis)
    report = compat_defect(problem, basis, tol=st.float("compat_tol", 1e-6))
    (ctx.out / "compat.csv").write_text(report.to_csv(), encoding="utf-8")
    ctx.say(report.render())
    return ["compat.csv"]


def cmd_regularity(ctx) -> list[str]:
    problem, st = ctx.problem(), ctx.settings
    basis = _basis(problem, st)
    problem = _prepared(problem, st, basis)
    orders = st.ints("m", (1,))
    series = solve_modes(problem, basis, _grid(problem, st, 200), derivatives=orders,
                         threads=ctx.threads)
    window = st.floats("window", (1e-6, 1e-2))
    if len(window) != 2:
        raise ProblemError("solver.window", "expected two numbers lo, hi")
    compat = compat_defect(problem, basis)
    rows, text = [], [compat.render(limit=5), ""]
    for m in orders:
        rep = regularity_exponent(series, basis, m, window=tuple(window))
        text.append(rep.render())
        rows.append([str(m), "" if rep.sigma is None else _fmt(rep.sigma),
                     "" if rep.residual is None else _fmt(rep.residual),
                     str(rep.n_points),
                     "bounded" if rep.predicted is None else _fmt(rep.predicted), rep.verdict])
    _write_csv(ctx.out / "regularity.csv",
               ["m", "sigma", "residual", "points", "predicted", "verdict"], rows)
    (ctx.out / "regularity.txt").write_text("\n".join(text) + "\n", encoding="utf-8")
    ctx.say("\n".join(text))
    return ["regularity.csv", "regularity.txt"]


def cmd_oracle_compare(ctx) -> list[str]:
    problem, st = ctx.problem(), ctx.settings
    N = st.int("N", 64)
    fd_mesh = st.int("fd_mesh", 400)
    # spectral nodes must contain the FD nodes
    mesh = st.int("mesh", fd_mesh * max(1, -(-10 * N // fd_mesh)))
    if mesh % fd_mesh:
        raise ProblemError("solver.mesh", f"mesh {mesh} must be a multiple of fd_mesh {fd_mesh}")
    basis = build_basis(problem.domain, problem.coefficients, problem.chi, N, mesh,
                        trace_method=st.str("trace", "flux"))
    problem = _prepared(problem, st, basis)
    scheme = FDScheme(fd_mesh, st.int("fd_steps", 2000), problem.alpha,
                      talbot_nodes=st.int("talbot_nodes", 32))
    cmp = oracle_errors(problem, basis, scheme, st.floats("talbot_times", (0.1, 0.5, 1.0)),
                        lift=st.flag("lift", True), threads=ctx.threads)
    _write_csv(ctx.out / "oracle.csv", ["comparison", "relative_error"],
               [[name, "" if v is None else _fmt(v)] for name, v in cmp.rows()])
    for name, v in cmp.rows():
        ctx.say(f"{name:20s} {'n/a' if v is None else format(v, '.3e')}")
    return ["oracle.csv"]


def cmd_laplace_check(ctx) -> list[str]:
    problem, st = ctx.problem(), ctx.settings
    basis = _basis(problem, st)
    problem = _prepared(problem, st, basis)
    rows = laplace_residual(problem, basis, st.floats("p", (1.0, 2.0, 5.0)),
                            n_uniform=st.int("laplace_n_uniform", 500), threads=ctx.threads)
    _write_csv(ctx.out / "laplace.csv", ["p", "algebraic", "quadrature", "tail_bound", "T_big", "pass"],
               [[r.p, r.algebraic, r.quadrature, r.tail_bound, r.T_big, str(r.passes())] for r in rows])
    for r in rows:
        ctx.say(f"p={r.p:g}: algebraic {r.algebraic:.2e}  quadrature {r.quadrature:.2e}"
                f"  ({'PASS' if r.passes() else 'FAIL'})")
    return ["laplace.csv"]


def cmd_monitor(ctx) -> list[str]:
    problem, st = ctx.problem(), ctx.settings
    kind = st.str("kind", "t1a")
    Ns = st.ints("N_values", (64, 128))
    if kind == "c1a":
        rho = problem.coefficients.eval("rho", np.linspace(0.0, 1.0, 11))
        if not np.allclose(rho, 1.0):
            raise ProblemError("coefficients.rho", "the c1a monitor needs rho = 1")
    basis = _basis(problem, st, N=max(Ns))
    rng = np.random.default_rng(ctx.args.seed)
    draws = random_draws(problem, rng, st.int("draws", 20), zero_initial=(kind == "c1a"))
    grid = TimeGrid.build(problem.T, st.int("n_uniform", 200), h_min=problem.T * 1e-4)
    stats = estimate_monitor(draws, basis, kind, Ns, theta=st.float("theta", 0.5),
                             r=st.float("r", 2.0), eps=st.float("eps", 0.05), grid=grid,
                             threads=ctx.threads)
    rows = []
    for N in Ns:
        for i, v in enumerate(stats.ratios[N]):
            rows.append([str(i + 1), str(N), v])
    _write_csv(ctx.out / "monitor.csv", ["draw", "N", "ratio"], rows)
    for N in Ns:
        ctx.say(f"N={N}: max ratio {stats.max(N):.6g}  median {stats.median(N):.6g}")
    ctx.say(f"growth {stats.growth():.4f}; excluded draws {stats.excluded}; "
            f"{'PASS' if stats.passes() else 'FAIL'}")
    return ["monitor.csv"]


COMMANDS: dict[str, Callable] = {
    "solve": cmd_solve,
    "eigen": cmd_eigen,
    "ml-eval": cmd_ml_eval,
    "check-compat": cmd_check_compat,
    "regularity": cmd_regularity,
    "oracle-compare": cmd_oracle_compare,
    "laplace-check": cmd_laplace_check,
    "monitor": cmd_monitor,
}


# --------------------------------------------------------------------------
# plumbing


class Context:
    def __init__(self, args, overrides, threads):
        self.args = args
        self.overrides = overrides
        self.threads = threads
        self.out = Path(args.out)
        self._problem = None
        self.settings = Settings({})

    def problem(self) -> Problem:
        if self._problem is None:
            self._problem = load_problem_file(self.args.config, self.overrides)
            self.settings = Settings(self._problem.solver)
        return self._problem

    def say(self, text: str) -> None:
        if not self.args.quiet:
            print(text)


def _overrides(pairs: Sequence[str]) -> dict[str, str]:
    out = {}
    for item in pairs or ():
        key, sep, value = item.partition("=")
        if not sep or not key.strip():
            raise UsageError(f"--set expects key=value, got {item!r}")
        out[key.strip()] = value.strip()
    return out


def _threads(flag: int | None) -> int:
    if flag is not None:
        if flag < 1:
            raise UsageError("--threads must be at least 1")
        return flag
    env = os.environ.get("FRACSPEC_THREADS", "").strip()
    if not env:
        return 1
    try:
        n = int(env)
    except ValueError:
        raise UsageError(f"FRACSPEC_THREADS must be an integer, got {env!r}") from None
    if n < 1:
        raise UsageError("FRACSPEC_THREADS must be at least 1")
    return n


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", required=True, help="config file (INI)")
    common.add_argument("--out", default="fracspec-out", help="output directory")
    common.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override a config key (section.key=value); repeatable")
    common.add_argument("--threads", type=int, default=None,
                        help="worker threads (default: $FRACSPEC_THREADS or 1)")
    common.add_argument("--seed", type=int, default=0, help="seed for random draws")
    common.add_argument("--quiet", action="store_true", help="suppress the text report")

    parser = _Parser(prog="fracspec", description="Time-fractional diffusion toolkit.")
    parser.add_argument("--version", action="version", version=f"fracspec {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="SUBCOMMAND", parser_class=_Parser)
    helps = {
        "solve": "modal solution and field CSVs",
        "eigen": "export the spectral basis",
        "ml-eval": "tabulate Mittag-Leffler values",
        "check-compat": "compatibility defects of the initial data",
        "regularity": "small-time exponent fits",
        "oracle-compare": "spectral solution against finite-difference oracles",
        "laplace-check": "Laplace-transform residuals",
        "monitor": "a-priori estimate ratios over random data",
    }
    for name in SUBCOMMANDS:
        sub.add_parser(name, parents=[common], help=helps[name])
    return parser


def _manifest(ctx, command, files, status) -> None:
    args = ctx.args
    data = {
        "subcommand": command,
        "config": str(args.config),
        "output_dir": str(ctx.out),
        "overrides": ctx.overrides,
        "seed": args.seed,
        "threads": ctx.threads,
        "backend": backend(),
        "version": __version__,
        "status": status,
        "outputs": sorted(files),
    }
    with open(ctx.out / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(data, fh, indent=2, sort_keys=True)
        fh.write("\n")


def run(argv: Sequence[str] | None = None) -> int:
    """Execute one subcommand; returns the process exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError(parser.format_usage() + "fracspec: error: a subcommand is required")
        overrides = _overrides(args.set)
        threads = _threads(args.threads)
    except UsageError as exc:
        print(str(exc), file=sys.stderr)
        return 1

    ctx = Context(args, overrides, threads)
    try:
        ctx.out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        print(f"fracspec: cannot create {ctx.out}: {exc.strerror}", file=sys.stderr)
        return 1
    files: list[str] = []
    try:
        files = COMMANDS[args.command](ctx)
        status, code = "ok", 0
    except (ProblemError, BasisError, SolverError, UsageError) as exc:
        print(f"fracspec: validation error: {exc}", file=sys.stderr)
        status, code = "validation-error", 1
    except (NumericalFailure, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"fracspec: numerical failure: {exc}", file=sys.stderr)
        status, code = "numerical-failure", 2
    except ValueError as exc:
        print(f"fracspec: validation error: {exc}", file=sys.stderr)
        status, code = "validation-error", 1
    _manifest(ctx, args.command, files, status)
    return code


def main() -> None:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    sys.exit(run())


if __name__ == "__main__":
    main()
