"""Problem description, config parsing and data signals.

Config grammar (INI, ``#``/``;`` comments)::

    [problem]      alpha, chi (0|1|dirichlet|neumann), T
    [domain]       kind = interval (x0, x1) | rectangle (lx, ly)
    [coefficients] rho, a, q: expressions in x (and y); constants on rectangles
    [data]         f   boundary data, comma separated, one entry per endpoint
                       (interval: left, right) or edge (rectangle: bottom,
                       right, top, left; expressions in t and the edge
                       coordinate s). ``@name`` refers to a sampled signal.
                   F   source, expression in t, x (and y)
                   u0, u1  expressions in x (and y)
                   u0_samples, u1_samples  nodal values on the solver mesh
                   u0_modes, u1_modes      modal coefficients
    [signal.NAME]  samples = v0, v1, ...   uniform on [0, T]
                   order = 0 | 1           interpolation order
                   smooth = yes | no       allow divided-difference derivatives
    [solver]       free-form numeric settings (N, mesh, ...)

Expressions are parsed with sympy, so time derivatives of closed-form data
are exact.
"""

from __future__ import annotations

import configparser
import logging
import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np
import sympy as sp

from .spectral_basis import Coefficients, Interval, Rectangle

__all__ = [
    "DataField",
    "Problem",
    "ProblemError",
    "SpatialData",
    "TimeSignal",
    "load_problem",
    "load_problem_file",
    "serialize",
    "signal_derivative",
]

log = logging.getLogger(__name__)

_T, _X, _Y, _S = sp.symbols("t x y s", real=True)
_SYMBOLS = {"t": _T, "x": _X, "y": _Y, "s": _S, "pi": sp.pi, "e": sp.E}


class ProblemError(ValueError):
    """Invalid configuration; ``field`` names the offending key."""

    def __init__(self, field: str, message: str) -> None:
        super().__init__(f"{field}: {message}")
        self.field = field
        self.message = message


def _parse_expr(src: str, where: str, allowed: set[str]) -> sp.Expr:
    try:
        expr = sp.sympify(src, locals=_SYMBOLS)
    except (sp.SympifyError, SyntaxError, TypeError, ValueError) as exc:
        raise ProblemError(where, f"cannot parse expression {src!r} ({exc})") from None
    if not isinstance(expr, sp.Expr):
        raise ProblemError(where, f"{src!r} is not a scalar expression")
    free = {str(s) for s in expr.free_symbols}
    bad = free - allowed
    if bad:
        raise ProblemError(
            where, f"unknown symbol(s) {sorted(bad)}; allowed: {sorted(allowed)}"
        )
    return expr


def _lambdify(expr: sp.Expr, args: tuple[sp.Symbol, ...]):
    fn = sp.lambdify(args, expr, modules="numpy")

    def call(*vals):
        shape = np.broadcast(*[np.asarray(v) for v in vals]).shape
        return np.broadcast_to(np.asarray(fn(*vals), dtype=float), shape).copy()

    return call


@dataclass(frozen=True, eq=False)
class TimeSignal:
    """Scalar function of time (optionally also of an edge coordinate ``s``).

    Either a sympy expression, or uniform samples on ``[0, T]`` with
    piecewise-constant (``order=0``) or linear (``order=1``) interpolation.
    """

    source: str
    expr: sp.Expr | None = None
    samples: tuple[float, ...] | None = None
    T: float | None = None
    order: int = 1
    smooth: bool = False
    name: str | None = None
    _fns: dict = field(default_factory=dict, repr=False, compare=False)

    @classmethod
    def from_expr(cls, src: str, where: str = "signal", spatial: bool = False) -> "TimeSignal":
        allowed = {"t", "s"} if spatial else {"t"}
        return cls(source=str(src).strip(), expr=_parse_expr(src, where, allowed))

    @classmethod
    def from_samples(cls, values, T: float, order: int = 1, smooth: bool = False,
                     name: str | None = None, where: str = "signal") -> "TimeSignal":
        vals = tuple(float(v) for v in values)
        if len(vals) < 2:
            raise ProblemError(where, "need at least two samples")
        if not all(math.isfinite(v) for v in vals):
            raise ProblemError(where, "samples must be finite")
        if order not in (0, 1):
            raise ProblemError(where, f"interpolation order must be 0 or 1, got {order}")
        return cls(source=f"@{name}" if name else "<samples>", samples=vals, T=float(T),
                   order=order, smooth=smooth, name=name)

    @property
    def is_closed_form(self) -> bool:
        return self.expr is not None

    def is_zero(self) -> bool:
        if self.expr is not None:
            return self.expr == 0
        return not any(self.samples)

    def max_derivative(self) -> int:
        if self.expr is not None:
            return 3
        return 3 if self.smooth else 0

    def _fn(self, k: int):
        if k not in self._fns:
            e = sp.diff(self.expr, _T, k) if k else self.expr
            self._fns[k] = _lambdify(e, (_T, _S))
        return self._fns[k]

    def _sample_grid(self) -> np.ndarray:
        return np.linspace(0.0, self.T, len(self.samples))

    def __call__(self, t, s=0.0) -> np.ndarray:
        return self.derivative(0, t, s)

    def derivative(self, k: int, t, s=0.0) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        if self.expr is not None:
            return self._fn(k)(t, s)
        if k > 0 and not self.smooth:
            raise ProblemError(
                self.source, f"derivative of order {k} not available for non-smooth samples"
            )
        grid = self._sample_grid()
        vals = np.asarray(self.samples)
        for _ in range(k):
            vals = np.gradient(vals, grid, edge_order=2)
        if self.order == 0 and k == 0:
            idx = np.clip(np.searchsorted(grid, t, side="right") - 1, 0, len(grid) - 1)
            out = vals[idx]
        else:
            out = np.interp(t, grid, vals)
        return np.broadcast_to(out, np.broadcast(t, np.asarray(s)).shape).copy()


def signal_derivative(sig: TimeSignal, order: int, t: float) -> float:
    """Time derivative of ``sig`` of order 1, 2 or 3 at ``t``."""
    if order not in (1, 2, 3):
        raise ProblemError(sig.source, f"derivative order must be 1, 2 or 3, got {order}")
    if order > sig.max_derivative():
        raise ProblemError(sig.source, f"derivative of order {order} not available")
    return float(sig.derivative(order, t))


@dataclass(frozen=True, eq=False)
class DataField:
    """Space-time field ``F(t, x[, y])`` given by an expression."""

    source: str
    expr: sp.Expr
    _fns: dict = field(default_factory=dict, repr=False, compare=False)

    @classmethod
    def parse(cls, src: str, dim: int, where: str = "F") -> "DataField":
        allowed = {"t", "x"} | ({"y"} if dim == 2 else set())
        return cls(source=str(src).strip(), expr=_parse_expr(src, where, allowed))

    def is_zero(self) -> bool:
        return self.expr == 0

    def derivative(self, k: int, t, nodes: np.ndarray) -> np.ndarray:
        """``d^k F/dt^k`` at times ``t`` (leading axis) and mesh nodes (last axis)."""
        if k not in self._fns:
            e = sp.diff(self.expr, _T, k) if k else self.expr
            self._fns[k] = _lambdify(e, (_T, _X, _Y))
        t = np.atleast_1d(np.asarray(t, dtype=float))[:, None]
        if nodes.ndim == 1:
            x, y = nodes[None, :], 0.0
        else:
            x, y = nodes[None, :, 0], nodes[None, :, 1]
        return self._fns[k](t, x, y)


@dataclass(frozen=True, eq=False)
class SpatialData:
    """Initial datum as an expression, nodal samples or modal coefficients."""

    kind: str  # "expr" | "samples" | "modes"
    source: str
    expr: sp.Expr | None = None
    values: tuple[float, ...] | None = None

    @classmethod
    def parse_expr(cls, src: str, dim: int, where: str) -> "SpatialData":
        allowed = {"x"} | ({"y"} if dim == 2 else set())
        return cls("expr", str(src).strip(), expr=_parse_expr(src, where, allowed))

    @classmethod
    def parse_list(cls, kind: str, src: str, where: str) -> "SpatialData":
        vals = _float_list(src, where)
        return cls(kind, str(src).strip(), values=tuple(vals))

    def is_zero(self) -> bool:
        if self.kind == "expr":
            return self.expr == 0
        return not any(self.values)

    def nodal(self, nodes: np.ndarray) -> np.ndarray:
        if self.kind == "expr":
            if nodes.ndim == 1:
                return _lambdify(self.expr, (_X, _Y))(nodes, 0.0)
            return _lambdify(self.expr, (_X, _Y))(nodes[:, 0], nodes[:, 1])
        if self.kind == "samples":
            vals = np.asarray(self.values)
            if vals.size == nodes.shape[0]:
                return vals.copy()
            if nodes.ndim != 1:
                raise ProblemError(self.source, "sample count does not match the mesh")
            log.warning(
                "%d samples on a %d-node mesh; interpolating linearly",
                vals.size, nodes.shape[0],
            )
            src = np.linspace(nodes[0], nodes[-1], vals.size)
            return np.interp(nodes, src, vals)
        raise ProblemError(self.source, "modal data has no nodal representation")

    def coefficients(self, basis) -> np.ndarray:
        """``<g, phi_n>`` for the first ``basis.N`` modes."""
        if self.kind == "modes":
            vals = np.zeros(basis.N)
            k = min(basis.N, len(self.values))
            if len(self.values) > basis.N:
                log.warning("dropping %d modal coefficients beyond N", len(self.values) - basis.N)
            vals[:k] = self.values[:k]
            return vals
        return basis.project(self.nodal(basis.nodes))


def _float_list(src: str, where: str) -> list[float]:
    try:
        vals = [float(v) for v in str(src).replace("\n", ",").split(",") if v.strip()]
    except ValueError:
        raise ProblemError(where, f"expected comma-separated numbers, got {src!r}") from None
    if not vals:
        raise ProblemError(where, "empty list")
    if not all(math.isfinite(v) for v in vals):
        raise ProblemError(where, "values must be finite")
    return vals


@dataclass(frozen=True, eq=False)
class Problem:
    alpha: float
    chi: int
    T: float
    domain: Interval | Rectangle
    coefficients: Coefficients
    f: tuple[TimeSignal, ...]
    F: DataField
    u0: SpatialData
    u1: SpatialData | None = None
    solver: Mapping[str, str] = field(default_factory=dict)
    coefficient_sources: Mapping[str, str] = field(default_factory=dict)
    signals: Mapping[str, TimeSignal] = field(default_factory=dict)

    @property
    def dim(self) -> int:
        return 1 if isinstance(self.domain, Interval) else 2

    @property
    def has_velocity(self) -> bool:
        return self.alpha > 1.0

    def boundary_values(self, basis, t, k: int = 0) -> np.ndarray:
        """``d^k f/dt^k`` at times ``t`` sampled on the basis boundary points.

        Returns shape ``(len(t), n_boundary)``.
        """
        t = np.atleast_1d(np.asarray(t, dtype=float))
        out = np.zeros((t.size, basis.n_boundary))
        if self.dim == 1:
            for b, sig in enumerate(self.f):
                out[:, b] = sig.derivative(k, t)
            return out
        pts = basis.boundary_points
        for e, sig in enumerate(self.f):
            sel = basis.boundary_edges == e
            s = pts[sel, 0] if e in (0, 2) else pts[sel, 1]
            out[:, sel] = sig.derivative(k, t[:, None], s[None, :])
        return out

    def source_values(self, basis, t, k: int = 0) -> np.ndarray:
        return self.F.derivative(k, t, basis.nodes)

    def data_max_derivative(self) -> int:
        return min(sig.max_derivative() for sig in self.f)

    def replace(self, **changes) -> "Problem":
        kw = {n: getattr(self, n) for n in self.__dataclass_fields__}
        kw.update(changes)
        return Problem(**kw)


def _get(cp: configparser.ConfigParser, sec: str, key: str, default=None):
    if cp.has_option(sec, key):
        return cp.get(sec, key)
    if default is None:
        raise ProblemError(f"{sec}.{key}", "missing required key")
    return default


def _get_float(cp, sec, key, default=None) -> float:
    raw = _get(cp, sec, key, default)
    try:
        v = float(sp.sympify(raw, locals=_SYMBOLS)) if not isinstance(raw, float) else raw
    except (sp.SympifyError, TypeError, ValueError, SyntaxError):
        raise ProblemError(f"{sec}.{key}", f"expected a number, got {raw!r}") from None
    if not math.isfinite(v):
        raise ProblemError(f"{sec}.{key}", "must be finite")
    return v


def _parse_chi(raw: str) -> int:
    key = str(raw).strip().lower()
    table = {"0": 0, "dirichlet": 0, "1": 1, "neumann": 1}
    if key not in table:
        raise ProblemError("problem.chi", f"expected 0/dirichlet or 1/neumann, got {raw!r}")
    return table[key]


def _split_top(src: str) -> list[str]:
    # split on commas that are not inside parentheses
    parts, depth, cur = [], 0, []
    for ch in src:
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
        if ch == "," and depth == 0:
            parts.append("".join(cur).strip())
            cur = []
        else:
            cur.append(ch)
    parts.append("".join(cur).strip())
    return parts


def _coefficient(src: str, dim: int, name: str, constant_only: bool):
    allowed = {"x"} | ({"y"} if dim == 2 else set())
    expr = _parse_expr(src, f"coefficients.{name}", allowed)
    if expr.free_symbols:
        if constant_only:
            raise ProblemError(f"coefficients.{name}", "rectangles require constant coefficients")
        fn = _lambdify(expr, (_X, _Y))
        return (lambda x, y=0.0: fn(x, y)), expr
    return float(expr), expr


def load_problem(text: str, overrides: Mapping[str, str] | None = None) -> Problem:
    """Parse and validate a config; ``overrides`` maps ``section.key`` to values."""
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"), interpolation=None)
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ProblemError("config", f"parse error: {exc}") from None
    for key, value in (overrides or {}).items():
        sec, _, opt = key.rpartition(".")
        if not sec:
            hits = [s for s in cp.sections() if cp.has_option(s, opt)]
            if len(hits) != 1:
                raise ProblemError(key, "ambiguous or unknown key; use section.key")
            sec = hits[0]
        if not cp.has_section(sec):
            cp.add_section(sec)
        cp.set(sec, opt, str(value))

    for sec in ("problem", "data"):
        if not cp.has_section(sec):
            raise ProblemError(sec, "missing section")

    alpha = _get_float(cp, "problem", "alpha")
    if alpha == 1.0:
        raise ProblemError("problem.alpha", "alpha=1 excluded")
    if not (0.0 < alpha < 2.0):
        raise ProblemError("problem.alpha", f"alpha must lie in (0,1) or (1,2), got {alpha}")
    chi = _parse_chi(_get(cp, "problem", "chi"))
    T = _get_float(cp, "problem", "T")
    if T <= 0:
        raise ProblemError("problem.T", f"horizon must be positive, got {T}")

    kind = _get(cp, "domain", "kind", "interval").strip().lower() if cp.has_section("domain") else "interval"
    try:
        if kind == "interval":
            domain = Interval(
                _get_float(cp, "domain", "x0", 0.0) if cp.has_section("domain") else 0.0,
                _get_float(cp, "domain", "x1", 1.0) if cp.has_section("domain") else 1.0,
            )
        elif kind == "rectangle":
            domain = Rectangle(_get_float(cp, "domain", "lx", 1.0), _get_float(cp, "domain", "ly", 1.0))
        else:
            raise ProblemError("domain.kind", f"expected interval or rectangle, got {kind!r}")
    except ValueError as exc:
        if isinstance(exc, ProblemError):
            raise
        raise ProblemError("domain", str(exc)) from None
    dim = 1 if kind == "interval" else 2

    coeff_src, coeff_vals = {}, {}
    for name, default in (("rho", "1"), ("a", "1"), ("q", "1")):
        src = _get(cp, "coefficients", name, default) if cp.has_section("coefficients") else default
        val, expr = _coefficient(src, dim, name, constant_only=dim == 2)
        coeff_src[name] = str(src).strip()
        coeff_vals[name] = val
    coeffs = Coefficients(**coeff_vals)
    # positivity on a sample grid; the basis re-checks on its own mesh
    if dim == 1:
        xs = np.linspace(domain.x0, domain.x1, 201)
    else:
        xs = np.zeros(1)
    labels = {"rho": "rho >= rho_0 > 0", "a": "ellipticity a >= c > 0", "q": "positivity q >= q_0 > 0"}
    for name in ("rho", "a", "q"):
        v = coeffs.eval(name, xs)
        if not np.all(np.isfinite(v)) or np.min(v) <= 0.0:
            raise ProblemError(f"coefficients.{name}", f"violates {labels[name]}")

    signals = {}
    for sec in cp.sections():
        if sec.startswith("signal."):
            name = sec.split(".", 1)[1]
            order = int(_get_float(cp, sec, "order", 1.0))
            smooth = cp.getboolean(sec, "smooth", fallback=False)
            signals[name] = TimeSignal.from_samples(
                _float_list(_get(cp, sec, "samples"), f"{sec}.samples"), T,
                order=order, smooth=smooth, name=name, where=sec,
            )

    n_bdry = 2 if dim == 1 else 4
    f_src = _get(cp, "data", "f", ", ".join(["0"] * n_bdry))
    parts = _split_top(f_src)
    if len(parts) != n_bdry:
        raise ProblemError("data.f", f"expected {n_bdry} comma-separated entries, got {len(parts)}")
    f = []
    for i, p in enumerate(parts):
        if p.startswith("@"):
            if p[1:] not in signals:
                raise ProblemError("data.f", f"unknown signal {p}")
            f.append(signals[p[1:]])
        else:
            f.append(TimeSignal.from_expr(p, f"data.f[{i}]", spatial=dim == 2))
    F = DataField.parse(_get(cp, "data", "F", "0"), dim)

    def initial(name: str) -> SpatialData | None:
        keys = [k for k in (name, f"{name}_samples", f"{name}_modes") if cp.has_option("data", k)]
        if len(keys) > 1:
            raise ProblemError(f"data.{name}", f"give only one of {keys}")
        if not keys:
            return None
        k = keys[0]
        src = cp.get("data", k)
        if k == name:
            return SpatialData.parse_expr(src, dim, f"data.{k}")
        return SpatialData.parse_list("samples" if k.endswith("samples") else "modes", src, f"data.{k}")

    u0 = initial("u0")
    if u0 is None:
        raise ProblemError("data.u0", "missing initial value u0")
    u1 = initial("u1")
    if alpha > 1.0 and u1 is None:
        raise ProblemError("data.u1", "u1 required for alpha>1")
    if alpha < 1.0 and u1 is not None:
        raise ProblemError("data.u1", "u1 must be absent for alpha<1")

    solver = dict(cp.items("solver")) if cp.has_section("solver") else {}
    return Problem(
        alpha=alpha, chi=chi, T=T, domain=domain, coefficients=coeffs,
        f=tuple(f), F=F, u0=u0, u1=u1, solver=solver,
        coefficient_sources=coeff_src, signals=signals,
    )


def load_problem_file(path, overrides: Mapping[str, str] | None = None) -> Problem:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ProblemError("config", f"cannot read {path}: {exc.strerror}") from None
    return load_problem(text, overrides)


def _spatial_lines(name: str, data: SpatialData | None) -> list[str]:
    if data is None:
        return []
    suffix = {"expr": "", "samples": "_samples", "modes": "_modes"}[data.kind]
    if data.kind == "expr":
        return [f"{name} = {data.source}"]
    return [f"{name}{suffix} = " + ", ".join(repr(v) for v in data.values)]


def serialize(problem: Problem) -> str:
    """Config text that :func:`load_problem` parses back to an equivalent problem."""
    d = problem.domain
    lines = [
        "[problem]",
        f"alpha = {problem.alpha!r}",
        f"chi = {problem.chi}",
        f"T = {problem.T!r}",
        "",
        "[domain]",
    ]
    if isinstance(d, Interval):
        lines += ["kind = interval", f"x0 = {d.x0!r}", f"x1 = {d.x1!r}"]
    else:
        lines += ["kind = rectangle", f"lx = {d.lx!r}", f"ly = {d.ly!r}"]
    lines += ["", "[coefficients]"]
    for name in ("rho", "a", "q"):
        lines.append(f"{name} = {problem.coefficient_sources.get(name, getattr(problem.coefficients, name))}")
    lines += ["", "[data]", "f = " + ", ".join(s.source for s in problem.f), f"F = {problem.F.source}"]
    lines += _spatial_lines("u0", problem.u0) + _spatial_lines("u1", problem.u1)
    for name, sig in problem.signals.items():
        lines += [
            "",
            f"[signal.{name}]",
            "samples = " + ", ".join(repr(v) for v in sig.samples),
            f"order = {sig.order}",
            f"smooth = {'yes' if sig.smooth else 'no'}",
        ]
    if problem.solver:
        lines += ["", "[solver]"] + [f"{k} = {v}" for k, v in problem.solver.items()]
    return "\n".join(lines) + "\n"
