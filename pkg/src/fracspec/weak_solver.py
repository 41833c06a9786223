"""Modal solution of the fractional IBVP and its time derivatives.

For each mode, with ``k(t) = t^(a-1) E_{a,a}(-lam t^a)`` and the modal data
signal ``g(t) = -(-1)^chi <f(t), tau* phi> + <rho^-1 F(t), phi>``::

    u(t)   = E_{a,1}(-lam t^a) u0 [+ t E_{a,2}(-lam t^a) u1] + (k * g)(t)
    u'(t)  = b k(t) [+ E_{a,1} u1] + (k * g')(t)
    u''(t) = b t^(a-2) E_{a,a-1} + e k(t) + (k * g'')(t)
    u'''   = b t^(a-3) E_{a,a-2} + e t^(a-2) E_{a,a-1} + g''(0) k + (k * g''')

with the defects ``b = g(0) - lam u0`` and ``e = g'(0) - lam u1`` (``u1 = 0``
for ``a < 1``). Convolutions use product integration with piecewise-linear
data and exact kernel moments. Data vanish after the problem horizon, so
grids may extend past it.
"""

from __future__ import annotations

import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.integrate
import scipy.sparse
import scipy.sparse.linalg

from . import _pi_kernels as PI
from .mittag_leffler import ml
from .problem_model import Problem, ProblemError
from .spectral_basis import DIRICHLET, SpectralBasis

__all__ = [
    "ModeSeries",
    "SolverError",
    "TimeGrid",
    "evaluate_solution",
    "first_derivative_modes",
    "mode_data",
    "mode_laplace",
    "second_derivative_modes",
    "solve_modes",
    "steady_lift",
    "write_series_csv",
]

log = logging.getLogger(__name__)

TAIL_WARN = 1e-6
SNAP = 1e-9  # FE lift solves leave relative defects near cond(K)*eps


class SolverError(ValueError):
    """Inconsistent solver inputs."""


@dataclass(frozen=True)
class TimeGrid:
    """Uniform nodes ``j h`` on ``[0, horizon]`` plus geometric nodes in ``(0, h)``.

    The geometric nodes are ``h / ratio^k`` down to ``h_min``. Grids with the
    same ``h``, ``h_min`` and ``ratio`` share nodes on their common range.
    """

    horizon: float
    h: float
    h_min: float
    ratio: float = 1.15

    @classmethod
    def build(cls, T: float, n_uniform: int = 1000, h_min: float | None = None,
              ratio: float = 1.15, horizon: float | None = None) -> "TimeGrid":
        if T <= 0 or n_uniform < 1:
            raise SolverError("grid needs T > 0 and at least one uniform step")
        h = T / n_uniform
        return cls(horizon=T if horizon is None else float(horizon), h=h,
                   h_min=T * 1e-8 if h_min is None else float(h_min), ratio=ratio)

    def __post_init__(self) -> None:
        if not (self.h > 0 and self.h_min > 0 and self.ratio > 1):
            raise SolverError("grid parameters must be positive (ratio > 1)")
        J = self.horizon / self.h
        if abs(J - round(J)) > 1e-9 * max(1.0, J):
            raise SolverError(f"horizon {self.horizon} is not a multiple of the step {self.h}")

    @property
    def n_steps(self) -> int:
        return int(round(self.horizon / self.h))

    @property
    def uniform(self) -> np.ndarray:
        return np.arange(self.n_steps + 1) * self.h

    @property
    def geometric(self) -> np.ndarray:
        if self.h_min >= self.h:
            return np.zeros(0)
        K = int(math.floor(math.log(self.h / self.h_min) / math.log(self.ratio)))
        return self.h / self.ratio ** np.arange(K, 0, -1)

    @property
    def times(self) -> np.ndarray:
        return np.concatenate([[0.0], self.geometric, self.uniform[1:]])

    def describe(self) -> str:
        return (f"h={self.h!r};h_min={self.h_min!r};ratio={self.ratio!r};"
                f"horizon={self.horizon!r}")


@dataclass(eq=False)
class ModeSeries:
    """Per-mode time signals on a grid (rows: times, columns: modes)."""

    grid: TimeGrid
    t: np.ndarray
    values: np.ndarray
    alpha: float
    chi: int
    eigenvalues: np.ndarray
    derivatives: dict[int, np.ndarray] = field(default_factory=dict)
    defects: dict[str, np.ndarray] = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    @property
    def N(self) -> int:
        return self.values.shape[1]

    def restrict(self, t_max: float) -> "ModeSeries":
        keep = self.t <= t_max * (1 + 1e-14)
        return ModeSeries(
            grid=self.grid, t=self.t[keep], values=self.values[keep], alpha=self.alpha,
            chi=self.chi, eigenvalues=self.eigenvalues,
            derivatives={k: v[keep] for k, v in self.derivatives.items()},
            defects=self.defects, meta=dict(self.meta),
        )

    def tail_indicator(self) -> float:
        """Largest fraction of coefficient energy in the last 10% of modes."""
        k = max(1, int(math.ceil(0.1 * self.N)))
        num = np.sum(self.values[:, -k:] ** 2, axis=1)
        den = np.sum(self.values**2, axis=1)
        ok = den > 0
        return float(np.max(num[ok] / den[ok])) if ok.any() else 0.0


# --------------------------------------------------------------------------
# modal data


def _sign(chi: int) -> float:
    return -((-1.0) ** chi)


def _threads(threads: int | None) -> int:
    if threads is None:
        env = os.environ.get("FRACSPEC_THREADS", "")
        threads = int(env) if env.strip() else 1
    return max(1, int(threads))


def mode_data(problem: Problem, basis: SpectralBasis, t, k: int = 0) -> np.ndarray:
    """``d^k g/dt^k`` for every mode at times ``t``; shape ``(len(t), N)``.

    Zero for ``t > T`` (data cut off at the horizon).
    """
    t = np.atleast_1d(np.asarray(t, dtype=float))
    out = np.zeros((t.size, basis.N))
    inside = t <= problem.T * (1 + 1e-14)
    if not inside.any():
        return out
    ti = t[inside]
    acc = np.zeros((ti.size, basis.N))
    if not all(s.is_zero() for s in problem.f):
        acc += _sign(problem.chi) * basis.pair_boundary(problem.boundary_values(basis, ti, k))
    if not problem.F.is_zero():
        acc += basis.project_source(problem.source_values(basis, ti, k))
    out[inside] = acc
    return out


def _initial_coeffs(problem: Problem, basis: SpectralBasis):
    u0 = problem.u0.coefficients(basis)
    u1 = problem.u1.coefficients(basis) if problem.u1 is not None else np.zeros(basis.N)
    return u0, u1


def _check(problem: Problem, basis: SpectralBasis, grid: TimeGrid) -> None:
    if basis.chi != problem.chi:
        raise SolverError(f"basis chi={basis.chi} does not match problem chi={problem.chi}")
    if problem.dim == 1 and not hasattr(basis.domain, "x0"):
        raise SolverError("basis domain does not match the problem domain")
    if problem.dim == 2 and hasattr(basis.domain, "x0"):
        raise SolverError("basis domain does not match the problem domain")


def _segments_uniform(gvals: np.ndarray, t_uni: np.ndarray, T: float, h: float):
    """Left values and slopes per uniform segment, honouring the cutoff at ``T``."""
    left = gvals[:-1].copy()
    right = gvals[1:].copy()
    # segments ending at T keep g(T); from T on the data are zero
    left[t_uni[:-1] >= T * (1 - 1e-14)] = 0.0
    right[t_uni[1:] > T * (1 + 1e-14)] = 0.0
    return left, (right - left) / h


def _ml_scaled(alpha, beta, lam, t, power):
    """``t^power E_{alpha,beta}(-lam t^alpha)``; zero where ``t = 0`` and power > 0."""
    t = np.asarray(t, dtype=float)
    pos = t > 0
    out = np.zeros_like(t)
    tp = t[pos]
    out[pos] = tp**power * ml(alpha, beta, -lam * tp**alpha)
    return out


@dataclass
class _Setup:
    alpha: float
    grid: TimeGrid
    tg: np.ndarray  # geometric family incl. 0
    tu: np.ndarray  # uniform family incl. 0
    data_g: dict  # order -> (len(tg), N)
    data_u: dict  # order -> (len(tu), N)
    data0: dict  # order -> (N,) values at t=0
    u0: np.ndarray
    u1: np.ndarray
    T: float


def _prepare(problem, basis, grid, max_order):
    tg = np.concatenate([[0.0], grid.geometric])
    tu = grid.uniform
    data_g, data_u, data0 = {}, {}, {}
    for k in range(max_order + 1):
        data_g[k] = mode_data(problem, basis, tg, k)
        data_u[k] = mode_data(problem, basis, tu, k)
        data0[k] = data_g[k][0]
    u0, u1 = _initial_coeffs(problem, basis)
    return _Setup(problem.alpha, grid, tg, tu, data_g, data_u, data0, u0, u1, problem.T)


def _mode(setup: _Setup, lam: float, n: int, orders: tuple[int, ...]):
    """All requested series of one mode on (geometric, uniform) families."""
    a = setup.alpha
    tg, tu, h = setup.tg, setup.tu, setup.grid.h

    # kernel moments
    Pu1 = _ml_scaled(a, a + 1.0, lam, tu, a)
    Pu2 = _ml_scaled(a, a + 2.0, lam, tu, a + 1.0)
    w0, w1 = PI.toeplitz_weights(Pu1, Pu2, h)
    D = tg[:, None] - tg[None, :]
    D = np.where(D > 0, D, 0.0)
    tri = np.tril_indices(tg.size, k=-1)
    Pg1 = np.zeros_like(D)
    Pg2 = np.zeros_like(D)
    Pg1[tri] = _ml_scaled(a, a + 1.0, lam, D[tri], a)
    Pg2[tri] = _ml_scaled(a, a + 2.0, lam, D[tri], a + 1.0)

    def conv(order):
        gg = setup.data_g[order][:, n]
        gu = setup.data_u[order][:, n]
        if not gg.any() and not gu.any():
            return np.zeros(tg.size), np.zeros(tu.size)
        sl_g = np.diff(gg) / np.diff(tg)
        cg = PI.triangular_conv(Pg1, Pg2, tg, gg[:-1], sl_g)
        left, sl = _segments_uniform(gu, tu, setup.T, h)
        cu = PI.toeplitz_conv(w0, w1, left, sl)
        return cg, cu

    both = (tg, tu)
    u0, u1 = setup.u0[n], setup.u1[n]
    g1 = setup.data0[1][n] if 1 in setup.data0 else 0.0
    b = setup.data0[0][n] - lam * u0
    e = g1 - lam * u1
    # defects at round-off level of the data are compatibility, not blow-up
    scale = max(abs(setup.data0[0][n]), lam * abs(u0), abs(g1), lam * abs(u1))
    if abs(b) <= SNAP * scale:
        b = 0.0
    if abs(e) <= SNAP * scale:
        e = 0.0
    velocity = a > 1.0
    out = {}

    def fam(fn):
        return tuple(fn(t) for t in both)

    if 0 in orders:
        cg, cu = conv(0)
        E1 = fam(lambda t: _ml_scaled(a, 1.0, lam, t, 0.0) + (t == 0))
        res = [E1[i] * u0 + c for i, c in enumerate((cg, cu))]
        if velocity:
            tE2 = fam(lambda t: _ml_scaled(a, 2.0, lam, t, 1.0))
            res = [r + tE2[i] * u1 for i, r in enumerate(res)]
        out[0] = res
    kern = fam(lambda t: _ml_scaled(a, a, lam, t, a - 1.0))
    if 1 in orders:
        cg, cu = conv(1)
        res = [b * kern[i] + c for i, c in enumerate((cg, cu))]
        if velocity:
            E1 = fam(lambda t: _ml_scaled(a, 1.0, lam, t, 0.0) + (t == 0))
            res = [r + E1[i] * u1 for i, r in enumerate(res)]
        out[1] = res
    if 2 in orders or 3 in orders:
        kd = fam(lambda t: _ml_scaled(a, a - 1.0, lam, t, a - 2.0))
    if 2 in orders:
        cg, cu = conv(2)
        out[2] = [b * kd[i] + e * kern[i] + c for i, c in enumerate((cg, cu))]
    if 3 in orders:
        cg, cu = conv(3)
        kdd = fam(lambda t: _ml_scaled(a, a - 2.0, lam, t, a - 3.0))
        g2 = setup.data0[2][n]
        out[3] = [b * kdd[i] + e * kd[i] + g2 * kern[i] + c for i, c in enumerate((cg, cu))]
    return out, b, e


def _t0_rows(orders, a, b, e, u1, g2):
    """Values at t = 0 for derivative series: finite limits or signed infinities."""

    def flag(c, val):
        return math.copysign(math.inf, c) if c != 0.0 else val

    rows = {}
    for k in orders:
        if k == 1:
            rows[1] = flag(b, u1) if a < 1 else u1
        elif k == 2:
            rows[2] = flag(b, flag(e, 0.0)) if a < 1 else flag(b, 0.0)
        elif k == 3:
            rows[3] = flag(b, flag(e, flag(g2, 0.0))) if a < 1 else flag(b, flag(e, 0.0))
    return rows


def _solve(problem, basis, grid, orders, threads):
    _check(problem, basis, grid)
    max_order = max(orders)
    if max_order > problem.data_max_derivative():
        raise ProblemError("data.f", f"time derivative of order {max_order} not available")
    setup = _prepare(problem, basis, grid, max_order)
    lam = basis.eigenvalues
    N = basis.N

    def work(n):
        return _mode(setup, float(lam[n]), n, orders)

    nthreads = min(_threads(threads), N)
    if nthreads > 1:
        with ThreadPoolExecutor(max_workers=nthreads) as pool:
            results = list(pool.map(work, range(N)))
    else:
        results = [work(n) for n in range(N)]

    t = grid.times
    ng = setup.tg.size
    arrays = {k: np.empty((t.size, N)) for k in orders}
    bvec = np.empty(N)
    evec = np.empty(N)
    for n, (res, b, e) in enumerate(results):
        bvec[n], evec[n] = b, e
        for k in orders:
            cg, cu = res[k]
            arrays[k][:ng, n] = cg
            arrays[k][ng:, n] = cu[1:]
    a = problem.alpha
    if 0 in arrays:
        arrays[0][0] = setup.u0
    g2 = setup.data0.get(2, np.zeros(N))
    for n in range(N):
        rows = _t0_rows(orders, a, bvec[n], evec[n], setup.u1[n], g2[n])
        for k, v in rows.items():
            arrays[k][0, n] = v
    defects = {"b": bvec}
    if max_order >= 1:
        defects["e"] = evec
    return t, arrays, defects


def solve_modes(problem: Problem, basis: SpectralBasis, grid: TimeGrid | None = None,
                derivatives: tuple[int, ...] = (), threads: int | None = None) -> ModeSeries:
    """Modal solution on ``grid`` (default: 1000 uniform steps on ``[0, T]``).

    ``derivatives`` selects extra series among 1, 2, 3.
    """
    grid = grid or TimeGrid.build(problem.T)
    bad = [d for d in derivatives if d not in (1, 2, 3)]
    if bad:
        raise SolverError(f"derivative orders must be 1, 2 or 3, got {bad}")
    orders = (0,) + tuple(sorted(set(derivatives)))
    t, arrays, defects = _solve(problem, basis, grid, orders, threads)
    series = ModeSeries(
        grid=grid, t=t, values=arrays[0], alpha=problem.alpha, chi=problem.chi,
        eigenvalues=basis.eigenvalues.copy(),
        derivatives={k: v for k, v in arrays.items() if k},
        defects=defects,
        meta={
            "data_terms": _data_terms(problem),
            "T": problem.T,
            "grid": grid.describe(),
        },
    )
    tail = series.tail_indicator()
    series.meta["tail_indicator"] = tail
    if tail > TAIL_WARN:
        log.warning("truncation tail indicator %.3g exceeds %.0e; consider more modes", tail, TAIL_WARN)
    return series


def _data_terms(problem: Problem) -> list[str]:
    terms = []
    if not all(s.is_zero() for s in problem.f):
        terms.append("f")
    if not problem.F.is_zero():
        terms.append("F")
    if not problem.u0.is_zero():
        terms.append("u0")
    if problem.u1 is not None and not problem.u1.is_zero():
        terms.append("u1")
    return terms


def first_derivative_modes(problem, basis, grid=None, threads=None) -> np.ndarray:
    """``u_n'(t)`` on the grid; rows at ``t = 0`` may hold signed infinities."""
    grid = grid or TimeGrid.build(problem.T)
    _, arrays, _ = _solve(problem, basis, grid, (1,), threads)
    return arrays[1]


def second_derivative_modes(problem, basis, grid=None, threads=None) -> np.ndarray:
    """``u_n''(t)`` on the grid."""
    grid = grid or TimeGrid.build(problem.T)
    _, arrays, _ = _solve(problem, basis, grid, (2,), threads)
    return arrays[2]


# --------------------------------------------------------------------------
# Laplace transform


def _laplace_data(problem, basis, p):
    if all(s.is_zero() for s in problem.f) and problem.F.is_zero():
        return np.zeros(basis.N)
    val, _ = scipy.integrate.quad_vec(
        lambda t: math.exp(-p * t) * mode_data(problem, basis, [t])[0],
        0.0, problem.T, epsabs=1e-13, epsrel=1e-12, limit=400,
    )
    return val


def mode_laplace(problem: Problem, basis: SpectralBasis, n: int | None, p: float,
                 return_rhs: bool = False):
    """Closed-form Laplace transform of mode ``n`` (1-based; ``None`` for all).

    With ``return_rhs`` also returns the right-hand side ``RHS_n(p)`` so that
    ``(p^a + lam_n) L u_n(p) = RHS_n(p)``.
    """
    if not p > 0:
        raise SolverError(f"p must be positive, got {p}")
    a = problem.alpha
    u0, u1 = _initial_coeffs(problem, basis)
    rhs = p ** (a - 1.0) * u0 + _laplace_data(problem, basis, p)
    if a > 1.0:
        rhs = rhs + p ** (a - 2.0) * u1
    lap = rhs / (p**a + basis.eigenvalues)
    if n is not None:
        if not 1 <= n <= basis.N:
            raise SolverError(f"mode index {n} out of range 1..{basis.N}")
        lap, rhs = lap[n - 1], rhs[n - 1]
    return (lap, rhs) if return_rhs else lap


# --------------------------------------------------------------------------
# reconstruction


def steady_lift(problem: Problem, basis: SpectralBasis, t) -> np.ndarray:
    """Nodal finite-element solutions of the elliptic problem with data at times ``t``.

    Interval only (uses the basis stiffness matrix). Rows: times.
    """
    if basis.stiffness is None or basis.nodes.ndim != 1:
        raise SolverError("the elliptic lift needs an interval basis with stiffness data")
    t = np.atleast_1d(np.asarray(t, dtype=float))
    inside = t <= problem.T * (1 + 1e-14)
    K = basis.stiffness.tocsr()
    P = basis.nodes.size
    out = np.zeros((t.size, P))
    if not inside.any():
        return out
    load = np.zeros((t[inside].size, P))
    if not problem.F.is_zero():
        load += (basis.mass @ problem.source_values(basis, t[inside]).T).T
    fb = problem.boundary_values(basis, t[inside])
    if basis.chi == DIRICHLET:
        dof = np.arange(1, P - 1)
        y = np.zeros_like(load)
        y[:, 0], y[:, -1] = fb[:, 0], fb[:, 1]
        rhs = load[:, dof] - (K[dof][:, [0, P - 1]] @ fb.T).T
        sol = scipy.sparse.linalg.splu(K[dof][:, dof].tocsc()).solve(rhs.T).T
        y[:, dof] = sol
    else:
        load[:, 0] += fb[:, 0]
        load[:, -1] += fb[:, 1]
        y = scipy.sparse.linalg.splu(K.tocsc()).solve(load.T).T
    out[inside] = y
    return out


def evaluate_solution(series: ModeSeries, basis: SpectralBasis, x=None,
                      problem: Problem | None = None, lift: bool = False):
    """Field values ``u(t_k, x_j)`` from the modal series.

    With ``lift=True`` (interval, needs ``problem``) the modes beyond ``N``
    are approximated by those of the quasi-static elliptic solution,
    ``u = sum_n u_n phi_n + (I - P_N) y(t)``, which removes the slow
    truncation error caused by boundary data. Returns ``(field, info)``
    where ``info`` carries the tail indicator.
    """
    vals = np.where(np.isfinite(series.values), series.values, np.nan)
    field_ = basis.synthesize(vals)
    if lift:
        if problem is None:
            raise SolverError("lift=True needs the problem description")
        y = steady_lift(problem, basis, series.t)
        w = basis.project(y)
        field_ = field_ + y - basis.synthesize(w)
    info = {"tail_indicator": series.tail_indicator(), "lifted": bool(lift)}
    if x is not None:
        x = np.asarray(x, dtype=float)
        if basis.nodes.ndim != 1:
            raise SolverError("interpolation to x is available on intervals only")
        field_ = np.stack([np.interp(x, basis.nodes, row) for row in field_])
    return field_, info


# --------------------------------------------------------------------------
# CSV


def _fmt(v: float) -> str:
    return repr(float(v))


def write_series_csv(series: ModeSeries, path, which: int = 0) -> None:
    """``which = 0`` writes ``u_n``; 1..3 write the derivative blocks."""
    data = series.values if which == 0 else series.derivatives[which]
    name = "u" if which == 0 else "d" * which + "u"
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# alpha={_fmt(series.alpha)} chi={series.chi} N={series.N} "
                 f"derivative={which} grid={series.grid.describe()}\n")
        fh.write(",".join(["t"] + [f"{name}_{n + 1}" for n in range(series.N)]) + "\n")
        for tk, row in zip(series.t, data):
            fh.write(",".join([_fmt(tk)] + [_fmt(v) for v in row]) + "\n")
