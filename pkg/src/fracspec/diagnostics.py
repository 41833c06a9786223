"""Regularity fits, Laplace residuals, estimate monitors and trace-sum checks."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
import scipy.integrate

from .fd_oracle import FDScheme, caputo_apply, fd_solve_l1, fd_solve_talbot
from .problem_model import DataField, Problem, SpatialData, TimeSignal
from .mittag_leffler import ml_primitive
from .spectral_basis import SpectralBasis, fractional_norm, lemma_l1_diagnostic
from .weak_solver import (
    ModeSeries,
    TimeGrid,
    evaluate_solution,
    mode_data,
    mode_laplace,
    solve_modes,
)

__all__ = [
    "OracleComparison",
    "LemmaReport",
    "MonitorStats",
    "RegularityReport",
    "estimate_monitor",
    "fit_power",
    "laplace_residual",
    "lemma_l1_check",
    "oracle_errors",
    "predicted_exponent",
    "random_draws",
    "regularity_exponent",
]

BOUNDED_SLOPE = -0.05
MIN_FIT_POINTS = 12


@dataclass(frozen=True)
class RegularityReport:
    m: int
    norm: str
    sigma: float | None
    residual: float | None
    n_points: int
    window: tuple[float, float]
    predicted: float | None
    verdict: str  # "bounded" | "singular"

    def render(self) -> str:
        pred = "bounded" if self.predicted is None else f"{self.predicted:.6g}"
        sig = "undefined" if self.sigma is None else f"{self.sigma:.6g}"
        res = "n/a" if self.residual is None else f"{self.residual:.3g}"
        return (
            f"derivative order m = {self.m}\n"
            f"norm: {self.norm}\n"
            f"window: [{self.window[0]:.3g}, {self.window[1]:.3g}] ({self.n_points} points)\n"
            f"fitted exponent: {sig} (rms residual {res})\n"
            f"predicted: {pred}\n"
            f"verdict: {self.verdict}"
        )


def fit_power(t: np.ndarray, y: np.ndarray) -> tuple[float, float]:
    """Least-squares slope of ``log y`` against ``log t`` and the rms residual."""
    lt, ly = np.log(t), np.log(y)
    A = np.stack([lt, np.ones_like(lt)], axis=1)
    coef, *_ = np.linalg.lstsq(A, ly, rcond=None)
    resid = ly - A @ coef
    return float(coef[0]), float(np.sqrt(np.mean(resid**2)))


def predicted_exponent(alpha: float, m: int, b_nonzero: bool, e_nonzero: bool,
                       g2_nonzero: bool = False) -> float | None:
    """Leading small-time power of ``d^m u/dt^m``; ``None`` when bounded."""
    # singular contributions: b t^(a-m), e t^(a-m+1), g''(0) t^(a-m+2)
    powers = []
    if b_nonzero:
        powers.append(alpha - m)
    if e_nonzero and m >= 2:
        powers.append(alpha - m + 1)
    if g2_nonzero and m >= 3:
        powers.append(alpha - m + 2)
    powers = [p for p in powers if p < 0]
    return min(powers) if powers else None


def regularity_exponent(series: ModeSeries, basis: SpectralBasis, m: int,
                        window: tuple[float, float] = (1e-6, 1e-2),
                        tol: float = 1e-6) -> RegularityReport:
    """Fit the small-time exponent of ``||d^m u/dt^m||`` in ``D(A^(-1/2))``.

    ``window`` is relative to the problem horizon stored in the series.
    """
    if m not in series.derivatives:
        raise ValueError(f"series has no derivative of order {m}; solve with derivatives=({m},)")
    T = series.meta.get("T", series.grid.horizon)
    lo, hi = window[0] * T, window[1] * T
    sel = (series.t >= lo) & (series.t <= hi)
    t = series.t[sel]
    vals = series.derivatives[m][sel]
    norm = fractional_norm(vals, series.eigenvalues, -0.5)
    lam = series.eigenvalues
    b = series.defects.get("b", np.zeros_like(lam))
    e = series.defects.get("e", np.zeros_like(lam))
    pred = predicted_exponent(
        series.alpha, m,
        bool(np.max(np.abs(b) / lam) > tol),
        bool(np.max(np.abs(e) / lam) > tol),
    )
    label = "D(A^(-1/2)) modal norm"
    if t.size < MIN_FIT_POINTS:
        raise ValueError(f"only {t.size} grid points in the fit window; need {MIN_FIT_POINTS}")
    if not np.any(norm > 0):
        return RegularityReport(m, label, None, None, int(t.size), (lo, hi), pred, "bounded")
    pos = norm > 0
    sigma, resid = fit_power(t[pos], norm[pos])
    verdict = "bounded" if sigma >= BOUNDED_SLOPE else "singular"
    return RegularityReport(m, label, sigma, resid, int(pos.sum()), (lo, hi), pred, verdict)


# --------------------------------------------------------------------------
# Laplace characterization


@dataclass(frozen=True)
class LaplaceRow:
    p: float
    algebraic: float
    quadrature: float
    tail_bound: float
    T_big: float

    def passes(self, alg_tol: float = 1e-13, quad_tol: float = 1e-4) -> bool:
        return self.algebraic <= alg_tol and self.quadrature <= quad_tol


def laplace_residual(problem: Problem, basis: SpectralBasis, p_list: Sequence[float],
                     n_uniform: int = 500, threads: int | None = None,
                     h_min: float | None = None) -> list[LaplaceRow]:
    """Algebraic and quadrature residuals of the modal Laplace transforms.

    (a) ``max_n |(p^a + lam_n) L u_n - RHS_n| / max_n |RHS_n|``;
    (b) the grid integral of ``exp(-p t) u_n(t)`` over ``(0, T_big)``
        against the closed form, relative in the Euclidean norm over modes,
        minus an analytic bound for the neglected tail ``t > T_big``.

    For (b) the two non-smooth pieces ``b_n P(t) - g_n(T) P(t - T)_+`` with
    ``P(t) = t^a E_{a,a+1}(-lam t^a)`` (the responses to the data jumps at
    ``0`` and ``T``) are integrated in closed form; Simpson's rule handles
    the smooth remainder.
    """
    p_arr = np.asarray(p_list, dtype=float)
    if np.any(p_arr <= 0):
        raise ValueError("p must be positive")
    T = problem.T
    a = problem.alpha
    lam = basis.eigenvalues
    h = T / n_uniform
    T_big = max(T, 20.0 / float(np.min(p_arr)))
    J = int(math.ceil(T_big / h - 1e-9))
    grid = TimeGrid(horizon=J * h, h=h, h_min=h_min or T * 1e-8)
    series = solve_modes(problem, basis, grid, threads=threads)
    t, u = series.t, series.values
    b = series.defects.get("b", np.zeros_like(lam))
    gT = mode_data(problem, basis, [T])[0]
    after = t > T * (1 + 1e-14)
    sing = np.zeros_like(u)
    for n in range(basis.N):
        sing[:, n] = b[n] * ml_primitive(a, a, lam[n], t)
        sing[after, n] -= gT[n] * ml_primitive(a, a, lam[n], t[after] - T)
    k = int(np.count_nonzero(~after))
    rows = []
    for p in p_arr:
        lap, rhs = mode_laplace(problem, basis, None, float(p), return_rhs=True)
        alg = np.abs((p**a + lam) * lap - rhs)
        scale = max(float(np.max(np.abs(rhs))), 1e-300)
        w = np.exp(-p * t)[:, None] * (u - sing)
        quad = scipy.integrate.simpson(w[:k], x=t[:k], axis=0)
        if k < t.size:
            quad = quad + scipy.integrate.simpson(w[k - 1:], x=t[k - 1:], axis=0)
        # closed-form transform of the subtracted pieces on (0, inf)
        quad = quad + (b - gT * math.exp(-p * T)) / (p * (p**a + lam))
        # |u_n(t)| <= |u_n(T_big)| (T_big/t)^a beyond T_big, data being zero there;
        # 0 <= P <= 1/lam bounds the subtracted pieces
        decay = math.exp(-p * t[-1]) / p
        tail = (np.abs(u[-1]) + (np.abs(b) + np.abs(gT)) / lam) * decay
        denom = max(float(np.linalg.norm(lap)), 1e-300)
        err = float(np.linalg.norm(np.maximum(np.abs(quad - lap) - tail, 0.0))) / denom
        rows.append(LaplaceRow(float(p), float(np.max(alg)) / scale, err,
                               float(np.linalg.norm(tail)) / denom, float(t[-1])))
    return rows


# --------------------------------------------------------------------------
# estimate monitors


@dataclass
class MonitorStats:
    kind: str
    ratios: dict[int, np.ndarray] = field(default_factory=dict)  # N -> ratios per draw
    excluded: int = 0

    def max(self, N: int) -> float:
        return float(np.max(self.ratios[N]))

    def median(self, N: int) -> float:
        return float(np.median(self.ratios[N]))

    def growth(self) -> float:
        Ns = sorted(self.ratios)
        return self.max(Ns[-1]) / self.max(Ns[0])

    def passes(self, factor: float = 1.2) -> bool:
        vals = [self.max(N) for N in self.ratios]
        if not all(math.isfinite(v) for v in vals):
            return False
        g = self.growth()
        return 1.0 / factor <= g <= factor


def _lr_norm(t, values, r):
    return float(np.trapezoid(np.abs(values) ** r, t) ** (1.0 / r))


def _ratio(problem, basis, series, kind, N, theta, r, eps):
    lam = basis.eigenvalues[:N]
    t = series.t
    u = series.values[:, :N]
    fb = problem.boundary_values(basis, t)
    f_norm = _lr_norm(t, np.linalg.norm(fb, axis=1), r)
    Fc = basis.project_source(problem.source_values(basis, t))[:, :N] if not problem.F.is_zero() \
        else np.zeros((t.size, N))
    if kind == "t1a":
        alpha = problem.alpha
        beta = 1.0 if r < 1.0 / alpha else 1.0 / (alpha * r)
        lhs = _lr_norm(t, fractional_norm(u, lam, -eps + 0.25 - theta / 2), r)
        F_norm = _lr_norm(t, fractional_norm(Fc, lam, -theta / 2 - 0.75), r)
        u0c = problem.u0.coefficients(basis)[:N]
        rhs = f_norm + F_norm + fractional_norm(u0c, lam, -beta + 0.25 - theta / 2)
    else:
        uni = t >= series.grid.h * (1 - 1e-12)
        tu = np.concatenate([[0.0], t[uni]])
        uu = np.vstack([u[:1], u[uni]])
        if problem.alpha < 1.0:
            dau = caputo_apply(problem.alpha, uu, series.grid.h)
        else:
            # the modal equation gives the Caputo derivative directly
            g = mode_data(problem, basis, tu)[:, :N]
            dau = g - lam * uu
        lhs = _lr_norm(t, fractional_norm(u, lam, 0.25 - theta / 2), 2) + \
            _lr_norm(tu, fractional_norm(dau, lam, -0.75 - theta / 2), 2)
        rhs = f_norm + _lr_norm(t, fractional_norm(Fc, lam, -0.75 - theta / 2), 2)
    return lhs, rhs


def random_draws(base: Problem, rng: np.random.Generator, count: int,
                 zero_initial: bool = False) -> list[Problem]:
    """Copies of ``base`` with random smooth closed-form data (intervals).

    Boundary data are ``c0 + c1 t + c2 sin(w t)`` per endpoint, the source is
    ``d sin(k pi x) cos(w t)`` and ``u0 = e x (1 - x)`` unless ``zero_initial``.
    """
    out = []
    for _ in range(count):
        f = []
        for _side in range(len(base.f)):
            c0, c1, c2 = map(float, rng.normal(size=3))
            w = float(rng.uniform(0.5, 6.0))
            f.append(TimeSignal.from_expr(f"{c0!r} + {c1!r}*t + {c2!r}*sin({w!r}*t)", "data.f"))
        d, w = float(rng.normal()), float(rng.uniform(0.5, 6.0))
        k = int(rng.integers(1, 6))
        F = DataField.parse(f"{d!r}*sin({k}*pi*x)*cos({w!r}*t)", base.dim, "data.F")
        changes = {"f": tuple(f), "F": F}
        if zero_initial:
            changes["u0"] = SpatialData.parse_expr("0", base.dim, "data.u0")
            if base.u1 is not None:
                changes["u1"] = SpatialData.parse_expr("0", base.dim, "data.u1")
        else:
            changes["u0"] = SpatialData.parse_expr(f"{float(rng.normal())!r}*x*(1-x)", base.dim, "data.u0")
        out.append(base.replace(**changes))
    return out


def estimate_monitor(problems: Iterable[Problem], basis: SpectralBasis, kind: str,
                     N_values: Sequence[int] = (64, 128), theta: float = 0.5,
                     r: float = 2.0, eps: float = 0.05, grid: TimeGrid | None = None,
                     threads: int | None = None) -> MonitorStats:
    """LHS/RHS ratios of the a-priori estimates over a set of data draws.

    Solves once with ``max(N_values)`` modes; smaller truncations reuse the
    leading modes, which are independent of the others.
    """
    if kind not in ("t1a", "c1a"):
        raise ValueError("kind must be 't1a' or 'c1a'")
    Nmax = max(N_values)
    if basis.N < Nmax:
        raise ValueError(f"basis has {basis.N} modes, monitor needs {Nmax}")
    basis = basis.restrict(Nmax)
    stats = MonitorStats(kind, {N: [] for N in N_values})
    for prob in problems:
        if kind == "c1a":
            if not prob.u0.is_zero() or (prob.u1 is not None and not prob.u1.is_zero()):
                raise ValueError("c1a monitor needs zero initial values")
        g = grid or TimeGrid.build(prob.T, 200, h_min=prob.T * 1e-4)
        series = solve_modes(prob, basis, g, threads=threads)
        pairs = [_ratio(prob, basis, series, kind, N, theta, r, eps) for N in N_values]
        if any(rhs == 0.0 for _, rhs in pairs):
            stats.excluded += 1
            continue
        for N, (lhs, rhs) in zip(N_values, pairs):
            stats.ratios[N].append(lhs / rhs)
    stats.ratios = {N: np.asarray(v) for N, v in stats.ratios.items()}
    return stats


# --------------------------------------------------------------------------
# trace sums


@dataclass(frozen=True)
class LemmaReport:
    partial_sums: list[np.ndarray]
    converged: list[bool]
    tail_slopes: list[float | None]
    ratios: list[float | None]
    spread: float

    @property
    def passed(self) -> bool:
        return all(self.converged) and math.isfinite(self.spread) and self.spread <= 10.0


def lemma_l1_check(basis: SpectralBasis, data: Sequence, theta: float = 0.5) -> LemmaReport:
    """Convergence of the weighted trace sums for each boundary datum.

    Passes when every sum satisfies ``S_N - S_{N/2} <= 0.1 S_{N/2}`` and the
    normalized limits ``S_inf / |h|^2`` stay within a factor 10 of each other.
    """
    if basis.N < 64:
        raise ValueError("lemma check needs at least 64 modes")
    kappa = (2.0 * theta - 1.0) / 4.0
    sums, conv, slopes, ratios = [], [], [], []
    N = basis.N
    half = N // 2
    for h in data:
        h = np.asarray(h, dtype=float)
        S = lemma_l1_diagnostic(basis, h, theta)
        sums.append(S)
        if not np.any(h):
            conv.append(True)
            slopes.append(None)
            ratios.append(None)
            continue
        conv.append(bool(S[-1] - S[half - 1] <= 0.1 * S[half - 1]))
        pair = basis.pair_boundary(h)
        terms = basis.eigenvalues ** (-2.0 * (1.0 + kappa)) * pair**2
        n = np.arange(1, N + 1)
        sel = (n >= N // 4) & (terms > 1e-12 * np.max(terms))
        slope = None
        tail = 0.0
        if sel.sum() >= 4:
            slope, _ = fit_power(n[sel].astype(float), terms[sel])
            if slope < -1.0:
                # integral estimate of the neglected terms
                tail = terms[sel][-1] * N / (-slope - 1.0)
        slopes.append(slope)
        ratios.append(float((S[-1] + tail) / np.sum(h**2 * basis.boundary_weights)))
    valid = [r for r in ratios if r is not None and r > 0]
    spread = max(valid) / min(valid) if valid else 1.0
    return LemmaReport(sums, conv, slopes, ratios, spread)


# --------------------------------------------------------------------------
# oracle comparison


@dataclass(frozen=True)
class OracleComparison:
    spectral_vs_l1: float | None
    talbot_vs_l1: float | None
    talbot_vs_spectral: float | None
    talbot_times: tuple[float, ...]
    timings: dict

    def rows(self) -> list[tuple[str, float | None]]:
        return [
            ("spectral_vs_l1", self.spectral_vs_l1),
            ("talbot_vs_l1", self.talbot_vs_l1),
            ("talbot_vs_spectral", self.talbot_vs_spectral),
        ]


def _l2_q(t, x, u):
    return float(np.sqrt(np.trapezoid(np.trapezoid(u**2, x, axis=1), t)))


def oracle_errors(problem: Problem, basis: SpectralBasis, scheme: FDScheme,
                  talbot_times: Sequence[float] = (0.1, 0.5, 1.0), lift: bool = True,
                  threads: int | None = None) -> OracleComparison:
    """Relative errors between the spectral solution and the FD oracles.

    The spectral series runs on the L1 time grid (same step, plus the
    geometric start) and is sampled at the FD nodes, which must be a subset
    of the basis nodes. ``spectral_vs_l1`` is the relative ``L2(Q)`` error;
    Talbot comparisons are relative Euclidean errors over the listed times
    (fractions of ``T``). L1 entries are ``None`` for ``alpha > 1``.
    """
    T = problem.T
    timings = {}
    clock = time.perf_counter()
    grid = TimeGrid.build(T, scheme.steps)
    series = solve_modes(problem, basis, grid, threads=threads)
    field_, _ = evaluate_solution(series, basis, problem=problem, lift=lift)
    uni = series.t >= grid.h * (1 - 1e-12)
    t_spec = np.concatenate([[0.0], series.t[uni]])
    u_spec = np.vstack([field_[:1], field_[uni]])
    x_fd = np.linspace(basis.nodes[0], basis.nodes[-1], scheme.mesh_size + 1)
    u_spec = np.stack([np.interp(x_fd, basis.nodes, row) for row in u_spec])
    timings["spectral"] = time.perf_counter() - clock

    l1 = None
    u_l1 = None
    if problem.alpha < 1.0:
        clock = time.perf_counter()
        _, x_fd, u_l1 = fd_solve_l1(problem, scheme)
        timings["l1"] = time.perf_counter() - clock
        l1 = _l2_q(t_spec, x_fd, u_spec - u_l1) / _l2_q(t_spec, x_fd, u_l1)

    tq = np.asarray(talbot_times, dtype=float) * T
    clock = time.perf_counter()
    _, u_tal = fd_solve_talbot(problem, scheme, tq)
    timings["talbot"] = time.perf_counter() - clock
    idx = [int(np.argmin(np.abs(t_spec - q))) for q in tq]
    tal_spec = float(np.linalg.norm(u_tal - u_spec[idx]) / np.linalg.norm(u_spec[idx]))
    tal_l1 = None
    if u_l1 is not None:
        tal_l1 = float(np.linalg.norm(u_tal - u_l1[idx]) / np.linalg.norm(u_l1[idx]))
    return OracleComparison(l1, tal_l1, tal_spec, tuple(float(v) for v in tq), timings)
