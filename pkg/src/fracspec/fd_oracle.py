"""Finite-difference oracles on intervals, independent of the spectral path.

* Caputo L1 time stepping (``0 < alpha < 1``) with a three-point
  conservative discretization of ``-(a u')' + q u``.
* Fixed-Talbot inversion of the semi-discrete resolvent for either range of
  ``alpha``. Data transforms come from sympy; the untruncated data give the
  same solution on ``[0, T]`` and keep the transform bounded on the contour.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg
import sympy as sp
from scipy.special import gamma

from .problem_model import Problem, ProblemError
from .spectral_basis import DIRICHLET, Interval

__all__ = [
    "FDScheme",
    "NumericalFailure",
    "caputo_apply",
    "caputo_l1_weights",
    "fd_operator",
    "fd_solve_l1",
    "fd_solve_talbot",
    "write_field_csv",
]


class NumericalFailure(RuntimeError):
    """A numerical method could not produce a finite result."""


def caputo_l1_weights(alpha: float, K: int) -> np.ndarray:
    """``b_j = (j+1)^(1-alpha) - j^(1-alpha)`` for ``j = 0..K-1``."""
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"L1 weights need 0 < alpha < 1, got {alpha}")
    if K < 1:
        raise ValueError("K must be at least 1")
    j = np.arange(K + 1, dtype=float) ** (1.0 - alpha)
    return np.diff(j)


def caputo_apply(alpha: float, u, dt: float) -> np.ndarray:
    """L1 approximation of the Caputo derivative at every uniform node.

    ``u`` has time on the leading axis; row 0 of the result is 0.
    """
    u = np.asarray(u, dtype=float)
    if u.shape[0] < 2:
        raise ValueError("need at least two time samples")
    K = u.shape[0] - 1
    b = caputo_l1_weights(alpha, K)
    du = np.diff(u, axis=0)
    out = np.zeros_like(u)
    c = dt ** (-alpha) / gamma(2.0 - alpha)
    for k in range(1, K + 1):
        # sum_j b_j (u_{k-j} - u_{k-j-1})
        out[k] = c * np.tensordot(b[:k], du[k - 1 :: -1][:k], axes=(0, 0))
    return out


@dataclass(frozen=True)
class FDScheme:
    mesh_size: int
    steps: int
    alpha: float
    boundary: str = "auto"  # "dirichlet" | "neumann" | "auto" (from the problem)
    talbot_nodes: int = 32

    def __post_init__(self) -> None:
        if self.mesh_size < 4 or self.steps < 1:
            raise ValueError("mesh_size >= 4 and steps >= 1 required")
        if not (0.0 < self.alpha < 1.0 or 1.0 < self.alpha < 2.0):
            raise ValueError(f"alpha must lie in (0,1) or (1,2), got {self.alpha}")


def fd_operator(problem: Problem, M: int):
    """Nodes, tridiagonal ``A_h`` (banded, all nodes), nodal rho, control widths.

    Row ``i`` approximates ``w_i (-(a u')' + q u)(x_i)`` with control width
    ``w_i`` (``h``, halved at the ends), so ``A_h`` is symmetric.
    """
    if not isinstance(problem.domain, Interval):
        raise ProblemError("domain.kind", "the finite-difference oracle supports intervals only")
    d = problem.domain
    x = np.linspace(d.x0, d.x1, M + 1)
    h = d.length / M
    c = problem.coefficients
    a_mid = c.eval("a", 0.5 * (x[:-1] + x[1:]))
    q = c.eval("q", x)
    rho = c.eval("rho", x)
    width = np.full(M + 1, h)
    width[[0, -1]] = 0.5 * h
    diag = width * q
    diag[:-1] += a_mid / h
    diag[1:] += a_mid / h
    off = -a_mid / h
    ab = np.zeros((3, M + 1))
    ab[0, 1:] = off
    ab[1] = diag
    ab[2, :-1] = off
    return x, ab, rho, width


def _dirichlet(problem: Problem, scheme: FDScheme) -> bool:
    if scheme.boundary == "auto":
        return problem.chi == DIRICHLET
    return scheme.boundary == "dirichlet"


def _boundary_system(ab, dirichlet):
    """Banded matrix with Dirichlet rows and columns eliminated.

    Returns the matrix and the couplings ``(A[1,0], A[M-1,M])`` that
    :func:`_lift_rhs` moves to the right-hand side, so prescribed values are
    reproduced exactly whatever pivoting the banded solver does.
    """
    ab = ab.copy()
    coupling = (0.0, 0.0)
    if dirichlet:
        coupling = (ab[2, 0], ab[0, -1])
        ab[1, 0] = ab[1, -1] = 1.0
        ab[0, 1] = 0.0  # row 0, col 1
        ab[2, -2] = 0.0  # row M, col M-1
        ab[2, 0] = 0.0  # row 1, col 0
        ab[0, -1] = 0.0  # row M-1, col M
    return ab, coupling


def _lift_rhs(rhs, coupling):
    rhs[1] -= coupling[0] * rhs[0]
    rhs[-2] -= coupling[1] * rhs[-1]
    return rhs


def _initial(problem, x):
    u0 = problem.u0.nodal(x) if problem.u0.kind != "modes" else None
    if u0 is None:
        raise ProblemError("data.u0", "modal initial data cannot be used by the FD oracle")
    u1 = None
    if problem.u1 is not None:
        if problem.u1.kind == "modes":
            raise ProblemError("data.u1", "modal initial data cannot be used by the FD oracle")
        u1 = problem.u1.nodal(x)
    return u0, u1


def fd_solve_l1(problem: Problem, scheme: FDScheme):
    """Implicit L1 stepping on ``[0, T]``; returns ``(t, x, u)`` with ``u[k, i]``."""
    alpha = problem.alpha
    if not 0.0 < alpha < 1.0:
        raise ValueError("L1 stepping is implemented for 0 < alpha < 1 only")
    M, K = scheme.mesh_size, scheme.steps
    x, ab, rho, width = fd_operator(problem, M)
    dirichlet = _dirichlet(problem, scheme)
    dt = problem.T / K
    t = np.arange(K + 1) * dt
    b = caputo_l1_weights(alpha, K)
    c = dt ** (-alpha) / gamma(2.0 - alpha)
    mass = width * rho

    sys_ab = ab.copy()
    sys_ab[1] += c * b[0] * mass
    sys_ab, coupling = _boundary_system(sys_ab, dirichlet)

    f_vals = np.stack([s(t) for s in problem.f], axis=1)
    F_vals = problem.F.derivative(0, t, x) if not problem.F.is_zero() else np.zeros((K + 1, M + 1))

    u = np.zeros((K + 1, M + 1))
    u0, _ = _initial(problem, x)
    u[0] = u0
    du = np.zeros((K, M + 1))
    for k in range(1, K + 1):
        # history: sum_{j=1}^{k-1} b_j (u^{k-j} - u^{k-j-1})
        hist = b[1:k] @ du[k - 2 :: -1][: k - 1] if k > 1 else 0.0
        rhs = c * mass * (b[0] * u[k - 1] - hist) + width * F_vals[k]
        if dirichlet:
            rhs[0], rhs[-1] = f_vals[k, 0], f_vals[k, 1]
            _lift_rhs(rhs, coupling)
        else:
            rhs[0] += f_vals[k, 0]
            rhs[-1] += f_vals[k, 1]
        u[k] = scipy.linalg.solve_banded((1, 1), sys_ab, rhs)
        du[k - 1] = u[k] - u[k - 1]
    return t, x, u


# --------------------------------------------------------------------------
# Talbot

_T = sp.Symbol("t", real=True)
_P = sp.Symbol("p")


def _laplace_fn(expr: sp.Expr, where: str):
    if expr == 0:
        return None
    x, y = sp.symbols("x y", real=True)
    try:
        res = sp.laplace_transform(expr, _T, _P, noconds=True)
    except Exception as exc:  # sympy raises a variety of errors here
        raise NumericalFailure(f"{where}: no closed-form Laplace transform ({exc})") from None
    if res.has(sp.LaplaceTransform):
        raise NumericalFailure(f"{where}: no closed-form Laplace transform for {expr}")
    return sp.lambdify((_P, x), res, modules="numpy")


def _talbot_nodes(M: int, t: float):
    r = 2.0 * M / (5.0 * t)
    theta = np.arange(1, M) * math.pi / M
    cot = 1.0 / np.tan(theta)
    p = r * theta * (cot + 1j)
    sigma = theta + (theta * cot - 1.0) * cot
    return r, p, sigma


def fd_solve_talbot(problem: Problem, scheme: FDScheme, times) -> tuple[np.ndarray, np.ndarray]:
    """Semi-discrete solution at ``times`` by fixed-Talbot inversion.

    Returns ``(x, u)`` with ``u[k, i]``. Raises :class:`NumericalFailure`
    when the contour sum is not finite even after doubling the nodes.
    """
    times = np.atleast_1d(np.asarray(times, dtype=float))
    if np.any(times <= 0):
        raise ValueError("Talbot inversion needs t > 0")
    M = scheme.mesh_size
    x, ab, rho, width = fd_operator(problem, M)
    dirichlet = _dirichlet(problem, scheme)
    u0, u1 = _initial(problem, x)
    alpha = problem.alpha
    mass = width * rho

    f_lap = []
    for i, s in enumerate(problem.f):
        if not s.is_closed_form:
            raise NumericalFailure("Talbot oracle needs closed-form boundary data")
        f_lap.append(_laplace_fn(s.expr, f"data.f[{i}]"))
    F_lap = _laplace_fn(problem.F.expr, "data.F")

    def resolvent(p):
        sys_ab = ab.astype(complex)
        sys_ab[1] += p**alpha * mass
        sys_ab, coupling = _boundary_system(sys_ab, dirichlet)
        rhs = mass * p ** (alpha - 1.0) * u0
        if u1 is not None and alpha > 1.0:
            rhs = rhs + mass * p ** (alpha - 2.0) * u1
        rhs = rhs.astype(complex)
        if F_lap is not None:
            rhs += width * np.broadcast_to(F_lap(p, x), x.shape)
        fb = [0.0 if fl is None else complex(fl(p, 0.0)) for fl in f_lap]
        if dirichlet:
            rhs[0], rhs[-1] = fb
            _lift_rhs(rhs, coupling)
        else:
            rhs[0] += fb[0]
            rhs[-1] += fb[1]
        return scipy.linalg.solve_banded((1, 1), sys_ab, rhs)

    def invert(t, nodes):
        r, p, sigma = _talbot_nodes(nodes, t)
        acc = 0.5 * np.real(resolvent(complex(r))) * math.exp(r * t)
        for pk, sk in zip(p, sigma):
            acc = acc + np.real(np.exp(t * pk) * resolvent(pk) * (1.0 + 1j * sk))
        return r / nodes * acc

    out = np.empty((times.size, M + 1))
    for k, t in enumerate(times):
        with np.errstate(all="ignore"):
            val = invert(t, scheme.talbot_nodes)
            if not np.all(np.isfinite(val)):
                val = invert(t, 2 * scheme.talbot_nodes)
        if not np.all(np.isfinite(val)):
            raise NumericalFailure(
                f"Talbot contour failed at t={t!r} with {2 * scheme.talbot_nodes} nodes"
            )
        out[k] = val
    return x, out


def write_field_csv(path, t, x, u) -> None:
    """Write ``(t, x, value)`` triples, shortest round-trip floats."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("t,x,u\n")
        for tk, row in zip(np.asarray(t), np.asarray(u)):
            for xi, v in zip(np.asarray(x), row):
                fh.write(f"{float(tk)!r},{float(xi)!r},{float(v)!r}\n")
