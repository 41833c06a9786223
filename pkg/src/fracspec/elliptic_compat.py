"""Steady elliptic solves by transposition and compatibility defects.

The steady coefficients are ``w_n = [-(-1)^chi <f, tau* phi_n> + <rho^-1 F, phi_n>] / lam_n``.
The order-1 defect is ``b_n = g_n(0) - lam_n <u0, phi_n>`` and the order-2
defect is ``e_n = g_n'(0) - lam_n <u1, phi_n>``; verdicts compare
``|b_n| / lam_n`` (a difference of initial coefficients) with a tolerance.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .problem_model import Problem, ProblemError, SpatialData
from .spectral_basis import SpectralBasis
from .weak_solver import mode_data, steady_lift

__all__ = [
    "CompatReport",
    "DEFAULT_TOL",
    "compat_defect",
    "compatible_problem",
    "make_compatible",
    "steady_solve",
]

DEFAULT_TOL = 1e-6


def steady_solve(basis: SpectralBasis, f_bdry, F=None, chi: int | None = None) -> np.ndarray:
    """Modal coefficients of the transposition solution with data ``(f, F)``.

    ``f_bdry`` is sampled on the boundary points, ``F`` on the mesh nodes
    (``None`` for zero).
    """
    chi = basis.chi if chi is None else chi
    sign = -((-1.0) ** chi)
    rhs = sign * basis.pair_boundary(np.asarray(f_bdry, dtype=float))
    if F is not None:
        rhs = rhs + basis.project_source(np.asarray(F, dtype=float))
    return rhs / basis.eigenvalues


@dataclass(frozen=True)
class CompatReport:
    defects_b: np.ndarray
    defects_e: np.ndarray | None
    normalized_b: np.ndarray
    normalized_e: np.ndarray | None
    tol: float

    @property
    def com1(self) -> bool:
        return bool(np.max(self.normalized_b) <= self.tol)

    @property
    def com2(self) -> bool | None:
        if self.normalized_e is None:
            return None
        return bool(np.max(self.normalized_e) <= self.tol)

    def render(self, limit: int = 10) -> str:
        def verdict(v):
            return "n/a" if v is None else ("PASS" if v else "FAIL")

        lines = [
            f"tolerance (lambda-normalized): {self.tol:g}",
            f"order-1 condition: {verdict(self.com1)}  max |b_n|/lam_n = {float(np.max(self.normalized_b)):.6g}",
        ]
        if self.normalized_e is not None:
            lines.append(
                f"order-2 condition: {verdict(self.com2)}  max |e_n|/lam_n = {float(np.max(self.normalized_e)):.6g}"
            )
        bad = np.flatnonzero(self.normalized_b > self.tol)[:limit]
        for n in bad:
            lines.append(f"  b_{n + 1} = {float(self.defects_b[n])!r}")
        if self.normalized_e is not None:
            for n in np.flatnonzero(self.normalized_e > self.tol)[:limit]:
                lines.append(f"  e_{n + 1} = {float(self.defects_e[n])!r}")
        return "\n".join(lines)

    def to_csv(self) -> str:
        head = "n,b_n,b_n_over_lambda"
        if self.defects_e is not None:
            head += ",e_n,e_n_over_lambda"
        rows = [head]
        for i in range(self.defects_b.size):
            cols = [str(i + 1), repr(float(self.defects_b[i])), repr(float(self.normalized_b[i]))]
            if self.defects_e is not None:
                cols += [repr(float(self.defects_e[i])), repr(float(self.normalized_e[i]))]
            rows.append(",".join(cols))
        return "\n".join(rows) + "\n"


def compat_defect(problem: Problem, basis: SpectralBasis, tol: float = DEFAULT_TOL) -> CompatReport:
    """Defects of both compatibility conditions (order 2 only for ``alpha > 1``)."""
    if basis.chi != problem.chi:
        raise ProblemError("problem.chi", "basis and problem boundary kinds differ")
    lam = basis.eigenvalues
    g0 = mode_data(problem, basis, [0.0])[0]
    u0 = problem.u0.coefficients(basis)
    b = g0 - lam * u0
    e = ne = None
    if problem.alpha > 1.0:
        if problem.u1 is None:
            raise ProblemError("data.u1", "u1 required for alpha>1")
        if problem.data_max_derivative() < 1:
            raise ProblemError("data.f", "first time derivative of f not available")
        g1 = mode_data(problem, basis, [0.0], k=1)[0]
        e = g1 - lam * problem.u1.coefficients(basis)
        ne = np.abs(e) / lam
    return CompatReport(b, e, np.abs(b) / lam, ne, float(tol))


def _steady_field(problem: Problem, basis: SpectralBasis, k: int) -> np.ndarray:
    if basis.stiffness is not None and basis.nodes.ndim == 1:
        if k == 0:
            return steady_lift(problem, basis, [0.0])[0]
        return _lift_derivative(problem, basis, k)
    w = mode_data(problem, basis, [0.0], k=k)[0] / basis.eigenvalues
    return basis.synthesize(w)


def _lift_derivative(problem, basis, k):
    # the elliptic solve is linear in (f, F): differentiate the data instead
    from .problem_model import DataField, TimeSignal
    import sympy as sp

    t = sp.Symbol("t", real=True)
    f = tuple(
        TimeSignal.from_expr(str(sp.diff(s.expr, t, k)), "data.f") if s.is_closed_form
        else TimeSignal.from_expr(repr(float(s.derivative(k, 0.0))), "data.f")
        for s in problem.f
    )
    F = DataField(source=str(sp.diff(problem.F.expr, t, k)), expr=sp.diff(problem.F.expr, t, k))
    return steady_lift(problem.replace(f=f, F=F), basis, [0.0])[0]


def make_compatible(problem: Problem, basis: SpectralBasis, order: int = 1) -> np.ndarray:
    """Nodal initial value satisfying the order-1 condition (``order=2``: the
    velocity satisfying the order-2 condition).

    On intervals this is the finite-element elliptic solution, whose modal
    coefficients equal the steady coefficients exactly; on rectangles it is
    the truncated steady expansion.
    """
    if order not in (1, 2):
        raise ValueError("order must be 1 or 2")
    return _steady_field(problem, basis, order - 1)


def compatible_problem(problem: Problem, basis: SpectralBasis, velocity: bool = False) -> Problem:
    """Copy of ``problem`` whose ``u0`` (and optionally ``u1``) are made compatible."""
    u0 = make_compatible(problem, basis, 1)
    changes = {"u0": SpatialData("samples", "<compatible>", values=tuple(u0.tolist()))}
    if velocity:
        if problem.alpha < 1.0:
            raise ProblemError("data.u1", "u1 must be absent for alpha<1")
        u1 = make_compatible(problem, basis, 2)
        changes["u1"] = SpatialData("samples", "<compatible>", values=tuple(u1.tolist()))
    return problem.replace(**changes)
