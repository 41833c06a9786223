import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fracspec.mittag_leffler import ml
from fracspec.problem_model import ProblemError, load_problem
from fracspec.spectral_basis import Coefficients, Interval, build_basis
from fracspec.weak_solver import (
    ModeSeries,
    SolverError,
    TimeGrid,
    evaluate_solution,
    first_derivative_modes,
    mode_data,
    mode_laplace,
    second_derivative_modes,
    solve_modes,
    steady_lift,
    write_series_csv,
)


def cfg(alpha=0.5, f="0, 0", F="0", u0="u0_modes = 1, -0.5, 0.25", u1="", T=1.0, chi="dirichlet"):
    return load_problem(
        f"[problem]\nalpha = {alpha!r}\nchi = {chi}\nT = {T!r}\n"
        f"[data]\nf = {f}\nF = {F}\n{u0}\n{u1}\n"
    )


@pytest.fixture(scope="module")
def basis():
    return build_basis(Interval(), Coefficients(), 0, 8, 400)


GRID = TimeGrid.build(1.0, 200, h_min=1e-6)


@pytest.mark.parametrize("alpha", [0.3, 0.5, 0.9])
def test_homogeneous_modes_are_mittag_leffler(basis, alpha):
    s = solve_modes(cfg(alpha), basis, GRID)
    lam = basis.eigenvalues
    for n, c in enumerate((1.0, -0.5, 0.25)):
        exact = c * ml(alpha, 1.0, -lam[n] * s.t**alpha)
        np.testing.assert_allclose(s.values[:, n], exact, rtol=0, atol=1e-14)
    assert np.all(s.values[:, 3:] == 0.0)


def test_velocity_term_for_superdiffusion(basis):
    p = cfg(1.5, u0="u0_modes = 0.3", u1="u1_modes = 1, 2")
    s = solve_modes(p, basis, GRID)
    lam = basis.eigenvalues
    z = -lam[0] * s.t**1.5
    exact = 0.3 * ml(1.5, 1.0, z) + s.t * ml(1.5, 2.0, z)
    np.testing.assert_allclose(s.values[:, 0], exact, atol=1e-14)
    z2 = -lam[1] * s.t**1.5
    np.testing.assert_allclose(s.values[:, 1], 2 * s.t * ml(1.5, 2.0, z2), atol=1e-14)


@pytest.mark.parametrize("alpha", [0.4, 0.8, 1.3])
def test_constant_datum_closed_form(basis, alpha):
    # g constant: u = g/lam (1 - E_{a,1}(-lam t^a)); piecewise-linear product integration is exact
    u1 = "u1_modes = 0" if alpha > 1 else ""
    p = cfg(alpha, F="sin(pi*x)", u0="u0 = 0", u1=u1, T=1.0)
    s = solve_modes(p, basis, GRID)
    g = mode_data(p, basis, [0.5])[0]
    lam = basis.eigenvalues
    for n in range(3):
        exact = g[n] / lam[n] * (1.0 - ml(alpha, 1.0, -lam[n] * s.t**alpha))
        np.testing.assert_allclose(s.values[:, n], exact, atol=1e-13 * max(1.0, abs(g[n])))


def test_data_cut_off_after_horizon(basis):
    # constant source on [0, 0.5], then free relaxation
    p = cfg(0.6, F="1", u0="u0 = 0", T=0.5)
    grid = TimeGrid.build(0.5, 100, h_min=1e-6, horizon=1.0)
    s = solve_modes(p, basis, grid)
    g = mode_data(p, basis, [0.1])[0][0]
    lam = basis.eigenvalues[0]
    a = 0.6
    P = lambda t: (1.0 - ml(a, 1.0, -lam * np.maximum(t, 0.0) ** a)) / lam
    exact = g * (P(s.t) - P(s.t - 0.5))
    np.testing.assert_allclose(s.values[:, 0], exact, atol=1e-13)
    assert np.all(mode_data(p, basis, [0.75]) == 0.0)


def test_second_order_in_time(basis):
    p = cfg(0.5, f="sin(3*t), 0", u0="u0 = 0")
    ref = solve_modes(p, basis, TimeGrid.build(1.0, 1600, h_min=1e-4))
    errs = []
    for n in (50, 100, 200):
        s = solve_modes(p, basis, TimeGrid.build(1.0, n, h_min=1e-4))
        # compare on shared uniform nodes
        idx = np.searchsorted(ref.t, s.grid.uniform[1:])
        mine = s.values[-s.grid.n_steps:]
        errs.append(np.abs(mine - ref.values[idx]).max())
    ratios = [errs[i] / errs[i + 1] for i in range(2)]
    assert all(3.5 < r < 4.5 for r in ratios), (errs, ratios)


@given(c1=st.floats(-3, 3), c2=st.floats(-3, 3), alpha=st.sampled_from([0.35, 0.75]))
def test_linearity(c1, c2, alpha):
    b = build_basis(Interval(), Coefficients(), 0, 4, 200)
    grid = TimeGrid.build(1.0, 40, h_min=1e-4)
    pa = cfg(alpha, f="cos(t), 0", u0="u0_modes = 1, 0.5")
    pb = cfg(alpha, f="0, t", F="x", u0="u0_modes = 0, 2")
    pc = cfg(alpha, f=f"{c1!r}*cos(t), {c2!r}*t", F=f"{c2!r}*x",
             u0=f"u0_modes = {c1!r}, {0.5 * c1 + 2 * c2!r}")
    sa, sb, sc = (solve_modes(p, b, grid) for p in (pa, pb, pc))
    comb = c1 * sa.values + c2 * sb.values
    scale = 1.0 + np.abs(sa.values).max() + np.abs(sb.values).max()
    assert np.abs(sc.values - comb).max() <= 1e-11 * scale * (1 + abs(c1) + abs(c2))


def test_early_departure_law(basis):
    # 1 - E_{a,1}(-lam t^a) ~ lam t^a / Gamma(1+a) as t -> 0
    a = 0.5
    s = solve_modes(cfg(a), basis, GRID)
    lam = basis.eigenvalues[0]
    small = (s.t > 0) & (s.t < 1e-5)
    dep = 1.0 - s.values[small, 0]
    pred = lam * s.t[small] ** a / math.gamma(1 + a)
    np.testing.assert_allclose(dep, pred, rtol=2 * lam * 1e-5**a)


def test_derivative_series(basis):
    p = cfg(0.5, f="1 + t, 0", u0="u0 = 0")
    s = solve_modes(p, basis, GRID, derivatives=(1, 2))
    d1 = s.derivatives[1]
    # defect b = g(0) != 0 makes u' singular at 0
    assert np.all(np.isinf(d1[0]))
    assert np.array_equal(np.sign(d1[0]), np.sign(s.defects["b"]))
    uni = s.t >= 0.1
    t, u = s.t[uni], s.values[uni]
    fd = np.gradient(u, t, axis=0, edge_order=2)
    np.testing.assert_allclose(d1[uni][2:-2], fd[2:-2], rtol=2e-3, atol=1e-6 * np.abs(fd).max())
    np.testing.assert_allclose(first_derivative_modes(p, basis, GRID), d1, rtol=1e-15)
    np.testing.assert_allclose(second_derivative_modes(p, basis, GRID), s.derivatives[2], rtol=1e-15)
    fd2 = np.gradient(d1[uni], t, axis=0, edge_order=2)
    np.testing.assert_allclose(s.derivatives[2][uni][2:-2], fd2[2:-2], rtol=5e-3,
                               atol=1e-5 * np.abs(fd2).max())


def test_derivative_finite_when_compatible(basis):
    # homogeneous data with u0 = 0 gives b = 0
    p = cfg(0.5, F="t*sin(pi*x)", u0="u0 = 0")
    s = solve_modes(p, basis, GRID, derivatives=(1,))
    assert np.all(np.isfinite(s.derivatives[1][0]))
    assert np.all(s.defects["b"] == 0.0)


def test_mode_laplace_homogeneous(basis):
    a = 0.5
    p = cfg(a)
    lam = basis.eigenvalues
    for pp in (0.5, 2.0, 7.0):
        got = mode_laplace(p, basis, None, pp)
        exact = pp ** (a - 1) * np.array([1.0, -0.5, 0.25] + [0.0] * 5) / (pp**a + lam)
        np.testing.assert_allclose(got, exact, rtol=1e-14)
        val, rhs = mode_laplace(p, basis, 1, pp, return_rhs=True)
        assert val * (pp**a + lam[0]) == pytest.approx(rhs, rel=1e-14)
    with pytest.raises(SolverError):
        mode_laplace(p, basis, 1, 0.0)
    with pytest.raises(SolverError):
        mode_laplace(p, basis, 9, 1.0)


def test_steady_lift_closed_form():
    b = build_basis(Interval(), Coefficients(), 0, 8, 400)
    p = cfg(0.5, f="1, 0", u0="u0 = 0")
    y = steady_lift(p, b, [0.3, 2.0])
    exact = np.sinh(1 - b.nodes) / math.sinh(1.0)
    np.testing.assert_allclose(y[0], exact, atol=2e-6)
    assert np.all(y[1] == 0.0)
    n = build_basis(Interval(), Coefficients(), 1, 8, 400)
    pn = cfg(0.5, f="1, 0", u0="u0 = 0", chi="neumann")
    # -y'' + y = 0, y'(0) = -1, y'(1) = 0  ->  cosh(1-x)/sinh(1)
    yn = steady_lift(pn, n, [0.3])[0]
    np.testing.assert_allclose(yn, np.cosh(1 - n.nodes) / math.sinh(1.0), atol=5e-6)


def test_lifted_reconstruction_matches_lift_when_static(basis):
    p = cfg(0.5, f="1, 0", u0="u0 = 0")
    s = solve_modes(p, basis, GRID)
    u, info = evaluate_solution(s, basis, x=[0.0, 0.5, 1.0], problem=p, lift=True)
    assert info["lifted"]
    assert u[-1, 0] == pytest.approx(1.0, abs=1e-12)
    assert u[-1, 2] == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(SolverError):
        evaluate_solution(s, basis, lift=True)


@given(n1=st.integers(1, 20), extra=st.integers(1, 20), hmin=st.sampled_from([1e-3, 1e-6]))
def test_grids_nest(n1, extra, hmin):
    h = 0.05
    g1 = TimeGrid(horizon=n1 * h, h=h, h_min=hmin)
    g2 = TimeGrid(horizon=(n1 + extra) * h, h=h, h_min=hmin)
    t1, t2 = g1.times, g2.times
    assert np.all(np.diff(t1) > 0)
    np.testing.assert_array_equal(t2[: t1.size], t1)


def test_grid_validation():
    with pytest.raises(SolverError):
        TimeGrid.build(0.0)
    with pytest.raises(SolverError):
        TimeGrid(horizon=1.0, h=0.3, h_min=1e-3)
    with pytest.raises(SolverError):
        TimeGrid(horizon=1.0, h=0.1, h_min=1e-3, ratio=1.0)
    g = TimeGrid.build(1.0, 10, h_min=0.5)
    assert g.geometric.size == 0


def test_solver_input_errors(basis):
    with pytest.raises(SolverError):
        solve_modes(cfg(0.5, chi="neumann"), basis, GRID)
    with pytest.raises(SolverError):
        solve_modes(cfg(0.5), basis, GRID, derivatives=(4,))
    sampled = load_problem(
        "[problem]\nalpha = 0.5\nchi = 0\nT = 1\n[data]\nf = @g, 0\nu0 = 0\n"
        "[signal.g]\nsamples = 0, 1, 0\n"
    )
    with pytest.raises(ProblemError):
        solve_modes(sampled, basis, GRID, derivatives=(1,))
    assert np.isfinite(solve_modes(sampled, basis, GRID).values).all()


def test_thread_count_does_not_change_result(basis):
    p = cfg(0.7, f="sin(t), t", F="x*t")
    a = solve_modes(p, basis, GRID, derivatives=(1,), threads=1)
    b = solve_modes(p, basis, GRID, derivatives=(1,), threads=4)
    np.testing.assert_array_equal(a.values, b.values)
    np.testing.assert_array_equal(a.derivatives[1], b.derivatives[1])


def test_csv_round_trip(tmp_path, basis):
    s = solve_modes(cfg(0.5, f="sin(t), 0"), basis, GRID, derivatives=(1,))
    for which in (0, 1):
        path = tmp_path / f"m{which}.csv"
        write_series_csv(s, path, which)
        lines = path.read_text().splitlines()
        assert lines[0].startswith("# alpha=0.5 chi=0 N=8")
        data = np.genfromtxt(path, delimiter=",", skip_header=2)
        np.testing.assert_array_equal(data[:, 0], s.t)
        ref = s.values if which == 0 else s.derivatives[1]
        np.testing.assert_array_equal(data[:, 1:], ref)


def test_restrict_and_tail_indicator(basis):
    s = solve_modes(cfg(0.5), basis, GRID)
    r = s.restrict(0.5)
    assert r.t[-1] == pytest.approx(0.5) and r.N == s.N
    assert s.tail_indicator() == 0.0
    z = ModeSeries(grid=GRID, t=np.zeros(1), values=np.zeros((1, 3)), alpha=0.5, chi=0,
                   eigenvalues=np.ones(3))
    assert z.tail_indicator() == 0.0
