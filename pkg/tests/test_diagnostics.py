import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fracspec.diagnostics import (
    estimate_monitor,
    fit_power,
    laplace_residual,
    lemma_l1_check,
    oracle_errors,
    predicted_exponent,
    random_draws,
    regularity_exponent,
)
from fracspec.fd_oracle import FDScheme
from fracspec.problem_model import load_problem
from fracspec.spectral_basis import Coefficients, Interval, build_basis
from fracspec.weak_solver import TimeGrid, solve_modes


def cfg(alpha=0.5, f="0, 0", F="0", u0="u0 = 0", u1="", T=1.0, chi=0):
    return load_problem(
        f"[problem]\nalpha = {alpha}\nchi = {chi}\nT = {T!r}\n"
        f"[data]\nf = {f}\nF = {F}\n{u0}\n{u1}\n"
    )


@pytest.fixture(scope="module")
def basis():
    return build_basis(Interval(), Coefficients(), 0, 16, 400)


@given(s=st.floats(-3, 3), c=st.floats(1e-3, 1e3))
def test_fit_power_recovers_exponent(s, c):
    t = np.geomspace(1e-6, 1e-2, 30)
    slope, resid = fit_power(t, c * t**s)
    assert slope == pytest.approx(s, abs=1e-9)
    assert resid < 1e-9


def test_predicted_exponent_cases():
    assert predicted_exponent(0.5, 1, True, False) == -0.5
    assert predicted_exponent(0.5, 1, False, False) is None
    assert predicted_exponent(1.5, 1, True, False) is None
    assert predicted_exponent(1.5, 2, True, True) == -0.5
    assert predicted_exponent(1.5, 2, False, True) is None
    assert predicted_exponent(1.5, 3, False, True) == -0.5
    assert predicted_exponent(0.5, 3, False, False, g2_nonzero=True) == -0.5


def test_regularity_incompatible_initial_value(basis):
    p = cfg(u0="u0 = x*(1-x)", T=1e-2)
    grid = TimeGrid.build(1e-2, 100, h_min=1e-10)
    s = solve_modes(p, basis, grid, derivatives=(1,))
    rep = regularity_exponent(s, basis, 1)
    assert rep.predicted == -0.5
    assert rep.sigma == pytest.approx(-0.5, abs=0.02)
    assert rep.verdict == "singular"
    assert "verdict: singular" in rep.render()


def test_regularity_zero_and_errors(basis):
    grid = TimeGrid.build(1.0, 100, h_min=1e-8)
    s = solve_modes(cfg(), basis, grid, derivatives=(1,))
    rep = regularity_exponent(s, basis, 1)
    assert rep.sigma is None and rep.verdict == "bounded" and rep.predicted is None
    assert "undefined" in rep.render()
    with pytest.raises(ValueError, match="derivative of order 2"):
        regularity_exponent(s, basis, 2)
    coarse = solve_modes(cfg(), basis, TimeGrid.build(1.0, 100, h_min=5e-3), derivatives=(1,))
    with pytest.raises(ValueError, match="grid points"):
        regularity_exponent(coarse, basis, 1)


def test_laplace_single_mode(basis):
    rows = laplace_residual(cfg(u0="u0_modes = 1"), basis, [0.5, 2.0], n_uniform=200)
    for r in rows:
        assert r.algebraic <= 1e-13
        assert r.quadrature <= 1e-5
        assert r.passes()
        assert r.T_big >= 20.0 / 0.5


def test_laplace_with_boundary_data(basis):
    rows = laplace_residual(cfg(f="sin(t) + 1, 0"), basis, [1.0], n_uniform=200)
    assert rows[0].quadrature <= 1e-4
    with pytest.raises(ValueError):
        laplace_residual(cfg(), basis, [0.0, 1.0])


def test_random_draws_reproducible():
    base = cfg(u0="u0 = 0")
    a = random_draws(base, np.random.default_rng(3), 4)
    b = random_draws(base, np.random.default_rng(3), 4)
    assert [p.f[0].source for p in a] == [p.f[0].source for p in b]
    assert len({p.F.source for p in a}) == 4
    assert all(not p.u0.is_zero() for p in a)
    z = random_draws(cfg(1.5, u1="u1 = x"), np.random.default_rng(0), 2, zero_initial=True)
    assert all(p.u0.is_zero() and p.u1.is_zero() for p in z)


def test_monitor_scale_invariance():
    b = build_basis(Interval(), Coefficients(), 0, 32, 320)
    draws = random_draws(cfg(), np.random.default_rng(1), 3)
    stats = estimate_monitor(draws, b, "t1a", N_values=(16, 32))
    assert stats.excluded == 0
    assert 0.8 < stats.growth() < 1.25
    assert stats.passes()
    assert stats.median(16) <= stats.max(16)
    scaled = [p.replace(f=tuple(s.__class__.from_expr(f"3*({s.source})", "f") for s in p.f),
                        F=p.F.__class__.parse(f"3*({p.F.source})", 1),
                        u0=p.u0.__class__.parse_expr(f"3*({p.u0.source})", 1, "u0"))
              for p in draws]
    again = estimate_monitor(scaled, b, "t1a", N_values=(16, 32))
    np.testing.assert_allclose(again.ratios[32], stats.ratios[32], rtol=1e-10)


def test_monitor_c1a_and_exclusions():
    b = build_basis(Interval(), Coefficients(), 0, 32, 320)
    draws = random_draws(cfg(), np.random.default_rng(2), 2, zero_initial=True)
    stats = estimate_monitor(draws + [cfg()], b, "c1a", N_values=(16, 32))
    assert stats.excluded == 1
    assert stats.ratios[32].size == 2
    assert np.all(np.isfinite(stats.ratios[32]))
    with pytest.raises(ValueError, match="zero initial"):
        estimate_monitor([cfg(u0="u0 = x")], b, "c1a", N_values=(16, 32))
    with pytest.raises(ValueError, match="kind"):
        estimate_monitor([], b, "bogus")
    with pytest.raises(ValueError, match="modes"):
        estimate_monitor([], b, "t1a", N_values=(64,))


def test_lemma_sums():
    d = build_basis(Interval(), Coefficients(), 0, 64, 640)
    rep = lemma_l1_check(d, [[1.0, 0.0], [0.0, 0.0], [0.3, -2.0]])
    assert rep.passed
    assert rep.converged[1] and rep.ratios[1] is None and rep.tail_slopes[1] is None
    # Dirichlet pairings grow like n, so terms decay like n^-2
    assert rep.tail_slopes[0] == pytest.approx(-2.0, abs=0.1)
    n = build_basis(Interval(), Coefficients(), 1, 64, 640)
    rn = lemma_l1_check(n, [[1.0, 1.0]])
    assert rn.tail_slopes[0] == pytest.approx(-4.0, abs=0.2)
    with pytest.raises(ValueError):
        lemma_l1_check(d.restrict(32), [[1.0, 0.0]])


def test_oracle_errors_subdiffusion():
    b = build_basis(Interval(), Coefficients(), 0, 32, 320)
    p = cfg(f="sin(t), 0", u0="u0 = 0")
    res = oracle_errors(p, b, FDScheme(40, 400, 0.5), talbot_times=(0.5, 1.0))
    assert res.spectral_vs_l1 < 1e-2
    assert res.talbot_vs_spectral < 1e-2
    assert res.talbot_vs_l1 < 1e-2
    assert res.talbot_times == (0.5, 1.0)
    assert {"spectral", "l1", "talbot"} <= set(res.timings)
    assert [r[0] for r in res.rows()] == ["spectral_vs_l1", "talbot_vs_l1", "talbot_vs_spectral"]


def test_oracle_errors_superdiffusion_skips_l1():
    b = build_basis(Interval(), Coefficients(), 0, 32, 320)
    p = cfg(1.5, u0="u0 = sin(pi*x)", u1="u1 = 0")
    res = oracle_errors(p, b, FDScheme(160, 200, 1.5), talbot_times=(1.0,))
    assert res.spectral_vs_l1 is None and res.talbot_vs_l1 is None
    assert res.talbot_vs_spectral < 1e-3
