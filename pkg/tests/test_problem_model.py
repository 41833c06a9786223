import math
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fracspec.problem_model import (
    DataField,
    ProblemError,
    SpatialData,
    TimeSignal,
    load_problem,
    load_problem_file,
    serialize,
    signal_derivative,
)

CONFIGS = Path(__file__).resolve().parents[1] / "configs"

BASE = """
[problem]
alpha = 0.5
chi = dirichlet
T = 1

[data]
f = sin(t), 0
F = 0
u0 = 0
"""


def test_minimal_config_defaults():
    p = load_problem(BASE)
    assert p.alpha == 0.5 and p.chi == 0 and p.T == 1.0 and p.dim == 1
    assert p.domain.x0 == 0.0 and p.domain.x1 == 1.0
    assert p.coefficients.q == 1.0
    assert p.u1 is None and not p.has_velocity
    assert p.F.is_zero() and p.u0.is_zero()


@pytest.mark.parametrize("name", sorted(p.name for p in CONFIGS.glob("*.cfg") if p.name != "ml.cfg"))
def test_shipped_configs_parse(name):
    p = load_problem_file(CONFIGS / name)
    assert p.T > 0


def test_overrides_qualified_and_bare():
    p = load_problem(BASE, {"problem.alpha": "0.3", "T": "2", "solver.N": "8"})
    assert p.alpha == 0.3 and p.T == 2.0 and p.solver["N"] == "8"
    with pytest.raises(ProblemError, match="ambiguous or unknown"):
        load_problem(BASE, {"nonexistent": "1"})


def test_expression_valued_numbers():
    p = load_problem(BASE.replace("T = 1", "T = pi/4"))
    assert p.T == pytest.approx(math.pi / 4, rel=1e-15)


@pytest.mark.parametrize(
    "edit,field",
    [
        (("alpha = 0.5", "alpha = 1"), "problem.alpha"),
        (("alpha = 0.5", "alpha = 2.5"), "problem.alpha"),
        (("chi = dirichlet", "chi = robin"), "problem.chi"),
        (("T = 1", "T = -1"), "problem.T"),
        (("f = sin(t), 0", "f = sin(z), 0"), "data.f[0]"),
        (("f = sin(t), 0", "f = sin(t)"), "data.f"),
        (("f = sin(t), 0", "f = @nosuch, 0"), "data.f"),
        (("u0 = 0", "u0 = x*t"), "data.u0"),
        (("u0 = 0", "u1 = 0"), "data.u0"),
        (("F = 0", "F = (("), "F"),
    ],
)
def test_validation_errors_name_the_field(edit, field):
    with pytest.raises(ProblemError) as info:
        load_problem(BASE.replace(*edit))
    assert info.value.field == field


def test_velocity_rules():
    with pytest.raises(ProblemError, match="u1 required"):
        load_problem(BASE.replace("alpha = 0.5", "alpha = 1.5"))
    with pytest.raises(ProblemError, match="must be absent"):
        load_problem(BASE + "u1 = x\n")
    p = load_problem(BASE.replace("alpha = 0.5", "alpha = 1.5") + "u1 = x\n")
    assert p.has_velocity and p.u1.kind == "expr"


@pytest.mark.parametrize("q", ["0", "-1", "x - 0.5"])
def test_positivity_violations(q):
    with pytest.raises(ProblemError) as info:
        load_problem(BASE + f"\n[coefficients]\nq = {q}\n")
    assert info.value.field == "coefficients.q"
    assert "positivity" in str(info.value)


def test_rectangle_rejects_variable_coefficients():
    text = BASE.replace("f = sin(t), 0", "f = 0, 0, 0, 0") + "\n[domain]\nkind = rectangle\n"
    assert load_problem(text).dim == 2
    with pytest.raises(ProblemError, match="constant"):
        load_problem(text + "\n[coefficients]\na = 1 + x\n")


def test_duplicate_initial_data():
    with pytest.raises(ProblemError, match="only one"):
        load_problem(BASE + "u0_modes = 1, 2\n")


def test_missing_sections_and_garbage():
    with pytest.raises(ProblemError):
        load_problem("[problem]\nalpha = 0.5\n")
    with pytest.raises(ProblemError):
        load_problem("this is not ini")
    with pytest.raises(ProblemError):
        load_problem_file("/nonexistent/file.cfg")


def test_signal_reference_and_interpolation():
    text = BASE.replace("f = sin(t), 0", "f = @g, 0") + (
        "\n[signal.g]\nsamples = 0, 1, 4\norder = 1\n"
    )
    p = load_problem(text)
    g = p.f[0]
    assert g.name == "g" and not g.is_closed_form
    np.testing.assert_allclose(g([0.0, 0.25, 0.5, 0.75, 1.0]), [0, 0.5, 1, 2.5, 4])
    assert g.max_derivative() == 0
    with pytest.raises(ProblemError):
        g.derivative(1, 0.5)


def test_piecewise_constant_samples():
    g = TimeSignal.from_samples([1.0, 2.0, 3.0], 1.0, order=0)
    np.testing.assert_array_equal(g([0.0, 0.49, 0.5, 0.99, 1.0]), [1, 1, 2, 2, 3])
    with pytest.raises(ProblemError):
        TimeSignal.from_samples([1.0], 1.0)
    with pytest.raises(ProblemError):
        TimeSignal.from_samples([1.0, 2.0], 1.0, order=2)
    with pytest.raises(ProblemError):
        TimeSignal.from_samples([1.0, math.nan], 1.0)


def test_smooth_samples_differentiate_quadratics_exactly():
    tt = np.linspace(0, 2, 21)
    g = TimeSignal.from_samples(tt**2, 2.0, smooth=True)
    np.testing.assert_allclose(g.derivative(1, tt), 2 * tt, atol=1e-12)
    assert signal_derivative(g, 2, 1.0) == pytest.approx(2.0)


def test_closed_form_derivatives_are_symbolic():
    g = TimeSignal.from_expr("sin(3*t)")
    assert signal_derivative(g, 1, 0.0) == pytest.approx(3.0, rel=1e-15)
    assert signal_derivative(g, 3, 0.0) == pytest.approx(-27.0, rel=1e-15)
    with pytest.raises(ProblemError):
        signal_derivative(g, 4, 0.0)
    assert TimeSignal.from_expr("0").is_zero()


def test_data_field_derivative():
    F = DataField.parse("t**2*x", 1)
    vals = F.derivative(1, [0.5, 1.0], np.array([0.0, 1.0, 2.0]))
    np.testing.assert_allclose(vals, [[0, 1, 2], [0, 2, 4]])
    G = DataField.parse("t*x*y", 2)
    nodes = np.array([[1.0, 2.0], [3.0, 4.0]])
    np.testing.assert_allclose(G.derivative(0, [2.0], nodes), [[4.0, 24.0]])


def test_spatial_samples_and_modes():
    d = SpatialData.parse_list("samples", "0, 1, 0", "u0")
    np.testing.assert_allclose(d.nodal(np.linspace(0, 1, 5)), [0, 0.5, 1, 0.5, 0])
    m = SpatialData.parse_list("modes", "1, 2", "u0")
    with pytest.raises(ProblemError):
        m.nodal(np.zeros(3))
    with pytest.raises(ProblemError):
        SpatialData.parse_list("samples", "a, b", "u0")


def test_edge_signals_on_rectangle():
    text = BASE.replace("f = sin(t), 0", "f = t*sin(pi*s), 0, 0, (1, 2)") + "\n[domain]\nkind = rectangle\n"
    with pytest.raises(ProblemError):
        load_problem(text)
    ok = load_problem(BASE.replace("f = sin(t), 0", "f = t*sin(pi*s), 0, max(t, 1), 0")
                      + "\n[domain]\nkind = rectangle\n")
    assert ok.f[2].expr is not None


_coef = st.sampled_from(["1", "2 + x", "1 + x**2", "exp(x)"])
_num = st.floats(0.05, 1.95).filter(lambda a: abs(a - 1.0) > 1e-3)


@given(alpha=_num, T=st.floats(1e-3, 50.0), rho=_coef, a=_coef,
       u0=st.sampled_from(["0", "x*(1-x)", "sin(pi*x)"]),
       modes=st.lists(st.floats(-5, 5), min_size=1, max_size=4),
       chi=st.sampled_from([0, 1]), samples=st.lists(st.floats(-3, 3), min_size=2, max_size=6))
def test_serialize_round_trip(alpha, T, rho, a, u0, modes, chi, samples):
    velocity = "u1_modes = " + ", ".join(repr(m) for m in modes) + "\n" if alpha > 1 else ""
    text = (
        f"[problem]\nalpha = {alpha!r}\nchi = {chi}\nT = {T!r}\n"
        f"[coefficients]\nrho = {rho}\na = {a}\n"
        f"[data]\nf = @s, cos(t)\nF = t*x\nu0 = {u0}\n{velocity}"
        "[signal.s]\nsamples = " + ", ".join(repr(v) for v in samples) + "\norder = 0\n"
        "[solver]\nN = 8\n"
    )
    p = load_problem(text)
    q = load_problem(serialize(p))
    assert serialize(q) == serialize(p)
    assert (q.alpha, q.chi, q.T) == (p.alpha, p.chi, p.T)
    assert q.signals["s"].samples == p.signals["s"].samples
    assert q.signals["s"].order == 0
    assert q.coefficient_sources == p.coefficient_sources
    if p.u1 is not None:
        assert q.u1.values == p.u1.values
    x = np.linspace(0, 1, 7)
    np.testing.assert_array_equal(q.coefficients.eval("a", x), p.coefficients.eval("a", x))
