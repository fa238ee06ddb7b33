import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from korteweg.errors import GridError, NonFiniteError
from korteweg.field import (Field, Grid, deriv, make_grid, norm_l2, norm_linf, quad,
                            read_fields_csv, write_fields_csv)

TWO_PI = 2 * np.pi


def test_grid_validation():
    for bad in (7, 6, 9, 0):
        with pytest.raises(GridError):
            Grid(bad, 1.0)
    for bad in (0.0, -1.0, float("inf"), float("nan")):
        with pytest.raises(GridError):
            Grid(16, bad)
    g = make_grid(16, 3)
    assert g.n == 16 and g.length == 3.0 and g.dx == 3.0 / 16


def test_nodes_exclude_right_endpoint():
    g = Grid(8, 2.0)
    np.testing.assert_array_equal(g.x, np.arange(8) * 0.25)


def test_spectral_derivative_of_trig_polynomial_is_exact():
    g = Grid(64, TWO_PI)
    x = g.x
    f = np.sin(3 * x) + 0.5 * np.cos(7 * x)
    np.testing.assert_allclose(g.deriv(f), 3 * np.cos(3 * x) - 3.5 * np.sin(7 * x), atol=1e-12)
    np.testing.assert_allclose(g.deriv(f, 2), -9 * np.sin(3 * x) - 24.5 * np.cos(7 * x),
                               atol=1e-11)
    with pytest.raises(ValueError):
        g.deriv(f, 3)


def test_derivative_on_non_2pi_domain():
    L = 5.0
    g = Grid(32, L)
    k = 2 * np.pi / L
    np.testing.assert_allclose(g.deriv(np.sin(2 * k * g.x)), 2 * k * np.cos(2 * k * g.x),
                               atol=1e-12)


def test_nyquist_mode_has_zero_first_derivative_but_keeps_second():
    g = Grid(16, TWO_PI)
    nyq = np.cos(8 * g.x)  # (-1)^j on the grid
    np.testing.assert_allclose(g.deriv(nyq), 0.0, atol=1e-13)
    np.testing.assert_allclose(g.deriv(nyq, 2), -64 * nyq, atol=1e-11)


def test_dealias_truncates_upper_third():
    g = Grid(48, TWO_PI)
    low, high = np.cos(16 * g.x), np.cos(17 * g.x)
    np.testing.assert_allclose(g.dealias(low), low, atol=1e-13)
    np.testing.assert_allclose(g.dealias(high), 0.0, atol=1e-13)


def test_trapezoid_quadrature_is_spectral_for_periodic_functions():
    g = Grid(32, TWO_PI)
    assert g.quad(np.ones(32)) == pytest.approx(TWO_PI, rel=1e-15)
    assert g.quad(np.cos(g.x) ** 2) == pytest.approx(np.pi, rel=1e-14)
    # int_0^{2pi} exp(cos x) dx = 2 pi I0(1)
    assert g.quad(np.exp(np.cos(g.x))) == pytest.approx(TWO_PI * 1.2660658777520082, rel=1e-14)


def test_nested_grids():
    coarse = Grid(32, TWO_PI)
    assert coarse.nested_in(Grid(128, TWO_PI)) == 4
    with pytest.raises(GridError):
        coarse.nested_in(Grid(48, TWO_PI))
    with pytest.raises(GridError):
        coarse.nested_in(Grid(64, 1.0))
    fine = Grid(128, TWO_PI)
    np.testing.assert_allclose(fine.x[::4], coarse.x, atol=1e-15)


def test_field_validation_and_helpers():
    g = Grid(16, TWO_PI)
    with pytest.raises(GridError):
        Field(g, np.zeros(15))
    with pytest.raises(NonFiniteError):
        Field(g, np.full(16, np.nan))
    f = Field.from_function(g, np.sin)
    assert norm_linf(f) == pytest.approx(np.max(np.abs(np.sin(g.x))))
    assert norm_l2(f) == pytest.approx(np.sqrt(np.pi), rel=1e-14)
    assert quad(f) == pytest.approx(0.0, abs=1e-14)
    np.testing.assert_allclose(deriv(f).values, np.cos(g.x), atol=1e-13)
    assert np.asarray(f) is f.values


def test_fields_csv_round_trip_is_bit_exact(tmp_path):
    g = Grid(16, TWO_PI)
    rng = np.random.default_rng(0)
    cols = {"rho": 1 + rng.random(16), "u": rng.standard_normal(16) * 1e-7}
    path = tmp_path / "f.csv"
    write_fields_csv(path, g, cols)
    back = read_fields_csv(path)
    assert list(back) == ["x", "rho", "u"]
    np.testing.assert_array_equal(back["x"], g.x)
    for k in cols:
        np.testing.assert_array_equal(back[k], cols[k])


coefficients = st.lists(st.floats(-2, 2), min_size=4, max_size=4)


@settings(max_examples=40, deadline=None)
@given(coefficients, coefficients)
def test_derivative_is_linear_and_integrates_to_zero(a, b):
    g = Grid(32, TWO_PI)
    x = g.x
    f = sum(c * np.sin((m + 1) * x) for m, c in enumerate(a))
    h = sum(c * np.cos((m + 1) * x) for m, c in enumerate(b))
    np.testing.assert_allclose(g.deriv(f + 2 * h), g.deriv(f) + 2 * g.deriv(h), atol=1e-12)
    assert abs(g.quad(g.deriv(f * h))) < 1e-12
    # discrete integration by parts: int f' h = - int f h'
    assert g.quad(g.deriv(f) * h) == pytest.approx(-g.quad(f * g.deriv(h)), abs=1e-11)
