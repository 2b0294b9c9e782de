import math

import numpy as np
import pytest

from chernlab.errors import DomainError, UsageError
from chernlab.exterior import Form
from chernlab.fields import (Chart, FormField, QuadratureRule, SmoothMap, constant_field,
                             coordinate_form, exterior_derivative, identity_map, integrate_top,
                             parameter_integral, pullback, sample_points)

TWO_PI = 2 * math.pi
TORUS = Chart(2, ((0, TWO_PI), (0, TWO_PI)), {0, 1}, (32, 32))
SQUARE = Chart(2, ((0, 1), (0, 1)), (), (16, 16), margin=0.01)


def coeff(F, idx, shape):
    return np.broadcast_to(F.terms.get(idx, 0.0), shape)


def test_chart_validation():
    with pytest.raises(UsageError):
        Chart(2, ((0, 1), (1, 1)))
    with pytest.raises(UsageError):
        Chart(1, ((0, 1),), grid=(2,))
    with pytest.raises(DomainError):
        SQUARE.prepare(np.array([[1.5], [0.5]]))
    x = TORUS.prepare(np.array([[7.0], [-1.0]]))
    assert 0 <= x[0, 0] < TWO_PI and 0 <= x[1, 0] < TWO_PI


def test_d_of_linear_coefficient():
    f = coordinate_form(SQUARE, [1], lambda x: x[0])
    d = exterior_derivative(f, 1e-4)
    pts = sample_points(SQUARE, (5, 5))
    assert np.max(np.abs(coeff(d.evaluate(pts), (1, 2), pts.shape[1:]) - 1.0)) <= 1e-8
    assert d.degree == 2


def test_d_of_constant():
    d = exterior_derivative(constant_field(Form.scalar(3.0, 2), SQUARE))
    assert d.evaluate(sample_points(SQUARE, (4, 4))).max_abs() == 0.0


def _trig_one_form():
    def fn(x):
        return Form(2, {(1,): np.sin(x[0]) * np.cos(2 * x[1]),
                        (2,): np.cos(x[0] + x[1]) ** 2})
    return FormField(TORUS, 1, fn)


def _trig_zero_form():
    return FormField(TORUS, 0, lambda x: Form(2, {(): np.sin(x[0]) * np.cos(3 * x[1])}))


def test_dd_vanishes_with_second_order_convergence():
    f = _trig_zero_form()
    pts = sample_points(TORUS, (7, 7))
    errs = []
    for h in (1e-2, 5e-3):
        dd = exterior_derivative(exterior_derivative(f, h), h)
        errs.append(dd.evaluate(pts).max_abs())
    assert errs[0] <= 1e-6
    g = _trig_one_form()
    assert exterior_derivative(exterior_derivative(g, 1e-3), 1e-3).evaluate(pts).max_abs() == 0.0


def test_first_derivative_order_two():
    f = _trig_zero_form()
    pts = sample_points(TORUS, (5, 5))
    exact = np.cos(pts[0]) * np.cos(3 * pts[1])
    errs = []
    for h in (1e-2, 5e-3):
        F = exterior_derivative(f, h).evaluate(pts)
        errs.append(np.max(np.abs(coeff(F, (1,), pts.shape[1:]) - exact)))
    assert 3.5 <= errs[0] / errs[1] <= 4.5
    F = exterior_derivative(f, 1e-2, richardson=True).evaluate(pts)
    assert np.max(np.abs(coeff(F, (1,), pts.shape[1:]) - exact)) < errs[1] / 100


def test_pullback_identity_and_chain_rule():
    g = _trig_one_form()
    pts = sample_points(TORUS, (4, 4))
    assert pullback(g, identity_map(TORUS)).evaluate(pts).distance(g.evaluate(pts)) == 0.0
    square = SmoothMap(SQUARE, SQUARE, lambda x: np.stack([x[0] ** 2, x[1]]))
    dy1 = coordinate_form(SQUARE, [0])
    F = pullback(dy1, square).evaluate(pts / TWO_PI)
    assert np.allclose(coeff(F, (1,), pts.shape[1:]), 2 * pts[0] / TWO_PI, atol=1e-8)


def _random_map(rng):
    a = rng.standard_normal((2, 2)) * 0.3

    def value(x):
        return np.stack([x[0] + a[0, 0] * np.sin(x[1]), x[1] + a[1, 1] * np.cos(x[0])])

    def jac(x):
        one = np.ones_like(x[0])
        return np.array([[one, a[0, 0] * np.cos(x[1])], [-a[1, 1] * np.sin(x[0]), one]])
    return SmoothMap(TORUS, TORUS, value, jac)


def test_pullback_commutes_with_wedge(rng):
    phi = _random_map(rng)
    a = _trig_one_form()
    b = FormField(TORUS, 1, lambda x: Form(2, {(1,): np.cos(x[1]), (2,): np.sin(2 * x[0])}))
    pts = sample_points(TORUS, (5, 5))
    lhs = pullback(a.wedge(b), phi).evaluate(pts)
    rhs = pullback(a, phi).wedge(pullback(b, phi)).evaluate(pts)
    assert lhs.distance(rhs) <= 1e-10


def test_pullback_functorial(rng):
    phi, psi = _random_map(rng), _random_map(rng)
    f = _trig_one_form().wedge(coordinate_form(TORUS, [1], lambda x: np.cos(x[0])))
    pts = sample_points(TORUS, (5, 5))
    lhs = pullback(f, psi.compose(phi)).evaluate(pts)
    rhs = pullback(pullback(f, psi), phi).evaluate(pts)
    assert lhs.distance(rhs) <= 1e-9


def test_fd_jacobian_matches_analytic(rng):
    phi = _random_map(rng)
    fd = SmoothMap(TORUS, TORUS, phi.value)
    pts = sample_points(TORUS, (3, 3))
    assert np.max(np.abs(fd.jacobian(pts) - phi.jacobian(pts))) <= 1e-8


def test_integrals_on_unit_square():
    unit = Chart(2, ((0, 1), (0, 1)), (), (8, 8))
    assert integrate_top(coordinate_form(unit, [0, 1])) == pytest.approx(1.0)
    assert integrate_top(coordinate_form(unit, [1, 0], -1.0)) == pytest.approx(1.0)


def test_torus_integral_closed_form():
    f = coordinate_form(TORUS, [0, 1], lambda x: np.sin(x[0]) ** 2)
    assert abs(integrate_top(f, QuadratureRule((64, 64))) - 2 * math.pi ** 2) <= 1e-9


def test_integral_linear_and_orientation():
    f = coordinate_form(TORUS, [0, 1], lambda x: np.cos(x[0]) ** 2 + x[1])
    g = coordinate_form(TORUS, [0, 1], lambda x: np.sin(x[1]) ** 2)
    lhs = integrate_top(f.scale(2.0) + g)
    assert lhs == pytest.approx(2 * integrate_top(f) + integrate_top(g), rel=1e-12)
    assert integrate_top(coordinate_form(TORUS, [1, 0], lambda x: x[1])) == pytest.approx(
        -integrate_top(coordinate_form(TORUS, [0, 1], lambda x: x[1])))


def test_stokes_on_torus():
    d = exterior_derivative(_trig_one_form(), 1e-4)
    assert abs(integrate_top(d, QuadratureRule((64, 64)))) <= 1e-6


def test_gauss_rule_polynomial_exactness():
    line = Chart(1, ((0, 1),))
    f = coordinate_form(line, [0], lambda x: x[0] ** 5)
    val = integrate_top(f, QuadratureRule((1,), ("gauss",), gauss_order=3))
    assert val == pytest.approx(1 / 6, abs=1e-15)


def test_parameter_integral():
    base = coordinate_form(SQUARE, [0], lambda x: 1.0 + x[1])
    pts = sample_points(SQUARE, (3, 3))
    ref = base.evaluate(pts)
    const = parameter_integral(lambda t: base, 2).evaluate(pts)
    assert const.distance(ref) <= 1e-14
    lin = parameter_integral(lambda t: base.scale(t), 2).evaluate(pts)
    assert lin.distance(ref.scale(0.5)) <= 1e-14
    quad = parameter_integral(lambda t: base.scale(t * t), 3).evaluate(pts)
    assert quad.distance(ref.scale(1 / 3)) <= 1e-14
    with pytest.raises(UsageError):
        parameter_integral(lambda t: base, 0)


def test_integration_is_deterministic():
    f = coordinate_form(TORUS, [0, 1], lambda x: np.exp(np.sin(x[0]) * np.cos(x[1])))
    rule = QuadratureRule((300, 300))
    assert integrate_top(f, rule) == integrate_top(f, rule)


def test_integrate_top_degree_error():
    with pytest.raises(UsageError):
        integrate_top(coordinate_form(TORUS, [0]))
