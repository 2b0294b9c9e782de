import math

import numpy as np
import pytest

from chernlab.errors import UsageError
from chernlab.exterior import Form, FormMatrix
from chernlab.fields import FormMatrixField, identity_map, sample_points
from chernlab.invariants import chern_forms, det_form, euler_form
from chernlab.zoo import (BundleModel, Quadrature, bianchi_residual, characteristic_number,
                          class_form, cp_model, curvature_from_connection, direct_sum,
                          get_model, line_bundle_model, parse_monomial, pullback_model,
                          realify_model, s2_model, structure_residual, torus_model)

TWO_PI = 2 * math.pi


def test_flat_connection_gives_zero_curvature():
    m = torus_model()
    Om = curvature_from_connection(m.connection)
    assert Om.evaluate(sample_points(m.base, (4, 4))).max_abs() == 0.0


def test_abelian_curvature_is_d_omega():
    m = line_bundle_model(2)
    pts = m.sample_points((5, 5))
    assert structure_residual(m, pts) <= 1e-5


def test_sphere_curvature_is_minus_area_form():
    m = s2_model(nodes=(64, 128))
    pts = sample_points(m.base, (6, 6))
    derived = curvature_from_connection(m.connection).evaluate(pts)
    coeff = np.broadcast_to(derived[0, 1].terms[(1, 2)], pts.shape[1:])
    K = -coeff / np.sin(pts[0])
    assert np.max(np.abs(K - 1.0)) <= 1e-5
    assert structure_residual(m, pts) <= 1e-5


def test_sphere_sign_convention_gives_plus_two():
    cn = characteristic_number(s2_model(), "e")
    assert abs(cn.value - 2.0) <= 1e-3
    e = class_form(s2_model(), "e").evaluate(sample_points(s2_model().base, (3, 3)))
    assert set(e.terms) == {(1, 2)}


def test_degree_mismatch_is_an_error():
    with pytest.raises(UsageError):
        characteristic_number(s2_model(), "p1")
    with pytest.raises(UsageError):
        characteristic_number(cp_model(2), "c1")
    with pytest.raises(UsageError):
        parse_monomial("q1")


def test_parse_monomial():
    assert parse_monomial("c1^2") == [("c", 1), ("c", 1)]
    assert parse_monomial("c1*c1") == [("c", 1), ("c", 1)]
    assert parse_monomial("e") == [("e", 0)] or parse_monomial("e")[0][0] == "e"


def test_torus_classes_vanish():
    m = torus_model()
    assert characteristic_number(m, "e").value == 0.0
    pts = sample_points(m.base, (3, 3))
    c = chern_forms(m.curvature.evaluate(pts).complexify()).chern
    assert all(f.is_zero() for f in c[1:])


def test_torus_invariance_under_exact_perturbation():
    m = torus_model()

    def conn(x):
        a = Form(2, {(1,): np.cos(x[0]) * np.cos(x[1]), (2,): -np.sin(x[0]) * np.sin(x[1])})
        z = Form.zero(2)
        return FormMatrix([[z, a], [-a, z]])

    omega = FormMatrixField(m.base, (2, 2), conn, 1)
    pert = BundleModel("torus+df", m.base, 2, "real", curvature_from_connection(omega), omega,
                       quadrature=m.quadrature)
    assert abs(characteristic_number(pert, "e").value) <= 1e-6


@pytest.mark.parametrize("d", [0, 1, 2, 3])
def test_line_bundle_degree(d):
    m = line_bundle_model(d)
    assert abs(characteristic_number(m, "c1").value - d) <= 1e-2
    if d == 0:
        assert m.curvature.evaluate(m.sample_points((3, 3))).max_abs() == 0.0


def test_o2_matches_tangent_bundle():
    o2, t = line_bundle_model(2), cp_model(1)
    pts = o2.sample_points((5, 5))
    assert o2.curvature.evaluate(pts).distance(t.curvature.evaluate(pts)) <= 1e-8


def test_cp1_first_chern_number():
    assert abs(characteristic_number(cp_model(1), "c1").value - 2.0) <= 1e-2


@pytest.mark.parametrize("name,expected", [("o(1)", 1.0), ("cp1", 2.0)])
def test_realified_euler_number(name, expected):
    assert abs(characteristic_number(realify_model(get_model(name)), "e").value - expected) <= 1e-2


def test_realify_flat_line_is_flat():
    r = realify_model(line_bundle_model(0))
    assert r.rank == 2 and r.kind == "real"
    assert r.curvature.evaluate(r.sample_points((3, 3))).max_abs() == 0.0


@pytest.mark.parametrize("name", ["o(3)", "cp1", "cp2"])
def test_top_chern_equals_realified_euler_pointwise(name):
    m = get_model(name)
    pts = m.sample_points((3,) * m.base.dim)
    Om = m.curvature.evaluate(pts)
    top = det_form(Om.complexify().scale(1j / TWO_PI))
    e = euler_form(realify_model(m).curvature.evaluate(pts))
    assert top.distance(e.complexify()) <= 1e-9 * top.max_abs()


def test_whitney_product_for_direct_sum():
    a, b = line_bundle_model(1), line_bundle_model(2)
    s = direct_sum(a, b)
    pts = a.sample_points((4, 4))

    def total(Om):
        c = chern_forms(Om).chern
        acc = c[0]
        for f in c[1:]:
            acc = acc + f
        return acc

    lhs = total(s.curvature.evaluate(pts))
    rhs = total(a.curvature.evaluate(pts)).wedge(total(b.curvature.evaluate(pts)))
    assert lhs.distance(rhs) <= 1e-9 * lhs.max_abs()


def test_euler_of_real_direct_sum():
    r1, r2 = realify_model(line_bundle_model(1)), realify_model(line_bundle_model(2))
    s = direct_sum(r1, r2)
    pts = r1.sample_points((3, 3))
    lhs = euler_form(s.curvature.evaluate(pts))
    rhs = euler_form(r1.curvature.evaluate(pts)).wedge(euler_form(r2.curvature.evaluate(pts)))
    assert lhs.distance(rhs) <= 1e-12


def test_pullback_along_identity():
    m = line_bundle_model(3)
    p = pullback_model(m, identity_map(m.base), m.quadrature)
    pts = m.sample_points((4, 4))
    assert p.curvature.evaluate(pts).distance(m.curvature.evaluate(pts)) == 0.0


@pytest.mark.parametrize("name", ["s2", "o(2)", "cp1"])
def test_bianchi_identity(name):
    m = get_model(name)
    pts = m.sample_points((4,) * m.base.dim)
    assert bianchi_residual(m, pts) <= 1e-4


def test_cp2_structure_equation():
    m = cp_model(2)
    pts = m.sample_points((2, 2, 2, 2))
    assert structure_residual(m, pts) <= 1e-5


def test_sphere_grid_doubling():
    coarse = characteristic_number(s2_model(nodes=(256, 512)), "e").value
    fine = characteristic_number(s2_model(), "e").value
    assert abs(fine - coarse) < 5e-4


def test_registry_errors_and_overrides():
    with pytest.raises(UsageError):
        get_model("cp3")
    m = get_model("o(1)", nodes=(12, 8), radius=10.0)
    assert m.quadrature == Quadrature("radial", (12, 8), 10.0)
    with pytest.raises(UsageError):
        get_model("s2", nodes=(1, 2, 3))
