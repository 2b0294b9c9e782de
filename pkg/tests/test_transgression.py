import math

import numpy as np
import pytest

from chernlab.errors import UnsupportedError, UsageError
from chernlab.fields import sample_points
from chernlab.invariants import euler_form
from chernlab.transgression import (fiber_integral, gauss_bonnet_via_transgression,
                                    interpolated_curvature, modified_connection, point_model,
                                    sphere_bundle, thom_form, transgression_eta,
                                    transgression_eta_field, validate_rho)
from chernlab.zoo import get_model, s2_model, torus_model

TWO_PI = 2 * math.pi


def test_point_bundle_total_space_is_circle():
    sb = sphere_bundle(point_model())
    assert sb.total.dim == 1 and sb.total.periodic == {0}


def test_ts2_total_space_and_frame():
    sb = sphere_bundle(s2_model(nodes=(32, 64)))
    assert sb.total.dim == 3 and sb.total.names[-1] == "psi"
    pts = sample_points(sb.total, (3, 3, 7))
    F = sb.frame(pts)
    gram = np.einsum("ia...,ja...->ij...", F, F)
    assert np.max(np.abs(gram - np.eye(2)[:, :, None])) <= 1e-12


def test_rank_other_than_two_is_unsupported():
    with pytest.raises(UnsupportedError):
        sphere_bundle(get_model("real(cp2)"))
    with pytest.raises(UnsupportedError):
        sphere_bundle(get_model("o(1)"))


def test_flat_adapted_connection_is_dpsi():
    sb = sphere_bundle(point_model())
    w_a, w_t = modified_connection(sb)
    x = np.array([[0.3, 1.7, 4.0]])
    A = w_a.evaluate(x)
    assert np.allclose(A[0, 1].terms[(1,)], 1.0) and np.allclose(A[1, 0].terms[(1,)], -1.0)
    D = w_t.evaluate(x) - A
    assert D.is_skew()
    assert D[0, 0].is_zero() and D[1, 1].is_zero()


def test_interpolated_curvature_endpoints():
    sb = sphere_bundle(s2_model(nodes=(32, 64)))
    pts = sample_points(sb.total, (3, 3, 4))
    O0 = interpolated_curvature(sb, 0.0).evaluate(pts)
    assert O0.distance(sb.pulled_curvature().evaluate(pts)) <= 1e-6
    O1 = interpolated_curvature(sb, 1.0).evaluate(pts)
    assert euler_form(O1).max_abs() <= 1e-6
    with pytest.raises(UsageError):
        interpolated_curvature(sb, 1.5)


def test_flat_eta_is_dpsi_over_two_pi():
    sb = sphere_bundle(point_model())
    eta = transgression_eta_field(sb).evaluate(np.array([[0.1, 2.0, 5.5]]))
    assert np.allclose(eta.terms[(1,)], 1 / TWO_PI)
    res = transgression_eta(point_model(), grid=(16,))
    assert res.residual == 0.0
    assert res.fiber_mean == pytest.approx(1.0, abs=1e-14)


def test_n_quad_validation_and_exactness():
    sb = sphere_bundle(s2_model(nodes=(32, 64)))
    with pytest.raises(UsageError):
        transgression_eta_field(sb, 0)
    pts = sample_points(sb.total, (4, 4, 4))
    a = transgression_eta_field(sb, 1).evaluate(pts)
    b = transgression_eta_field(sb, 2).evaluate(pts)
    assert a.distance(b) <= 1e-10


def test_torus_residual_is_zero():
    res = transgression_eta(torus_model(), grid=(8, 8, 8))
    assert res.residual <= 1e-10
    assert res.fiber_spread <= 1e-12


def test_ts2_residual_and_order():
    m = s2_model(nodes=(32, 64))
    coarse = transgression_eta(m, grid=(12, 12, 12), step=1e-2)
    fine = transgression_eta(m, grid=(12, 12, 12), step=5e-3)
    assert fine.residual <= 1e-4
    assert coarse.residual / fine.residual >= 2 ** 1.5
    assert abs(fine.fiber_mean - 1.0) <= 1e-3 and fine.fiber_spread <= 1e-3


def test_fiber_integral_base_independent():
    sb = sphere_bundle(s2_model(nodes=(32, 64)))
    eta = transgression_eta_field(sb)
    vals = [fiber_integral(eta, sb, b) for b in ([0.4, 1.0], [1.5, 3.0], [2.8, 6.0])]
    assert max(vals) - min(vals) <= 1e-12 and vals[0] == pytest.approx(1.0)


def test_gauss_bonnet_via_transgression():
    def v(x):
        return np.stack([np.ones_like(x[0]), np.zeros_like(x[0])])
    out = gauss_bonnet_via_transgression(s2_model(nodes=(32, 64)), v, eps=1e-3)
    assert abs(out["value"] - 2.0) <= 1e-2


def test_thom_form_point():
    res = thom_form()
    assert abs(res.fiber_integral - 1.0) <= 1e-2
    assert res.support_leak <= 1e-12
    assert res.closed_residual <= 1e-6


@pytest.mark.parametrize("rho", ["quintic", "smooth"])
def test_thom_form_other_bumps(rho):
    assert abs(thom_form(rho=rho).fiber_integral - 1.0) <= 1e-2


def test_thom_form_over_sphere_is_closed():
    res = thom_form(s2_model(nodes=(32, 64)), nodes=(200, 32))
    assert abs(res.fiber_integral - 1.0) <= 1e-2
    assert res.closed_residual <= 1e-6


def test_bad_bump_rejected():
    with pytest.raises(UsageError):
        validate_rho(lambda r: np.zeros_like(r), lambda r: np.zeros_like(r))
    with pytest.raises(UsageError):
        thom_form(rho="linear")
