import math
from fractions import Fraction
from itertools import combinations

import numpy as np
import pytest

from chernlab.errors import UsageError
from chernlab.exterior import Form, FormMatrix
from chernlab.fuzz import (random_lie_element, random_skew_forms, random_skew_hermitian_forms,
                           random_skew_scalars, random_two_form)
from chernlab.invariants import (LieAlgebraElement, chern_forms, det_form, euler_form,
                                 interleaving, interleaving_matrix, pfaffian, pfaffian_oracle,
                                 pfaffian_scalar, polarized_pfaffian, pontryagin_forms,
                                 realify_curvature, realify_lie, verify_pfaffian_det,
                                 verify_top_chern_euler)

TWO_PI = 2 * math.pi


def scalar_matrix(rows):
    return FormMatrix.from_scalars(rows)


def top(f):
    return f.coefficient(())


# Pfaffian ------------------------------------------------------------------

def test_pfaffian_two_by_two():
    a = Fraction(3, 7)
    A = scalar_matrix([[0, a], [-a, 0]])
    assert top(pfaffian(A)) == a
    assert top(pfaffian_oracle(A)) == a


def test_pfaffian_four_by_four_formula():
    a12, a13, a14, a23, a24, a34 = (Fraction(k, 3) for k in (1, -2, 5, 7, -4, 2))
    A = scalar_matrix([[0, a12, a13, a14], [-a12, 0, a23, a24],
                       [-a13, -a23, 0, a34], [-a14, -a24, -a34, 0]])
    expected = a12 * a34 - a13 * a24 + a14 * a23
    assert top(pfaffian(A)) == expected
    assert top(pfaffian_oracle(A)) == expected


def test_pfaffian_symplectic_blocks():
    J = np.zeros((6, 6), dtype=int)
    for k in range(3):
        J[2 * k, 2 * k + 1], J[2 * k + 1, 2 * k] = 1, -1
    assert top(pfaffian(scalar_matrix(J.tolist()))) == 1


def test_pfaffian_errors():
    with pytest.raises(UsageError):
        pfaffian(scalar_matrix([[0, 1, 2], [-1, 0, 3], [-2, -3, 0]]))
    with pytest.raises(UsageError):
        pfaffian(scalar_matrix([[0, 1], [1, 0]]))
    d1 = Form(2, {(1,): 1.0})
    z = Form.zero(2)
    with pytest.raises(UsageError):
        pfaffian(FormMatrix([[z, d1], [-d1, z]]))


@pytest.mark.parametrize("size", [2, 4, 6])
def test_pfaffian_matches_oracle_exact(size):
    rng = np.random.default_rng(size)
    for _ in range(10):
        A = scalar_matrix(random_skew_scalars(rng, size, "exact"))
        assert pfaffian(A) == pfaffian_oracle(A)


def test_pfaffian_oracle_with_form_entries(rng):
    A = random_skew_forms(rng, 4, 8)
    a, b = pfaffian(A), pfaffian_oracle(A)
    assert a.distance(b) <= 1e-10 * a.max_abs()


def test_recursive_branch_matches_determinant(rng):
    S = random_skew_scalars(rng, 10, "float")
    pf = pfaffian_scalar(S)
    assert pf ** 2 == pytest.approx(np.linalg.det(np.array(S)), rel=1e-9)


def test_pfaffian_congruence_exact(rng):
    from chernlab.fuzz import random_rational
    from chernlab.invariants import det_scalar
    A = np.array(random_skew_scalars(rng, 4, "exact"), dtype=object)
    G = np.array([[random_rational(rng) for _ in range(4)] for _ in range(4)], dtype=object)
    lhs = pfaffian_scalar((G.T @ A @ G).tolist())
    assert lhs == det_scalar(G.tolist(), "exact") * pfaffian_scalar(A.tolist())


# polarized Pfaffian ---------------------------------------------------------

def test_polarized_single_slot():
    w = Form(3, {(1,): 2.0, (3,): -1.0})
    z = Form.zero(3)
    A = FormMatrix([[z, w], [-w, z]])
    assert polarized_pfaffian(A) == w


def test_polarized_diagonal_and_symmetry(rng):
    A = random_skew_forms(rng, 4, 6)
    B = random_skew_forms(rng, 4, 6)
    assert polarized_pfaffian(A, A).distance(pfaffian(A)) <= 1e-12 * pfaffian(A).max_abs()
    ab, ba = polarized_pfaffian(A, B), polarized_pfaffian(B, A)
    assert ab.distance(ba) <= 1e-12 * ab.max_abs()


def test_polarized_linear_in_first_slot(rng):
    A, A2, B = (random_skew_forms(rng, 4, 6) for _ in range(3))
    lhs = polarized_pfaffian(A.scale(2.0) + A2, B)
    rhs = polarized_pfaffian(A, B).scale(2.0) + polarized_pfaffian(A2, B)
    assert lhs.distance(rhs) <= 1e-12 * lhs.max_abs()


def test_polarized_rejects_two_odd_slots():
    d1 = Form(3, {(1,): 1.0})
    z = Form.zero(3)
    odd = FormMatrix([[z, d1, z, z], [-d1, z, z, z], [z, z, z, d1], [z, z, -d1, z]])
    with pytest.raises(UsageError):
        polarized_pfaffian(odd, odd)


# determinant and Chern forms -----------------------------------------------

def test_det_form_examples(rng):
    assert det_form(FormMatrix.identity(3, 4)) == Form.scalar(1, 4)
    a, b = Form.basis((1, 2), 4, 1.5), Form.basis((3, 4), 4, -2.0)
    z = Form.zero(4)
    assert det_form(FormMatrix([[a, z], [z, b]])) == a.wedge(b)
    M = rng.standard_normal((3, 3))
    assert top(det_form(scalar_matrix(M.tolist()))) == pytest.approx(np.linalg.det(M))
    d1 = Form(2, {(1,): 1.0})
    with pytest.raises(UsageError):
        det_form(FormMatrix([[d1]]))


def test_chern_trivial_cases(rng):
    w = random_two_form(rng, 4).scale(1j)
    c = chern_forms(FormMatrix([[w]])).chern
    assert c[1].distance(w.scale(1j / TWO_PI).real_part()) <= 1e-15
    c0 = chern_forms(FormMatrix.zeros(2, 2, 4, "complex")).chern
    assert c0[0] == Form.scalar(1.0, 4) and c0[1].is_zero() and c0[2].is_zero()
    with pytest.raises(UsageError):
        chern_forms(FormMatrix.zeros(2, 3, 4))


def test_chern_newton_identity(rng):
    Om = random_skew_hermitian_forms(rng, 2, 8)
    c = chern_forms(Om).chern
    X = Om.complexify().scale(1j / TWO_PI)
    power_sum = X.wedge(X).trace()
    lhs = c[1].wedge(c[1]) - c[2].scale(2.0)
    assert lhs.complexify().distance(power_sum) <= 1e-12 * power_sum.max_abs()


def test_chern_top_is_det(rng):
    Om = random_skew_hermitian_forms(rng, 3, 8)
    c = chern_forms(Om).chern
    d = det_form(Om.scale(1j / TWO_PI))
    assert c[3].complexify().distance(d) <= 1e-12 * d.max_abs()


def test_euler_examples(rng):
    w = random_two_form(rng, 4)
    z = Form.zero(4)
    O = FormMatrix([[z, w], [-w, z]])
    assert euler_form(O).distance(w.scale(-1 / TWO_PI)) <= 1e-15
    assert euler_form(FormMatrix.zeros(2, 2, 4)).is_zero()
    A = random_skew_forms(rng, 4, 8)
    ref = pfaffian_oracle(A.scale(-1 / TWO_PI))
    assert euler_form(A).distance(ref) <= 1e-10 * ref.max_abs()
    with pytest.raises(UsageError):
        euler_form(FormMatrix.zeros(3, 3, 4))


def test_pontryagin_examples(rng):
    assert pontryagin_forms(FormMatrix.zeros(2, 2, 4)).pontryagin[1].is_zero()
    w = random_two_form(rng, 4)
    z = Form.zero(4)
    O = FormMatrix([[z, w], [-w, z]])
    p1 = pontryagin_forms(O).pontryagin[1]
    ref = w.wedge(w).scale(1 / TWO_PI ** 2)
    assert p1.distance(ref) <= 1e-12 * ref.max_abs()
    e = euler_form(O)
    assert p1.distance(e.wedge(e)) <= 1e-12 * ref.max_abs()
    A = random_skew_forms(rng, 4, 8)
    e4 = euler_form(A)
    p2 = pontryagin_forms(A).pontryagin[2]
    assert p2.distance(e4.wedge(e4)) <= 1e-9 * p2.max_abs()


def test_pontryagin_odd_chern_vanish(rng):
    A = random_skew_forms(rng, 4, 8)
    assert pontryagin_forms(A).diagnostics["odd_chern_residue"] <= 1e-9


# realification -------------------------------------------------------------

def test_interleaving_permutation():
    assert interleaving(3) == [0, 3, 1, 4, 2, 5]
    P = interleaving_matrix(4)
    assert np.array_equal(P @ P.T, np.eye(8))


def test_realify_lie_examples(rng):
    b = Fraction(5, 2)
    C = realify_lie(LieAlgebraElement([[0]], [[b]]))
    assert C == [[0, b], [-b, 0]]
    C4 = realify_lie(random_lie_element(rng, 4, "float"))
    assert np.allclose(C4, -C4.T)


def test_lie_element_invariants():
    with pytest.raises(UsageError):
        LieAlgebraElement([[1]], [[0]])
    with pytest.raises(UsageError):
        LieAlgebraElement([[0, 0], [0, 0]], [[0, 1], [2, 0]])


def test_pfaffian_det_identity(rng):
    chk = verify_pfaffian_det(LieAlgebraElement([[0]], [[Fraction(3)]]))
    assert chk.residual == 0 and chk.pf == 3
    for _ in range(20):
        assert verify_pfaffian_det(random_lie_element(rng, 3, "exact")).exact_equal
    assert verify_pfaffian_det(random_lie_element(rng, 4, "float")).relative <= 1e-9


def test_realify_curvature_one_by_one(rng):
    beta = random_two_form(rng, 4)
    R = realify_curvature(FormMatrix([[beta.complexify().scale(1j)]]))
    z = Form.zero(4)
    assert R.distance(FormMatrix([[z, beta], [-beta, z]])) <= 1e-15
    assert verify_top_chern_euler(FormMatrix([[beta.complexify().scale(1j)]])).relative <= 1e-15


def test_realify_curvature_skew_and_rejects(rng):
    Om = random_skew_hermitian_forms(rng, 3, 6)
    assert realify_curvature(Om).is_skew()
    bad = FormMatrix([[random_two_form(rng, 4, kind="complex")]])
    with pytest.raises(UsageError):
        realify_curvature(bad)


@pytest.mark.parametrize("n", [2, 3])
def test_top_chern_equals_euler(n, rng):
    assert verify_top_chern_euler(random_skew_hermitian_forms(rng, n, 8)).relative <= 1e-9


def test_top_chern_zero_curvature():
    chk = verify_top_chern_euler(FormMatrix.zeros(2, 2, 4, "complex"))
    assert chk.residual == 0


def test_matching_count():
    from chernlab.invariants import perfect_matchings
    for m in (2, 4, 6, 8):
        assert len(list(perfect_matchings(m))) == math.prod(range(m - 1, 0, -2))
        signs = {p: s for s, p in perfect_matchings(m)}
        assert signs[tuple((2 * k, 2 * k + 1) for k in range(m // 2))] == 1


def test_pfaffian_dense_forms_square_is_det(rng):
    A = random_skew_forms(rng, 4, 8)
    pf = pfaffian(A)
    assert pf.wedge(pf).distance(det_form(A)) <= 1e-9 * det_form(A).max_abs()
    assert all(len(k) == 4 for k in pf.terms) and len(pf.terms) == len(list(combinations(range(8), 4)))
