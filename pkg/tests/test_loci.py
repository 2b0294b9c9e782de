import numpy as np
import pytest

from chernlab.catalog import (dual_check_line, dual_check_product, get_section,
                              intersection_example, line_section, poincare_hopf, torus_section)
from chernlab.errors import DegenerateZeroError, UsageError
from chernlab.exterior import Form
from chernlab.fields import Chart, FormField
from chernlab.loci import (SectionField, SectionPatch, degeneracy_scan, find_zeros,
                           genericity_check, index_sum, load_section_table, local_index,
                           poincare_dual_check, realify_vector)
from chernlab.zoo import line_bundle_model

BOX2 = Chart(2, ((-1, 1), (-1, 1)), (), (32, 32), 0.1)
BOX4 = Chart(4, ((-1, 1),) * 4, (), (8,) * 4, 0.1)


def real_section(fn, chart=BOX2, rank=2):
    return SectionField("test", rank, "real", [SectionPatch("main", chart, fn)])


def test_local_index_identity_and_reflection():
    assert local_index(real_section(lambda x: np.stack([x[0], x[1]])), [0, 0]) == 1
    assert local_index(real_section(lambda x: np.stack([x[0], -x[1]])), [0, 0]) == -1


def test_local_index_holomorphic_is_positive(rng):
    for _ in range(20):
        a = complex(*rng.standard_normal(2))
        s = SectionField("hol", 1, "complex", [SectionPatch(
            "main", BOX2, lambda x, a=a: (a * (x[0] + 1j * x[1]))[None])])
        assert local_index(s, [0, 0]) == 1


def test_realified_complex_jacobian_positive(rng):
    for _ in range(20):
        n = 3
        A = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
        R = np.empty((2 * n, 2 * n))
        R[0::2, 0::2], R[0::2, 1::2] = A.real, -A.imag
        R[1::2, 0::2], R[1::2, 1::2] = A.imag, A.real
        assert np.linalg.det(R) == pytest.approx(abs(np.linalg.det(A)) ** 2)


def test_degenerate_zero_raises():
    s = real_section(lambda x: np.stack([x[0] ** 2, x[1]]))
    with pytest.raises(DegenerateZeroError):
        local_index(s, [0, 0])


def test_constant_section_has_no_zeros():
    s = torus_section("constant")
    assert find_zeros(s) == []
    res = index_sum(s, 0.0)
    assert res.total == 0 and res.reliable


def test_sphere_rotational_field():
    out = poincare_hopf("s2", "rotational")
    res = out["index_sum"]
    assert [r.index for r in res.records] == [1, 1]
    assert res.total == 2 and res.reliable
    assert abs(out["integral"].value - 2.0) <= 1e-3


def test_torus_sines_sum_zero():
    res = index_sum(torus_section("sines"))
    assert res.total == 0 and len(res.records) == 4


@pytest.mark.parametrize("d", [2, 3])
def test_line_bundle_zero_counts(d):
    out = poincare_hopf(f"o({d})", "roots")
    assert out["index_sum"].total == d
    assert len(out["index_sum"].records) == d
    assert abs(out["integral"].value - d) <= 1e-2


def test_zero_beyond_affine_box_found_in_second_patch():
    s = line_section(3, roots=[2 + 1j, -3j, 150.0 + 40j])
    res = index_sum(s)
    assert res.total == 3 and res.reliable
    assert sorted(r.patch for r in res.records).count("w") >= 1


def test_zero_records_are_sorted_and_refined():
    recs = find_zeros(line_section(3))
    keys = [tuple(r.location) for r in recs]
    assert all(r.refine_residual <= 1e-10 for r in recs)
    assert len(set(keys)) == 3


def test_unknown_section():
    with pytest.raises(UsageError):
        get_section("s2", "sines")


# degeneracy loci -----------------------------------------------------------

def _complex_pair():
    def s1(x):
        one = np.ones_like(x[0]) + 0j
        return np.stack([one, 0 * one])

    def s2(x):
        return np.stack([x[0] + 1j * x[1], (x[2] - 0.2) + 1j * (x[3] + 0.1)])

    return (SectionField("s1", 2, "complex", [SectionPatch("main", BOX4, s1)]),
            SectionField("s2", 2, "complex", [SectionPatch("main", BOX4, s2)]))


def test_independent_constant_tuple_is_empty():
    a = real_section(lambda x: np.stack([np.ones_like(x[0]), 0 * x[0]]))
    b = real_section(lambda x: np.stack([0 * x[0], np.ones_like(x[0])]))
    sample = degeneracy_scan([a, b], 2, (16, 16))
    assert sample.empty
    assert genericity_check([a, b], sample).passed


def test_dependent_tuple_is_non_generic():
    a = real_section(lambda x: np.stack([np.ones_like(x[0]), x[1]]))
    b = real_section(lambda x: np.stack([np.ones_like(x[0]), x[1]]) * (2 + x[0]))
    sample = degeneracy_scan([a, b], 2, (16, 16))
    assert sample.non_generic and sample.degenerate_fraction == 1.0
    assert not genericity_check([a, b], sample).passed


def test_transverse_pair_locus_dimension():
    s1, s2 = _complex_pair()
    sample = degeneracy_scan([s1, s2], 2, (10, 10, 10, 10))
    assert sample.points.shape[1] > 50
    assert abs(sample.fitted_dimension - 2.0) <= 0.2
    P = sample.points
    assert np.max(np.abs(P[2] - 0.2)) <= 1e-8 and np.max(np.abs(P[3] + 0.1)) <= 1e-8
    assert sample.in_N.all()
    assert genericity_check([s1, s2], sample).passed


def test_tangential_degeneracy_fails_genericity():
    a = real_section(lambda x: np.stack([np.ones_like(x[0]), 0 * x[0]]))
    b = real_section(lambda x: np.stack([x[1], (x[0] - 0.1) ** 2]))
    sample = degeneracy_scan([a, b], 2, (32, 32))
    assert not sample.empty
    assert not genericity_check([a, b], sample).passed


def test_scan_validates_arguments():
    s1, s2 = _complex_pair()
    with pytest.raises(UsageError):
        degeneracy_scan([s1, s2], 3)


# intersections and duality --------------------------------------------------

@pytest.mark.parametrize("d", [1, 2])
def test_intersection_count(d):
    ex = intersection_example(d)
    assert ex.result.count == d and ex.result.reliable
    assert abs(ex.integral - d) <= 1e-2
    assert not ex.result.convention_disagreement


def test_intersection_complement_is_empty():
    ex = intersection_example(1, complement=True)
    assert ex.result.count == 0 and ex.result.records == []
    assert abs(ex.integral) <= 1e-2


def test_intersection_stable_under_moving_s():
    counts = {intersection_example(2, q).result.count for q in (0.3 + 0.2j, -0.5 + 0.4j, 1.1j)}
    assert counts == {2}


def test_dual_check_line():
    chk, recs = dual_check_line(2)
    assert abs(chk.lhs - 2.0) <= 1e-2 and chk.rhs == 2.0


def test_dual_check_product():
    chk = dual_check_product()
    assert abs(chk.lhs - 1.0) <= 2e-2
    assert abs(chk.rhs - 1.0) <= 1e-5
    assert chk.parameters["locus_residual"] <= 1e-12


def test_dual_check_preconditions():
    m = line_bundle_model(1)
    one = FormField(m.base, 0, lambda x: Form(2, {(): 1.0}))
    with pytest.raises(UsageError):
        poincare_dual_check(m, 2, one, [])
    not_closed = FormField(m.base, 1, lambda x: Form(2, {(1,): x[1]}))
    with pytest.raises(UsageError):
        poincare_dual_check(m, 0, not_closed, [])


# tables --------------------------------------------------------------------

def test_section_table_roundtrip(tmp_path):
    xs = np.linspace(-1, 1, 41)
    X, Y = np.meshgrid(xs, xs, indexing="ij")
    Z = (X + 1j * Y - 0.25) * (X + 1j * Y + 0.5j)
    path = tmp_path / "s.txt"
    with open(path, "w") as fh:
        fh.write("x y s1.re s1.im\n")
        for a, b, z in zip(X.ravel(), Y.ravel(), Z.ravel()):
            fh.write(f"{a:.6f} {b:.6f} {z.real:.12g} {z.imag:.12g}\n")
    s = load_section_table(path)
    assert s.kind == "complex" and s.rank == 1
    recs = find_zeros(s, (40, 40))
    locs = sorted((round(r.location[0], 2), round(r.location[1], 2)) for r in recs)
    assert locs == [(0.0, -0.5), (0.25, 0.0)]
    assert all(r.index == 1 for r in recs)


def test_section_table_errors(tmp_path):
    bad = tmp_path / "bad.txt"
    bad.write_text("x y\n0 0\n")
    with pytest.raises(UsageError):
        load_section_table(bad)


def test_realify_vector_interleaves():
    v = np.array([1 + 2j, 3 - 1j])
    assert realify_vector(v, "complex").tolist() == [1, 2, 3, -1]
