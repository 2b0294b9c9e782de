"""Acceptance checks: one test per criterion, each printing a single PASS/FAIL line.

Tolerances and runtime budgets are pinned; do not loosen them to make a run green.
"""

import io
import time

import pytest

from chernlab.catalog import (dual_check_line, dual_check_product, intersection_example,
                              normal_euler_check, poincare_hopf, sum_bundle_euler_check)
from chernlab.cli import main
from chernlab.fuzz import (pf_squared_suite, pfaffian_det_suite, pfaffian_oracle_suite,
                           top_chern_euler_suite)
from chernlab.transgression import thom_form, transgression_eta
from chernlab.zoo import characteristic_number, get_model, realify_model, s2_model

SEED = 20240611


@pytest.fixture
def report(capsys):
    def emit(number, ok, detail, elapsed, budget):
        ok = bool(ok) and elapsed < budget
        with capsys.disabled():
            print(f"\n[acceptance {number:2d}] {'PASS' if ok else 'FAIL'} "
                  f"{detail} ({elapsed:.1f}s / {budget:.0f}s)")
        return ok
    return emit


def test_01_pfaffian_det_identity(report):
    t0 = time.perf_counter()
    exact = [pfaffian_det_suite(n, 500, SEED, "exact") for n in (1, 2, 3, 4)]
    flt = [pfaffian_det_suite(n, 500, SEED, "float", tol=1e-9) for n in range(1, 7)]
    dt = time.perf_counter() - t0
    ok = all(r.failures == 0 and r.worst == 0 for r in exact) and \
        all(r.failures == 0 for r in flt)
    worst = max(r.worst for r in flt)
    assert report(1, ok, f"exact residual max {max(r.worst for r in exact):g}, "
                  f"float rel max {worst:.2e} <= 1e-9", dt, 30)


def test_02_pfaffian_oracle(report):
    t0 = time.perf_counter()
    res = [pfaffian_oracle_suite(s, 200, SEED, mode, tol=1e-10)
           for s in (2, 4, 6, 8) for mode in ("exact", "float")]
    dt = time.perf_counter() - t0
    ok = all(r.failures == 0 for r in res)
    worst = max(r.worst for r in res if r.parameters["mode"] == "float")
    assert report(2, ok, f"exact identical, float rel max {worst:.2e} <= 1e-10", dt, 60)


def test_03_pf_squared_and_top_pontryagin(report):
    t0 = time.perf_counter()
    res = [r for k in (2, 4) for r in pf_squared_suite(k, 200, SEED, dim=8, tol=1e-9)]
    dt = time.perf_counter() - t0
    ok = all(r.failures == 0 for r in res)
    worst = max(r.worst for r in res)
    assert report(3, ok, f"Pf^2=det and p_n=e^e rel max {worst:.2e} <= 1e-9", dt, 60)


def test_04_top_chern_equals_euler(report):
    t0 = time.perf_counter()
    res = [top_chern_euler_suite(n, 100, SEED, dim=8, tol=1e-9) for n in (1, 2, 3)]
    dt = time.perf_counter() - t0
    ok = all(r.failures == 0 for r in res)
    worst = max(r.worst for r in res)
    assert report(4, ok, f"c_n vs e(realified) rel max {worst:.2e} <= 1e-9", dt, 60)


def test_05_gauss_bonnet_sphere(report):
    t0 = time.perf_counter()
    v = characteristic_number(s2_model(nodes=(512, 1024)), "e").value
    v2 = characteristic_number(s2_model(nodes=(1024, 2048)), "e").value
    dt = time.perf_counter() - t0
    ok = abs(v - 2) <= 1e-3 and abs(v2 - v) < 5e-4
    assert report(5, ok, f"int e = {v:.7f} (2 +- 1e-3), doubling change {abs(v2 - v):.1e} < 5e-4",
                  dt, 30)


def test_06_cp1_and_line_bundles(report):
    t0 = time.perf_counter()
    vals = {"cp1": characteristic_number(get_model("cp1"), "c1").value}
    for d in (1, 2, 3):
        vals[f"o({d})"] = characteristic_number(get_model(f"o({d})"), "c1").value
    dt = time.perf_counter() - t0
    expect = {"cp1": 2, "o(1)": 1, "o(2)": 2, "o(3)": 3}
    ok = all(abs(vals[k] - expect[k]) <= 1e-2 for k in expect)
    detail = ", ".join(f"{k} {vals[k]:.5f}" for k in expect)
    assert report(6, ok, f"int c1: {detail} (+- 1e-2)", dt, 60)


def test_07_cp2_numbers_and_signature(report):
    t0 = time.perf_counter()
    m = get_model("cp2")
    c2 = characteristic_number(m, "c2").value
    c11 = characteristic_number(m, "c1^2").value
    p1 = characteristic_number(realify_model(m), "p1").value
    dt = time.perf_counter() - t0
    sig = round(p1 / 3)
    ok = abs(c2 - 3) <= 5e-2 and abs(c11 - 9) <= 1e-1 and abs(p1 - 3) <= 1e-1 and sig == 1
    assert report(7, ok, f"c2 {c2:.5f}, c1^2 {c11:.5f}, p1 {p1:.5f}, signature {sig}", dt, 600)


def test_08_transgression(report):
    t0 = time.perf_counter()
    res = transgression_eta(get_model("s2"), grid=(64, 64, 64), step=1e-4)
    flat = transgression_eta(get_model("torus"), grid=(64, 64, 64), step=1e-4)
    dt = time.perf_counter() - t0
    ok = (res.residual <= 1e-4 and abs(res.fiber_mean - 1) <= 1e-3
          and res.fiber_spread <= 1e-3 and flat.residual <= 1e-10)
    assert report(8, ok, f"TS2 residual {res.residual:.2e} <= 1e-4, fiber {res.fiber_mean:.6f} "
                  f"spread {res.fiber_spread:.1e}, flat residual {flat.residual:.1e}", dt, 300)


def test_09_thom_form(report):
    t0 = time.perf_counter()
    res = thom_form()
    dt = time.perf_counter() - t0
    ok = (abs(res.fiber_integral - 1) <= 1e-2 and res.support_leak <= 1e-12
          and res.closed_residual <= 1e-6)
    assert report(9, ok, f"fiber integral {res.fiber_integral:.6f}, leak {res.support_leak:.1e}, "
                  f"closedness {res.closed_residual:.1e}", dt, 30)


def test_10_poincare_hopf(report):
    t0 = time.perf_counter()
    s2 = poincare_hopf("s2", "rotational")
    o3 = poincare_hopf("o(3)", "roots")
    dt = time.perf_counter() - t0
    ok = (s2["index_sum"].total == 2 and s2["index_sum"].reliable
          and abs(s2["integral"].value - 2) <= 1e-3
          and o3["index_sum"].total == 3 and len(o3["index_sum"].records) == 3
          and o3["index_sum"].reliable and abs(o3["integral"].value - 3) <= 1e-2)
    assert report(10, ok, f"S2 index sum {s2['index_sum'].total} vs {s2['integral'].value:.6f}; "
                  f"O(3) zeros {o3['index_sum'].total} vs {o3['integral'].value:.5f}", dt, 60)


def test_11_dual_checks(report):
    t0 = time.perf_counter()
    line, _ = dual_check_line(2)
    prod = dual_check_product()
    dt = time.perf_counter() - t0
    ok = abs(line.lhs - line.rhs) <= 2e-2 and abs(prod.lhs - prod.rhs) <= 2e-2
    assert report(11, ok, f"O(2): {line.lhs:.5f} vs {line.rhs:.5f}; "
                  f"product: {prod.lhs:.5f} vs {prod.rhs:.5f} (2e-2)", dt, 120)


def test_12_intersection_numbers(report):
    t0 = time.perf_counter()
    exs = {d: intersection_example(d) for d in (1, 2)}
    dt = time.perf_counter() - t0
    ok = all(ex.result.reliable and ex.result.count == d and abs(ex.integral - d) <= 1e-2
             for d, ex in exs.items())
    detail = "; ".join(f"d={d}: count {ex.result.count} vs {ex.integral:.5f}"
                       for d, ex in exs.items())
    assert report(12, ok, detail, dt, 120)


def test_13_sum_and_normal_euler(report):
    t0 = time.perf_counter()
    a = sum_bundle_euler_check()
    b = normal_euler_check()
    dt = time.perf_counter() - t0
    ok = abs(a.lhs - a.rhs) <= 5e-2 and abs(b.lhs - b.rhs) <= 5e-2
    assert report(13, ok, f"c1^2 {a.lhs:.5f} vs locus Euler {a.rhs:.5f}; "
                  f"p1 {b.lhs:.5f} vs normal Euler {b.rhs:.5f} (5e-2)", dt, 300)


def test_14_determinism(report):
    def run(argv):
        buf = io.StringIO()
        code = main(argv, stdout=buf, stderr=io.StringIO())
        return code, buf.getvalue()

    t0 = time.perf_counter()
    argvs = [["verify", "lemma21", "--n", "3", "--trials", "50", "--seed", "7"],
             ["verify", "corollary22", "--trials", "10", "--seed", "7"],
             ["charnum", "--model", "s2", "--class", "e"],
             ["intersect", "--d", "2"]]
    same = all(run(a) == run(a) for a in argvs)
    dt = time.perf_counter() - t0
    assert report(14, same, f"{len(argvs)} runs repeated byte-identically", dt, 600)
