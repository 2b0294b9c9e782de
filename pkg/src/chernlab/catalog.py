"""Builtin sections and worked both-sides checks on the shipped models."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import UsageError
from .exterior import Form, FormMatrix
from .fields import Chart, FormField, FormMatrixField, SmoothMap, exterior_derivative
from .invariants import euler_form, realify_curvature
from .loci import (ParametrizedLocus, SectionField, SectionPatch, degeneracy_scan, find_zeros,
                   index_sum, intersection_number, poincare_dual_check, psi_orientation)
from .zoo import (BundleModel, Quadrature, characteristic_number, get_model,
                  integrate_on_base, line_bundle_model, product_base, pullback_model,
                  realify_model, s2_model, s2xs2_model, torus_model)

TWO_PI = 2.0 * math.pi
CAP_OWN = 0.3


# ---------------------------------------------------------------------------
# sections

def _box(dim, half, names=None, margin=0.05):
    names = names or tuple(f"x{i + 1}" for i in range(dim))
    return Chart(dim, ((-half, half),) * dim, frozenset(), (8,) * dim, margin, names)


def s2_rotational_section(model: BundleModel | None = None) -> SectionField:
    """The rotation field d/dphi on the unit sphere.

    Main patch: frame components ``(0, sin theta)`` in the orthonormal frame
    of the sphere model.  Cap patches use oriented polar-normal coordinates
    ``(theta cos phi, theta sin phi)`` at the north pole and the swapped pair
    at the south pole, each with its coordinate frame.
    """
    model = model or s2_model()
    main = model.base

    def v_main(x):
        return np.stack([np.zeros_like(x[0]), np.sin(x[0])])

    def own_main(x):
        return (x[0] >= CAP_OWN) & (x[0] <= math.pi - CAP_OWN)

    def v_north(x):
        return np.stack([-x[1], x[0]])

    def v_south(x):
        return np.stack([x[1], -x[0]])

    def own_cap(x):
        return np.hypot(x[0], x[1]) < CAP_OWN

    cap = _box(2, 2 * CAP_OWN, ("a", "b"))
    patches = [SectionPatch("main", main, v_main, owns=own_main),
               SectionPatch("north", cap, v_north, owns=own_cap),
               SectionPatch("south", cap, v_south, owns=own_cap)]
    return SectionField("rotational", 2, "real", patches, model)


def torus_section(kind: str = "sines", model: BundleModel | None = None) -> SectionField:
    model = model or torus_model()
    if kind == "constant":
        def v(x):
            return np.stack([np.ones_like(x[0]), np.zeros_like(x[0])])
    elif kind == "sines":
        def v(x):
            return np.stack([np.sin(x[0]), np.sin(x[1])])
    else:
        raise UsageError(f"unknown torus section {kind!r}")
    return SectionField(kind, 2, "real", [SectionPatch("main", model.base, v)], model)


def default_roots(d: int) -> list:
    return [0.5 * complex(math.cos(TWO_PI * k / d + 0.3), math.sin(TWO_PI * k / d + 0.3))
            for k in range(d)]


def line_section(d: int, roots=None, model: BundleModel | None = None) -> SectionField:
    """``p(z) = prod (z - a_k)`` as a section of O(d), in the unitary frame.

    The ``z`` patch owns ``|z| <= 1``; the ``w = 1/z`` patch carries
    ``w^d p(1/w)`` and owns ``|w| < 1``.
    """
    d = int(d)
    roots = list(default_roots(d) if roots is None else roots)
    if len(roots) != d:
        raise UsageError(f"O({d}) section needs {d} roots")
    model = model or line_bundle_model(d)

    def pz(z):
        out = np.ones_like(z)
        for a in roots:
            out = out * (z - a)
        return out

    def qw(w):
        out = np.ones_like(w)
        for a in roots:
            out = out * (1.0 - a * w)
        return out

    def v_z(x):
        z = x[0] + 1j * x[1]
        return (pz(z) * (1.0 + np.abs(z) ** 2) ** (-d / 2.0))[None]

    def v_w(x):
        w = x[0] + 1j * x[1]
        return (qw(w) * (1.0 + np.abs(w) ** 2) ** (-d / 2.0))[None]

    def own_z(x):
        return np.hypot(x[0], x[1]) <= 1.0

    def own_w(x):
        return np.hypot(x[0], x[1]) < 1.0

    chart = _box(2, 1.5, ("x", "y"))
    patches = [SectionPatch("z", chart, v_z, owns=own_z), SectionPatch("w", chart, v_w, owns=own_w)]
    return SectionField(f"o({d})-roots", 1, "complex", patches, model,
                        {"roots": [[r.real, r.imag] for r in roots]})


SECTION_NAMES = ("rotational", "constant", "sines", "roots")


def get_section(model_name: str, section: str) -> SectionField:
    m = get_model(model_name)
    key = section.strip().lower()
    if m.name == "s2" and key == "rotational":
        return s2_rotational_section(m)
    if m.name == "torus" and key in ("constant", "sines"):
        return torus_section(key, m)
    if m.name.startswith("o(") and key == "roots":
        return line_section(int(m.params["d"]), model=m)
    if m.name == "cp1" and key == "roots":
        return line_section(2, model=m)
    raise UsageError(f"unknown section {section!r} for model {model_name!r}; "
                     f"builtin: s2/rotational, torus/constant|sines, o(d)/roots, cp1/roots")


# ---------------------------------------------------------------------------
# Poincare-Hopf / top Chern consistency

def poincare_hopf(model_name: str, section: str, expr: str | None = None) -> dict:
    s = get_section(model_name, section)
    m = s.bundle
    expr = expr or ("e" if m.kind == "real" else "c1")
    cn = characteristic_number(m, expr)
    res = index_sum(s, cn.value, label=f"int {expr}")
    return {"index_sum": res, "integral": cn}


# ---------------------------------------------------------------------------
# CP^1 x CP^1 examples

def _product_chart():
    return line_bundle_model(1).base.product(line_bundle_model(1).base)


def _affine_plane():
    return line_bundle_model(1).base


def _slice_map(fixed: complex, first_fixed: bool, source: Chart | None = None) -> SmoothMap:
    """``w -> (fixed, w)`` or ``z -> (z, fixed)`` into the product chart."""
    source = source or _affine_plane()
    target = _product_chart()
    fx, fy = fixed.real, fixed.imag

    def value(x):
        c1 = np.full_like(x[0], fx)
        c2 = np.full_like(x[0], fy)
        if first_fixed:
            return np.stack([c1, c2, x[0], x[1]])
        return np.stack([x[0], x[1], c1, c2])

    def jac(x):
        J = np.zeros((4, 2) + x.shape[1:])
        off = 2 if first_fixed else 0
        J[off, 0] = 1.0
        J[off + 1, 1] = 1.0
        return J

    return SmoothMap(source, target, value, jac)


def pr1_section(d: int, roots) -> SectionField:
    """``pr1* p`` on ``CP^1 x CP^1`` in the unitary frame of ``pr1* O(d)``."""
    chart = _product_chart()

    def value(x):
        z = x[0] + 1j * x[1]
        out = np.ones_like(z)
        for a in roots:
            out = out * (z - a)
        return (out * (1.0 + np.abs(z) ** 2) ** (-d / 2.0))[None]

    return SectionField(f"pr1*o({d})", 1, "complex", [SectionPatch("main", chart, value)])


@dataclass
class IntersectionExample:
    result: object
    integral: float
    integral_truncation: float
    boundary_min_norm: float
    parameters: dict = field(default_factory=dict)


def intersection_example(d: int = 1, q: complex = 0.3 + 0.2j, complement: bool = False,
                         grid=(128, 128), nodes=(24, 8), radius: float = 20.0) -> IntersectionExample:
    """S = CP^1 x {q} (or {z1} x CP^1 off the zero locus) against N_1 of pr1* p."""
    roots = default_roots(d)
    E = product_base(line_bundle_model(d, nodes, radius), line_bundle_model(0, nodes, radius),
                     "first")
    s = pr1_section(d, roots)
    search = _box(2, 1.5, ("x", "y"))
    if complement:
        z1 = 0.9 - 0.7j
        emb_search = _slice_map(z1, True, search)
        emb_full = _slice_map(z1, True)
    else:
        emb_search = _slice_map(q, False, search)
        emb_full = _slice_map(q, False)
    res = intersection_number(emb_search, s, grid)
    quad = Quadrature("radial", tuple(nodes), radius)
    iE = pullback_model(E, emb_full, quad, "i*E")
    cn = characteristic_number(iE, "c1")
    res.companion = cn.value
    res.discrepancy = abs(res.count - cn.value)
    t = np.linspace(0.0, TWO_PI, 400, endpoint=False)
    rim = np.stack([1.5 * np.cos(t), 1.5 * np.sin(t)])
    rim_norm = float(np.min(np.abs(s.value(emb_search(rim))[0])))
    params = {"d": d, "q": [q.real, q.imag], "complement": complement, "grid": list(grid),
              "nodes": list(nodes), "radius": radius}
    return IntersectionExample(res, cn.value, cn.truncation_error, rim_norm, params)


def dual_check_line(d: int = 2):
    """``int c_1(O(d))`` against the signed zero count of a section (xi = 1)."""
    m = line_bundle_model(d)
    s = line_section(d, model=m)
    recs = find_zeros(s)
    xi = FormField(m.base, 0, lambda x: Form(2, {(): 1.0}, "real", _checked=True))
    return poincare_dual_check(m, 1, xi, recs), recs


def dual_check_product(p0: complex = 0.2 - 0.1j, nodes=(16, 4), radius: float = 20.0):
    """``pr1* O(1)`` over CP^1 x CP^1 with ``xi = pr2* c_1(O(1))``; locus ``{p0} x CP^1``."""
    E = product_base(line_bundle_model(1, nodes, radius), line_bundle_model(0, nodes, radius),
                     "first")
    base = E.base

    def xi_fn(x):
        a = 1.0 / (1.0 + x[2] ** 2 + x[3] ** 2)
        return Form(4, {(3, 4): a * a / math.pi}, "real", _checked=True)

    xi = FormField(base, 2, xi_fn)
    s = pr1_section(1, [p0])
    emb = _slice_map(p0, True)
    x0 = np.array([[0.3], [-0.4]])
    on_locus = float(np.max(np.abs(s.value(emb(x0)))))
    df = s.real_derivative(emb(x0))[..., 0]
    V = emb.jacobian(x0)[..., 0]
    sign = psi_orientation(df, V)
    locus = ParametrizedLocus(emb, Quadrature("radial", tuple(nodes), radius), sign)
    out = poincare_dual_check(E, 1, xi, locus)
    out.parameters.update({"p0": [p0.real, p0.imag], "locus_residual": on_locus,
                           "locus_orientation": sign})
    return out


# ---------------------------------------------------------------------------
# both-sides checks on pr1* O(1) + pr2* O(1)

def _unitary_pair(x, a, b, which):
    z = x[0] + 1j * x[1]
    w = x[2] + 1j * x[3]
    nz = (1.0 + np.abs(z) ** 2) ** -0.5
    nw = (1.0 + np.abs(w) ** 2) ** -0.5
    if which == 1:
        return np.stack([(z - a) * nz, (w - b) * nw])
    return np.stack([nz + 0j * z, nw + 0j * w])


@dataclass
class BothSides:
    lhs: float
    rhs: float
    discrepancy: float
    details: dict
    locus: np.ndarray | None = None


def sum_bundle_euler_check(a: complex = 0.3 + 0.1j, b: complex = -0.2 + 0.25j, nodes=(16, 4),
                           radius: float = 20.0, scan_grid=(14, 14, 14, 14), step: float = 1e-5) -> BothSides:
    """``int_M c_1 ^ c_1`` against ``int_{N_2} e(F_R)`` for ``E = pr1* O(1) + pr2* O(1)``.

    Sections ``s_1 = (z - a, w - b)`` and ``s_2 = (1, 1)`` (holomorphic
    frames) are dependent exactly on the graph ``w = z - a + b``.  On it the
    section ``nu = (1, z)`` never vanishes; ``F`` is its orthogonal
    complement with the projected connection.
    """
    M = s2xs2_model(nodes, radius)
    lhs = characteristic_number(M, "c1^2")

    box = _box(4, 1.2)
    s1 = SectionField("s1", 2, "complex",
                      [SectionPatch("main", box, lambda x: _unitary_pair(x, a, b, 1))])
    s2 = SectionField("s2", 2, "complex",
                      [SectionPatch("main", box, lambda x: _unitary_pair(x, a, b, 2))])
    scan = degeneracy_scan([s1, s2], 2, scan_grid, max_points=400)
    if scan.points.shape[1]:
        P = scan.points
        dev = float(np.max(np.abs((P[2] + 1j * P[3]) - (P[0] + 1j * P[1]) + a - b)))
    else:
        dev = float("nan")

    plane = _affine_plane()
    target = M.base

    def cval(x):
        return np.stack([x[0], x[1], x[0] - a.real + b.real, x[1] - a.imag + b.imag])

    def cjac(x):
        J = np.zeros((4, 2) + x.shape[1:])
        J[0, 0] = J[1, 1] = J[2, 0] = J[3, 1] = 1.0
        return J

    curve = SmoothMap(plane, target, cval, cjac)
    quad = Quadrature("radial", tuple(nodes), radius)
    Ec = pullback_model(M, curve, quad, "E|D2")

    def f_components(x):
        z = x[0] + 1j * x[1]
        w = z - a + b
        nu = np.stack([(1.0 + np.abs(z) ** 2) ** -0.5 + 0j, z * (1.0 + np.abs(w) ** 2) ** -0.5])
        nu = nu / np.sqrt(np.sum(np.abs(nu) ** 2, axis=0))
        return np.stack([-np.conj(nu[1]), np.conj(nu[0])])

    def f_field(x):
        f = f_components(x)
        return FormMatrix([[Form(2, {(): f[0]}, "complex", _checked=True),
                            Form(2, {(): f[1]}, "complex", _checked=True)]])

    df = exterior_derivative(FormMatrixField(plane, (1, 2), f_field, 0), step)

    def omega_F(x):
        f = f_components(x)
        W = Ec.connection.evaluate(x)
        dF = df.evaluate(x)
        acc = Form.zero(2, "complex")
        for j in range(2):
            Dj = dF[0, j]
            for i in range(2):
                Dj = Dj + W[i, j].scale(f[i])
            acc = acc + Dj.scale(np.conj(f[j]))
        return acc

    wF = FormField(plane, 1, omega_F)
    dwF = exterior_derivative(wF, step)

    def eF(x):
        Om = FormMatrix([[dwF.evaluate(x)]])
        return euler_form(realify_curvature(Om, rtol=1e-6))

    rhs = integrate_on_base(FormField(plane, 2, eF), quad)
    details = {"lhs_truncation": lhs.truncation_error, "rhs_truncation": rhs.truncation_error,
               "locus_points": int(scan.points.shape[1]), "locus_dimension": scan.fitted_dimension,
               "locus_deviation": dev, "a": [a.real, a.imag], "b": [b.real, b.imag],
               "nodes": list(nodes), "radius": radius, "scan_grid": list(scan_grid),
               "step": step}
    return BothSides(lhs.value, rhs.value, abs(lhs.value - rhs.value), details, scan.points)


def normal_euler_check(q0: complex = 0.25 - 0.15j, q1: complex = -0.4 + 0.3j, nodes=(16, 4),
                       radius: float = 20.0, scan_grid=(14, 14, 14, 14)) -> BothSides:
    """``int_M p_1(E_R)`` against ``chi(v(N))`` for ``E = pr1* O(1) + pr2* O(1)``.

    ``N = CP^1 x {q0}`` is detected as the zero locus of ``pr2* (w - q0)``;
    its normal bundle is the restriction of ``pr2* O(1)``, whose Euler number
    is computed by Chern-Weil on N and, independently, as the signed count of
    zeros of a pushed-off section ``pr2* (w - q1)`` along N.
    """
    M = s2xs2_model(nodes, radius)
    lhs = characteristic_number(realify_model(M), "p1")

    box = _box(4, 1.2)

    def sig(x, q):
        w = x[2] + 1j * x[3]
        return ((w - q) * (1.0 + np.abs(w) ** 2) ** -0.5)[None]

    sN = SectionField("pr2*(w-q0)", 1, "complex", [SectionPatch("main", box, lambda x: sig(x, q0))])
    scan = find_zeros(sN, scan_grid)
    P = scan.points
    dev = float(np.max(np.abs(P[2] + 1j * P[3] - q0))) if P.shape[1] else float("nan")

    emb = _slice_map(q0, False)
    quad = Quadrature("radial", tuple(nodes), radius)
    L2 = product_base(line_bundle_model(0, nodes, radius), line_bundle_model(1, nodes, radius),
                      "second")
    normal = realify_model(pullback_model(L2, emb, quad, "v(N)"))
    chi_cw = characteristic_number(normal, "e")

    search = _box(2, 1.5, ("x", "y"))
    pushed = SectionField("pr2*(w-q1)", 1, "complex",
                          [SectionPatch("main", _product_chart(), lambda x: sig(x, q1))])
    inter = intersection_number(_slice_map(q0, False, search), pushed, (64, 64))
    details = {"lhs_truncation": lhs.truncation_error, "chi_chern_weil": chi_cw.value,
               "chi_self_intersection": inter.count, "locus_points": int(P.shape[1]),
               "locus_dimension": scan.fitted_dimension, "locus_deviation": dev,
               "q0": [q0.real, q0.imag], "q1": [q1.real, q1.imag], "nodes": list(nodes),
               "radius": radius, "scan_grid": list(scan_grid)}
    rhs = chi_cw.value
    disc = max(abs(lhs.value - rhs), abs(lhs.value - inter.count))
    return BothSides(lhs.value, rhs, disc, details, scan.points)


__all__ = [
    "s2_rotational_section", "torus_section", "line_section", "default_roots", "get_section",
    "poincare_hopf", "pr1_section", "intersection_example", "dual_check_line",
    "dual_check_product", "sum_bundle_euler_check", "normal_euler_check", "BothSides",
    "IntersectionExample", "SECTION_NAMES",
]
