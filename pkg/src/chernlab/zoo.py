"""Concrete bundles with connections, and their characteristic numbers.

Noncompact affine charts (CP^n, products of CP^1) are integrated on polar
pieces ``z_j = sinh(u_j) e^{i phi_j}``, truncated at ``|z_j| <= R`` and
extrapolated from ``R`` and ``2R`` under an ``R^-2`` tail model.  The round
sphere uses a ``(theta, phi)`` chart with the two polar caps cut out and
their contribution added in closed form.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import UsageError
from .exterior import Form, FormMatrix, block_diag
from .fields import (Chart, FormField, FormMatrixField, QuadratureRule, SmoothMap,
                     exterior_derivative, integrate_top, pullback, sample_points)
from .invariants import chern_forms, euler_form, pontryagin_forms, realify_curvature

TWO_PI = 2.0 * math.pi
AFFINE_BOX = 200.0


# ---------------------------------------------------------------------------
# quadrature plans

@dataclass(frozen=True)
class Quadrature:
    """Integration plan for a model's base.

    ``scheme="chart"``: tensor rule on the chart itself, ``nodes`` per axis.
    ``scheme="radial"``: the chart is ``C^k`` in interleaved real coordinates;
    ``nodes = (u_panels, phi_nodes)`` per complex coordinate, Gauss-Legendre
    panels of order ``gauss_order`` in ``u``, trapezoid in ``phi``.
    """

    scheme: str
    nodes: tuple
    radius: float = 20.0
    gauss_order: int = 4

    def describe(self) -> dict:
        out = {"scheme": self.scheme, "nodes": list(self.nodes)}
        if self.scheme == "radial":
            out.update(radius=self.radius, gauss_order=self.gauss_order)
        return out

    def coarsened(self) -> "Quadrature":
        return replace(self, nodes=tuple(max(2, n // 2) for n in self.nodes))


def polar_chart(ncomplex: int, radius: float, nodes=(16, 8)) -> Chart:
    bounds = []
    periodic = set()
    for j in range(ncomplex):
        bounds += [(0.0, math.asinh(radius)), (0.0, TWO_PI)]
        periodic.add(2 * j + 1)
    names = tuple(n for j in range(ncomplex) for n in (f"u{j + 1}", f"phi{j + 1}"))
    return Chart(2 * ncomplex, tuple(bounds), frozenset(periodic),
                 (max(3, nodes[0]), max(3, nodes[1])) * ncomplex, 0.0, names)


def polar_map(target: Chart, radius: float) -> SmoothMap:
    """``(u, phi) -> (sinh u cos phi, sinh u sin phi)`` on every complex factor."""
    k = target.dim // 2
    source = polar_chart(k, radius)

    def value(x):
        out = np.empty_like(x)
        for j in range(k):
            u, p = x[2 * j], x[2 * j + 1]
            out[2 * j] = np.sinh(u) * np.cos(p)
            out[2 * j + 1] = np.sinh(u) * np.sin(p)
        return out

    def jac(x):
        J = np.zeros((2 * k, 2 * k) + x.shape[1:])
        for j in range(k):
            u, p = x[2 * j], x[2 * j + 1]
            ch, sh, c, s = np.cosh(u), np.sinh(u), np.cos(p), np.sin(p)
            a, b = 2 * j, 2 * j + 1
            J[a, a] = ch * c
            J[a, b] = -sh * s
            J[b, a] = ch * s
            J[b, b] = sh * c
        return J

    return SmoothMap(source, target, value, jac)


@dataclass
class Integral:
    value: float
    truncation_error: float = 0.0
    raw: dict = field(default_factory=dict)


def integrate_on_base(f: FormField, quad: Quadrature) -> Integral:
    """Integrate a top-degree field over a model base according to ``quad``."""
    chart = f.chart
    if f.degree != chart.dim:
        raise UsageError(f"need a top-degree ({chart.dim}) form, got degree {f.degree}")
    if quad.scheme == "chart":
        rule = QuadratureRule(tuple(quad.nodes))
        return Integral(float(np.real(integrate_top(f, rule))))
    if quad.scheme != "radial":
        raise UsageError(f"unknown quadrature scheme {quad.scheme!r}")
    if chart.dim % 2:
        raise UsageError("radial scheme needs an even-dimensional chart")
    k = chart.dim // 2
    kinds = ("gauss", "trapezoid") * k
    rule = QuadratureRule(tuple(quad.nodes) * k, kinds, quad.gauss_order)
    vals = {}
    for R in (quad.radius, 2 * quad.radius):
        phi = polar_map(chart, R)
        vals[R] = float(np.real(integrate_top(pullback(f, phi), rule)))
    v1, v2 = vals[quad.radius], vals[2 * quad.radius]
    extrap = v2 + (v2 - v1) / 3.0
    return Integral(extrap, abs(v2 - v1) / 3.0, {"R": v1, "2R": v2})


# ---------------------------------------------------------------------------
# models

@dataclass(frozen=True)
class BundleModel:
    name: str
    base: Chart
    rank: int
    kind: str
    curvature: FormMatrixField
    connection: FormMatrixField | None = None
    orientation: int = 1
    quadrature: Quadrature | None = None
    params: dict = field(default_factory=dict)
    expected: dict = field(default_factory=dict)
    corrections: dict = field(default_factory=dict)
    sample_box: tuple | None = None

    def __post_init__(self):
        if self.kind not in ("real", "complex"):
            raise UsageError("model kind must be real or complex")
        if self.curvature.shape != (self.rank, self.rank):
            raise UsageError("curvature shape does not match rank")

    def describe(self) -> dict:
        out = {"model": self.name, "rank": self.rank, "kind": self.kind,
               "base_dim": self.base.dim, **self.params}
        if self.quadrature:
            out["quadrature"] = self.quadrature.describe()
        return out

    def sample_points(self, counts=None) -> np.ndarray:
        chart = self.base if self.sample_box is None else self.base.with_bounds(self.sample_box)
        counts = counts or (6,) * chart.dim
        return sample_points(chart, counts)

    def with_quadrature(self, nodes=None, radius=None) -> "BundleModel":
        q = self.quadrature
        if q is None:
            raise UsageError(f"model {self.name} has no quadrature plan")
        if nodes is not None:
            nodes = tuple(int(n) for n in nodes)
            if q.scheme == "chart" and len(nodes) != self.base.dim:
                raise UsageError(f"model {self.name} needs {self.base.dim} node counts")
            if q.scheme == "radial" and len(nodes) != 2:
                raise UsageError("radial quadrature takes two node counts (u panels, phi nodes)")
            q = replace(q, nodes=nodes)
        if radius is not None:
            if radius <= 0:
                raise UsageError("radius must be positive")
            q = replace(q, radius=float(radius))
        params = dict(self.params)
        return replace(self, quadrature=q, params=params)


def curvature_from_connection(omega: FormMatrixField, step=None,
                              richardson: bool = False) -> FormMatrixField:
    """``Omega = d omega - omega ^ omega`` (row convention ``D e_i = omega_ij e_j``)."""
    if omega.degree not in (None, 1):
        raise UsageError("connection entries must be 1-forms")
    d_omega = exterior_derivative(FormMatrixField(omega.chart, omega.shape, omega.fn, 1),
                                  step, richardson)

    def fn(x):
        W = omega.evaluate(x)
        for row in W.entries:
            for e in row:
                if any(len(k) != 1 for k in e.terms):
                    raise UsageError("connection entries must be 1-forms")
        return d_omega.evaluate(x) - W.wedge(W)

    return FormMatrixField(omega.chart, omega.shape, fn, 2)


RESIDUAL_STEP = 1e-4


def structure_residual(model: BundleModel, points: np.ndarray, step=RESIDUAL_STEP) -> float:
    """Max coefficient of ``Omega - (d omega - omega ^ omega)`` at ``points``.

    ``step`` is an absolute finite-difference step; the affine charts are
    wide boxes, so a step relative to the chart extent would be too coarse.
    """
    if model.connection is None:
        raise UsageError(f"model {model.name} has no connection")
    derived = curvature_from_connection(model.connection, step)
    return model.curvature.evaluate(points).distance(derived.evaluate(points))


def bianchi_residual(model: BundleModel, points: np.ndarray, step=RESIDUAL_STEP) -> float:
    """Max coefficient of ``d Omega - omega ^ Omega + Omega ^ omega``."""
    if model.connection is None:
        raise UsageError(f"model {model.name} has no connection")
    dOm = exterior_derivative(model.curvature, step).evaluate(points)
    W = model.connection.evaluate(points)
    Om = model.curvature.evaluate(points)
    res = dOm - W.wedge(Om) + Om.wedge(W)
    return res.max_abs()


def _affine_chart(ncomplex: int) -> Chart:
    names = tuple(n for j in range(ncomplex) for n in (f"x{j + 1}", f"y{j + 1}"))
    return Chart(2 * ncomplex, ((-AFFINE_BOX, AFFINE_BOX),) * (2 * ncomplex),
                 frozenset(), (8,) * (2 * ncomplex), 1.0, names)


def _matrix_1x1(form: Form) -> FormMatrix:
    return FormMatrix([[form]])


def s2_model(delta: float = 0.01, nodes=(512, 1024)) -> BundleModel:
    """Tangent bundle of the unit sphere in the orthonormal frame ``(d/dtheta, d/dphi / sin)``."""
    if not 0 < delta < 0.5:
        raise UsageError("cap radius delta must lie in (0, 0.5)")
    chart = Chart(2, ((delta, math.pi - delta), (0.0, TWO_PI)), frozenset({1}),
                  tuple(nodes), delta / 2, ("theta", "phi"))

    def conn(x):
        w = Form(2, {(2,): np.cos(x[0])}, "real", _checked=True)
        z = Form.zero(2)
        return FormMatrix([[z, w], [-w, z]])

    def curv(x):
        w = Form(2, {(1, 2): -np.sin(x[0])}, "real", _checked=True)
        z = Form.zero(2)
        return FormMatrix([[z, w], [-w, z]])

    cap = 2.0 * (1.0 - math.cos(delta))
    return BundleModel(
        "s2", chart, 2, "real",
        FormMatrixField(chart, (2, 2), curv, 2), FormMatrixField(chart, (2, 2), conn, 1),
        quadrature=Quadrature("chart", tuple(nodes)),
        params={"delta": delta},
        expected={"e": (2.0, 1e-3)},
        corrections={"e": cap},
    )


def torus_model(nodes=(64, 64)) -> BundleModel:
    chart = Chart(2, ((0.0, TWO_PI), (0.0, TWO_PI)), frozenset({0, 1}), tuple(nodes), 0.0,
                  ("x", "y"))
    zero = FormMatrix.zeros(2, 2, 2)
    return BundleModel(
        "torus", chart, 2, "real",
        FormMatrixField(chart, (2, 2), lambda x: zero, 2),
        FormMatrixField(chart, (2, 2), lambda x: zero, 1),
        quadrature=Quadrature("chart", tuple(nodes)),
        expected={"e": (0.0, 1e-9), "p1": (0.0, 1e-9)},
    )


def _line_connection(d: int, ix: int, iy: int, dim: int):
    """Unitary-frame connection and curvature of O(d) in the coordinate pair (ix, iy)."""

    def conn(x):
        X, Y = x[ix], x[iy]
        a = 1.0 / (1.0 + X * X + Y * Y)
        return Form(dim, {(ix + 1,): 1j * d * Y * a, (iy + 1,): -1j * d * X * a},
                    "complex", _checked=True)

    def curv(x):
        X, Y = x[ix], x[iy]
        a = 1.0 / (1.0 + X * X + Y * Y)
        return Form(dim, {(ix + 1, iy + 1): -2j * d * a * a}, "complex", _checked=True)

    return conn, curv


def line_bundle_model(d: int, nodes=(24, 8), radius: float = 20.0) -> BundleModel:
    """``O(d)`` over CP^1 with the metric induced from Fubini-Study."""
    d = int(d)
    chart = _affine_chart(1)
    conn, curv = _line_connection(d, 0, 1, 2)
    return BundleModel(
        f"o({d})", chart, 1, "complex",
        FormMatrixField(chart, (1, 1), lambda x: _matrix_1x1(curv(x)), 2),
        FormMatrixField(chart, (1, 1), lambda x: _matrix_1x1(conn(x)), 1),
        quadrature=Quadrature("radial", tuple(nodes), radius),
        params={"d": d},
        expected={"c1": (float(d), 1e-2), "e": (float(d), 1e-2)},
        sample_box=((-3.0, 3.0), (-3.0, 3.0)),
    )


# Fubini-Study on the affine chart of CP^n.  With s = sqrt(1 + |z|^2):
#   H     = (I - zbar z^T / s^2) / s^2             (metric on d/dz_i)
#   g     = s I + s/(s+1) zbar z^T                 (unitary frame  e_u = g d/dz)
#   theta = dz / s - z (zbar . dz) / (s^2 (s+1))   (dual unitary coframe)
#   Omega_ij = theta_j ^ thetabar_i + delta_ij sum_k theta_k ^ thetabar_k
# (index order fixed by the row convention; checked against d omega - omega^omega)

def _complex_coords(x, n):
    return [x[2 * j] + 1j * x[2 * j + 1] for j in range(n)]


def _dz(j, dim, conj=False):
    return Form(dim, {(2 * j + 1,): 1.0 + 0j, (2 * j + 2,): (-1j if conj else 1j)},
                "complex", _checked=True)


def _fs_coframe(x, n):
    dim = 2 * n
    z = _complex_coords(x, n)
    r2 = sum(np.abs(zj) ** 2 for zj in z)
    s = np.sqrt(1.0 + r2)
    zbar_dz = None
    for j in range(n):
        t = _dz(j, dim).scale(np.conj(z[j]))
        zbar_dz = t if zbar_dz is None else zbar_dz + t
    k = 1.0 / (s * s * (s + 1.0))
    return [_dz(j, dim).scale(1.0 / s) - zbar_dz.scale(z[j] * k) for j in range(n)]


def _fs_curvature(x, n):
    theta = _fs_coframe(x, n)
    bar = [t.conjugate() for t in theta]
    trace = None
    for j in range(n):
        t = theta[j].wedge(bar[j])
        trace = t if trace is None else trace + t
    rows = []
    for i in range(n):
        row = []
        for j in range(n):
            e = theta[j].wedge(bar[i])
            if i == j:
                e = e + trace
            row.append(e)
        rows.append(row)
    return FormMatrix(rows)


def _fs_frame_matrices(x, n):
    """Scalar arrays of ``g`` and of the holomorphic-frame connection ``dH H^-1``."""
    z = _complex_coords(x, n)
    r2 = sum(np.abs(zj) ** 2 for zj in z)
    s = np.sqrt(1.0 + r2)
    g = [[(s if i == j else 0.0) + s / (s + 1.0) * np.conj(z[i]) * z[j] for j in range(n)]
         for i in range(n)]
    return z, r2, g


def _fs_connection(x, n, dg: FormMatrix):
    """Unitary-frame connection ``dg g^-1 + g (dH H^-1) g^-1``."""
    dim = 2 * n
    z, r2, g = _fs_frame_matrices(x, n)
    a = 1.0 / (1.0 + r2)
    zb = [np.conj(zj) for zj in z]
    # dH_ij (holomorphic part) = sum_k dH_ij/dz_k dz_k
    dH = [[None] * n for _ in range(n)]
    for i in range(n):
        for j in range(n):
            acc = Form.zero(dim, "complex")
            for k in range(n):
                coef = 2 * a ** 3 * zb[k] * zb[i] * z[j]
                if i == j:
                    coef = coef - a * a * zb[k]
                if j == k:
                    coef = coef - a * a * zb[i]
                acc = acc + _dz(k, dim).scale(coef)
            dH[i][j] = acc
    # H^-1 = (1+r^2) (I + zbar z^T)
    Hinv = [[(1.0 + r2) * ((1.0 if i == j else 0.0) + zb[i] * z[j]) for j in range(n)]
            for i in range(n)]
    # g^-1 = H^{1/2} = I/s - zbar z^T / (s^2 (s+1))
    s = np.sqrt(1.0 + r2)
    ginv = [[((1.0 / s) if i == j else 0.0) - zb[i] * z[j] / (s * s * (s + 1.0))
             for j in range(n)] for i in range(n)]

    def scal_mat_form(M_scalar_left, F, M_scalar_right):
        out = []
        for i in range(n):
            row = []
            for j in range(n):
                acc = Form.zero(dim, "complex")
                for p in range(n):
                    for q in range(n):
                        c = M_scalar_left[i][p] * M_scalar_right[q][j]
                        acc = acc + F[p][q].scale(c)
                row.append(acc)
            out.append(row)
        return out

    I_ = [[1.0 if i == j else 0.0 for j in range(n)] for i in range(n)]
    omega_hol = scal_mat_form(I_, dH, Hinv)
    conj_part = scal_mat_form(g, omega_hol, ginv)
    dgginv = scal_mat_form(I_, dg.tolist(), ginv)
    return FormMatrix([[dgginv[i][j] + conj_part[i][j] for j in range(n)] for i in range(n)])


def cp_model(n: int = 1, nodes=None, radius: float = 20.0, fd_step: float = 1e-5) -> BundleModel:
    """Holomorphic tangent bundle of CP^n (n = 1, 2) with the Fubini-Study metric."""
    if n not in (1, 2):
        raise UsageError("cp_model supports n = 1 or 2")
    chart = _affine_chart(n)
    nodes = tuple(nodes) if nodes is not None else ((24, 8) if n == 1 else (16, 4))

    def g_field(x):
        _, _, g = _fs_frame_matrices(x, n)
        return FormMatrix([[Form(2 * n, {(): g[i][j] + 0j}, "complex", _checked=True)
                            for j in range(n)] for i in range(n)])

    dg = exterior_derivative(FormMatrixField(chart, (n, n), g_field, 0), fd_step)
    conn = FormMatrixField(chart, (n, n), lambda x: _fs_connection(x, n, dg.evaluate(x)), 1)
    curv = FormMatrixField(chart, (n, n), lambda x: _fs_curvature(x, n), 2)
    if n == 1:
        expected = {"c1": (2.0, 1e-2), "e": (2.0, 1e-2)}
    else:
        expected = {"c2": (3.0, 5e-2), "c1^2": (9.0, 1e-1), "p1": (3.0, 1e-1), "e": (3.0, 5e-2)}
    return BundleModel(
        f"cp{n}", chart, n, "complex", curv, conn,
        quadrature=Quadrature("radial", nodes, radius),
        params={"n": n, "fd_step": fd_step},
        expected=expected,
        sample_box=((-2.0, 2.0),) * (2 * n),
    )


# ---------------------------------------------------------------------------
# combinators

def realify_model(m: BundleModel) -> BundleModel:
    """Underlying oriented real bundle of a complex model (rank doubles)."""
    if m.kind != "complex":
        raise UsageError("realify_model needs a complex model")
    r = 2 * m.rank
    curv = m.curvature.map(realify_curvature, (r, r), 2)
    conn = None if m.connection is None else m.connection.map(realify_curvature, (r, r), 1)
    expected = {k: v for k, v in m.expected.items() if k in ("e", "p1")}
    return replace(m, name=f"real({m.name})", rank=r, kind="real", curvature=curv,
                   connection=conn, expected=expected)


def direct_sum(m1: BundleModel, m2: BundleModel, name: str | None = None) -> BundleModel:
    if m1.base.dim != m2.base.dim or m1.kind != m2.kind:
        raise UsageError("direct_sum needs models over the same chart with the same scalars")
    r = m1.rank + m2.rank

    def curv(x):
        return block_diag(m1.curvature.evaluate(x), m2.curvature.evaluate(x))

    conn = None
    if m1.connection is not None and m2.connection is not None:
        conn = FormMatrixField(m1.base, (r, r), lambda x: block_diag(
            m1.connection.evaluate(x), m2.connection.evaluate(x)), 1)
    return replace(m1, name=name or f"{m1.name}+{m2.name}", rank=r,
                   curvature=FormMatrixField(m1.base, (r, r), curv, 2), connection=conn,
                   expected={}, corrections={},
                   params={**m1.params, **{f"summand2.{k}": v for k, v in m2.params.items()}})


def pullback_model(m: BundleModel, phi: SmoothMap, quadrature: Quadrature | None = None,
                   name: str | None = None, sample_box=None) -> BundleModel:
    if phi.target.dim != m.base.dim:
        raise UsageError("pullback_model: map target does not match model base")
    curv = pullback(m.curvature, phi)
    conn = None if m.connection is None else pullback(m.connection, phi)
    return BundleModel(name or f"pullback({m.name})", phi.source, m.rank, m.kind, curv, conn,
                       m.orientation, quadrature, dict(m.params), {}, {}, sample_box)


def projection(product: Chart, first_dim: int, which: int, target: Chart) -> SmoothMap:
    """Coordinate projection of a product chart onto factor ``which`` (0 or 1)."""
    lo, hi = (0, first_dim) if which == 0 else (first_dim, product.dim)
    k = hi - lo

    def value(x):
        return x[lo:hi]

    def jac(x):
        J = np.zeros((k, product.dim) + x.shape[1:])
        for i in range(k):
            J[i, lo + i] = 1.0
        return J

    return SmoothMap(product, target, value, jac)


def product_base(m1: BundleModel, m2: BundleModel, keep: str = "both",
                 name: str | None = None) -> BundleModel:
    """Bundles over ``B1 x B2``: ``pr1* E1``, ``pr2* E2`` or their sum (``keep``)."""
    chart = m1.base.product(m2.base)
    p1 = projection(chart, m1.base.dim, 0, m1.base)
    p2 = projection(chart, m1.base.dim, 1, m2.base)
    quad = None
    q1, q2 = m1.quadrature, m2.quadrature
    if q1 and q2 and q1.scheme == q2.scheme == "radial":
        quad = q1
    elif q1 and q2 and q1.scheme == q2.scheme == "chart":
        quad = Quadrature("chart", tuple(q1.nodes) + tuple(q2.nodes))
    box = None
    if m1.sample_box and m2.sample_box:
        box = tuple(m1.sample_box) + tuple(m2.sample_box)
    a = pullback_model(m1, p1, quad, f"pr1*{m1.name}", box)
    b = pullback_model(m2, p2, quad, f"pr2*{m2.name}", box)
    if keep == "first":
        return a
    if keep == "second":
        return b
    if keep != "both":
        raise UsageError("keep must be first, second or both")
    return direct_sum(a, b, name or f"pr1*{m1.name}+pr2*{m2.name}")


# ---------------------------------------------------------------------------
# characteristic numbers

_TOKEN = re.compile(r"^([cpe])(\d*)(?:\^(\d+))?$")


def parse_monomial(expr: str) -> list:
    """``"c1^2"`` -> ``[("c", 1), ("c", 1)]``; factors separated by ``*`` or spaces."""
    if not isinstance(expr, str) or not expr.strip():
        raise UsageError("empty characteristic-class expression")
    out = []
    for tok in re.split(r"[\s*]+", expr.strip()):
        m = _TOKEN.match(tok)
        if not m:
            raise UsageError(f"cannot parse characteristic class {tok!r}")
        letter, idx, power = m.groups()
        if letter == "e":
            if idx:
                raise UsageError("the Euler class takes no index")
            k = 0
        else:
            if not idx or int(idx) < 1:
                raise UsageError(f"{letter} needs a positive index")
            k = int(idx)
        out += [(letter, k)] * (int(power) if power else 1)
    return out


def _factor_degree(m: BundleModel, letter: str, k: int) -> int:
    if letter == "c":
        if m.kind != "complex":
            raise UsageError("Chern classes need a complex model (realify the other way round)")
        if k > m.rank:
            raise UsageError(f"c{k} exceeds rank {m.rank}")
        return 2 * k
    if letter == "p":
        real_rank = m.rank * (2 if m.kind == "complex" else 1)
        if 2 * k > real_rank:
            raise UsageError(f"p{k} exceeds rank {real_rank}")
        return 4 * k
    real_rank = m.rank * (2 if m.kind == "complex" else 1)
    if real_rank % 2:
        raise UsageError("Euler class needs even real rank")
    return real_rank


def class_forms_at(m: BundleModel, Om: FormMatrix, factors) -> list:
    need = {letter for letter, _ in factors}
    out = {}
    if "c" in need:
        ch = chern_forms(Om).chern
        for letter, k in factors:
            if letter == "c":
                out[("c", k)] = ch[k]
    if "p" in need or "e" in need:
        Rl = realify_curvature(Om) if m.kind == "complex" else Om
        if "p" in need:
            pk = pontryagin_forms(Rl).pontryagin
            for letter, k in factors:
                if letter == "p":
                    out[("p", k)] = pk[k]
        if "e" in need:
            out[("e", 0)] = euler_form(Rl)
    return [out[f] for f in factors]


def class_form(m: BundleModel, expr: str) -> FormField:
    """Wedge product of the named characteristic forms, as a field on the base."""
    factors = parse_monomial(expr)
    degree = sum(_factor_degree(m, letter, k) for letter, k in factors)

    def fn(x):
        forms = class_forms_at(m, m.curvature.evaluate(x), factors)
        acc = forms[0]
        for f in forms[1:]:
            acc = acc.wedge(f)
        if degree > m.base.dim:
            return Form.zero(m.base.dim)
        return acc.part(degree)

    return FormField(m.base, degree, fn)


@dataclass
class CharacteristicNumber:
    model: str
    expr: str
    value: float
    truncation_error: float
    refinement_error: float | None
    correction: float
    raw: dict
    parameters: dict
    expected: float | None = None
    tolerance: float | None = None

    @property
    def passed(self) -> bool | None:
        if self.expected is None:
            return None
        return abs(self.value - self.expected) <= self.tolerance


def characteristic_number(m: BundleModel, expr: str, refine: bool = False) -> CharacteristicNumber:
    """Integrate a characteristic monomial over the base.

    Degree must equal the base dimension.  ``refine`` reruns the quadrature
    with halved node counts and reports the change.
    """
    f = class_form(m, expr)
    if f.degree != m.base.dim:
        raise UsageError(f"{expr!r} has degree {f.degree} but the base has dimension {m.base.dim}")
    if m.quadrature is None:
        raise UsageError(f"model {m.name} has no quadrature plan")
    res = integrate_on_base(f, m.quadrature)
    key = expr.replace(" ", "")
    corr = m.corrections.get(key, 0.0)
    value = res.value + corr
    ref = None
    if refine:
        coarse = integrate_on_base(f, m.quadrature.coarsened())
        ref = abs(coarse.value + corr - value)
    exp = m.expected.get(key)
    return CharacteristicNumber(m.name, key, value, res.truncation_error, ref, corr, res.raw,
                                m.describe(), exp[0] if exp else None, exp[1] if exp else None)


# ---------------------------------------------------------------------------
# registry

def s2xs2_model(nodes=(16, 4), radius: float = 20.0) -> BundleModel:
    """``pr1* O(1) + pr2* O(1)`` over ``CP^1 x CP^1`` (the smooth S^2 x S^2)."""
    o1 = line_bundle_model(1, nodes, radius)
    m = product_base(o1, o1, "both", "s2xs2")
    return replace(m, expected={"c1^2": (2.0, 2e-2), "c2": (1.0, 2e-2), "p1": (0.0, 2e-2)},
                   params={"d1": 1, "d2": 1})


def _parse_line(name: str):
    m = re.fullmatch(r"o\(?(-?\d+)\)?", name)
    return int(m.group(1)) if m else None


MODEL_NAMES = ("s2", "ts2", "torus", "cp1", "cp2", "o(d)", "real(cp1)", "real(cp2)",
               "real(o(d))", "s2xs2")


def get_model(name: str, **kw) -> BundleModel:
    """Registry lookup by name; keyword ``nodes``/``radius`` override the quadrature."""
    key = name.strip().lower()
    nodes = kw.get("nodes")
    radius = kw.get("radius")
    if key.startswith("real(") and key.endswith(")"):
        return realify_model(get_model(key[5:-1], **kw))
    if key in ("s2", "ts2"):
        m = s2_model(**({"delta": kw["delta"]} if "delta" in kw else {}))
    elif key == "torus":
        m = torus_model()
    elif key in ("cp1", "cp2"):
        m = cp_model(int(key[2]))
    elif key == "s2xs2":
        m = s2xs2_model()
    elif _parse_line(key) is not None:
        m = line_bundle_model(_parse_line(key))
    else:
        raise UsageError(f"unknown model {name!r}; known: {', '.join(MODEL_NAMES)}")
    if nodes is not None or radius is not None:
        m = m.with_quadrature(nodes, radius)
    return m


__all__ = [
    "BundleModel", "Quadrature", "Integral", "CharacteristicNumber",
    "curvature_from_connection", "structure_residual", "bianchi_residual",
    "s2_model", "torus_model", "line_bundle_model", "cp_model", "s2xs2_model",
    "realify_model", "direct_sum", "pullback_model", "product_base", "projection",
    "class_form", "characteristic_number", "integrate_on_base", "parse_monomial",
    "get_model", "polar_map", "polar_chart", "MODEL_NAMES",
]
