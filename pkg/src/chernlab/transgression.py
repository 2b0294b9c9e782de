"""Sphere bundles of oriented rank-2 bundles, the transgression form, Thom forms.

Over a base chart with orthonormal frame ``(E_1, E_2)`` and connection
``omega``, the unit-circle bundle gets the extra periodic coordinate ``psi``
and the adapted frame

    e_2 = cos(psi) E_1 + sin(psi) E_2      (the tautological unit vector)
    e_1 = sin(psi) E_1 - cos(psi) E_2      (so that (e_1, e_2) is oriented)

i.e. ``e = g E`` with ``g = [[s, -c], [c, s]]``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import UnsupportedError, UsageError
from .exterior import Form, FormMatrix
from .fields import (Chart, FormField, FormMatrixField, QuadratureRule, SmoothMap,
                     exterior_derivative, integrate_top, parameter_integral, pullback,
                     sample_points)
from .invariants import euler_form, polarized_pfaffian
from .zoo import BundleModel, Quadrature, curvature_from_connection, projection

TWO_PI = 2.0 * math.pi


def point_model() -> BundleModel:
    """Trivial flat oriented plane bundle over a point."""
    chart = Chart(0, (), frozenset(), (), 0.0, ())
    zero = FormMatrix.zeros(2, 2, 0)
    return BundleModel("point", chart, 2, "real",
                       FormMatrixField(chart, (2, 2), lambda x: zero, 2),
                       FormMatrixField(chart, (2, 2), lambda x: zero, 1),
                       quadrature=Quadrature("chart", ()))


def _frame_matrix(psi):
    s, c = np.sin(psi), np.cos(psi)
    return [[s, -c], [c, s]]


def _scalar_conj(g, W: FormMatrix):
    """``g W g^T`` for a 2x2 rotation ``g`` with array entries."""
    out = []
    for i in range(2):
        row = []
        for j in range(2):
            acc = None
            for p in range(2):
                for q in range(2):
                    t = W[p, q].scale(g[i][p] * g[j][q])
                    acc = t if acc is None else acc + t
            row.append(acc)
        out.append(row)
    return FormMatrix(out)


@dataclass
class SphereBundle:
    """Unit-circle bundle ``p: S(E) -> M`` of a rank-2 model, in coordinates."""

    model: BundleModel
    base: Chart
    total: Chart
    projection: SmoothMap
    step: float = 1e-4

    @property
    def psi_axis(self) -> int:
        return self.total.dim - 1

    def frame(self, x) -> np.ndarray:
        """Adapted frame vectors in the base frame: array ``(2, 2, *batch)``, row i = e_{i+1}."""
        x = np.asarray(x, dtype=float)
        g = _frame_matrix(x[self.psi_axis])
        return np.array([[np.broadcast_to(v, x.shape[1:]) for v in row] for row in g])

    def pulled_connection(self) -> FormMatrixField:
        if self.model.connection is None:
            raise UsageError("sphere bundle needs a model with a connection")
        return pullback(self.model.connection, self.projection)

    def pulled_curvature(self) -> FormMatrixField:
        return pullback(self.model.curvature, self.projection)


def sphere_bundle(m: BundleModel, fiber_nodes: int = 64, step: float = 1e-4) -> SphereBundle:
    if m.kind != "real" or m.rank != 2:
        raise UnsupportedError(f"sphere bundles are implemented for oriented real rank 2, "
                               f"got {m.kind} rank {m.rank}")
    if m.connection is None:
        raise UsageError("sphere bundle needs a model with a connection")
    fiber = Chart(1, ((0.0, TWO_PI),), frozenset({0}), (fiber_nodes,), 0.0, ("psi",))
    total = m.base.product(fiber)
    p = projection(total, m.base.dim, 0, m.base)
    return SphereBundle(m, m.base, total, p, step)


def modified_connection(sb: SphereBundle):
    """Connection of ``p*D`` in the adapted frame, and the modified connection.

    Returns ``(omega_adapted, omega_tilde)``.  ``omega_adapted = dg g^-1 +
    g p*omega g^-1`` with the analytic ``dg g^-1 = [[0, 1], [-1, 0]] dpsi``;
    the modified connection kills ``e_2`` and keeps ``p*omega`` on the
    complement, which for rank 2 leaves nothing: ``omega_tilde = 0``.
    """
    pw = sb.pulled_connection()
    dim = sb.total.dim
    a = sb.psi_axis

    def adapted(x):
        W = pw.evaluate(x)
        g = _frame_matrix(x[a])
        rot = _scalar_conj(g, W)
        dpsi = Form(dim, {(a + 1,): 1.0}, "real", _checked=True)
        extra = FormMatrix([[Form.zero(dim), dpsi], [-dpsi, Form.zero(dim)]])
        return rot + extra

    zero = FormMatrix.zeros(2, 2, dim)
    return (FormMatrixField(sb.total, (2, 2), adapted, 1),
            FormMatrixField(sb.total, (2, 2), lambda x: zero, 1))


def interpolated_curvature(sb: SphereBundle, t: float) -> FormMatrixField:
    """Curvature of ``omega_t = omega_adapted + t (omega_tilde - omega_adapted)``."""
    if not 0.0 <= t <= 1.0:
        raise UsageError("t must lie in [0, 1]")
    w_a, w_t = modified_connection(sb)

    def fn(x):
        A = w_a.evaluate(x)
        return A + (w_t.evaluate(x) - A).scale(t)

    return curvature_from_connection(FormMatrixField(sb.total, (2, 2), fn, 1), sb.step)


@dataclass
class TransgressionResult:
    eta: FormField
    residual: float
    fiber_integrals: list
    fiber_spread: float
    fiber_mean: float
    parameters: dict = field(default_factory=dict)


def transgression_eta_field(sb: SphereBundle, n_quad: int = 2) -> FormField:
    """``eta = (-1/2pi)^n int_0^1 Pf(omega_tilde - omega_adapted, Omega_t, ...) dt`` with n = 1."""
    if n_quad < 1:
        raise UsageError("n_quad must be >= 1")
    w_a, w_t = modified_connection(sb)
    n = sb.model.rank // 2

    def diff(x):
        return w_t.evaluate(x) - w_a.evaluate(x)

    def family(t):
        def fn(x):
            slots = [diff(x)] + [interpolated_curvature(sb, t).evaluate(x)] * (n - 1)
            return polarized_pfaffian(*slots)
        return FormField(sb.total, 2 * n - 1, fn)

    integral = parameter_integral(family, n_quad)
    return integral.scale((-1.0 / TWO_PI) ** n)


def fiber_inclusion(sb: SphereBundle, b) -> SmoothMap:
    """``psi -> (b, psi)`` for a base point ``b``."""
    b = np.asarray(b, dtype=float).reshape(-1)
    dim = sb.total.dim
    fiber = Chart(1, ((0.0, TWO_PI),), frozenset({0}), sb.total.grid[-1:], 0.0, ("psi",))

    def value(x):
        out = np.empty((dim,) + x.shape[1:])
        for i, bi in enumerate(b):
            out[i] = bi
        out[-1] = x[0]
        return out

    def jac(x):
        J = np.zeros((dim, 1) + x.shape[1:])
        J[-1, 0] = 1.0
        return J

    return SmoothMap(fiber, sb.total, value, jac)


def fiber_integral(form: FormField, sb: SphereBundle, b, nodes: int = 64) -> float:
    f = pullback(form, fiber_inclusion(sb, b))
    return float(integrate_top(f, QuadratureRule((nodes,), ("trapezoid",))))


def euler_residual(sb: SphereBundle, eta: FormField, grid, step=None) -> float:
    """Max coefficient of ``p*e(Omega) + d eta`` on a midpoint grid of the total chart."""
    step = sb.step if step is None else step
    e_base = FormField(sb.base, 2, lambda x: euler_form(sb.model.curvature.evaluate(x)))
    pe = pullback(e_base, sb.projection)
    deta = exterior_derivative(eta, step)
    pts = sample_points(sb.total, grid)
    worst = 0.0
    chunk = 1 << 15
    for start in range(0, pts.shape[1], chunk):
        x = pts[:, start:start + chunk]
        worst = max(worst, (pe.evaluate(x) + deta.evaluate(x)).max_abs())
    return worst


def transgression_eta(m: BundleModel, n_quad: int = 2, grid=(64, 64, 64), step: float = 1e-4,
                      base_samples=(4, 4), fiber_nodes: int = 64) -> TransgressionResult:
    """Build eta on S(E), measure ``p*e + d eta`` and the fiber integrals of eta."""
    sb = sphere_bundle(m, fiber_nodes, step)
    eta = transgression_eta_field(sb, n_quad)
    if len(grid) != sb.total.dim:
        raise UsageError(f"grid needs {sb.total.dim} counts")
    res = euler_residual(sb, eta, grid, step)
    if sb.base.dim:
        bpts = sample_points(sb.base, base_samples)
        bases = [bpts[:, i] for i in range(bpts.shape[1])]
    else:
        bases = [np.zeros(0)]
    ints = [fiber_integral(eta, sb, b, fiber_nodes) for b in bases]
    mean = float(np.mean(ints))
    spread = float(max(ints) - min(ints))
    params = {"model": m.name, "n_quad": n_quad, "grid": list(grid), "step": step,
              "base_samples": list(base_samples), "fiber_nodes": fiber_nodes}
    return TransgressionResult(eta, res, ints, spread, mean, params)


# ---------------------------------------------------------------------------
# Gauss-Bonnet through the transgression form

def section_lift(sb: SphereBundle, v: Callable, fd_step: float = 1e-6) -> SmoothMap:
    """``x -> (x, psi(x))`` where ``psi`` is the angle of the vector field ``v`` in the base frame.

    ``v(x)`` returns frame components of shape ``(2, *batch)``; the angle
    derivative ``(v1 dv2 - v2 dv1) / |v|^2`` avoids branch cuts.
    """
    base = sb.base

    def value(x):
        comp = np.asarray(v(x))
        return np.concatenate([x, np.arctan2(comp[1], comp[0])[None]], axis=0)

    def jac(x):
        comp = np.asarray(v(x))
        n2 = comp[0] ** 2 + comp[1] ** 2
        J = np.zeros((base.dim + 1, base.dim) + x.shape[1:])
        for a in range(base.dim):
            J[a, a] = 1.0
            xp, xm = x.copy(), x.copy()
            xp[a] += fd_step
            xm[a] -= fd_step
            dv = (np.asarray(v(xp)) - np.asarray(v(xm))) / (2 * fd_step)
            J[base.dim, a] = (comp[0] * dv[1] - comp[1] * dv[0]) / n2
        return J

    return SmoothMap(base, sb.total, value, jac)


def boundary_integral(eta: FormField, lift: SmoothMap, curves, nodes: int = 256) -> float:
    """Sum of ``int sigma* eta`` over closed curves (SmoothMaps from a periodic 1-chart)."""
    total = 0.0
    for c in curves:
        f = pullback(pullback(eta, lift), c)
        total += float(integrate_top(f, QuadratureRule((nodes,), ("trapezoid",))))
    return total


def s2_cap_circles(eps: float, base: Chart):
    """Boundaries of the polar caps ``theta < eps`` and ``theta > pi - eps``, each
    oriented as the boundary of its cap."""
    circle = Chart(1, ((0.0, TWO_PI),), frozenset({0}), (256,), 0.0, ("t",))

    def make(theta0, sign):
        def value(x):
            return np.stack([np.full_like(x[0], theta0), np.mod(sign * x[0], TWO_PI)])

        def jac(x):
            J = np.zeros((2, 1) + x.shape[1:])
            J[1, 0] = sign
            return J
        return SmoothMap(circle, base, value, jac)

    return [make(eps, 1.0), make(math.pi - eps, -1.0)]


def gauss_bonnet_via_transgression(m: BundleModel, v: Callable, eps: float = 1e-3,
                                   nodes: int = 256) -> dict:
    """``int_M e`` as the sum over small cap boundaries of ``sigma* eta``.

    Valid for the sphere model with a field whose zeros sit at the poles.
    """
    if not m.name.startswith("s2"):
        raise UnsupportedError("cap boundaries are provided for the sphere model only")
    if not m.base.bounds[0][0] <= eps <= m.base.bounds[0][1]:
        m_base = m.base.with_bounds(((eps / 2, math.pi - eps / 2), m.base.bounds[1]))
        m = BundleModel(m.name, m_base, m.rank, m.kind, m.curvature.on(m_base),
                        m.connection.on(m_base), m.orientation, m.quadrature, m.params)
    sb = sphere_bundle(m)
    eta = transgression_eta_field(sb)
    lift = section_lift(sb, v)
    value = boundary_integral(eta, lift, s2_cap_circles(eps, sb.base), nodes)
    return {"value": value, "eps": eps, "nodes": nodes, "limit_model": 2 * math.cos(eps)}


# ---------------------------------------------------------------------------
# Thom form

def _rho_library(kind: str):
    if kind == "smoothstep":
        def rho(r):
            t = np.clip(r - 1.0, 0.0, 1.0)
            return -1.0 + t * t * (3.0 - 2.0 * t)

        def drho(r):
            t = np.clip(r - 1.0, 0.0, 1.0)
            return 6.0 * t * (1.0 - t)
    elif kind == "quintic":
        def rho(r):
            t = np.clip(r - 1.0, 0.0, 1.0)
            return -1.0 + t ** 3 * (10.0 - 15.0 * t + 6.0 * t * t)

        def drho(r):
            t = np.clip(r - 1.0, 0.0, 1.0)
            return 30.0 * t * t * (1.0 - t) ** 2
    elif kind == "smooth":
        def _f(t):
            return np.where(t > 0, np.exp(-1.0 / np.where(t > 0, t, 1.0)), 0.0)

        def _df(t):
            tt = np.where(t > 0, t, 1.0)
            return np.where(t > 0, np.exp(-1.0 / tt) / (tt * tt), 0.0)

        def rho(r):
            t = np.clip(r - 1.0, 0.0, 1.0)
            a, b = _f(t), _f(1.0 - t)
            return -1.0 + a / (a + b)

        def drho(r):
            t = np.clip(r - 1.0, 0.0, 1.0)
            a, b = _f(t), _f(1.0 - t)
            da, db = _df(t), -_df(1.0 - t)
            inside = (r > 1.0) & (r < 2.0)
            return np.where(inside, (da * (a + b) - a * (da + db)) / (a + b) ** 2, 0.0)
    else:
        raise UsageError(f"unknown bump profile {kind!r}; use smoothstep, quintic or smooth")
    return rho, drho


def validate_rho(rho: Callable, drho: Callable, samples: int = 401) -> None:
    r = np.linspace(0.0, 3.0, samples)
    v = np.asarray(rho(r), dtype=float)
    if np.max(np.abs(v[r <= 1.0] + 1.0)) > 1e-12:
        raise UsageError("bump profile must equal -1 on [0, 1]")
    if np.max(np.abs(v[r >= 2.0])) > 1e-12:
        raise UsageError("bump profile must vanish for r >= 2")
    mid = v[(r >= 1.0) & (r <= 2.0)]
    if np.any(np.diff(mid) < -1e-12):
        raise UsageError("bump profile must be monotone on [1, 2]")
    dv = np.asarray(drho(r), dtype=float)
    if np.any(np.abs(dv[(r < 1.0) | (r > 2.0)]) > 1e-12):
        raise UsageError("bump derivative must vanish off [1, 2]")


@dataclass
class ThomResult:
    phi: FormField
    fiber_integral: float
    support_leak: float
    closed_residual: float
    parameters: dict


def thom_form(m: BundleModel | None = None, rho: str | tuple = "smoothstep",
              r_max: float = 2.5, step: float = 1e-4, nodes=(500, 64),
              closed_grid=None) -> ThomResult:
    """``Phi = d(rho(|e|) tau* eta) = drho ^ tau* eta + rho tau*(d eta)`` on the disk bundle.

    The disk-bundle chart is ``base x (r, psi)``; ``tau`` forgets ``r``.
    Reports the fiber integral over the disk of radius ``r_max`` at a base
    point, the largest fiber coefficient outside ``1 <= r <= 2`` and the
    largest coefficient of ``d Phi`` on a sample grid.
    """
    m = m or point_model()
    if isinstance(rho, str):
        label = rho
        rho_f, drho_f = _rho_library(rho)
    else:
        label = "custom"
        rho_f, drho_f = rho
    validate_rho(rho_f, drho_f)
    sb = sphere_bundle(m, nodes[1], step)
    eta = transgression_eta_field(sb)
    deta = exterior_derivative(eta, step)
    k = sb.base.dim
    radial = Chart(1, ((0.0, r_max),), frozenset(), (nodes[0],), 0.05, ("r",))
    disk = sb.base.product(radial).product(
        Chart(1, ((0.0, TWO_PI),), frozenset({0}), (nodes[1],), 0.0, ("psi",)))
    dim = disk.dim

    def tau_value(x):
        return np.concatenate([x[:k], x[k + 1:k + 2]], axis=0)

    def tau_jac(x):
        J = np.zeros((k + 1, dim) + x.shape[1:])
        for i in range(k):
            J[i, i] = 1.0
        J[k, k + 1] = 1.0
        return J

    tau = SmoothMap(disk, sb.total, tau_value, tau_jac)
    t_eta = pullback(eta, tau)
    t_deta = pullback(deta, tau)

    def phi_fn(x):
        r = x[k]
        dr = Form(dim, {(k + 1,): drho_f(r)}, "real", _checked=True)
        return dr.wedge(t_eta.evaluate(x)) + t_deta.evaluate(x).scale(rho_f(r))

    phi = FormField(disk, 2, phi_fn)

    # fiber integral at the first base sample point
    b = sample_points(sb.base, (1,) * k)[:, 0] if k else np.zeros(0)
    fib = Chart(2, ((0.0, r_max), (0.0, TWO_PI)), frozenset({1}), tuple(nodes), 0.0, ("r", "psi"))

    def inc_value(x):
        out = np.empty((dim,) + x.shape[1:])
        for i in range(k):
            out[i] = b[i]
        out[k] = x[0]
        out[k + 1] = x[1]
        return out

    def inc_jac(x):
        J = np.zeros((dim, 2) + x.shape[1:])
        J[k, 0] = 1.0
        J[k + 1, 1] = 1.0
        return J

    inc = SmoothMap(fib, disk, inc_value, inc_jac)
    fphi = pullback(phi, inc)
    total = float(integrate_top(fphi, QuadratureRule(tuple(nodes), ("midpoint", "trapezoid"))))

    pts = sample_points(fib, (60, 8))
    coeff = fphi.evaluate(pts).terms.get((1, 2), 0.0)
    coeff = np.broadcast_to(coeff, pts.shape[1:])
    outside = (pts[0] < 1.0) | (pts[0] > 2.0)
    leak = float(np.max(np.abs(coeff[outside]))) if np.any(outside) else 0.0

    if closed_grid is None:
        closed_grid = (5,) * dim
    if dim >= 3:
        inner = disk.with_bounds(tuple(
            (lo + 0.1 * (hi - lo), hi - 0.1 * (hi - lo)) if a not in disk.periodic else (lo, hi)
            for a, (lo, hi) in enumerate(disk.bounds)))
        dphi = exterior_derivative(phi, step)
        closed = dphi.evaluate(sample_points(inner, closed_grid)).max_abs()
    else:
        closed = 0.0
    params = {"model": m.name, "rho": label, "r_max": r_max, "step": step,
              "nodes": list(nodes), "closed_grid": list(closed_grid)}
    return ThomResult(phi, total, leak, closed, params)


__all__ = [
    "SphereBundle", "TransgressionResult", "ThomResult", "point_model", "sphere_bundle",
    "modified_connection", "interpolated_curvature", "transgression_eta",
    "transgression_eta_field", "euler_residual", "fiber_integral", "fiber_inclusion",
    "section_lift", "boundary_integral", "s2_cap_circles", "gauss_bonnet_via_transgression",
    "thom_form", "validate_rho",
]
