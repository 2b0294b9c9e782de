"""Form-valued functions on coordinate charts.

Fields are vectorised: a coefficient callable receives an array of points
with shape ``(dim, *batch)`` and returns a :class:`Form` (or
:class:`FormMatrix`) whose coefficients are arrays of shape ``batch`` (or
plain scalars, which broadcast).
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from typing import Callable, Sequence

import numpy as np

from .errors import DomainError, UsageError
from .exterior import Form, FormMatrix, merge_indices

DEFAULT_REL_STEP = 1e-4
CHUNK_POINTS = 1 << 16


@dataclass(frozen=True)
class Chart:
    """A box in R^dim, some axes periodic, with an evaluation margin."""

    dim: int
    bounds: tuple
    periodic: frozenset = frozenset()
    grid: tuple | None = None
    margin: float = 0.0
    names: tuple = ()

    def __post_init__(self):
        bounds = tuple((float(lo), float(hi)) for lo, hi in self.bounds)
        object.__setattr__(self, "bounds", bounds)
        object.__setattr__(self, "periodic", frozenset(self.periodic))
        if len(bounds) != self.dim:
            raise UsageError(f"chart of dim {self.dim} given {len(bounds)} bounds")
        if any(hi <= lo for lo, hi in bounds):
            raise UsageError("chart bounds must be nonempty intervals")
        if any(a < 0 or a >= self.dim for a in self.periodic):
            raise UsageError("periodic axis out of range")
        grid = self.grid if self.grid is not None else (3,) * self.dim
        grid = tuple(int(g) for g in grid)
        if len(grid) != self.dim or any(g < 3 for g in grid):
            raise UsageError("grid counts must be >= 3 per axis")
        object.__setattr__(self, "grid", grid)
        if not self.names:
            object.__setattr__(self, "names", tuple(f"x{i + 1}" for i in range(self.dim)))

    def extent(self, axis: int) -> float:
        lo, hi = self.bounds[axis]
        return hi - lo

    def with_grid(self, grid) -> "Chart":
        return Chart(self.dim, self.bounds, self.periodic, tuple(grid), self.margin, self.names)

    def with_bounds(self, bounds) -> "Chart":
        return Chart(self.dim, bounds, self.periodic, self.grid, self.margin, self.names)

    def product(self, other: "Chart") -> "Chart":
        shift = self.dim
        return Chart(self.dim + other.dim, self.bounds + other.bounds,
                     self.periodic | {a + shift for a in other.periodic},
                     self.grid + other.grid, max(self.margin, other.margin),
                     self.names + other.names)

    def prepare(self, x: np.ndarray) -> np.ndarray:
        """Wrap periodic axes and reject points outside the padded box."""
        x = np.asarray(x, dtype=float)
        if x.shape[0] != self.dim:
            raise UsageError(f"points have leading size {x.shape[0]}, chart dim {self.dim}")
        out = x.copy()
        for a, (lo, hi) in enumerate(self.bounds):
            if a in self.periodic:
                out[a] = lo + np.mod(out[a] - lo, hi - lo)
            else:
                tol = self.margin + 1e-12 * max(1.0, abs(lo), abs(hi))
                if np.any(out[a] < lo - tol) or np.any(out[a] > hi + tol):
                    raise DomainError(f"axis {a} ({self.names[a]}) evaluated outside "
                                      f"[{lo}, {hi}] with margin {self.margin}")
        return out


def _broadcast(c, shape):
    if isinstance(c, np.ndarray):
        return np.broadcast_to(c, shape)
    return np.full(shape, c)


class FormField:
    """A homogeneous form of fixed degree depending on chart coordinates."""

    def __init__(self, chart: Chart, degree: int, fn: Callable[[np.ndarray], Form]):
        if degree < 0:
            raise UsageError("degree must be >= 0")
        self.chart = chart
        self.degree = degree
        self.fn = fn

    def __call__(self, x) -> Form:
        return self.evaluate(x)

    def evaluate(self, x) -> Form:
        x = self.chart.prepare(x)
        F = self.fn(x)
        if not isinstance(F, Form) or F.dim != self.chart.dim:
            raise UsageError("field callable must return a Form of the chart dimension")
        if any(len(k) != self.degree for k in F.terms):
            raise UsageError(f"field declared degree {self.degree}, emitted {sorted(F.degrees())}")
        return F

    def wedge(self, other: "FormField") -> "FormField":
        if other.chart.dim != self.chart.dim:
            raise UsageError("wedge of fields on different charts")
        return FormField(self.chart, self.degree + other.degree,
                         lambda x: self.fn(x).wedge(other.fn(x)))

    __xor__ = wedge

    def __add__(self, other: "FormField") -> "FormField":
        if other.degree != self.degree:
            raise UsageError("adding fields of different degree")
        return FormField(self.chart, self.degree, lambda x: self.fn(x) + other.fn(x))

    def scale(self, c) -> "FormField":
        return FormField(self.chart, self.degree, lambda x: self.fn(x).scale(c))

    def __neg__(self):
        return self.scale(-1.0)

    def __sub__(self, other):
        return self + (-other)

    def on(self, chart: Chart) -> "FormField":
        """Same coefficients, different chart metadata (bounds/grid)."""
        if chart.dim != self.chart.dim:
            raise UsageError("chart dimension mismatch")
        return FormField(chart, self.degree, self.fn)


class FormMatrixField:
    """A matrix of forms depending on chart coordinates (connections, curvatures)."""

    def __init__(self, chart: Chart, shape: tuple, fn: Callable[[np.ndarray], FormMatrix],
                 degree: int | None = None):
        self.chart = chart
        self.shape = tuple(shape)
        self.fn = fn
        self.degree = degree

    def __call__(self, x) -> FormMatrix:
        return self.evaluate(x)

    def evaluate(self, x) -> FormMatrix:
        x = self.chart.prepare(x)
        M = self.fn(x)
        if not isinstance(M, FormMatrix) or M.shape != self.shape:
            raise UsageError(f"matrix field must return a {self.shape} FormMatrix")
        if self.degree is not None:
            for row in M.entries:
                for e in row:
                    if any(len(k) != self.degree for k in e.terms):
                        raise UsageError(f"matrix field entries must have degree {self.degree}")
        return M

    def entry(self, i: int, j: int) -> FormField:
        deg = self.degree if self.degree is not None else 0
        return FormField(self.chart, deg, lambda x: self.fn(x)[i, j])

    def map(self, fn, shape=None, degree=None) -> "FormMatrixField":
        return FormMatrixField(self.chart, shape or self.shape,
                               lambda x: fn(self.fn(x)), degree)

    def on(self, chart: Chart) -> "FormMatrixField":
        return FormMatrixField(chart, self.shape, self.fn, self.degree)


# ---------------------------------------------------------------------------
# exterior derivative

def _left_dx(axis: int, F):
    """``dx_{axis+1} ^ F`` for a Form or FormMatrix."""
    if isinstance(F, FormMatrix):
        return F.map(lambda e: _left_dx(axis, e))
    out = {}
    for k, c in F.terms.items():
        merged = merge_indices((axis + 1,), k)
        if merged is None:
            continue
        sign, key = merged
        out[key] = c if sign > 0 else -c
    return Form(F.dim, out, F.kind, prune=False, _checked=True)


def _lin(a, b, ca, cb):
    """``ca*a + cb*b`` for Forms or FormMatrices, without pruning loss."""
    if isinstance(a, FormMatrix):
        return FormMatrix([[_lin(x, y, ca, cb) for x, y in zip(ra, rb)]
                           for ra, rb in zip(a.entries, b.entries)])
    kind = "complex" if "complex" in (a.kind, b.kind) else "real"
    out = {}
    for k in set(a.terms) | set(b.terms):
        out[k] = ca * a.terms.get(k, 0.0) + cb * b.terms.get(k, 0.0)
    return Form(a.dim, out, kind, _checked=True)


def _steps(chart: Chart, step) -> list:
    if step is None:
        return [DEFAULT_REL_STEP * chart.extent(a) for a in range(chart.dim)]
    if np.isscalar(step):
        if step <= 0:
            raise UsageError("finite-difference step must be > 0")
        return [float(step)] * chart.dim
    steps = [float(s) for s in step]
    if len(steps) != chart.dim or any(s <= 0 for s in steps):
        raise UsageError("need one positive step per axis")
    return steps


def _central(evaluate, x, axis, h):
    xp = x.copy()
    xm = x.copy()
    xp[axis] += h
    xm[axis] -= h
    return _lin(evaluate(xp), evaluate(xm), 0.5 / h, -0.5 / h)


def _d_at(evaluate, chart: Chart, x, steps, richardson: bool):
    total = None
    for a in range(chart.dim):
        h = steps[a]
        D = _central(evaluate, x, a, h)
        if richardson:
            D2 = _central(evaluate, x, a, h / 2)
            D = _lin(D2, D, 4.0 / 3.0, -1.0 / 3.0)
        term = _left_dx(a, D)
        total = term if total is None else _lin(total, term, 1.0, 1.0)
    return total


def exterior_derivative(f, step=None, richardson: bool = False):
    """Central-difference exterior derivative of a FormField or FormMatrixField.

    ``step`` is absolute (scalar or per axis); by default ``1e-4`` times each
    axis extent.  Periodic axes wrap; other axes rely on the chart margin.
    With ``richardson`` the steps ``h`` and ``h/2`` are combined.
    """
    chart = f.chart
    steps = _steps(chart, step)
    if isinstance(f, FormMatrixField):
        deg = None if f.degree is None else f.degree + 1
        if deg is not None and deg > chart.dim:
            return FormMatrixField(chart, f.shape, lambda x: FormMatrix.zeros(
                *f.shape, chart.dim, f.evaluate(x).kind), deg)
        return FormMatrixField(chart, f.shape,
                               lambda x: _d_at(f.evaluate, chart, x, steps, richardson), deg)
    if not isinstance(f, FormField):
        raise UsageError("exterior_derivative needs a FormField or FormMatrixField")
    if f.degree >= chart.dim:
        return FormField(chart, f.degree + 1, lambda x: Form.zero(chart.dim, f.evaluate(x).kind))
    return FormField(chart, f.degree + 1,
                     lambda x: _d_at(f.evaluate, chart, x, steps, richardson))


# ---------------------------------------------------------------------------
# smooth maps and pullback

class SmoothMap:
    """A map between charts with an analytic or finite-difference Jacobian.

    ``value(x)`` maps ``(source.dim, *batch)`` to ``(target.dim, *batch)``;
    ``jacobian(x)`` returns ``(target.dim, source.dim, *batch)``.
    """

    def __init__(self, source: Chart, target: Chart, value: Callable,
                 jacobian: Callable | None = None, fd_step: float = 1e-6):
        self.source = source
        self.target = target
        self.value = value
        self._jacobian = jacobian
        self.fd_step = fd_step

    def __call__(self, x):
        return np.asarray(self.value(np.asarray(x, dtype=float)), dtype=float)

    def jacobian(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self._jacobian is not None:
            J = np.asarray(self._jacobian(x), dtype=float)
        else:
            cols = []
            for a in range(self.source.dim):
                h = self.fd_step * max(1.0, self.source.extent(a))
                xp = x.copy()
                xm = x.copy()
                xp[a] += h
                xm[a] -= h
                cols.append((self(xp) - self(xm)) / (2 * h))
            J = np.stack(cols, axis=1)
        expect = (self.target.dim, self.source.dim)
        if J.shape[:2] != expect:
            raise UsageError(f"jacobian shape {J.shape[:2]} != {expect}")
        return J

    def compose(self, inner: "SmoothMap") -> "SmoothMap":
        """``self o inner``."""
        if inner.target.dim != self.source.dim:
            raise UsageError("cannot compose: dimension mismatch")

        def value(x):
            return self(inner(x))

        def jac(x):
            Jo = self.jacobian(inner(x))
            Ji = inner.jacobian(x)
            return np.einsum("ik...,kj...->ij...", Jo, Ji)

        return SmoothMap(inner.source, self.target, value, jac)


def identity_map(chart: Chart) -> SmoothMap:
    def jac(x):
        eye = np.eye(chart.dim).reshape((chart.dim, chart.dim) + (1,) * (x.ndim - 1))
        return np.broadcast_to(eye, (chart.dim, chart.dim) + x.shape[1:])
    return SmoothMap(chart, chart, lambda x: x, jac)


def _minor(J, rows, cols):
    k = len(rows)
    if k == 1:
        return J[rows[0], cols[0]]
    if k == 2:
        return J[rows[0], cols[0]] * J[rows[1], cols[1]] - J[rows[0], cols[1]] * J[rows[1], cols[0]]
    sub = J[np.ix_(rows, cols)]
    sub = np.moveaxis(sub, (0, 1), (-2, -1))
    return np.linalg.det(sub)


def pullback_form(F, J: np.ndarray, source_dim: int):
    """Pull back a pointwise Form (or FormMatrix) through Jacobian arrays ``J``."""
    if isinstance(F, FormMatrix):
        return F.map(lambda e: pullback_form(e, J, source_dim))
    out: dict = {}
    for idx, c in F.terms.items():
        k = len(idx)
        if k == 0:
            out[()] = out.get((), 0.0) + c
            continue
        if k > source_dim:
            continue
        rows = [i - 1 for i in idx]
        for cols in combinations(range(source_dim), k):
            m = _minor(J, rows, list(cols))
            key = tuple(j + 1 for j in cols)
            val = c * m
            out[key] = out[key] + val if key in out else val
    return Form(source_dim, out, F.kind, _checked=True)


def pullback(f, phi: SmoothMap):
    """Pull back a FormField / FormMatrixField along ``phi``."""
    if f.chart.dim != phi.target.dim:
        raise UsageError("pullback: field chart does not match map target")
    src = phi.source

    def fn(x):
        y = phi(x)
        J = phi.jacobian(x)
        return pullback_form(f.evaluate(y), J, src.dim)

    if isinstance(f, FormMatrixField):
        return FormMatrixField(src, f.shape, fn, f.degree)
    if f.degree > src.dim:
        return FormField(src, f.degree, lambda x: Form.zero(src.dim))
    return FormField(src, f.degree, fn)


# ---------------------------------------------------------------------------
# quadrature

@dataclass(frozen=True)
class QuadratureRule:
    """Per-axis tensor-product rule.

    ``kinds`` entries: ``"midpoint"``, ``"trapezoid"`` (periodic: uniform
    nodes starting at the lower bound) or ``"gauss"`` (composite
    Gauss-Legendre, ``gauss_order`` nodes per panel, ``nodes`` panels).
    ``None`` means: trapezoid on periodic axes, midpoint elsewhere.
    """

    nodes: tuple
    kinds: tuple | None = None
    gauss_order: int = 4

    def describe(self) -> dict:
        return {"nodes": list(self.nodes), "kinds": list(self.kinds) if self.kinds else None,
                "gauss_order": self.gauss_order}


def axis_rule(lo: float, hi: float, n: int, kind: str, gauss_order: int = 4):
    if n < 1:
        raise UsageError("quadrature needs >= 1 node per axis")
    if kind == "midpoint":
        h = (hi - lo) / n
        return lo + h * (np.arange(n) + 0.5), np.full(n, h)
    if kind == "trapezoid":
        h = (hi - lo) / n
        return lo + h * np.arange(n), np.full(n, h)
    if kind == "gauss":
        g, w = np.polynomial.legendre.leggauss(gauss_order)
        edges = np.linspace(lo, hi, n + 1)
        half = 0.5 * np.diff(edges)
        mid = 0.5 * (edges[1:] + edges[:-1])
        nodes = (mid[:, None] + half[:, None] * g[None, :]).ravel()
        weights = (half[:, None] * w[None, :]).ravel()
        return nodes, weights
    raise UsageError(f"unknown quadrature kind {kind!r}")


def default_rule(chart: Chart, nodes=None) -> QuadratureRule:
    nodes = tuple(nodes) if nodes is not None else chart.grid
    kinds = tuple("trapezoid" if a in chart.periodic else "midpoint" for a in range(chart.dim))
    return QuadratureRule(nodes, kinds)


def _rule_axes(chart: Chart, rule: QuadratureRule):
    if len(rule.nodes) != chart.dim:
        raise UsageError("quadrature rule dimension does not match chart")
    kinds = rule.kinds or default_rule(chart).kinds
    return [axis_rule(lo, hi, n, kind, rule.gauss_order)
            for (lo, hi), n, kind in zip(chart.bounds, rule.nodes, kinds)]


def integrate_array(chart: Chart, rule: QuadratureRule, integrand: Callable) -> complex | float:
    """Tensor-product quadrature of a vectorised scalar function of the coordinates.

    Chunks run over the leading axis in a fixed order, so the summation
    order (and the result) is deterministic.
    """
    axes = _rule_axes(chart, rule)
    rest = axes[1:]
    rest_size = int(np.prod([len(n) for n, _ in rest])) if rest else 1
    if rest:
        mesh = np.meshgrid(*[n for n, _ in rest], indexing="ij")
        wmesh = np.ones_like(mesh[0])
        for grid_w in np.meshgrid(*[w for _, w in rest], indexing="ij"):
            wmesh = wmesh * grid_w
        rest_pts = np.stack([m.ravel() for m in mesh])
        rest_w = wmesh.ravel()
    else:
        rest_pts = np.zeros((0, 1))
        rest_w = np.ones(1)
    n0, w0 = axes[0]
    per_chunk = max(1, CHUNK_POINTS // max(rest_size, 1))
    total = 0.0
    for start in range(0, len(n0), per_chunk):
        block = n0[start:start + per_chunk]
        bw = w0[start:start + per_chunk]
        x0 = np.repeat(block, rest_size)
        pts = np.vstack([x0[None, :], np.tile(rest_pts, (1, len(block)))])
        weights = np.repeat(bw, rest_size) * np.tile(rest_w, len(block))
        vals = integrand(pts)
        total = total + np.sum(np.asarray(vals) * weights)
    return total


def integrate_top(f: FormField, rule: QuadratureRule | None = None, weight: Callable | None = None):
    """Integrate a top-degree field over its chart (axis order = orientation)."""
    if not isinstance(f, FormField):
        raise UsageError("integrate_top needs a FormField")
    chart = f.chart
    if f.degree != chart.dim:
        raise UsageError(f"integrate_top needs degree {chart.dim}, field has {f.degree}")
    rule = rule or default_rule(chart)
    top = tuple(range(1, chart.dim + 1))

    def integrand(pts):
        F = f.evaluate(pts)
        c = F.terms.get(top, 0.0)
        c = _broadcast(c, pts.shape[1:])
        if weight is not None:
            c = c * weight(pts)
        return c

    total = integrate_array(chart, rule, integrand)
    if np.iscomplexobj(total):
        return complex(total)
    return float(total)


def parameter_integral(family: Callable[[float], FormField], nodes: int) -> FormField:
    """``int_0^1 family(t) dt`` by Gauss-Legendre quadrature, coefficientwise."""
    if nodes < 1:
        raise UsageError("parameter_integral needs nodes >= 1")
    g, w = np.polynomial.legendre.leggauss(nodes)
    ts = 0.5 * (g + 1.0)
    ws = 0.5 * w
    members = [family(float(t)) for t in ts]
    chart = members[0].chart
    degree = members[0].degree

    def fn(x):
        acc = None
        for wk, mk in zip(ws, members):
            F = mk.evaluate(x)
            acc = F.scale(float(wk)) if acc is None else _lin(acc, F, 1.0, float(wk))
        return acc

    return FormField(chart, degree, fn)


def constant_field(form: Form, chart: Chart) -> FormField:
    if form.dim != chart.dim:
        raise UsageError("constant form dimension does not match chart")
    return FormField(chart, form.degree, lambda x: form)


def coordinate_form(chart: Chart, axes: Sequence[int], coeff: Callable | float = 1.0,
                    kind: str = "real") -> FormField:
    """``coeff(x) dx_{a1} ^ ... ^ dx_{ak}`` (0-based axes, any order)."""
    axes = tuple(axes)

    def fn(x):
        c = coeff(x) if callable(coeff) else coeff
        return Form.basis([a + 1 for a in axes], chart.dim, c, kind)

    return FormField(chart, len(axes), fn)


def sample_points(chart: Chart, counts=None) -> np.ndarray:
    """Interior sample grid (cell midpoints) of shape ``(dim, N)``."""
    counts = tuple(counts) if counts is not None else chart.grid
    axes = []
    for a, ((lo, hi), n) in enumerate(zip(chart.bounds, counts)):
        kind = "trapezoid" if a in chart.periodic else "midpoint"
        axes.append(axis_rule(lo, hi, n, kind)[0])
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh])


def max_coefficient(F) -> float:
    if isinstance(F, FormMatrix):
        return F.max_abs()
    return F.max_abs()


__all__ = [
    "Chart", "FormField", "FormMatrixField", "SmoothMap", "QuadratureRule",
    "exterior_derivative", "pullback", "pullback_form", "integrate_top", "integrate_array",
    "parameter_integral", "constant_field", "coordinate_form", "identity_map", "sample_points",
    "default_rule", "axis_rule",
]
