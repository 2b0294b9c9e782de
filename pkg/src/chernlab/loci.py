"""Sections, zeros with local indices, degeneracy loci and intersection counts.

Complex fiber vectors are always realified as ``(re_1, im_1, re_2, im_2, ...)``
before any orientation is computed, so holomorphic nondegenerate zeros get
index +1.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations, product as iproduct
from typing import Callable, Sequence

import numpy as np
from scipy.spatial import cKDTree

from .errors import DegenerateZeroError, UsageError
from .fields import Chart, FormField, SmoothMap, exterior_derivative, pullback, sample_points
from .zoo import BundleModel, Quadrature, class_form, integrate_on_base

DEGENERACY_TAU = 1e-6
NEWTON_TOL = 1e-10
FD_STEP = 1e-6


# ---------------------------------------------------------------------------
# sections

@dataclass
class SectionPatch:
    """A section written in one chart.

    ``value(x)`` maps ``(dim, *batch)`` to fiber components ``(rank, *batch)``;
    ``derivative(x)`` (optional) returns ``(rank, dim, *batch)``.  ``owns(x)``
    selects the region this patch is responsible for, so overlapping patches
    do not double count.
    """

    name: str
    chart: Chart
    value: Callable
    derivative: Callable | None = None
    owns: Callable | None = None


@dataclass
class SectionField:
    name: str
    rank: int
    kind: str
    patches: list
    bundle: BundleModel | None = None
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in ("real", "complex"):
            raise UsageError("section kind must be real or complex")
        if not self.patches:
            raise UsageError("a section needs at least one patch")

    @property
    def real_rank(self) -> int:
        return self.rank * (2 if self.kind == "complex" else 1)

    def patch(self, which=0) -> SectionPatch:
        if isinstance(which, str):
            for p in self.patches:
                if p.name == which:
                    return p
            raise UsageError(f"section {self.name} has no patch {which!r}")
        return self.patches[which]

    def value(self, x, which=0) -> np.ndarray:
        p = self.patch(which)
        x = p.chart.prepare(np.asarray(x, dtype=float))
        v = np.asarray(p.value(x))
        if v.shape[0] != self.rank:
            raise UsageError(f"section value has {v.shape[0]} components, rank {self.rank}")
        return v

    def derivative(self, x, which=0) -> np.ndarray:
        p = self.patch(which)
        x = np.asarray(x, dtype=float)
        if p.derivative is not None:
            D = np.asarray(p.derivative(p.chart.prepare(x)))
        else:
            cols = []
            for a in range(p.chart.dim):
                h = FD_STEP * max(1.0, float(np.max(np.abs(x[a]))))
                xp, xm = x.copy(), x.copy()
                xp[a] += h
                xm[a] -= h
                cols.append((self.value(xp, which) - self.value(xm, which)) / (2 * h))
            D = np.stack(cols, axis=1)
        if D.shape[:2] != (self.rank, p.chart.dim):
            raise UsageError(f"section derivative shape {D.shape[:2]} != {(self.rank, p.chart.dim)}")
        return D

    def real_value(self, x, which=0) -> np.ndarray:
        return realify_vector(self.value(x, which), self.kind)

    def real_derivative(self, x, which=0) -> np.ndarray:
        return realify_vector(self.derivative(x, which), self.kind)


def realify_vector(v: np.ndarray, kind: str) -> np.ndarray:
    """Interleave real and imaginary parts along the leading axis."""
    if kind == "real":
        if np.iscomplexobj(v):
            if np.max(np.abs(v.imag), initial=0.0) > 0:
                raise UsageError("real section produced complex values")
            v = v.real
        return np.asarray(v, dtype=float)
    out = np.empty((2 * v.shape[0],) + v.shape[1:])
    out[0::2] = np.real(v)
    out[1::2] = np.imag(v)
    return out


def pullback_section(s: SectionField, emb: SmoothMap, name: str | None = None,
                     owns: Callable | None = None) -> SectionField:
    """``i* s`` along an embedding into the chart of the section's first patch."""
    base = s.patch(0)
    if emb.target.dim != base.chart.dim:
        raise UsageError("embedding target does not match the section chart")

    def value(x):
        return s.value(emb(x))

    def deriv(x):
        D = s.derivative(emb(x))
        J = emb.jacobian(x)
        return np.einsum("ra...,aj...->rj...", D, J)

    patch = SectionPatch("pullback", emb.source, value, deriv, owns)
    return SectionField(name or f"pullback({s.name})", s.rank, s.kind, [patch], None,
                        dict(s.params))


# ---------------------------------------------------------------------------
# zeros

@dataclass
class ZeroRecord:
    patch: str
    location: tuple
    index: int
    jacobian_det: float
    refine_residual: float
    condition: float
    flagged: bool = False
    reason: str = ""

    def as_dict(self) -> dict:
        return {"patch": self.patch, "location": [float(c) for c in self.location],
                "index": self.index, "jacobian_det": self.jacobian_det,
                "refine_residual": self.refine_residual, "condition": self.condition,
                "flagged": self.flagged, "reason": self.reason}


def _at(x):
    return np.asarray(x, dtype=float).reshape(-1, 1)


def _jacobian_stats(J: np.ndarray):
    sv = np.linalg.svd(J, compute_uv=False)
    det = float(np.linalg.det(J))
    return det, float(sv[-1]), float(sv[0])


def local_index(s: SectionField, z, which=0, tau: float = DEGENERACY_TAU) -> int:
    """Sign of the determinant of the realified fiber Jacobian at a zero."""
    J = s.real_derivative(_at(z), which)[..., 0]
    if J.shape[0] != J.shape[1]:
        raise UsageError("local_index needs real rank equal to the base dimension")
    det, smin, smax = _jacobian_stats(J)
    if smin <= tau * max(1.0, smax):
        raise DegenerateZeroError(f"degenerate zero: smallest singular value {smin:.3e}")
    return 1 if det > 0 else -1


def _grid_axes(chart: Chart, counts):
    axes = []
    for a, ((lo, hi), n) in enumerate(zip(chart.bounds, counts)):
        if a in chart.periodic:
            axes.append(lo + (hi - lo) * np.arange(n) / n)
        else:
            axes.append(np.linspace(lo, hi, n + 1))
    return axes


def _candidate_cells(s: SectionField, which: int, counts) -> np.ndarray:
    """Centers of cells where every realified component changes sign (or nearly vanishes)."""
    chart = s.patch(which).chart
    axes = _grid_axes(chart, counts)
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([m.ravel() for m in mesh])
    shape = mesh[0].shape
    f = s.real_value(pts, which).reshape((-1,) + shape)
    norms = np.sqrt(np.sum(f * f, axis=0))
    scale = float(np.max(norms)) if norms.size else 0.0
    dim = chart.dim
    lo = None
    hi = None
    nsmall = None
    for corner in iproduct((0, 1), repeat=dim):
        g = f
        ng = norms
        for a, c in enumerate(corner):
            if not c:
                continue
            if a in chart.periodic:
                g = np.roll(g, -1, axis=a + 1)
                ng = np.roll(ng, -1, axis=a)
            else:
                g = np.take(g, range(1, g.shape[a + 1]), axis=a + 1)
                ng = np.take(ng, range(1, ng.shape[a]), axis=a)
        sl = tuple(slice(0, n) for n in counts)
        g = g[(slice(None),) + sl]
        ng = ng[sl]
        lo = g if lo is None else np.minimum(lo, g)
        hi = g if hi is None else np.maximum(hi, g)
        nsmall = ng if nsmall is None else np.minimum(nsmall, ng)
    straddle = np.all((lo <= 0) & (hi >= 0), axis=0)
    tiny = nsmall <= 1e-8 * max(scale, 1e-300)
    idx = np.argwhere(straddle | tiny)
    widths = np.array([(hi_ - lo_) / n for (lo_, hi_), n in zip(chart.bounds, counts)])
    starts = np.array([ax[0] for ax in axes])
    return (starts[None, :] + (idx + 0.5) * widths[None, :]).T, widths


def _wrap(chart: Chart, x):
    x = np.array(x, dtype=float)
    for a in chart.periodic:
        lo, hi = chart.bounds[a]
        x[a] = lo + np.mod(x[a] - lo, hi - lo)
    return x


def _inside(chart: Chart, x, pad=0.0) -> bool:
    for a, (lo, hi) in enumerate(chart.bounds):
        if a in chart.periodic:
            continue
        if x[a] < lo - pad or x[a] > hi + pad:
            return False
    return True


def _newton(s: SectionField, which: int, x0, tol: float, max_iter: int):
    chart = s.patch(which).chart
    x = np.array(x0, dtype=float)
    fx = s.real_value(_at(x), which)[:, 0]
    res = float(np.linalg.norm(fx))
    for _ in range(max_iter):
        if res <= tol:
            return x, res, True
        J = s.real_derivative(_at(x), which)[..., 0]
        step = np.linalg.lstsq(J, fx, rcond=None)[0]
        lam = 1.0
        while lam >= 1e-4:
            xn = _wrap(chart, x - lam * step)
            if not _inside(chart, xn, chart.margin):
                return xn, res, False
            fn = s.real_value(_at(xn), which)[:, 0]
            rn = float(np.linalg.norm(fn))
            if rn < res or rn <= tol:
                break
            lam *= 0.5
        else:
            return x, res, False
        x, fx, res = xn, fn, rn
    return x, res, res <= tol


def _periodic_distance(chart: Chart, a, b) -> float:
    d = np.array(a, dtype=float) - np.array(b, dtype=float)
    for ax in chart.periodic:
        lo, hi = chart.bounds[ax]
        per = hi - lo
        d[ax] = (d[ax] + per / 2) % per - per / 2
    return float(np.linalg.norm(d))


def default_grid(dim: int) -> tuple:
    return (128,) * dim if dim <= 2 else (32,) * dim


def _stable_jacobian(s, w, x, r, det) -> bool:
    """True when the Jacobian determinant keeps its sign and rough size on a small ball.

    A zero that merely looks regular after Newton (a near-double root, say) has a
    determinant that collapses or flips within a few grid-cell thousandths.
    """
    dim = len(x)
    for a in range(dim):
        for sgn in (-1.0, 1.0):
            y = np.array(x, dtype=float)
            y[a] += sgn * r
            d = _jacobian_stats(s.real_derivative(_at(y), w)[..., 0])[0]
            if d * det <= 0 or not 0.5 <= d / det <= 2.0:
                return False
    return True


def find_zeros(s: SectionField, grid=None, tol: float = NEWTON_TOL, max_iter: int = 60,
               tau: float = DEGENERACY_TAU):
    """Zeros of a section with real rank = base dimension, over all its patches.

    Coarse sign-change scan, damped Newton refinement, deduplication by cell
    diagonal.  Non-convergent candidates and zeros on a chart edge come back
    flagged instead of being dropped.  With real rank below the base
    dimension the zero set is a positive-dimensional locus and a
    :class:`DegeneracySample` is returned instead.
    """
    dim = s.patch(0).chart.dim
    if s.real_rank < dim:
        return degeneracy_scan([s], 1, grid)
    if s.real_rank > dim:
        raise UsageError("section has more real components than the base dimension")
    records = []
    for w, p in enumerate(s.patches):
        counts = tuple(grid) if grid is not None else default_grid(p.chart.dim)
        if len(counts) != p.chart.dim:
            raise UsageError(f"grid needs {p.chart.dim} counts")
        centers, widths = _candidate_cells(s, w, counts)
        diag = float(np.linalg.norm(widths))
        found = []
        for c in centers.T:
            x, res, ok = _newton(s, w, c, tol, max_iter)
            if ok:
                if not _inside(p.chart, x):
                    continue
                if p.owns is not None and not bool(np.asarray(p.owns(_at(x)))[0]):
                    continue
            else:
                if not _inside(p.chart, x, p.chart.margin):
                    continue
                if p.owns is not None and not bool(np.asarray(p.owns(_at(c)))[0]):
                    continue
            if any(_periodic_distance(p.chart, x, q[0]) < diag for q in found):
                continue
            found.append((x, res, ok))
        for x, res, ok in found:
            J = s.real_derivative(_at(x), w)[..., 0]
            det, smin, smax = _jacobian_stats(J)
            flagged, reason = False, ""
            index = 1 if det > 0 else -1
            if not ok:
                flagged, reason = True, "newton did not converge"
            elif smin <= tau * max(1.0, smax) or not _stable_jacobian(s, w, x, 1e-3 * diag, det):
                flagged, reason = True, "degenerate zero"
                index = 0
            else:
                edge = min(min(abs(x[a] - lo), abs(hi - x[a]))
                           for a, (lo, hi) in enumerate(p.chart.bounds) if a not in p.chart.periodic) \
                    if len(p.chart.periodic) < p.chart.dim else np.inf
                if edge < 1e-9 * max(1.0, diag):
                    flagged, reason = True, "zero on chart edge"
            records.append(ZeroRecord(p.name, tuple(float(v) for v in x), index, det, res, smin,
                                      flagged, reason))
    order = {p.name: i for i, p in enumerate(s.patches)}
    records.sort(key=lambda r: (order[r.patch], tuple(round(v, 9) for v in r.location)))
    return records


@dataclass
class IndexSum:
    total: int
    records: list
    companion: float | None
    discrepancy: float | None
    reliable: bool
    companion_label: str = ""

    def as_dict(self) -> dict:
        return {"index_sum": self.total, "companion": self.companion,
                "discrepancy": self.discrepancy, "reliable": self.reliable,
                "companion_label": self.companion_label,
                "zeros": [r.as_dict() for r in self.records]}


def index_sum(s: SectionField, companion: float | None = None, grid=None,
              label: str = "") -> IndexSum:
    recs = find_zeros(s, grid)
    if not isinstance(recs, list):
        raise UsageError("index_sum needs isolated zeros (real rank = base dimension)")
    total = int(sum(r.index for r in recs if not r.flagged))
    reliable = not any(r.flagged for r in recs)
    disc = None if companion is None else abs(total - companion)
    return IndexSum(total, recs, companion, disc, reliable, label)


# ---------------------------------------------------------------------------
# degeneracy loci

@dataclass
class DegeneracySample:
    i: int
    points: np.ndarray
    sigma_min: np.ndarray
    in_N: np.ndarray
    threshold: float
    fitted_dimension: float | None
    non_generic: bool
    degenerate_fraction: float
    parameters: dict = field(default_factory=dict)

    @property
    def empty(self) -> bool:
        return self.points.shape[1] == 0

    def as_dict(self) -> dict:
        return {"i": self.i, "count": int(self.points.shape[1]),
                "in_N": int(np.sum(self.in_N)), "threshold": self.threshold,
                "fitted_dimension": self.fitted_dimension, "non_generic": self.non_generic,
                "degenerate_fraction": self.degenerate_fraction}


def _tuple_matrix(sections: Sequence[SectionField], x, upto: int) -> np.ndarray:
    """Fiber matrices ``(*batch, rank, upto)`` with the section values as columns."""
    cols = [np.asarray(s.value(x), dtype=complex if s.kind == "complex" else float)
            for s in sections[:upto]]
    M = np.stack(cols, axis=1)
    return np.moveaxis(M, (0, 1), (-2, -1))


def _sigma_min(M: np.ndarray) -> np.ndarray:
    if M.shape[-1] == 0:
        return np.full(M.shape[:-2], np.inf)
    return np.linalg.svd(M, compute_uv=False)[..., -1]


def _minors(sections, x, i):
    """All ``i x i`` minors of the fiber matrix (realified); they vanish exactly on ``D_i``."""
    M = _tuple_matrix(sections, x, i)
    rank = M.shape[-2]
    vals = [np.linalg.det(M[..., list(rows), :]) for rows in combinations(range(rank), i)]
    return realify_vector(np.stack(vals), sections[0].kind)


def _project_to_locus(sections, x0, i, tol=1e-10, max_iter=40, fd=1e-7):
    """Damped Gauss-Newton (minimum-norm steps) on the ``i x i`` minors."""
    x = np.array(x0, dtype=float)
    chart = sections[0].patch(0).chart
    F = _minors(sections, _at(x), i)[:, 0]
    res = float(np.linalg.norm(F))
    for _ in range(max_iter):
        if res <= tol:
            return x, True
        J = np.empty((F.size, x.size))
        for a in range(x.size):
            xp, xm = x.copy(), x.copy()
            xp[a] += fd
            xm[a] -= fd
            J[:, a] = (_minors(sections, _at(xp), i)[:, 0]
                       - _minors(sections, _at(xm), i)[:, 0]) / (2 * fd)
        step = np.linalg.lstsq(J, F, rcond=1e-8)[0]
        lam = 1.0
        while lam >= 1e-3:
            xn = _wrap(chart, x - lam * step)
            if not _inside(chart, xn):
                return xn, False
            Fn = _minors(sections, _at(xn), i)[:, 0]
            rn = float(np.linalg.norm(Fn))
            if rn < res:
                break
            lam *= 0.5
        else:
            return x, res <= 1e3 * tol
        x, F, res = xn, Fn, rn
    return x, res <= 1e3 * tol


def _dedup(P: np.ndarray, tol: float) -> np.ndarray:
    if P.shape[1] < 2:
        return P
    tree = cKDTree(P.T)
    keep = np.ones(P.shape[1], bool)
    for a, b in sorted(tree.query_pairs(tol)):
        if keep[a] and keep[b]:
            keep[b] = False
    return P[:, keep]


def fitted_dimension(points: np.ndarray, k: int = 16, ratio: float = 0.1) -> float | None:
    """Mean local PCA dimension: significant singular values of k-neighbourhoods."""
    n = points.shape[1]
    if n < k + 1:
        return None
    P = points.T
    tree = cKDTree(P)
    _, nbr = tree.query(P, k=k)
    dims = []
    for row in nbr:
        Q = P[row] - P[row].mean(axis=0)
        sv = np.linalg.svd(Q, compute_uv=False)
        if sv[0] == 0:
            continue
        dims.append(int(np.sum(sv > ratio * sv[0])))
    return float(np.mean(dims)) if dims else None


def degeneracy_scan(sections: Sequence[SectionField], i: int, grid=None,
                    tau: float = DEGENERACY_TAU, project: bool = True,
                    max_points: int = 4000) -> DegeneracySample:
    """Sample ``D_i = {s_1 ^ ... ^ s_i = 0}`` on the first patch's chart.

    Grid points within one cell of the locus (judged from the local slope of
    the smallest singular value) are projected onto it by Gauss-Newton; a
    point is kept when the smallest singular value of the fiber matrix drops
    below ``tau`` times the largest section norm on the grid.  Points where
    ``s_1..s_{i-1}`` keep full rank are classified into ``N_i``.
    """
    if not 1 <= i <= len(sections):
        raise UsageError("need 1 <= i <= number of sections")
    kinds = {s.kind for s in sections}
    if len(kinds) != 1 or len({s.rank for s in sections}) != 1:
        raise UsageError("sections in a tuple must share rank and scalar kind")
    chart = sections[0].patch(0).chart
    counts = tuple(grid) if grid is not None else default_grid(chart.dim)
    pts = sample_points(chart, counts)
    M = _tuple_matrix(sections, pts, i)
    smin = _sigma_min(M)
    scale = float(max(np.max(np.linalg.norm(M[..., :, c], axis=-1)) for c in range(i)))
    thresh = tau * max(scale, 1e-300)
    frac = float(np.mean(smin < thresh))
    params = {"grid": list(counts), "tau": tau, "i": i}
    if frac > 0.5:
        # degenerate on an open set: not a transverse locus
        return DegeneracySample(i, pts[:, smin < thresh], smin[smin < thresh],
                                np.zeros(int(np.sum(smin < thresh)), bool), thresh, None,
                                True, frac, params)
    widths = np.array([(hi - lo) / n for (lo, hi), n in zip(chart.bounds, counts)])
    grid_s = smin.reshape(counts)
    slope = 0.0
    for a in range(chart.dim):
        if counts[a] > 1:
            slope = max(slope, float(np.max(np.abs(np.diff(grid_s, axis=a)))) / widths[a])
    near = smin <= slope * float(np.linalg.norm(widths))
    cand = pts[:, near]
    if cand.shape[1] > max_points:
        keep = np.linspace(0, cand.shape[1] - 1, max_points).astype(int)
        cand = cand[:, keep]
    out = []
    if project:
        for c in cand.T:
            x, ok = _project_to_locus(sections, c, i)
            if ok:
                out.append(x)
    else:
        out = [c for c in cand.T]
    P = np.array(out).T if out else np.zeros((chart.dim, 0))
    P = _dedup(P, 1e-3 * float(np.min(widths)))
    if P.shape[1]:
        Ms = _tuple_matrix(sections, P, i)
        sm = _sigma_min(Ms)
        keep = sm < thresh
        P, sm = P[:, keep], sm[keep]
        prev = _sigma_min(_tuple_matrix(sections, P, i - 1)) if i > 1 else np.full(P.shape[1], np.inf)
        in_n = prev >= thresh
    else:
        sm = np.zeros(0)
        in_n = np.zeros(0, bool)
    dimfit = fitted_dimension(P) if P.shape[1] else None
    return DegeneracySample(i, P, sm, in_n, thresh, dimfit, False, frac, params)


@dataclass
class GenericityReport:
    passed: bool
    per_point: list
    min_singular: float | None
    threshold: float


def genericity_check(sections: Sequence[SectionField], sample: DegeneracySample,
                     tau: float = 1e-4, fd: float = 1e-6) -> GenericityReport:
    """Full rank of the differential of the local defining functions at locus points.

    At each point the complement of ``span(s_1..s_{i-1})`` is frozen and
    ``s_i`` is expressed in it; those coordinates are the defining
    functions, and their realified differential must have full row rank.
    """
    i = sample.i
    if sample.non_generic:
        return GenericityReport(False, [], 0.0, tau)
    if sample.empty:
        return GenericityReport(True, [], None, tau)
    per = []
    worst = np.inf
    kind = sections[0].kind
    for x in sample.points.T:
        M = _tuple_matrix(sections, _at(x), i)[0]
        rank = M.shape[0]
        if i > 1:
            U, _, _ = np.linalg.svd(M[:, :i - 1])
            comp = U[:, i - 1:]
        else:
            comp = np.eye(rank)

        def defining(y):
            v = np.asarray(sections[i - 1].value(_at(y)))[:, 0]
            return realify_vector((comp.conj().T @ v)[:, None], kind)[:, 0]

        J = np.empty((defining(x).size, x.size))
        for a in range(x.size):
            xp, xm = x.copy(), x.copy()
            xp[a] += fd
            xm[a] -= fd
            J[:, a] = (defining(xp) - defining(xm)) / (2 * fd)
        sv = np.linalg.svd(J, compute_uv=False)
        smin = float(sv[min(J.shape) - 1])
        worst = min(worst, smin)
        per.append(smin >= tau * max(1.0, float(sv[0])))
    return GenericityReport(all(per), per, worst, tau)


# ---------------------------------------------------------------------------
# orientation of zero loci and intersection numbers

def psi_orientation(df: np.ndarray, tangent: np.ndarray) -> int:
    """Sign making ``tangent`` (columns spanning ker df) positively oriented for the
    zero locus: ``Psi ^ df_1 ^ ... ^ df_k > 0`` iff ``det[tangent, pinv(df)] > 0``."""
    u = np.linalg.pinv(df)
    d = float(np.linalg.det(np.hstack([tangent, u])))
    if abs(d) < 1e-12:
        raise DegenerateZeroError("locus tangent and normal directions are not complementary")
    return 1 if d > 0 else -1


@dataclass
class IntersectionResult:
    count: int
    records: list
    split_signs: list
    convention_disagreement: bool
    companion: float | None
    discrepancy: float | None
    reliable: bool

    def as_dict(self) -> dict:
        return {"count": self.count, "companion": self.companion,
                "discrepancy": self.discrepancy, "reliable": self.reliable,
                "split_signs": self.split_signs,
                "convention_disagreement": self.convention_disagreement,
                "zeros": [r.as_dict() for r in self.records]}


def intersection_number(emb: SmoothMap, s: SectionField, grid=None,
                        companion: float | None = None, owns: Callable | None = None,
                        tau: float = DEGENERACY_TAU) -> IntersectionResult:
    """Signed count of points where ``S = emb(chart)`` meets the zero locus of ``s``.

    Each zero of ``emb* s`` gets its local index in the orientation of S and
    also the sign of ``T N ⊕ T S`` against the ambient orientation, with N
    oriented by the Psi rule; the opposite ordering ``T S ⊕ T N`` is checked
    too and any disagreement is flagged.
    """
    pulled = pullback_section(s, emb, owns=owns)
    recs = find_zeros(pulled, grid, tau=tau)
    if not isinstance(recs, list):
        raise UsageError("intersection_number needs dim S = real rank")
    signs = []
    disagree = False
    for r in recs:
        if r.flagged:
            signs.append(None)
            continue
        x = _at(r.location)
        p = emb(x)
        df = s.real_derivative(p)[..., 0]
        W = emb.jacobian(x)[..., 0]
        _, _, vt = np.linalg.svd(df)
        k = df.shape[1] - df.shape[0]
        V = vt[df.shape[0]:].T if k > 0 else np.zeros((df.shape[1], 0))
        if k > 0:
            V = V * psi_orientation(df, V)
        d_ns = float(np.linalg.det(np.hstack([V, W])))
        d_sn = float(np.linalg.det(np.hstack([W, V])))
        if abs(d_ns) < tau:
            r.flagged, r.reason = True, "S not transverse to the zero locus"
            signs.append(None)
            continue
        sn = 1 if d_ns > 0 else -1
        ss = 1 if d_sn > 0 else -1
        if sn != r.index or ss != sn:
            disagree = True
        signs.append(sn)
    count = int(sum(r.index for r in recs if not r.flagged))
    reliable = not any(r.flagged for r in recs) and not disagree
    disc = None if companion is None else abs(count - companion)
    return IntersectionResult(count, recs, signs, disagree, companion, disc, reliable)


# ---------------------------------------------------------------------------
# Poincare duality check

@dataclass
class ParametrizedLocus:
    """A locus given by an embedding of a parameter chart, with its quadrature."""

    embedding: SmoothMap
    quadrature: Quadrature
    orientation: int = 1


@dataclass
class DualCheck:
    lhs: float
    rhs: float
    discrepancy: float
    lhs_truncation: float
    closed_residual: float
    parameters: dict


def poincare_dual_check(m: BundleModel, k: int, xi: FormField, locus,
                        step: float = 1e-4, closed_tol: float = 1e-6) -> DualCheck:
    """``int_M c_k ^ xi`` against ``int_D xi`` over the degeneracy locus.

    ``locus`` is a list of :class:`ZeroRecord` (then ``xi`` must be a
    0-form and the right side is the signed sum of its values) or a
    :class:`ParametrizedLocus`.
    """
    dim = m.base.dim
    if 2 * k > dim:
        raise UsageError(f"c{k} has degree {2 * k} > base dimension {dim}")
    if xi.degree != dim - 2 * k:
        raise UsageError(f"xi must have degree {dim - 2 * k}, got {xi.degree}")
    if xi.chart.dim != dim:
        raise UsageError("xi must live on the model base")
    pts = m.sample_points((4,) * dim)
    closed = exterior_derivative(xi, step).evaluate(pts).max_abs() if xi.degree < dim else 0.0
    if closed > closed_tol:
        raise UsageError(f"xi is not closed: d xi residual {closed:.3e}")
    ck = class_form(m, f"c{k}")
    integrand = ck.wedge(xi)
    lhs = integrate_on_base(integrand, m.quadrature)
    if isinstance(locus, ParametrizedLocus):
        f = pullback(xi, locus.embedding)
        rhs = locus.orientation * integrate_on_base(f, locus.quadrature).value
    else:
        if xi.degree != 0:
            raise UsageError("a point locus needs a 0-form xi")
        rhs = 0.0
        for r in locus:
            if r.flagged:
                raise UsageError("locus contains flagged zeros")
            v = xi.evaluate(_at(r.location)).terms.get((), 0.0)
            rhs += r.index * float(np.real(np.asarray(v).reshape(-1)[0]))
    params = {"model": m.name, "k": k, "step": step}
    return DualCheck(lhs.value, float(rhs), abs(lhs.value - rhs), lhs.truncation_error,
                     float(closed), params)


# ---------------------------------------------------------------------------
# coefficient tables

def load_section_table(path, chart: Chart | None = None, name: str | None = None,
                       method: str = "cubic") -> SectionField:
    """Build a section from a columnar text table sampled on a regular grid.

    Format: ``#`` comment lines, then a header line naming the columns.
    Coordinate columns come first, then fiber columns.  A complex fiber
    component ``s1`` is given as the pair ``s1.re s1.im``; a real one as
    ``s1``.  Rows may appear in any order but must cover a full tensor grid.
    """
    from scipy.interpolate import RegularGridInterpolator

    header = None
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if header is None:
                header = line.split()
                continue
            rows.append([float(t) for t in line.split()])
    if header is None or not rows:
        raise UsageError(f"{path}: empty section table")
    data = np.array(rows)
    if data.shape[1] != len(header):
        raise UsageError(f"{path}: rows have {data.shape[1]} columns, header has {len(header)}")
    fiber_cols = [j for j, h in enumerate(header) if h.startswith("s")]
    if not fiber_cols:
        raise UsageError(f"{path}: no fiber columns (names starting with 's')")
    ncoord = fiber_cols[0]
    if ncoord == 0 or fiber_cols != list(range(ncoord, len(header))):
        raise UsageError(f"{path}: coordinate columns must precede fiber columns")
    fnames = header[ncoord:]
    complex_kind = any(h.endswith((".re", ".im")) for h in fnames)
    if complex_kind:
        if len(fnames) % 2 or not all(
                fnames[2 * j].endswith(".re") and fnames[2 * j + 1].endswith(".im")
                and fnames[2 * j][:-3] == fnames[2 * j + 1][:-3] for j in range(len(fnames) // 2)):
            raise UsageError(f"{path}: complex columns must come in .re/.im pairs")
    axes = [np.unique(data[:, a]) for a in range(ncoord)]
    shape = tuple(len(ax) for ax in axes)
    if int(np.prod(shape)) != data.shape[0]:
        raise UsageError(f"{path}: rows do not form a full tensor grid")
    order = np.lexsort(tuple(data[:, a] for a in reversed(range(ncoord))))
    data = data[order]
    vals = data[:, ncoord:].reshape(shape + (len(fnames),))
    if complex_kind:
        vals = vals[..., 0::2] + 1j * vals[..., 1::2]
    rank = vals.shape[-1]
    interps = [RegularGridInterpolator(axes, vals[..., r], method=method) for r in range(rank)]
    if chart is None:
        chart = Chart(ncoord, tuple((ax[0], ax[-1]) for ax in axes), frozenset(),
                      tuple(max(3, len(ax) - 1) for ax in axes), 0.0, tuple(header[:ncoord]))

    def value(x):
        flat = np.moveaxis(x.reshape(x.shape[0], -1), 0, -1)
        lo = np.array([ax[0] for ax in axes])
        hi = np.array([ax[-1] for ax in axes])
        flat = np.clip(flat, lo, hi)
        out = np.stack([f(flat) for f in interps])
        return out.reshape((rank,) + x.shape[1:])

    patch = SectionPatch("table", chart, value)
    return SectionField(name or str(path), rank, "complex" if complex_kind else "real", [patch],
                        None, {"table": str(path), "interpolation": method})


__all__ = [
    "SectionPatch", "SectionField", "ZeroRecord", "IndexSum", "DegeneracySample",
    "GenericityReport", "IntersectionResult", "ParametrizedLocus", "DualCheck",
    "realify_vector", "pullback_section", "local_index", "find_zeros", "index_sum",
    "degeneracy_scan", "genericity_check", "fitted_dimension", "psi_orientation",
    "intersection_number", "poincare_dual_check", "load_section_table", "default_grid",
]
