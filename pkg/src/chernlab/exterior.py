"""Alternating forms at a point and matrices of forms.

A :class:`Form` is a sparse map from strictly increasing multi-indices
(1-based, ``(1, 3)`` is ``e1^e3``) to coefficients.  Coefficients may be
exact (``int``, :class:`fractions.Fraction`, :class:`GaussianRational`),
floating point, or numpy arrays; array coefficients make one ``Form`` carry
a whole grid of pointwise forms, which is how the field code stays
vectorised.
"""

from __future__ import annotations

from fractions import Fraction
from functools import lru_cache
from itertools import combinations
from numbers import Rational
from typing import Callable, Iterable, Mapping

import numpy as np

from .errors import UsageError
from .exact import GaussianRational

PRUNE_EPS = 1e-14

MultiIndex = tuple


def is_exact(c) -> bool:
    return isinstance(c, (Rational, GaussianRational)) and not isinstance(c, bool)


def is_complex_scalar(c) -> bool:
    if isinstance(c, np.ndarray):
        return np.iscomplexobj(c)
    if isinstance(c, GaussianRational):
        return True
    return isinstance(c, (complex, np.complexfloating))


def magnitude(c) -> float:
    if isinstance(c, np.ndarray):
        return float(np.max(np.abs(c))) if c.size else 0.0
    return float(abs(c))


def _is_zero(c) -> bool:
    if isinstance(c, np.ndarray):
        return not np.any(c)
    return not c


def check_multi_index(idx, dim: int) -> tuple:
    idx = tuple(int(i) for i in idx)
    if any(b <= a for a, b in zip(idx, idx[1:])):
        raise UsageError(f"multi-index {idx} is not strictly increasing")
    if idx and (idx[0] < 1 or idx[-1] > dim):
        raise UsageError(f"multi-index {idx} out of range 1..{dim}")
    return idx


@lru_cache(maxsize=None)
def merge_indices(a: tuple, b: tuple):
    """Return ``(sign, merged)`` for ``e_a ^ e_b``, or ``None`` if they overlap."""
    if set(a) & set(b):
        return None
    inversions = sum(1 for i in a for j in b if i > j)
    return (-1 if inversions % 2 else 1), tuple(sorted(a + b))


def _prune(terms: dict) -> dict:
    if not terms:
        return terms
    out = {}
    floaty = []
    for k, c in terms.items():
        if is_exact(c):
            if c != 0:
                out[k] = c
        else:
            floaty.append((k, c, magnitude(c)))
    if floaty:
        scale = max(m for _, _, m in floaty)
        cut = PRUNE_EPS * scale
        for k, c, m in floaty:
            if m > cut and m > 0.0:
                out[k] = c
    return out


class Form:
    """An element of the exterior algebra over ``R^dim`` or ``C^dim``."""

    __slots__ = ("dim", "kind", "terms")

    def __init__(self, dim: int, terms: Mapping | None = None, kind: str | None = None,
                 *, prune: bool = True, _checked: bool = False):
        if dim < 0:
            raise UsageError("ambient dimension must be >= 0")
        terms = dict(terms or {})
        if not _checked:
            terms = {check_multi_index(k, dim): v for k, v in terms.items()}
        if prune:
            terms = _prune(terms)
        if kind is None:
            kind = "complex" if any(is_complex_scalar(c) for c in terms.values()) else "real"
        elif kind not in ("real", "complex"):
            raise UsageError(f"unknown scalar kind {kind!r}")
        elif kind == "real" and any(is_complex_scalar(c) for c in terms.values()):
            raise UsageError("complex coefficient in a real Form")
        self.dim = dim
        self.kind = kind
        self.terms = dict(sorted(terms.items(), key=lambda kv: (len(kv[0]), kv[0])))

    @classmethod
    def _raw(cls, dim, terms, kind, prune=True):
        return cls(dim, terms, kind, prune=prune, _checked=True)

    # constructors -------------------------------------------------------
    @classmethod
    def zero(cls, dim: int, kind: str = "real") -> "Form":
        return cls(dim, {}, kind)

    @classmethod
    def scalar(cls, value, dim: int, kind: str | None = None) -> "Form":
        return cls(dim, {(): value}, kind)

    @classmethod
    def basis(cls, idx: Iterable[int], dim: int, coeff=1, kind: str | None = None) -> "Form":
        """``coeff * e_{i1} ^ ... ^ e_{ik}`` for an arbitrary index order."""
        idx = tuple(idx)
        if len(set(idx)) != len(idx):
            return cls(dim, {}, kind or ("complex" if is_complex_scalar(coeff) else "real"))
        order = sorted(range(len(idx)), key=lambda p: idx[p])
        inversions = sum(1 for a in range(len(order)) for b in range(a + 1, len(order))
                         if order[a] > order[b])
        sign = -1 if inversions % 2 else 1
        return cls(dim, {tuple(sorted(idx)): sign * coeff}, kind)

    # inspection ---------------------------------------------------------
    @property
    def is_exact(self) -> bool:
        return all(is_exact(c) for c in self.terms.values())

    def degrees(self) -> set:
        return {len(k) for k in self.terms}

    @property
    def degree(self) -> int:
        """Degree of a homogeneous form (0 for the zero form)."""
        ds = self.degrees()
        if len(ds) > 1:
            raise UsageError(f"form is not homogeneous (degrees {sorted(ds)})")
        return ds.pop() if ds else 0

    def is_homogeneous(self) -> bool:
        return len(self.degrees()) <= 1

    def is_even(self) -> bool:
        return all(len(k) % 2 == 0 for k in self.terms)

    def is_zero(self) -> bool:
        return not self.terms

    def coefficient(self, idx) -> object:
        return self.terms.get(tuple(idx), 0)

    def top_coefficient(self):
        return self.terms.get(tuple(range(1, self.dim + 1)), 0)

    def part(self, k: int) -> "Form":
        """Homogeneous degree-``k`` component."""
        return Form._raw(self.dim, {i: c for i, c in self.terms.items() if len(i) == k},
                         self.kind, prune=False)

    def max_abs(self) -> float:
        return max((magnitude(c) for c in self.terms.values()), default=0.0)

    # algebra ------------------------------------------------------------
    def _check(self, other: "Form"):
        if not isinstance(other, Form):
            raise UsageError(f"expected a Form, got {type(other).__name__}")
        if other.dim != self.dim:
            raise UsageError(f"ambient dimension mismatch: {self.dim} vs {other.dim}")
        if other.kind != self.kind:
            raise UsageError(f"scalar kind mismatch: {self.kind} vs {other.kind}")

    def __add__(self, other: "Form") -> "Form":
        self._check(other)
        out = dict(self.terms)
        for k, c in other.terms.items():
            out[k] = out[k] + c if k in out else c
        return Form._raw(self.dim, out, self.kind)

    def __neg__(self) -> "Form":
        return Form._raw(self.dim, {k: -c for k, c in self.terms.items()}, self.kind, prune=False)

    def __sub__(self, other: "Form") -> "Form":
        return self + (-other)

    def scale(self, c) -> "Form":
        kind = "complex" if (self.kind == "complex" or is_complex_scalar(c)) else "real"
        return Form._raw(self.dim, {k: c * v for k, v in self.terms.items()}, kind)

    def __mul__(self, c) -> "Form":
        if isinstance(c, Form):
            raise UsageError("use wedge (^) to multiply forms")
        return self.scale(c)

    __rmul__ = __mul__

    def wedge(self, other: "Form") -> "Form":
        self._check(other)
        out: dict = {}
        for ka, ca in self.terms.items():
            for kb, cb in other.terms.items():
                merged = merge_indices(ka, kb)
                if merged is None:
                    continue
                sign, key = merged
                val = ca * cb if sign > 0 else -(ca * cb)
                out[key] = out[key] + val if key in out else val
        return Form._raw(self.dim, out, self.kind)

    __xor__ = wedge

    def conjugate(self) -> "Form":
        return Form._raw(self.dim, {k: _conj(c) for k, c in self.terms.items()}, self.kind,
                         prune=False)

    def complexify(self) -> "Form":
        if self.kind == "complex":
            return self
        return Form._raw(self.dim, {k: _to_complex(c) for k, c in self.terms.items()}, "complex",
                         prune=False)

    def real_part(self) -> "Form":
        return Form._raw(self.dim, {k: _real(c) for k, c in self.terms.items()}, "real")

    def imag_part(self) -> "Form":
        return Form._raw(self.dim, {k: _imag(c) for k, c in self.terms.items()}, "real")

    def map_coefficients(self, fn: Callable, kind: str | None = None) -> "Form":
        return Form(self.dim, {k: fn(c) for k, c in self.terms.items()}, kind, _checked=True)

    def at(self, index) -> "Form":
        """Pointwise form from array coefficients (``index`` into the arrays)."""
        return Form._raw(self.dim, {k: (c[index] if isinstance(c, np.ndarray) else c)
                                    for k, c in self.terms.items()}, self.kind)

    # comparison ---------------------------------------------------------
    def __eq__(self, other) -> bool:
        if not isinstance(other, Form):
            return NotImplemented
        if self.dim != other.dim or self.terms.keys() != other.terms.keys():
            return False
        for k, c in self.terms.items():
            d = other.terms[k]
            if isinstance(c, np.ndarray) or isinstance(d, np.ndarray):
                if not np.array_equal(c, d):
                    return False
            elif c != d:
                return False
        return True

    __hash__ = None

    def distance(self, other: "Form") -> float:
        """Max coefficient magnitude of ``self - other`` (no pruning)."""
        if other.dim != self.dim:
            raise UsageError("ambient dimension mismatch")
        worst = 0.0
        for k in set(self.terms) | set(other.terms):
            worst = max(worst, magnitude(self.terms.get(k, 0) - other.terms.get(k, 0)))
        return worst

    def allclose(self, other: "Form", rtol: float = 1e-9, atol: float = 0.0) -> bool:
        scale = max(self.max_abs(), other.max_abs())
        return self.distance(other) <= atol + rtol * scale

    def __repr__(self):
        if not self.terms:
            return f"Form(dim={self.dim}, 0)"
        parts = []
        for k, c in list(self.terms.items())[:8]:
            name = "e" + "".join(str(i) for i in k) if k else "1"
            if isinstance(c, np.ndarray):
                c = f"array{c.shape}"
            parts.append(f"{c}*{name}")
        more = " + ..." if len(self.terms) > 8 else ""
        return f"Form(dim={self.dim}, {' + '.join(parts)}{more})"


def _conj(c):
    if isinstance(c, np.ndarray):
        return np.conj(c)
    if hasattr(c, "conjugate"):
        return c.conjugate()
    return c


def _to_complex(c):
    if isinstance(c, np.ndarray):
        return c.astype(complex)
    if is_exact(c):
        return GaussianRational.coerce(c) if isinstance(c, Rational) else c
    return complex(c)


def _real(c):
    if isinstance(c, np.ndarray):
        return np.real(c).copy()
    if isinstance(c, GaussianRational):
        return c.re
    if isinstance(c, Fraction) or isinstance(c, int):
        return c
    return complex(c).real


def _imag(c):
    if isinstance(c, np.ndarray):
        return np.imag(c).copy()
    if isinstance(c, GaussianRational):
        return c.im
    if isinstance(c, Rational):
        return 0
    return complex(c).imag


def wedge(*forms: Form) -> Form:
    out = forms[0]
    for f in forms[1:]:
        out = out.wedge(f)
    return out


def top_coefficient(a: Form):
    return a.top_coefficient()


def dx(i: int, dim: int, kind: str = "real") -> Form:
    """Coordinate 1-form ``dx_i`` (1-based)."""
    return Form(dim, {(i,): 1.0 if kind == "real" else 1.0 + 0j}, kind)


def basis_indices(dim: int, degree: int):
    return [tuple(c) for c in combinations(range(1, dim + 1), degree)]


class FormMatrix:
    """Rectangular array of Forms sharing ambient dimension and scalar kind."""

    __slots__ = ("rows", "cols", "dim", "kind", "entries")

    def __init__(self, entries):
        entries = tuple(tuple(row) for row in entries)
        if not entries or not entries[0]:
            raise UsageError("FormMatrix needs at least one entry")
        cols = len(entries[0])
        if any(len(r) != cols for r in entries):
            raise UsageError("ragged FormMatrix rows")
        first = entries[0][0]
        for row in entries:
            for e in row:
                if not isinstance(e, Form):
                    raise UsageError(f"FormMatrix entry is {type(e).__name__}, not Form")
                if e.dim != first.dim or e.kind != first.kind:
                    raise UsageError("FormMatrix entries must share ambient_dim and scalar_kind")
        self.rows = len(entries)
        self.cols = cols
        self.dim = first.dim
        self.kind = first.kind
        self.entries = entries

    # constructors -------------------------------------------------------
    @classmethod
    def from_scalars(cls, array, dim: int = 0, kind: str | None = None) -> "FormMatrix":
        """Matrix of degree-0 forms from a nested sequence of scalars."""
        rows = [list(r) for r in array]
        if kind is None:
            kind = "complex" if any(is_complex_scalar(x) for r in rows for x in r) else "real"
        return cls([[Form(dim, {(): x}, kind, _checked=True) for x in r] for r in rows])

    @classmethod
    def identity(cls, n: int, dim: int, kind: str = "real", one=1) -> "FormMatrix":
        z = Form.zero(dim, kind)
        u = Form(dim, {(): one}, kind, _checked=True)
        return cls([[u if i == j else z for j in range(n)] for i in range(n)])

    @classmethod
    def zeros(cls, rows: int, cols: int, dim: int, kind: str = "real") -> "FormMatrix":
        z = Form.zero(dim, kind)
        return cls([[z] * cols for _ in range(rows)])

    # access -------------------------------------------------------------
    @property
    def shape(self):
        return (self.rows, self.cols)

    def __getitem__(self, ij) -> Form:
        i, j = ij
        return self.entries[i][j]

    def tolist(self):
        return [list(r) for r in self.entries]

    def scalars(self):
        """Nested list of degree-0 coefficients (requires every entry of degree 0)."""
        out = []
        for row in self.entries:
            vals = []
            for e in row:
                if any(k for k in e.terms):
                    raise UsageError("scalars() needs degree-0 entries")
                vals.append(e.terms.get((), 0))
            out.append(vals)
        return out

    def is_scalar(self) -> bool:
        return all(not any(k for k in e.terms) for row in self.entries for e in row)

    def is_even(self) -> bool:
        return all(e.is_even() for row in self.entries for e in row)

    def max_abs(self) -> float:
        return max(e.max_abs() for row in self.entries for e in row)

    def is_skew(self, rtol: float = 1e-12) -> bool:
        if self.rows != self.cols:
            return False
        scale = self.max_abs()
        for i in range(self.rows):
            for j in range(i, self.cols):
                s = self.entries[i][j] + self.entries[j][i]
                if s.is_zero():
                    continue
                if s.is_exact or s.max_abs() > rtol * scale:
                    return False
        return True

    def is_skew_hermitian(self, rtol: float = 1e-12) -> bool:
        if self.rows != self.cols:
            return False
        scale = self.max_abs()
        for i in range(self.rows):
            for j in range(i, self.cols):
                s = self.entries[i][j] + self.entries[j][i].conjugate()
                if s.max_abs() > rtol * scale:
                    return False
        return True

    # algebra ------------------------------------------------------------
    def map(self, fn: Callable[[Form], Form]) -> "FormMatrix":
        return FormMatrix([[fn(e) for e in row] for row in self.entries])

    def _conform(self, other: "FormMatrix"):
        if not isinstance(other, FormMatrix) or other.shape != self.shape:
            raise UsageError(f"shape mismatch: {self.shape} vs {getattr(other, 'shape', None)}")

    def __add__(self, other: "FormMatrix") -> "FormMatrix":
        self._conform(other)
        return FormMatrix([[a + b for a, b in zip(ra, rb)]
                           for ra, rb in zip(self.entries, other.entries)])

    def __sub__(self, other: "FormMatrix") -> "FormMatrix":
        self._conform(other)
        return FormMatrix([[a - b for a, b in zip(ra, rb)]
                           for ra, rb in zip(self.entries, other.entries)])

    def __neg__(self) -> "FormMatrix":
        return self.map(lambda e: -e)

    def scale(self, c) -> "FormMatrix":
        return self.map(lambda e: e.scale(c))

    def __mul__(self, c) -> "FormMatrix":
        if isinstance(c, (FormMatrix, Form)):
            raise UsageError("use wedge (^) for products of form matrices")
        return self.scale(c)

    __rmul__ = __mul__

    def wedge(self, other: "FormMatrix") -> "FormMatrix":
        if not isinstance(other, FormMatrix) or self.cols != other.rows:
            raise UsageError(f"cannot multiply {self.shape} by {getattr(other, 'shape', None)}")
        if self.dim != other.dim or self.kind != other.kind:
            raise UsageError("form matrices differ in ambient_dim or scalar_kind")
        out = []
        for i in range(self.rows):
            row = []
            for j in range(other.cols):
                acc = Form.zero(self.dim, self.kind)
                for k in range(self.cols):
                    a, b = self.entries[i][k], other.entries[k][j]
                    if a.terms and b.terms:
                        acc = acc + a.wedge(b)
                row.append(acc)
            out.append(row)
        return FormMatrix(out)

    __xor__ = wedge

    def transpose(self) -> "FormMatrix":
        return FormMatrix([list(col) for col in zip(*self.entries)])

    @property
    def T(self) -> "FormMatrix":
        return self.transpose()

    def conjugate(self) -> "FormMatrix":
        return self.map(Form.conjugate)

    def complexify(self) -> "FormMatrix":
        return self.map(Form.complexify)

    def trace(self) -> Form:
        if self.rows != self.cols:
            raise UsageError("trace of a non-square FormMatrix")
        acc = Form.zero(self.dim, self.kind)
        for i in range(self.rows):
            acc = acc + self.entries[i][i]
        return acc

    def submatrix(self, rows, cols) -> "FormMatrix":
        return FormMatrix([[self.entries[i][j] for j in cols] for i in rows])

    def permuted(self, perm) -> "FormMatrix":
        """``P A P^T`` for the permutation with ``(P A P^T)[a][b] = A[perm[a]][perm[b]]``."""
        return FormMatrix([[self.entries[p][q] for q in perm] for p in perm])

    def distance(self, other: "FormMatrix") -> float:
        self._conform(other)
        return max(a.distance(b) for ra, rb in zip(self.entries, other.entries)
                   for a, b in zip(ra, rb))

    def at(self, index) -> "FormMatrix":
        return self.map(lambda e: e.at(index))

    def __eq__(self, other):
        if not isinstance(other, FormMatrix):
            return NotImplemented
        return self.shape == other.shape and all(
            a == b for ra, rb in zip(self.entries, other.entries) for a, b in zip(ra, rb))

    __hash__ = None

    def __repr__(self):
        return f"FormMatrix({self.rows}x{self.cols}, dim={self.dim}, kind={self.kind})"


def block_diag(a: FormMatrix, b: FormMatrix) -> FormMatrix:
    if a.dim != b.dim or a.kind != b.kind:
        raise UsageError("block_diag operands differ in ambient_dim or scalar_kind")
    z = Form.zero(a.dim, a.kind)
    rows = [list(r) + [z] * b.cols for r in a.entries]
    rows += [[z] * a.cols + list(r) for r in b.entries]
    return FormMatrix(rows)


def scalar_of(x, like: Form):
    """Degree-0 form with the ambient dimension and kind of ``like``."""
    kind = "complex" if (like.kind == "complex" or is_complex_scalar(x)) else "real"
    return Form(like.dim, {(): x}, kind, _checked=True)


__all__ = [
    "Form", "FormMatrix", "MultiIndex", "wedge", "top_coefficient", "dx", "block_diag",
    "basis_indices", "merge_indices", "is_exact", "magnitude", "PRUNE_EPS",
]
