"""Exact scalars: Gaussian rationals and fraction-free determinants."""

from __future__ import annotations

import math
from fractions import Fraction
from numbers import Rational


class GaussianRational:
    """A complex number ``re + i*im`` with rational parts."""

    __slots__ = ("re", "im")

    def __init__(self, re=0, im=0):
        self.re = Fraction(re)
        self.im = Fraction(im)

    @classmethod
    def coerce(cls, x) -> "GaussianRational":
        if isinstance(x, GaussianRational):
            return x
        if isinstance(x, Rational):
            return cls(x, 0)
        raise TypeError(f"cannot coerce {type(x).__name__} to GaussianRational")

    def conjugate(self) -> "GaussianRational":
        return GaussianRational(self.re, -self.im)

    def __add__(self, other):
        try:
            o = GaussianRational.coerce(other)
        except TypeError:
            return NotImplemented
        return GaussianRational(self.re + o.re, self.im + o.im)

    __radd__ = __add__

    def __neg__(self):
        return GaussianRational(-self.re, -self.im)

    def __sub__(self, other):
        try:
            o = GaussianRational.coerce(other)
        except TypeError:
            return NotImplemented
        return GaussianRational(self.re - o.re, self.im - o.im)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        try:
            o = GaussianRational.coerce(other)
        except TypeError:
            return NotImplemented
        return GaussianRational(self.re * o.re - self.im * o.im,
                                self.re * o.im + self.im * o.re)

    __rmul__ = __mul__

    def __truediv__(self, other):
        try:
            o = GaussianRational.coerce(other)
        except TypeError:
            return NotImplemented
        den = o.re * o.re + o.im * o.im
        if den == 0:
            raise ZeroDivisionError("GaussianRational division by zero")
        num = self * o.conjugate()
        return GaussianRational(num.re / den, num.im / den)

    def __rtruediv__(self, other):
        return GaussianRational.coerce(other) / self

    def __eq__(self, other):
        try:
            o = GaussianRational.coerce(other)
        except TypeError:
            if isinstance(other, complex):
                return complex(self) == other
            return NotImplemented
        return self.re == o.re and self.im == o.im

    def __hash__(self):
        if self.im == 0:
            return hash(self.re)
        return hash((self.re, self.im))

    def __bool__(self):
        return bool(self.re) or bool(self.im)

    def __abs__(self) -> float:
        return math.hypot(float(self.re), float(self.im))

    def __complex__(self) -> complex:
        return complex(float(self.re), float(self.im))

    def __repr__(self):
        return f"GaussianRational({self.re}, {self.im})"


I = GaussianRational(0, 1)


def _gi_mul(a, b):
    return (a[0] * b[0] - a[1] * b[1], a[0] * b[1] + a[1] * b[0])


def _gi_exact_div(a, b):
    # caller guarantees b divides a in Z[i]
    n = b[0] * b[0] + b[1] * b[1]
    re = a[0] * b[0] + a[1] * b[1]
    im = a[1] * b[0] - a[0] * b[1]
    if re % n or im % n:
        raise ArithmeticError("inexact Gaussian-integer division in Bareiss step")
    return (re // n, im // n)


def bareiss_det(matrix) -> GaussianRational:
    """Determinant of a square matrix of Gaussian rationals (or rationals).

    Denominators are cleared first, then Bareiss elimination runs over the
    Gaussian integers, so every intermediate division is exact.
    """
    rows = [[GaussianRational.coerce(x) for x in row] for row in matrix]
    n = len(rows)
    if n == 0:
        return GaussianRational(1)
    if any(len(r) != n for r in rows):
        raise ValueError("bareiss_det needs a square matrix")
    denom = 1
    for r in rows:
        for x in r:
            denom = math.lcm(denom, x.re.denominator, x.im.denominator)
    a = [[(int(x.re * denom), int(x.im * denom)) for x in r] for r in rows]
    sign = 1
    prev = (1, 0)
    for k in range(n - 1):
        if a[k][k] == (0, 0):
            piv = next((i for i in range(k + 1, n) if a[i][k] != (0, 0)), None)
            if piv is None:
                return GaussianRational(0)
            a[k], a[piv] = a[piv], a[k]
            sign = -sign
        akk = a[k][k]
        for i in range(k + 1, n):
            aik = a[i][k]
            for j in range(k + 1, n):
                t1 = _gi_mul(a[i][j], akk)
                t2 = _gi_mul(aik, a[k][j])
                a[i][j] = _gi_exact_div((t1[0] - t2[0], t1[1] - t2[1]), prev)
            a[i][k] = (0, 0)
        prev = akk
    d = a[n - 1][n - 1]
    scale = Fraction(sign, denom ** n)
    return GaussianRational(d[0] * scale, d[1] * scale)


def lu_det(matrix) -> complex:
    """Determinant by LU elimination with partial pivoting (float/complex)."""
    a = [[complex(x) for x in row] for row in matrix]
    n = len(a)
    det = 1 + 0j
    for k in range(n):
        piv = max(range(k, n), key=lambda i: abs(a[i][k]))
        if a[piv][k] == 0:
            return 0j
        if piv != k:
            a[k], a[piv] = a[piv], a[k]
            det = -det
        akk = a[k][k]
        det *= akk
        for i in range(k + 1, n):
            f = a[i][k] / akk
            if f:
                row_i, row_k = a[i], a[k]
                for j in range(k + 1, n):
                    row_i[j] -= f * row_k[j]
    return det
