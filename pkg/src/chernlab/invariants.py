"""Pfaffians, determinants and characteristic forms of curvature matrices.

Entries of the matrices handled here are even-degree forms, which commute,
so the classical scalar formulas carry over verbatim with ``*`` replaced by
the wedge product.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations, permutations
from typing import Sequence

import numpy as np

from .errors import UsageError
from .exact import GaussianRational, bareiss_det, lu_det
from .exterior import Form, FormMatrix, is_exact, merge_indices

TWO_PI = 2.0 * math.pi
MATCHING_SUM_MAX = 8


# ---------------------------------------------------------------------------
# the interleaving permutation

def interleaving(n: int) -> list[int]:
    """Block order ``(1..n, n+1..2n)`` -> oriented order ``(1, n+1, 2, n+2, ...)``.

    Returned 0-based: entry ``a`` is the block index placed at position ``a``.
    """
    if n < 1:
        raise UsageError("interleaving needs n >= 1")
    out = []
    for i in range(n):
        out += [i, n + i]
    return out


def interleaving_matrix(n: int) -> np.ndarray:
    """Permutation matrix ``P`` with ``(P M P^T)[a, b] = M[perm[a], perm[b]]``."""
    perm = interleaving(n)
    P = np.zeros((2 * n, 2 * n), dtype=int)
    for a, p in enumerate(perm):
        P[a, p] = 1
    return P


# ---------------------------------------------------------------------------
# helpers over "scalars or forms"

def _mul(a, b):
    if isinstance(a, Form):
        return a.wedge(b)
    return a * b


def _add(a, b):
    if a is None:
        return b
    return a + b


def _neg(a):
    return -a


def _check_pfaffian_input(A: FormMatrix, *, allow_odd: bool = False):
    if not isinstance(A, FormMatrix):
        raise UsageError("expected a FormMatrix")
    if A.rows != A.cols:
        raise UsageError(f"Pfaffian needs a square matrix, got {A.shape}")
    if A.rows % 2:
        raise UsageError(f"Pfaffian needs even size, got {A.rows}")
    if not allow_odd and not A.is_even():
        raise UsageError("Pfaffian entries must have even degree")
    if not A.is_skew(rtol=1e-9):
        raise UsageError("Pfaffian input is not skew-symmetric")


def perfect_matchings(m: int):
    """Yield ``(sign, pairs)`` for every perfect matching of ``range(m)``.

    ``sign`` is the sign of the permutation ``(i1 j1 i2 j2 ...)`` with pairs
    listed by increasing first element and ``i < j`` inside each pair.
    """
    def rec(rest):
        if not rest:
            yield 1, ()
            return
        first = rest[0]
        for k in range(1, len(rest)):
            partner = rest[k]
            remaining = rest[1:k] + rest[k + 1:]
            # moving `partner` next to `first` crosses k-1 elements
            s = -1 if (k - 1) % 2 else 1
            for sub_sign, sub in rec(remaining):
                yield s * sub_sign, ((first, partner),) + sub

    yield from rec(tuple(range(m)))


def _matching_sum(get, m: int, one):
    total = None
    for sign, pairs in perfect_matchings(m):
        prod = one
        for i, j in pairs:
            prod = _mul(prod, get(i, j))
        total = _add(total, prod if sign > 0 else _neg(prod))
    return total


def _recursive_pfaffian(get, m: int, one):
    memo: dict = {}

    def rec(idx: tuple):
        if not idx:
            return one
        if idx in memo:
            return memo[idx]
        first = idx[0]
        total = None
        for k in range(1, len(idx)):
            rest = idx[1:k] + idx[k + 1:]
            term = _mul(get(first, idx[k]), rec(rest))
            total = _add(total, term if k % 2 else _neg(term))
        memo[idx] = total
        return total

    return rec(tuple(range(m)))


def pfaffian_scalar(M) -> object:
    """Pfaffian of a nested sequence of scalars (exact or float)."""
    m = len(M)
    if m == 0:
        return 1
    if m % 2:
        raise UsageError("Pfaffian needs even size")
    get = lambda i, j: M[i][j]  # noqa: E731
    if m <= MATCHING_SUM_MAX:
        return _matching_sum(get, m, 1)
    return _recursive_pfaffian(get, m, 1)


def pfaffian(A: FormMatrix) -> Form:
    """Pfaffian of a skew matrix with even-degree entries.

    Perfect-matching sum up to size 8, memoised first-row expansion above.
    """
    _check_pfaffian_input(A)
    if A.is_scalar():
        val = pfaffian_scalar(A.scalars())
        return Form(A.dim, {(): val}, A.kind, _checked=True)
    one = Form(A.dim, {(): 1}, A.kind, _checked=True)
    get = lambda i, j: A[i, j]  # noqa: E731
    if A.rows <= MATCHING_SUM_MAX:
        return _matching_sum(get, A.rows, one)
    return _recursive_pfaffian(get, A.rows, one)


def pfaffian_oracle(A: FormMatrix) -> Form:
    """Pfaffian from the top power of ``T = sum_ij A_ij f_i ^ f_j``.

    ``T`` lives in an auxiliary exterior algebra on ``f_1..f_2n`` whose
    coefficients are the (even, hence central) entries of ``A``; the
    Pfaffian is the coefficient of ``f_1 ^ ... ^ f_2n`` in ``T^n / (2^n n!)``.
    Slow on purpose: it is only used to check :func:`pfaffian`.
    """
    _check_pfaffian_input(A)
    m = A.rows
    n = m // 2
    scalar = A.is_scalar()
    S = A.scalars() if scalar else None
    entry = (lambda i, j: S[i][j]) if scalar else (lambda i, j: A[i, j])

    T: dict = {}
    for i in range(m):
        for j in range(m):
            if i == j:
                continue
            merged = merge_indices((i,), (j,))
            sign, key = merged
            c = entry(i, j)
            c = c if sign > 0 else _neg(c)
            T[key] = T[key] + c if key in T else c

    power = {(): (1 if scalar else Form(A.dim, {(): 1}, A.kind, _checked=True))}
    for _ in range(n):
        nxt: dict = {}
        for ka, ca in power.items():
            for kb, cb in T.items():
                merged = merge_indices(ka, kb)
                if merged is None:
                    continue
                sign, key = merged
                v = _mul(ca, cb)
                v = v if sign > 0 else _neg(v)
                nxt[key] = nxt[key] + v if key in nxt else v
        power = nxt

    top = power.get(tuple(range(m)))
    denom = (2 ** n) * math.factorial(n)
    if scalar:
        if top is None:
            top = 0
        val = top * Fraction(1, denom) if is_exact(top) else top / denom
        return Form(A.dim, {(): val}, A.kind, _checked=True)
    if top is None:
        return Form.zero(A.dim, A.kind)
    factor = Fraction(1, denom) if top.is_exact else 1.0 / denom
    return top.scale(factor)


def polarized_pfaffian(*mats: FormMatrix) -> Form:
    """Symmetric multilinear Pfaffian ``Pf(A_1, ..., A_n)`` of 2n x 2n matrices.

    Equal to the coefficient of ``t_1 ... t_n`` in ``Pf(sum t_k A_k)``
    divided by ``n!``.  At most one slot may carry odd-degree entries; the
    other slots' entries are even and central, so the ordered products below
    need no extra grading signs.
    """
    if not mats:
        raise UsageError("polarized_pfaffian needs at least one matrix")
    n = len(mats)
    size = 2 * n
    odd_slots = 0
    for A in mats:
        if not isinstance(A, FormMatrix) or A.shape != (size, size):
            raise UsageError(f"every slot must be {size}x{size}")
        if not A.is_skew(rtol=1e-9):
            raise UsageError("polarized_pfaffian slots must be skew")
        if not A.is_even():
            odd_slots += 1
    if odd_slots > 1:
        raise UsageError("more than one slot with odd-degree entries is not supported")
    first = mats[0]
    if any(A.dim != first.dim or A.kind != first.kind for A in mats):
        raise UsageError("slots differ in ambient_dim or scalar_kind")

    one = Form(first.dim, {(): 1}, first.kind, _checked=True)
    total = Form.zero(first.dim, first.kind)
    for sign, pairs in perfect_matchings(size):
        for slots in permutations(range(n)):
            prod = one
            for (i, j), s in zip(pairs, slots):
                prod = prod.wedge(mats[s][i, j])
                if prod.is_zero():
                    break
            total = total + (prod if sign > 0 else -prod)
    nf = math.factorial(n)
    return total.scale(Fraction(1, nf) if total.is_exact else 1.0 / nf)


def _permutation_sign(p) -> int:
    p = list(p)
    sign = 1
    seen = [False] * len(p)
    for i in range(len(p)):
        if seen[i]:
            continue
        j, length = i, 0
        while not seen[j]:
            seen[j] = True
            j = p[j]
            length += 1
        if length % 2 == 0:
            sign = -sign
    return sign


def det_form(A: FormMatrix) -> Form:
    """Leibniz determinant of a square matrix with even-degree entries."""
    if not isinstance(A, FormMatrix) or A.rows != A.cols:
        raise UsageError("det_form needs a square FormMatrix")
    if not A.is_even():
        raise UsageError("det_form entries must have even degree")
    n = A.rows
    if A.is_scalar():
        S = A.scalars()
        total = 0
        for p in permutations(range(n)):
            prod = 1
            for i in range(n):
                prod = prod * S[i][p[i]]
            total = total + (prod if _permutation_sign(p) > 0 else -prod)
        return Form(A.dim, {(): total}, A.kind, _checked=True)
    total = Form.zero(A.dim, A.kind)
    one = Form(A.dim, {(): 1}, A.kind, _checked=True)
    for p in permutations(range(n)):
        prod = one
        for i in range(n):
            prod = prod.wedge(A[i, p[i]])
            if prod.is_zero():
                break
        if not prod.is_zero():
            total = total + (prod if _permutation_sign(p) > 0 else -prod)
    return total


def det_scalar(M, mode: str = "auto"):
    """Determinant of a scalar matrix: Bareiss (exact) or pivoted LU (float)."""
    if mode == "auto":
        flat = [x for row in M for x in row]
        mode = "exact" if all(is_exact(x) for x in flat) else "float"
    if mode == "exact":
        return bareiss_det(M)
    return lu_det(M)


# ---------------------------------------------------------------------------
# characteristic forms

@dataclass
class CharacteristicForms:
    chern: list | None = None
    pontryagin: list | None = None
    euler: Form | None = None
    diagnostics: dict = field(default_factory=dict)


def _imag_check(forms: Sequence[Form], what: str, rtol: float = 1e-9) -> float:
    scale = max((f.max_abs() for f in forms), default=0.0)
    worst = max((f.imag_part().max_abs() for f in forms), default=0.0)
    rel = worst / scale if scale > 0 else 0.0
    if rel > rtol:
        raise UsageError(f"{what}: imaginary residue {rel:.3e} exceeds {rtol:g} "
                         "(curvature not skew-Hermitian?)")
    return rel


def chern_forms(omega: FormMatrix, *, real: bool = True) -> CharacteristicForms:
    """Chern forms ``c_k`` = degree-2k part of ``det(I + (i/2pi) Omega)``.

    ``c_k`` is assembled as the sum of principal k x k minors of
    ``(i/2pi) Omega``; components whose degree exceeds the ambient dimension
    vanish identically and are not expanded.  With ``real=True`` the
    imaginary parts are checked (<= 1e-9 relative) and dropped.
    """
    if not isinstance(omega, FormMatrix) or omega.rows != omega.cols:
        raise UsageError("chern_forms needs a square FormMatrix")
    n = omega.rows
    X = omega.complexify().scale(1j / TWO_PI)
    forms = [Form(omega.dim, {(): 1.0 + 0j}, "complex", _checked=True)]
    for k in range(1, n + 1):
        if 2 * k > omega.dim:
            forms.append(Form.zero(omega.dim, "complex"))
            continue
        acc = Form.zero(omega.dim, "complex")
        for S in combinations(range(n), k):
            acc = acc + det_form(X.submatrix(S, S))
        forms.append(acc.part(2 * k) if not acc.is_zero() else acc)
    diag = {}
    if real:
        diag["imag_residue"] = _imag_check(forms[1:], "chern_forms")
        forms = [f.real_part() for f in forms]
    return CharacteristicForms(chern=forms, diagnostics=diag)


def euler_form(omega: FormMatrix) -> Form:
    """``Pf(-Omega / 2pi)`` for a real skew curvature matrix of even rank."""
    if not isinstance(omega, FormMatrix) or omega.rows != omega.cols:
        raise UsageError("euler_form needs a square FormMatrix")
    if omega.rows % 2:
        raise UsageError(f"Euler form needs even rank, got {omega.rows}")
    return pfaffian(omega.scale(-1.0 / TWO_PI))


def pontryagin_forms(omega: FormMatrix) -> CharacteristicForms:
    """``p_k = (-1)^k c_2k`` of the complexification of a real skew curvature."""
    if not isinstance(omega, FormMatrix) or omega.rows != omega.cols:
        raise UsageError("pontryagin_forms needs a square FormMatrix")
    if omega.kind != "real":
        raise UsageError("pontryagin_forms needs a real curvature matrix")
    ch = chern_forms(omega.complexify(), real=True).chern
    odd = [ch[k] for k in range(1, len(ch), 2)]
    scale = max((f.max_abs() for f in ch[1:]), default=0.0)
    odd_res = max((f.max_abs() for f in odd), default=0.0)
    rel = odd_res / scale if scale > 0 else 0.0
    if rel > 1e-9:
        raise ArithmeticError(f"odd Chern forms of a complexified real bundle do not vanish "
                              f"(relative {rel:.3e}); input not skew?")
    p = [ch[0]]
    for k in range(1, omega.rows // 2 + 1):
        p.append(ch[2 * k] if k % 2 == 0 else -ch[2 * k])
    return CharacteristicForms(pontryagin=p, diagnostics={"odd_chern_residue": rel})


def total_chern(omega: FormMatrix) -> Form:
    ch = chern_forms(omega).chern
    acc = ch[0]
    for c in ch[1:]:
        acc = acc + c
    return acc


# ---------------------------------------------------------------------------
# realification

@dataclass
class LieAlgebraElement:
    """``A + i B`` in u(n): ``A`` real skew, ``B`` real symmetric."""

    A: list
    B: list

    def __post_init__(self):
        self.A = [list(r) for r in self.A]
        self.B = [list(r) for r in self.B]
        n = len(self.A)
        if n < 1 or len(self.B) != n or any(len(r) != n for r in self.A + self.B):
            raise UsageError("A and B must be square matrices of the same size n >= 1")
        exact = self.is_exact
        scale = max([abs(x) for r in self.A + self.B for x in r] + [1e-300])
        for i in range(n):
            for j in range(n):
                da = self.A[i][j] + self.A[j][i]
                db = self.B[i][j] - self.B[j][i]
                if exact:
                    if da != 0 or db != 0:
                        raise UsageError("need A^T = -A and B^T = B")
                elif abs(da) > 1e-12 * scale or abs(db) > 1e-12 * scale:
                    raise UsageError("need A^T = -A and B^T = B")

    @property
    def n(self) -> int:
        return len(self.A)

    @property
    def is_exact(self) -> bool:
        return all(is_exact(x) for r in self.A + self.B for x in r)

    def complex_matrix(self):
        """``A + i B`` as Gaussian rationals (exact) or Python complex."""
        if self.is_exact:
            return [[GaussianRational(a, b) for a, b in zip(ra, rb)]
                    for ra, rb in zip(self.A, self.B)]
        return [[complex(a, b) for a, b in zip(ra, rb)] for ra, rb in zip(self.A, self.B)]


def realify_lie(el: LieAlgebraElement):
    """Real skew ``2n x 2n`` matrix ``P [[A, B], [-B, A]] P^T`` (interleaved basis)."""
    n = el.n
    block = [[None] * (2 * n) for _ in range(2 * n)]
    for i in range(n):
        for j in range(n):
            a, b = el.A[i][j], el.B[i][j]
            block[i][j] = a
            block[i][n + j] = b
            block[n + i][j] = -b
            block[n + i][n + j] = a
    perm = interleaving(n)
    C = [[block[p][q] for q in perm] for p in perm]
    if el.is_exact:
        return C
    return np.array(C, dtype=float)


@dataclass
class PfaffianDetCheck:
    pf: object
    det: object
    residual: float
    relative: float
    imag_residue: float
    exact_equal: bool | None


def verify_pfaffian_det(el: LieAlgebraElement) -> PfaffianDetCheck:
    """Compare ``Pf(C)`` with ``det(-i (A + i B))``."""
    C = realify_lie(el)
    rows = C if isinstance(C, list) else C.tolist()
    pf = pfaffian_scalar(rows)
    M = el.complex_matrix()
    minus_i = GaussianRational(0, -1) if el.is_exact else -1j
    M = [[minus_i * x for x in row] for row in M]
    if el.is_exact:
        det = bareiss_det(M)
        equal = (det.im == 0 and det.re == pf)
        diff = abs(det - pf)
        scale = max(abs(det), abs(pf))
        imag = abs(float(det.im)) / scale if scale else 0.0
        if det.im != 0:
            raise ArithmeticError("determinant of a Hermitian matrix has exact imaginary part")
        return PfaffianDetCheck(pf, det, diff, diff / scale if scale else 0.0, imag, equal)
    det = lu_det(M)
    scale = max(abs(det), abs(pf), 1e-300)
    imag = abs(det.imag) / scale
    if imag > 1e-10:
        raise ArithmeticError(f"imaginary residue {imag:.3e} of a Hermitian determinant")
    diff = abs(det - pf)
    return PfaffianDetCheck(pf, det, diff, diff / scale, imag, None)


def realify_curvature(omega_c: FormMatrix, rtol: float = 1e-9) -> FormMatrix:
    """Real ``2n x 2n`` curvature of the underlying real bundle.

    With ``Omega_C = A + i B`` entrywise the real curvature is
    ``[[A, B], [-B, A]]`` in the block basis ``(s_1..s_n, i s_1..i s_n)``,
    then conjugated into the interleaved oriented order.
    """
    if not isinstance(omega_c, FormMatrix) or omega_c.rows != omega_c.cols:
        raise UsageError("realify_curvature needs a square FormMatrix")
    if not omega_c.is_skew_hermitian(rtol=rtol):
        raise UsageError("curvature is not skew-Hermitian")
    n = omega_c.rows
    A = [[omega_c[i, j].real_part() for j in range(n)] for i in range(n)]
    B = [[omega_c[i, j].imag_part() for j in range(n)] for i in range(n)]
    rows = [A[i] + B[i] for i in range(n)]
    rows += [[-b for b in B[i]] + A[i] for i in range(n)]
    return FormMatrix(rows).permuted(interleaving(n))


@dataclass
class TopChernEulerCheck:
    residual: float
    relative: float
    scale: float
    chern_top: Form
    euler: Form


def verify_top_chern_euler(omega_c: FormMatrix) -> TopChernEulerCheck:
    """``det((i/2pi) Omega_C)`` against ``Pf((-1/2pi) Omega_R)``, all coefficients."""
    lhs = det_form(omega_c.complexify().scale(1j / TWO_PI))
    rhs = euler_form(realify_curvature(omega_c))
    diff = lhs.distance(rhs.complexify())
    scale = max(lhs.max_abs(), rhs.max_abs())
    return TopChernEulerCheck(diff, diff / scale if scale else 0.0, scale, lhs, rhs)
