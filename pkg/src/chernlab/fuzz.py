"""Seeded random-input suites for the algebraic identities.

Every suite draws one child seed per trial from ``numpy.random.SeedSequence``
so that a run is reproducible from ``(suite, root seed, flags)`` alone and
independent of the order in which trials are evaluated.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations

import numpy as np

from .errors import UsageError
from .exterior import Form, FormMatrix, block_diag
from .invariants import (LieAlgebraElement, TWO_PI, chern_forms, det_form, det_scalar,
                         euler_form, pfaffian, pfaffian_oracle, pfaffian_scalar,
                         pontryagin_forms, verify_pfaffian_det, verify_top_chern_euler)

MODES = ("exact", "float")


@dataclass
class SuiteResult:
    """Aggregate of one suite case (fixed size and mode)."""

    suite: str
    quantity: str
    parameters: dict
    trials: int
    failures: int
    worst: float
    tolerance: float
    provenance: str
    failed_trials: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.failures == 0


def trial_rngs(seed: int, trials: int):
    children = np.random.SeedSequence(seed).spawn(trials)
    return [np.random.default_rng(c) for c in children]


# ---------------------------------------------------------------------------
# random inputs

def random_rational(rng, num: int = 9, den: int = 6) -> Fraction:
    return Fraction(int(rng.integers(-num, num + 1)), int(rng.integers(1, den + 1)))


def random_scalar(rng, mode: str):
    return random_rational(rng) if mode == "exact" else float(rng.standard_normal())


def random_skew_scalars(rng, m: int, mode: str) -> list:
    S = [[0 if mode == "exact" else 0.0] * m for _ in range(m)]
    for i in range(m):
        for j in range(i + 1, m):
            v = random_scalar(rng, mode)
            S[i][j], S[j][i] = v, -v
    return S


def random_lie_element(rng, n: int, mode: str) -> LieAlgebraElement:
    zero = 0 if mode == "exact" else 0.0
    A = [[zero] * n for _ in range(n)]
    B = [[zero] * n for _ in range(n)]
    for i in range(n):
        B[i][i] = random_scalar(rng, mode)
        for j in range(i + 1, n):
            a, b = random_scalar(rng, mode), random_scalar(rng, mode)
            A[i][j], A[j][i] = a, -a
            B[i][j], B[j][i] = b, b
    return LieAlgebraElement(A, B)


def random_two_form(rng, dim: int, mode: str = "float", kind: str = "real") -> Form:
    terms = {}
    for idx in combinations(range(1, dim + 1), 2):
        v = random_scalar(rng, mode)
        if kind == "complex":
            v = complex(v, float(rng.standard_normal()))
        terms[idx] = v
    return Form(dim, terms, kind)


def random_skew_forms(rng, m: int, dim: int, mode: str = "float") -> FormMatrix:
    zero = Form.zero(dim)
    rows = [[zero] * m for _ in range(m)]
    for i in range(m):
        for j in range(i + 1, m):
            f = random_two_form(rng, dim, mode)
            rows[i][j], rows[j][i] = f, -f
    return FormMatrix(rows)


def random_skew_hermitian_forms(rng, n: int, dim: int) -> FormMatrix:
    """``n x n`` matrix of complex 2-forms with ``Omega + conj(Omega)^T = 0``."""
    zero = Form.zero(dim, "complex")
    rows = [[zero] * n for _ in range(n)]
    for i in range(n):
        rows[i][i] = random_two_form(rng, dim).scale(1j)
        for j in range(i + 1, n):
            f = random_two_form(rng, dim, kind="complex")
            rows[i][j] = f
            rows[j][i] = -f.conjugate()
    return FormMatrix(rows)


# ---------------------------------------------------------------------------
# helpers

def _rel(diff: float, scale: float) -> float:
    return diff / scale if scale > 0 else diff


def _summarise(suite, quantity, params, values, tol, provenance, exact=False):
    if exact:
        fails = [k for k, v in enumerate(values) if v != 0]
    else:
        fails = [k for k, v in enumerate(values) if not v <= tol]
    worst = float(max(values)) if values else 0.0
    return SuiteResult(suite, quantity, params, len(values), len(fails), worst,
                       0.0 if exact else tol, provenance, fails[:10])


def _check_common(n: int, trials: int, mode: str, n_min: int = 1):
    if n < n_min:
        raise UsageError(f"size must be >= {n_min}, got {n}")
    if trials < 1:
        raise UsageError("trials must be >= 1")
    if mode not in MODES:
        raise UsageError(f"mode must be one of {MODES}")


# ---------------------------------------------------------------------------
# suites

def pfaffian_det_suite(n: int, trials: int, seed: int, mode: str = "exact",
                       tol: float = 1e-9) -> SuiteResult:
    """``Pf(C) = det(-i(A + iB))`` on random elements of u(n)."""
    _check_common(n, trials, mode)
    vals = []
    for rng in trial_rngs(seed, trials):
        chk = verify_pfaffian_det(random_lie_element(rng, n, mode))
        vals.append(float(chk.residual) if mode == "exact" else chk.relative)
    return _summarise("lemma21", "pf_minus_det_residual",
                      {"n": n, "trials": trials, "seed": seed, "mode": mode},
                      vals, tol, "exact arithmetic identity" if mode == "exact"
                      else "float evaluation vs identity", exact=(mode == "exact"))


def pfaffian_oracle_suite(size: int, trials: int, seed: int, mode: str = "exact",
                          tol: float = 1e-10) -> SuiteResult:
    """Matching-sum Pfaffian against the top-power construction."""
    _check_common(size, trials, mode, n_min=2)
    if size % 2:
        raise UsageError("Pfaffian size must be even")
    vals = []
    for rng in trial_rngs(seed, trials):
        A = FormMatrix.from_scalars(random_skew_scalars(rng, size, mode))
        a, b = pfaffian(A), pfaffian_oracle(A)
        diff = a.distance(b)
        vals.append(float(diff) if mode == "exact" else _rel(diff, max(a.max_abs(), b.max_abs())))
    return _summarise("pfaffian", "matching_vs_top_power", {"size": size, "trials": trials,
                      "seed": seed, "mode": mode}, vals, tol, "top-power oracle",
                      exact=(mode == "exact"))


def pfaffian_covariance_suite(size: int, trials: int, seed: int) -> SuiteResult:
    """``Pf(G^T A G) = det(G) Pf(A)`` in exact arithmetic."""
    _check_common(size, trials, "exact", n_min=2)
    vals = []
    for rng in trial_rngs(seed, trials):
        A = np.array(random_skew_scalars(rng, size, "exact"), dtype=object)
        G = np.array([[random_rational(rng) for _ in range(size)] for _ in range(size)],
                     dtype=object)
        lhs = pfaffian_scalar((G.T @ A @ G).tolist())
        rhs = det_scalar(G.tolist(), "exact") * pfaffian_scalar(A.tolist())
        vals.append(float(abs(lhs - rhs)))
    return _summarise("pfaffian", "congruence_covariance", {"size": size, "trials": trials,
                      "seed": seed, "mode": "exact"}, vals, 0.0, "classical covariance",
                      exact=True)


def pf_squared_suite(rank: int, trials: int, seed: int, dim: int = 8,
                     tol: float = 1e-9) -> list[SuiteResult]:
    """``Pf(A)^2 = det(A)`` and ``p_n = e ^ e`` for random 2-form entries."""
    _check_common(rank, trials, "float", n_min=2)
    if rank % 2:
        raise UsageError("rank must be even")
    sq, pe = [], []
    for rng in trial_rngs(seed, trials):
        A = random_skew_forms(rng, rank, dim)
        pf = pfaffian(A)
        lhs, rhs = pf.wedge(pf), det_form(A)
        sq.append(_rel(lhs.distance(rhs), max(lhs.max_abs(), rhs.max_abs())))
        e = euler_form(A)
        p_top = pontryagin_forms(A).pontryagin[rank // 2]
        ee = e.wedge(e)
        pe.append(_rel(p_top.distance(ee), max(p_top.max_abs(), ee.max_abs())))
    params = {"rank": rank, "trials": trials, "seed": seed, "dim": dim, "mode": "float"}
    return [_summarise("pf-squared", "pf_squared_minus_det", params, sq, tol,
                       "determinant of the same matrix"),
            _summarise("pf-squared", "top_pontryagin_minus_euler_squared", params, pe, tol,
                       "euler form squared")]


def top_chern_euler_suite(n: int, trials: int, seed: int, dim: int = 8,
                          tol: float = 1e-9) -> SuiteResult:
    """``det((i/2pi) Omega_C)`` against ``Pf(-Omega_R / 2pi)`` coefficientwise."""
    _check_common(n, trials, "float")
    vals = []
    for rng in trial_rngs(seed, trials):
        vals.append(verify_top_chern_euler(random_skew_hermitian_forms(rng, n, dim)).relative)
    return _summarise("corollary22", "top_chern_minus_euler", {"n": n, "trials": trials,
                      "seed": seed, "dim": dim, "mode": "float"}, vals, tol,
                      "euler form of the realification")


def whitney_suite(n1: int, n2: int, trials: int, seed: int, dim: int = 8,
                  tol: float = 1e-9) -> SuiteResult:
    """``c(E1 + E2) = c(E1) ^ c(E2)`` for block-diagonal curvature."""
    _check_common(min(n1, n2), trials, "float")
    vals = []
    for rng in trial_rngs(seed, trials):
        O1 = random_skew_hermitian_forms(rng, n1, dim)
        O2 = random_skew_hermitian_forms(rng, n2, dim)
        c = _total(chern_forms(block_diag(O1, O2)).chern)
        prod = _total(chern_forms(O1).chern).wedge(_total(chern_forms(O2).chern))
        vals.append(_rel(c.distance(prod), max(c.max_abs(), prod.max_abs())))
    return _summarise("whitney", "total_chern_product_residual", {"n1": n1, "n2": n2,
                      "trials": trials, "seed": seed, "dim": dim, "mode": "float"}, vals, tol,
                      "product of total Chern forms")


def _total(forms):
    acc = forms[0]
    for f in forms[1:]:
        acc = acc + f
    return acc


def rank_two_pontryagin_check(omega12: Form) -> float:
    """``p_1 = Omega_12^2 / 4pi^2`` for a rank-2 real curvature."""
    zero = Form.zero(omega12.dim)
    O = FormMatrix([[zero, omega12], [-omega12, zero]])
    p1 = pontryagin_forms(O).pontryagin[1]
    ref = omega12.wedge(omega12).scale(1.0 / TWO_PI ** 2)
    return _rel(p1.distance(ref), max(ref.max_abs(), p1.max_abs()))


# ---------------------------------------------------------------------------
# named suites used by the command line

DEFAULTS = {
    "lemma21": {"n": 3, "trials": 100, "seed": 0, "mode": "exact"},
    "pfaffian": {"trials": 50, "seed": 0},
    "corollary22": {"trials": 30, "seed": 0},
    "whitney": {"trials": 20, "seed": 0},
    "pf-squared": {"trials": 30, "seed": 0},
}


def suite_cases(name: str, trials: int | None = None, seed: int = 0, n: int | None = None,
                mode: str | None = None) -> list:
    """Independent cases of a named suite as zero-argument callables, in output order.

    Each callable returns a list of :class:`SuiteResult`.
    """
    if name not in DEFAULTS:
        raise UsageError(f"unknown suite {name!r}; choose from {sorted(DEFAULTS)}")
    t = trials if trials is not None else DEFAULTS[name]["trials"]
    if t < 1:
        raise UsageError("trials must be >= 1")
    if n is not None and n < 1:
        raise UsageError(f"size must be >= 1, got {n}")
    if mode is not None and mode not in MODES:
        raise UsageError(f"mode must be one of {MODES}")
    if name == "lemma21":
        k = n if n is not None else DEFAULTS[name]["n"]
        m = mode or DEFAULTS[name]["mode"]
        return [lambda: [pfaffian_det_suite(k, t, seed, m)]]
    if name == "pfaffian":
        sizes = [2 * n] if n is not None else [2, 4, 6, 8]
        modes = [mode] if mode else list(MODES)
        cases = [(lambda s=s, m=m: [pfaffian_oracle_suite(s, t, seed, m)])
                 for s in sizes for m in modes]
        cases += [(lambda s=s: [pfaffian_covariance_suite(s, t, seed)]) for s in sizes]
        return cases
    if mode == "exact":
        raise UsageError(f"suite {name!r} runs in float mode only")
    if name == "corollary22":
        ns = [n] if n is not None else [1, 2, 3]
        return [(lambda k=k: [top_chern_euler_suite(k, t, seed)]) for k in ns]
    if name == "whitney":
        pairs = [(n, n)] if n is not None else [(1, 1), (1, 2), (2, 2)]
        return [(lambda a=a, b=b: [whitney_suite(a, b, t, seed)]) for a, b in pairs]
    ranks = [2 * n] if n is not None else [2, 4]
    return [(lambda k=k: pf_squared_suite(k, t, seed)) for k in ranks]


def run_suite(name: str, trials: int | None = None, seed: int = 0, n: int | None = None,
              mode: str | None = None) -> list[SuiteResult]:
    """Run one named suite serially and return its cases in a fixed order."""
    return [r for case in suite_cases(name, trials, seed, n, mode) for r in case()]
