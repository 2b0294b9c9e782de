"""Command-line entry point.

Results are JSON lines on stdout (one :class:`ResultRecord` each), a short
human summary goes to stderr.  Exit status: 0 all checks passed, 1 a
mathematical check failed (or a zero was flagged unreliable), 2 usage error.
"""

from __future__ import annotations

import argparse
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import __version__
from .errors import DegenerateZeroError, DomainError, UnsupportedError, UsageError
from .fuzz import DEFAULTS as SUITE_DEFAULTS, suite_cases
from .records import RecordWriter, ResultRecord, write_columns

THREADS_ENV = "CHERNLAB_THREADS"
EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


# ---------------------------------------------------------------------------
# argument helpers

def _ints(text: str) -> tuple:
    try:
        vals = tuple(int(t) for t in str(text).replace("x", ",").split(",") if t.strip())
    except ValueError:
        raise UsageError(f"expected comma-separated integers, got {text!r}") from None
    if not vals or any(v < 1 for v in vals):
        raise UsageError(f"grid counts must be positive integers, got {text!r}")
    return vals


def _complex(text: str) -> complex:
    try:
        return complex(str(text).replace(" ", "").replace("i", "j"))
    except ValueError:
        raise UsageError(f"expected a complex number like 0.3+0.2j, got {text!r}") from None


def read_config(path) -> dict:
    """``key = value`` lines; ``#`` starts a comment.  Keys use flag names without dashes."""
    out = {}
    try:
        with open(path) as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from None
    for k, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{k}: expected key=value")
        key, val = (s.strip() for s in line.split("=", 1))
        out[key.replace("-", "_")] = val
    return out


def _resolve(args, config: dict, defaults: dict, types: dict) -> None:
    """Fill unset flags from the config file, then from ``defaults``."""
    for key, default in defaults.items():
        if getattr(args, key, None) is not None:
            continue
        if key in config:
            conv = types.get(key, str)
            setattr(args, key, conv(config[key]))
        else:
            setattr(args, key, default)


def _threads() -> int:
    raw = os.environ.get(THREADS_ENV, "1")
    try:
        n = int(raw)
    except ValueError:
        raise UsageError(f"{THREADS_ENV} must be an integer, got {raw!r}") from None
    return max(1, n)


# ---------------------------------------------------------------------------
# commands

def cmd_verify(args, out: RecordWriter, config: dict) -> list[str]:
    _resolve(args, config, {"trials": None, "seed": 0, "n": None, "mode": None},
             {"trials": int, "seed": int, "n": int, "mode": str})
    if args.n is not None and args.n < 1:
        raise UsageError(f"--n must be >= 1, got {args.n}")
    cases = suite_cases(args.suite, args.trials, args.seed, args.n, args.mode)
    threads = _threads()
    t0 = time.perf_counter()
    if threads > 1 and len(cases) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(lambda c: c(), cases))
    else:
        results = [c() for c in cases]
    elapsed = time.perf_counter() - t0
    lines = []
    for res in (r for group in results for r in group):
        rec = ResultRecord(f"verify {args.suite}", res.quantity, res.worst,
                           parameters=dict(res.parameters), expected=0.0,
                           tolerance=res.tolerance, passed=res.passed,
                           provenance=res.provenance,
                           extra={"trials": res.trials, "failures": res.failures,
                                  "failed_trials": res.failed_trials})
        if args.timing:
            rec.runtime_ms = int(round(1000 * elapsed / max(1, len(cases))))
        out.emit(rec)
        lines.append(f"verify {args.suite} {res.quantity} {res.parameters}: "
                     f"{res.trials - res.failures}/{res.trials} passed, worst {res.worst:.3g}")
    return lines


def cmd_charnum(args, out, config):
    from .zoo import characteristic_number, class_form, get_model
    _resolve(args, config, {"grid": None, "radius": None, "delta": None},
             {"grid": _ints, "radius": float, "delta": float})
    kw = {}
    if args.grid is not None:
        kw["nodes"] = args.grid
    if args.radius is not None:
        kw["radius"] = args.radius
    if args.delta is not None:
        kw["delta"] = args.delta
    m = get_model(args.model, **kw)
    t0 = time.perf_counter()
    cn = characteristic_number(m, args.cls, refine=args.refine)
    ms = int(round(1000 * (time.perf_counter() - t0)))
    params = {**cn.parameters, "class": cn.expr, "refine": bool(args.refine)}
    rec = ResultRecord.compare("charnum", f"int {cn.expr}", cn.value, cn.expected,
                               cn.tolerance, parameters=params,
                               provenance="model registry (cohomology ring)"
                               if cn.expected is not None else "no registered value",
                               runtime_ms=ms if args.timing else None,
                               extra={"truncation_error": cn.truncation_error,
                                      "refinement_error": cn.refinement_error,
                                      "correction": cn.correction, "raw": cn.raw})
    out.emit(rec)
    if args.emit_csv:
        f = class_form(m, args.cls)
        pts = m.sample_points((32,) * m.base.dim)
        top = tuple(range(1, m.base.dim + 1))
        vals = np.broadcast_to(np.real(f.evaluate(pts).terms.get(top, 0.0)), pts.shape[1:])
        names = list(m.base.names) if m.base.names else [f"x{i + 1}" for i in range(m.base.dim)]
        write_columns(args.emit_csv, names + ["integrand"],
                      [p.ravel() for p in pts] + [np.ravel(vals)])
    return [f"charnum {args.model} {cn.expr} = {cn.value:.6f}"
            + (f" (expected {cn.expected})" if cn.expected is not None else "")]


_FLAT_TOL = 1e-10
_RESIDUAL_TOL = 1e-4
_FIBER_TOL = 1e-3


def cmd_transgression(args, out, config):
    from .transgression import transgression_eta
    from .zoo import get_model
    _resolve(args, config, {"step": 1e-4, "grid": (64, 64, 64), "n_quad": 2},
             {"step": float, "grid": _ints, "n_quad": int})
    name = args.model.lower()
    m = get_model("s2" if name == "ts2" else name)
    t0 = time.perf_counter()
    res = transgression_eta(m, n_quad=args.n_quad, grid=tuple(args.grid), step=args.step)
    ms = int(round(1000 * (time.perf_counter() - t0))) if args.timing else None
    params = {**res.parameters, "model": name}
    flat = name == "torus"
    tol = (_FLAT_TOL if flat else _RESIDUAL_TOL) if args.check else None
    exp = 0.0 if args.check else None
    out.emit(ResultRecord.compare("transgression", "max |p*e + d eta|", res.residual, exp, tol,
                                  parameters=params, runtime_ms=ms,
                                  provenance="closed-form identity p*e = -d eta"))
    out.emit(ResultRecord.compare("transgression", "fiber integral of eta (mean)", res.fiber_mean,
                                  1.0 if args.check else None,
                                  _FIBER_TOL if args.check else None, parameters=params,
                                  provenance="adopted normalization: unit fiber integral",
                                  extra={"fiber_integrals": res.fiber_integrals}))
    out.emit(ResultRecord.compare("transgression", "fiber integral spread", res.fiber_spread,
                                  exp, _FIBER_TOL if args.check else None, parameters=params,
                                  provenance="fiber integral is constant on the base"))
    return [f"transgression {name}: residual {res.residual:.3e}, "
            f"fiber mean {res.fiber_mean:.6f}, spread {res.fiber_spread:.2e}"]


def cmd_thom(args, out, config):
    from .transgression import thom_form
    from .zoo import get_model
    _resolve(args, config, {"rho": "smoothstep", "r_max": 2.5, "step": 1e-4, "nodes": (500, 64)},
             {"rho": str, "r_max": float, "step": float, "nodes": _ints})
    m = None if args.model in (None, "point") else get_model(
        "s2" if args.model == "ts2" else args.model)
    t0 = time.perf_counter()
    res = thom_form(m, rho=args.rho, r_max=args.r_max, step=args.step, nodes=tuple(args.nodes))
    ms = int(round(1000 * (time.perf_counter() - t0))) if args.timing else None
    params = {**res.parameters, "model": args.model or "point"}
    chk = args.check
    out.emit(ResultRecord.compare("thom", "fiber integral of Phi", res.fiber_integral,
                                  1.0 if chk else None, 1e-2 if chk else None, parameters=params,
                                  runtime_ms=ms, provenance="Thom class normalization"))
    out.emit(ResultRecord.compare("thom", "max |Phi| off the bump annulus", res.support_leak,
                                  0.0 if chk else None, 1e-12 if chk else None,
                                  parameters=params, provenance="support of d rho"))
    out.emit(ResultRecord.compare("thom", "max |d Phi|", res.closed_residual,
                                  0.0 if chk else None, 1e-6 if chk else None,
                                  parameters=params, provenance="Phi is exact"))
    return [f"thom: fiber integral {res.fiber_integral:.6f}, leak {res.support_leak:.1e}, "
            f"closedness {res.closed_residual:.1e}"]


def _zero_records(command, recs, params, out):
    for r in recs:
        d = r.as_dict()
        out.emit(ResultRecord(command, "zero", d["index"], parameters=params,
                              passed=None if not r.flagged else False,
                              provenance="grid scan + Newton refinement",
                              extra=d))


def cmd_zeros(args, out, config):
    from .catalog import get_section
    from .loci import index_sum, load_section_table
    from .zoo import characteristic_number, get_model
    _resolve(args, config, {"grid": None}, {"grid": _ints})
    if args.table:
        m = get_model(args.model)
        s = load_section_table(args.table, name=args.section)
        s.bundle = m
    else:
        s = get_section(args.model, args.section)
        m = s.bundle
    expr = "e" if m.kind == "real" else "c1"
    cn = characteristic_number(m, expr)
    res = index_sum(s, cn.value, grid=args.grid, label=f"int {expr}")
    params = {"model": m.name, "section": args.section, "table": args.table,
              "grid": list(args.grid) if args.grid else None, **cn.parameters}
    _zero_records("zeros", res.records, params, out)
    tol = cn.tolerance if cn.tolerance is not None else 1e-2
    rec = ResultRecord.compare("zeros", "index sum", res.total, cn.value, tol, parameters=params,
                               provenance=f"Chern-Weil integral of {expr}",
                               extra={"reliable": res.reliable, "zeros": len(res.records)})
    if not res.reliable:
        rec.passed = False
    out.emit(rec)
    if args.emit_csv:
        locs = np.array([r.location for r in res.records]).reshape(len(res.records), -1)
        names = [f"x{i + 1}" for i in range(locs.shape[1] if locs.size else m.base.dim)]
        cols = [locs[:, i] for i in range(len(names))] if locs.size else [[] for _ in names]
        write_columns(args.emit_csv, names + ["index", "flagged"],
                      cols + [[r.index for r in res.records],
                              [int(r.flagged) for r in res.records]])
    return [f"zeros {m.name}/{args.section}: index sum {res.total} vs int {expr} = {cn.value:.6f}"
            + ("" if res.reliable else " (UNRELIABLE zeros flagged)")]


def cmd_dual_check(args, out, config):
    from . import catalog
    _resolve(args, config, {"d": 2}, {"d": int})
    ex = args.example
    if ex == "line":
        chk, recs = catalog.dual_check_line(args.d)
        params = {**chk.parameters, "example": ex, "d": args.d, "xi": "1"}
        _zero_records("dual-check", recs, params, out)
        lhs, rhs, disc, tol = chk.lhs, chk.rhs, chk.discrepancy, 2e-2
        extra = {"lhs_truncation": chk.lhs_truncation}
        if args.emit_csv:
            write_columns(args.emit_csv, ["x", "y", "index"],
                          [[r.location[0] for r in recs], [r.location[1] for r in recs],
                           [r.index for r in recs]])
    elif ex == "product":
        chk = catalog.dual_check_product()
        params = {**chk.parameters, "example": ex, "xi": "pr2* area form / area"}
        lhs, rhs, disc, tol = chk.lhs, chk.rhs, chk.discrepancy, 2e-2
        extra = {"lhs_truncation": chk.lhs_truncation, "closed_residual": chk.closed_residual}
    elif ex in ("sum-euler", "normal-euler"):
        fn = catalog.sum_bundle_euler_check if ex == "sum-euler" else catalog.normal_euler_check
        chk = fn()
        params = {"example": ex, **{k: v for k, v in chk.details.items()
                                    if k in ("a", "b", "q0", "q1", "nodes", "radius",
                                             "scan_grid", "step")}}
        lhs, rhs, disc, tol = chk.lhs, chk.rhs, chk.discrepancy, 5e-2
        extra = chk.details
        if args.emit_csv:
            P = chk.locus
            write_columns(args.emit_csv, [f"x{i + 1}" for i in range(P.shape[0])], list(P))
    else:
        raise UsageError(f"unknown example {ex!r}")
    rec = ResultRecord.compare("dual-check", "lhs - rhs", lhs - rhs, 0.0, tol, parameters=params,
                               provenance="both sides computed independently",
                               extra={"lhs": lhs, "rhs": rhs, **extra})
    out.emit(rec)
    return [f"dual-check {ex}: lhs {lhs:.6f} rhs {rhs:.6f} (|diff| {disc:.2e})"]


def cmd_intersect(args, out, config):
    from .catalog import intersection_example
    _resolve(args, config, {"d": 1, "q": 0.3 + 0.2j, "grid": (128, 128)},
             {"d": int, "q": _complex, "grid": _ints})
    ex = intersection_example(args.d, args.q, args.complement, tuple(args.grid))
    res = ex.result
    params = ex.parameters
    _zero_records("intersect", res.records, params, out)
    rec = ResultRecord.compare("intersect", "intersection number", res.count, ex.integral, 1e-2,
                               parameters=params, provenance="int_S c1(i*E) by Chern-Weil",
                               extra={"reliable": res.reliable, "split_signs": res.split_signs,
                                      "convention_disagreement": res.convention_disagreement,
                                      "integral_truncation": ex.integral_truncation,
                                      "boundary_min_norm": ex.boundary_min_norm})
    if not res.reliable:
        rec.passed = False
    out.emit(rec)
    if args.emit_csv:
        write_columns(args.emit_csv, ["x", "y", "index"],
                      [[r.location[0] for r in res.records], [r.location[1] for r in res.records],
                       [r.index for r in res.records]])
    return [f"intersect d={args.d}: count {res.count} vs int c1 = {ex.integral:.6f}"]


# ---------------------------------------------------------------------------
# parser

def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="chernlab", description="Characteristic-class computations and checks.")
    p.add_argument("--version", action="version", version=f"chernlab {__version__}")
    common = _Parser(add_help=False)
    common.add_argument("--config", help="key=value file presetting flags")
    common.add_argument("--timing", action="store_true", help="fill runtime_ms in records")
    common.add_argument("--emit-csv", metavar="PATH", help="write plot data as columnar text")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    v = sub.add_parser("verify", parents=[common], help="seeded identity fuzz suites")
    v.add_argument("suite", choices=sorted(SUITE_DEFAULTS))
    v.add_argument("--n", type=int)
    v.add_argument("--trials", type=int)
    v.add_argument("--seed", type=int)
    v.add_argument("--mode", choices=("exact", "float"))
    v.set_defaults(func=cmd_verify)

    c = sub.add_parser("charnum", parents=[common], help="integrate a characteristic monomial")
    c.add_argument("--model", required=True)
    c.add_argument("--class", dest="cls", required=True)
    c.add_argument("--grid", type=_ints, help="quadrature nodes, e.g. 512,1024 or 24,8")
    c.add_argument("--radius", type=float)
    c.add_argument("--delta", type=float, help="cap size of the sphere chart")
    c.add_argument("--refine", action="store_true")
    c.set_defaults(func=cmd_charnum)

    t = sub.add_parser("transgression", parents=[common], help="p*e + d eta residual")
    t.add_argument("--model", required=True)
    t.add_argument("--check", action="store_true")
    t.add_argument("--step", type=float)
    t.add_argument("--grid", type=_ints)
    t.add_argument("--n-quad", type=int)
    t.set_defaults(func=cmd_transgression)

    th = sub.add_parser("thom", parents=[common], help="Thom form checks")
    th.add_argument("--model", default=None)
    th.add_argument("--check", action="store_true")
    th.add_argument("--rho", choices=("smoothstep", "quintic", "smooth"))
    th.add_argument("--r-max", type=float)
    th.add_argument("--step", type=float)
    th.add_argument("--nodes", type=_ints)
    th.set_defaults(func=cmd_thom)

    z = sub.add_parser("zeros", parents=[common], help="zeros and index sum of a section")
    z.add_argument("--model", required=True)
    z.add_argument("--section", required=True)
    z.add_argument("--table", help="columnar section table on a regular grid")
    z.add_argument("--grid", type=_ints)
    z.set_defaults(func=cmd_zeros)

    d = sub.add_parser("dual-check", parents=[common], help="both-sides duality checks")
    d.add_argument("--example", required=True,
                   choices=("line", "product", "sum-euler", "normal-euler"))
    d.add_argument("--d", type=int)
    d.set_defaults(func=cmd_dual_check)

    i = sub.add_parser("intersect", parents=[common], help="intersection number example")
    i.add_argument("--d", type=int)
    i.add_argument("--q", type=_complex)
    i.add_argument("--complement", action="store_true")
    i.add_argument("--grid", type=_ints)
    i.set_defaults(func=cmd_intersect)
    return p


def main(argv=None, stdout=None, stderr=None) -> int:
    stdout = stdout if stdout is not None else sys.stdout
    stderr = stderr if stderr is not None else sys.stderr
    out = RecordWriter(stdout)
    try:
        args = build_parser().parse_args(argv)
        if not getattr(args, "command", None):
            raise UsageError("missing command; try --help")
        config = read_config(args.config) if args.config else {}
        lines = args.func(args, out, config)
    except (UsageError, UnsupportedError) as exc:
        print(f"chernlab: error: {exc}", file=stderr)
        return EXIT_USAGE
    except (DomainError, DegenerateZeroError, ArithmeticError) as exc:
        print(f"chernlab: check failed: {exc}", file=stderr)
        return EXIT_FAIL
    for line in lines:
        print(line, file=stderr)
    failed = out.failed
    total = sum(1 for r in out.records if r.passed is not None)
    print(f"{total - len(failed)}/{total} checks passed", file=stderr)
    return EXIT_FAIL if failed else EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
