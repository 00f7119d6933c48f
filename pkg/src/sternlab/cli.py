"""Command line entry point: ``sternlab <group> <command> [options]``.

Exit codes: 0 ok, 1 an invariant failed, 2 bad usage.
"""

from __future__ import annotations

import argparse
import io
import json
import math
import os
import sys
from fractions import Fraction

import numpy as np

SCHEMA_VERSION = 1

EXIT_OK = 0
EXIT_INVARIANT = 1
EXIT_USAGE = 2


class UsageError(Exception):
    pass


def _level_range(text: str) -> list[int]:
    """'12:24' -> [12, ..., 24]; '20' -> [20]."""
    try:
        if ":" in text:
            a, b = text.split(":")
            lo, hi = int(a), int(b)
            if hi < lo:
                raise ValueError
            return list(range(lo, hi + 1))
        return [int(text)]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected N or A:B, got {text!r}") from None


def _tau_grid(text: str) -> list[float]:
    """'a:b:step' -> a, a+step, ..., b (inclusive, rounded to the step's decimals)."""
    try:
        a, b, step = (float(p) for p in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a:b:step, got {text!r}") from None
    if step <= 0 or b < a:
        raise argparse.ArgumentTypeError("need step > 0 and b >= a")
    n = int(math.floor((b - a) / step + 1e-9))
    return [round(a + k * step, 12) + 0.0 for k in range(n + 1)]


def _complex(text: str) -> complex:
    try:
        return complex(text.replace(" ", ""))
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None


def _resolved_config(args: argparse.Namespace) -> dict:
    cfg = {}
    for k, v in sorted(vars(args).items()):
        if k in ("func", "output"):
            continue
        if isinstance(v, complex):
            v = [v.real, v.imag]
        cfg[k] = v
    return cfg


def _emit(args, payload: dict, csv_header: list[str] | None = None,
          csv_rows: list[list] | None = None, text: str | None = None) -> None:
    cfg = _resolved_config(args)
    fmt = args.format
    buf = io.StringIO()
    if fmt == "json":
        doc = {"schema_version": SCHEMA_VERSION, "config": cfg, **payload}
        buf.write(json.dumps(doc, indent=2, sort_keys=True, default=_json_default) + "\n")
    elif fmt == "csv":
        if csv_header is None:
            raise UsageError("this command has no CSV form; use --format json")
        buf.write(f"# schema_version={SCHEMA_VERSION}\n")
        buf.write("# config=" + json.dumps(cfg, sort_keys=True, default=_json_default) + "\n")
        buf.write(",".join(csv_header) + "\n")
        for row in csv_rows:
            buf.write(",".join(_csv_cell(c) for c in row) + "\n")
    else:
        buf.write(text if text is not None else json.dumps(payload, default=_json_default))
        if not buf.getvalue().endswith("\n"):
            buf.write("\n")
    if args.output:
        with open(args.output, "w", newline="") as fh:
            fh.write(buf.getvalue())
    else:
        sys.stdout.write(buf.getvalue())


def _json_default(o):
    if isinstance(o, complex):
        return [o.real, o.imag]
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, Fraction):
        return str(o)
    raise TypeError(f"cannot serialise {type(o).__name__}")


def _csv_cell(c) -> str:
    if isinstance(c, float):
        return repr(c)
    return str(c)


def _set_threads(args) -> None:
    if args.threads is not None:
        if args.threads < 1:
            raise UsageError("--threads must be >= 1")
        os.environ["STERN_SPECTRAL_THREADS"] = str(args.threads)


# ---------------------------------------------------------------- stern

def cmd_stern(args) -> int:
    from .stern import row_values, stern
    if args.stern_cmd == "eval":
        if args.n < 0:
            raise UsageError("n must be nonnegative")
        v = stern(args.n)
        _emit(args, {"n": args.n, "value": str(v) if v.bit_length() > 53 else v},
              ["n", "value"], [[args.n, v]], text=str(v))
        return EXIT_OK
    if args.stern_cmd == "row":
        if args.N < 0:
            raise UsageError("N must be nonnegative")
        vals = [int(v) for v in row_values(args.N)]
        _emit(args, {"N": args.N, "values": vals}, ["n", "value"],
              [[(1 << args.N) + i, v] for i, v in enumerate(vals)],
              text=" ".join(map(str, vals)))
        return EXIT_OK
    if args.stern_cmd == "tree":
        if not 0 <= args.depth <= 16:
            raise UsageError("--depth must be in [0, 16]")
        rows = tree_rows(args.kind, args.depth)
        _emit(args, {"kind": args.kind, "rows": [[_frac(p, q) for p, q in row] for row in rows]},
              ["level", "position", "numerator", "denominator"],
              [[lvl, i, p, q] for lvl, row in enumerate(rows) for i, (p, q) in enumerate(row)],
              text="\n".join(" ".join(_frac(p, q) for p, q in row) for row in rows))
        return EXIT_OK
    raise UsageError("unknown stern command")


def _frac(p: int, q: int) -> str:
    return f"{p}/{q}"


def tree_rows(kind: str, depth: int) -> list[list[tuple[int, int]]]:
    """Rows 0..depth as (numerator, denominator) pairs, unreduced forms kept as written.

    stern-brocot: F_N = s(m)/s(m + 2**N), m = 0..2**N.
    calkin-wilf: row N = s(n+1)/s(n), n in I_N, in breadth-first order.
    """
    from .stern import stern_table
    s = [int(v) for v in stern_table(depth + 1)]
    out = []
    for N in range(depth + 1):
        P = 1 << N
        if kind == "stern-brocot":
            out.append([(s[m], s[m + P]) for m in range(P + 1)])
        elif kind == "calkin-wilf":
            out.append([(s[n + 1], s[n]) for n in range(P, 2 * P)])
        else:
            raise UsageError(f"unknown tree kind {kind!r}")
    return out


# ---------------------------------------------------------------- constants

def cmd_constants(args) -> int:
    from . import constants as K
    from .minkowski import build_quadrature
    _set_threads(args)
    if args.constants_cmd == "alpha":
        rule = build_quadrature(args.depth)
        mc = None
        if args.all_routes:
            mc = K.MCConfig(args.walk_length, args.walks, args.seed, args.burn_in, args.threads)
        rep = K.alpha_all_routes(rule, mc, perturb=args.perturb)
        stderr = {"alpha_lyapunov": rep.alpha_lyapunov_stderr} if mc else {}
        rows = rep.rows()
    else:
        routes = [r.strip() for r in args.routes.split(",") if r.strip()]
        bad = set(routes) - {"quad", "alt", "spectral"}
        if bad or not routes:
            raise UsageError(f"unknown sigma2 routes {sorted(bad)}")
        rep = K.sigma2_all_routes(build_quadrature(args.depth), routes, perturb=args.perturb)
        stderr = {}
        rows = rep.rows()
    csv_rows = [[k, tag, v, stderr.get(k, "")] for k, tag, v in rows]
    _emit(args, {"report": rep.to_dict(), "ok": not rep.failures},
          ["route", "tag", "value", "stderr"], csv_rows,
          text=K.report_table(rows, stderr) + "".join(f"\nFAIL: {f}" for f in rep.failures))
    if rep.failures:
        for f in rep.failures:
            print(f"invariant failed: {f}", file=sys.stderr)
        return EXIT_INVARIANT
    return EXIT_OK


# ---------------------------------------------------------------- spectrum

def cmd_spectrum(args) -> int:
    from . import transfer as T
    _set_threads(args)
    if args.spectrum_cmd == "eig":
        try:
            op = T.build_operator(args.tau, args.z, args.degree)
        except ValueError as e:
            raise UsageError(str(e)) from None
        sd = T.dominant_eig(op)
        d = sd.to_dict(op)
        d["lambda2"] = [sd.lambda2.real, sd.lambda2.imag]
        d["n_max"] = op.n_max
        d["degree"] = op.degree
        _emit(args, {"spectrum": d},
              ["tau_re", "tau_im", "z_re", "z_im", "lambda_re", "lambda_im", "gap", "residual"],
              [[op.tau.real, op.tau.imag, op.z.real, op.z.imag, sd.lam.real, sd.lam.imag,
                sd.gap_ratio, sd.residual]],
              text=f"lambda = {sd.lam.real:.15g}{sd.lam.imag:+.3g}j  gap = {sd.gap_ratio:.6g}  residual = {sd.residual:.3g}")
        return EXIT_OK
    taus = args.tau_grid
    if max(abs(t) for t in taus) > T.ETA_WORK:
        raise UsageError(f"tau grid leaves the working window |tau| <= {T.ETA_WORK}")
    pts = T.rho_curve(taus, args.degree, warm_start=False)
    rows = [[p.tau.real, p.rho.real, p.rho.imag, complex(p.U).real] for p in pts]
    _emit(args, {"rho": [{"tau": r[0], "re_rho": r[1], "im_rho": r[2], "U": r[3]} for r in rows]},
          ["tau", "re_rho", "im_rho", "U"], rows,
          text="\n".join(f"{r[0]:+.4f}  rho = {r[1]:.15f}  U = {r[3]:+.12f}" for r in rows))
    return EXIT_OK


# ---------------------------------------------------------------- clt

def cmd_clt(args) -> int:
    from . import clt
    _set_threads(args)
    if args.clt_cmd == "dist":
        mode = "sampled" if args.sample else "enumerated"
        try:
            d = clt.empirical_dist(args.N, mode, count=args.sample or 0, seed=args.seed)
        except ValueError as e:
            raise UsageError(str(e)) from None
        hist = [[float(lo), float(hi), int(c)] for lo, hi, c in
                zip(d.hist_edges[:-1], d.hist_edges[1:], d.hist_counts)]
        if args.format == "csv":
            cfg = _resolved_config(args)
            body = (f"# schema_version={SCHEMA_VERSION}\n# config=" + json.dumps(cfg, sort_keys=True)
                    + "\n" + d.histogram_csv())
            _write(args, body)
        else:
            _emit(args, {"summary": d.summary(), "histogram": hist},
                  text=json.dumps(d.summary(), indent=2, sort_keys=True))
        return EXIT_OK
    if args.clt_cmd == "quasipowers":
        if abs(args.tau) > 0.1:
            raise UsageError("--tau must satisfy |tau| <= 0.1")
        if len(args.N) < 2:
            raise UsageError("--N needs at least two levels")
        if max(args.N) > 24:
            raise UsageError("--N levels must be <= 24")
        q = clt.quasi_powers_fit(args.tau, args.N)
        rows = [[N, lm] for N, lm in zip(q.N_list, q.log_moments)]
        _emit(args, {"fit": q.to_dict(), "ok": q.gap < 1e-3}, ["N", "log_moment"], rows,
              text=f"U_emp = {q.U_emp:.10f}  U_spectral = {q.U_spectral:.10f}  gap = {q.gap:.3g}")
        return EXIT_OK if q.gap < 1e-3 else EXIT_INVARIANT
    raise UsageError("unknown clt command")


def _write(args, body: str) -> None:
    if args.output:
        with open(args.output, "w", newline="") as fh:
            fh.write(body)
    else:
        sys.stdout.write(body)


# ---------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--format", choices=["json", "csv", "text"], default="text")
    common.add_argument("--output", "-o", default=None, help="write to a file instead of stdout")
    common.add_argument("--threads", type=int, default=None,
                        help="cap on worker threads (default: STERN_SPECTRAL_THREADS or all cores)")

    p = argparse.ArgumentParser(prog="sternlab", description="Stern sequence numerical laboratory")
    sub = p.add_subparsers(dest="group", required=True)

    st = sub.add_parser("stern", help="exact Stern values, rows and trees")
    sts = st.add_subparsers(dest="stern_cmd", required=True)
    e = sts.add_parser("eval", parents=[common])
    e.add_argument("n", type=int)
    r = sts.add_parser("row", parents=[common])
    r.add_argument("N", type=int)
    t = sts.add_parser("tree", parents=[common])
    t.add_argument("--kind", choices=["stern-brocot", "calkin-wilf"], default="calkin-wilf")
    t.add_argument("--depth", type=int, default=3)
    st.set_defaults(func=cmd_stern)

    co = sub.add_parser("constants", help="alpha and sigma^2 by every route")
    cos = co.add_subparsers(dest="constants_cmd", required=True)
    a = cos.add_parser("alpha", parents=[common])
    a.add_argument("--depth", type=int, default=20)
    a.add_argument("--all-routes", action="store_true", help="include the Monte Carlo route")
    a.add_argument("--walks", type=int, default=100_000)
    a.add_argument("--walk-length", type=int, default=2000)
    a.add_argument("--burn-in", type=int, default=200)
    a.add_argument("--seed", type=int, default=20240601)
    a.add_argument("--perturb", type=float, nargs="?", const=1e-2, default=0.0,
                   help="shift one route (negative control; should fail)")
    s2 = cos.add_parser("sigma2", parents=[common])
    s2.add_argument("--depth", type=int, default=12)
    s2.add_argument("--routes", default="quad,alt,spectral")
    s2.add_argument("--perturb", type=float, nargs="?", const=1e-2, default=0.0,
                    help="shift one route (negative control; should fail)")
    co.set_defaults(func=cmd_constants)

    sp = sub.add_parser("spectrum", help="transfer operator eigenvalues and rho(tau)")
    sps = sp.add_subparsers(dest="spectrum_cmd", required=True)
    ei = sps.add_parser("eig", parents=[common])
    ei.add_argument("--tau", type=_complex, default=0j)
    ei.add_argument("--z", type=_complex, default=0.5 + 0j)
    ei.add_argument("--degree", type=int, default=32)
    rh = sps.add_parser("rho", parents=[common])
    rh.add_argument("--tau-grid", type=_tau_grid, default=_tau_grid("-0.1:0.1:0.01"))
    rh.add_argument("--degree", type=int, default=32)
    sp.set_defaults(func=cmd_spectrum)

    cl = sub.add_parser("clt", help="empirical central limit checks")
    cls = cl.add_subparsers(dest="clt_cmd", required=True)
    d = cls.add_parser("dist", parents=[common])
    d.add_argument("--N", type=int, default=20)
    d.add_argument("--enumerate", action="store_true", help="full row enumeration (default)")
    d.add_argument("--sample", type=int, default=0, help="draw this many uniform n instead")
    d.add_argument("--seed", type=int, default=0)
    q = cls.add_parser("quasipowers", parents=[common])
    q.add_argument("--tau", type=float, default=0.05)
    q.add_argument("--N", type=_level_range, default=_level_range("12:24"))
    cl.set_defaults(func=cmd_clt)
    return p


# options whose values may start with a minus sign
_SIGNED = ("--tau", "--tau-grid", "--z", "--perturb")


def _glue_signed(argv: list[str]) -> list[str]:
    # argparse reads "-0.1:0.1:0.01" as an option; rewrite "--tau-grid -0.1:..." as "--tau-grid=-0.1:..."
    out, i = [], 0
    while i < len(argv):
        a = argv[i]
        if a in _SIGNED and i + 1 < len(argv) and argv[i + 1][:1] == "-" \
                and argv[i + 1][1:2] in set("0123456789."):
            out.append(f"{a}={argv[i + 1]}")
            i += 2
            continue
        out.append(a)
        i += 1
    return out


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    argv = _glue_signed(list(sys.argv[1:] if argv is None else argv))
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code) if e.code is not None else EXIT_OK
    try:
        if args.group == "clt" and args.clt_cmd == "dist" and args.enumerate and args.sample:
            raise UsageError("--enumerate and --sample are exclusive")
        return args.func(args)
    except UsageError as e:
        print(f"sternlab: error: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
