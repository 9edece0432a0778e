"""Command line front end over the model, elimination, and analysis layers.

Every subcommand emits a machine-readable report (JSON by default, CSV
for grids and trajectories) carrying the tool version and the argv that
produced it, so identical invocations reproduce byte-identical output.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import resource
import signal
import sys
from fractions import Fraction

from . import __version__, analysis, model
from .elim import (
    dixon_matrix,
    dixon_polynomial,
    edf_determinant,
    strip_known_factors,
    sylvester_resultant,
)
from .polyring import Polynomial

_log = logging.getLogger("rdp.cli")

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_INVALID = 2
EXIT_BUDGET = 3


class BudgetExceeded(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on bad usage; the contract reserves 2 for
    # validation failures and wants 1 here
    def error(self, message):
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# ---------------------------------------------------------------------
# value parsing and deterministic emission


def rational(text: str) -> Fraction:
    """Exact rational from 'p/q', decimal, or integer literals."""
    try:
        return Fraction(text.strip())
    except (ValueError, ZeroDivisionError) as exc:
        raise argparse.ArgumentTypeError(f"not a rational: {text!r}") from exc


def _show_num(v):
    """JSON-ready view: exact rationals as strings, floats as floats."""
    if isinstance(v, Fraction):
        if v.denominator == 1:
            return int(v)
        return f"{v.numerator}/{v.denominator}"
    if isinstance(v, float) and not math.isfinite(v):
        return None
    return v


def _f17(x: float) -> str:
    return format(float(x), ".17g")


def _jdump(obj, indent=0) -> str:
    """Deterministic JSON: sorted keys, floats at 17 significant digits,
    non-finite floats as null."""
    pad = "  " * indent
    inner = "  " * (indent + 1)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        rows = [
            f"{inner}{json.dumps(str(k))}: {_jdump(obj[k], indent + 1)}"
            for k in sorted(obj, key=str)
        ]
        return "{\n" + ",\n".join(rows) + "\n" + pad + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        rows = [f"{inner}{_jdump(v, indent + 1)}" for v in obj]
        return "[\n" + ",\n".join(rows) + "\n" + pad + "]"
    if isinstance(obj, bool) or obj is None:
        return json.dumps(obj)
    if isinstance(obj, float):
        if not math.isfinite(obj):
            return "null"
        return _f17(obj)
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, Fraction):
        return json.dumps(_show_num(obj))
    return json.dumps(obj)


def _report(args, payload: dict) -> dict:
    out = {"tool_version": __version__, "input": {"argv": list(args.argv)}}
    out.update(payload)
    return out


def _csv_header(args) -> str:
    return (f"# tool_version={__version__}\n"
            f"# input={json.dumps(list(args.argv))}\n")


def _emit(args, payload: dict, text_lines=None, csv_text=None) -> int:
    fmt = args.format
    if fmt == "json" or (fmt == "text" and text_lines is None):
        body = _jdump(_report(args, payload)) + "\n"
    elif fmt == "csv":
        if csv_text is None:
            raise ValueError("this subcommand has no CSV form")
        body = _csv_header(args) + csv_text
    else:
        head = [f"tool_version={__version__}"]
        body = "\n".join(head + list(text_lines)) + "\n"
    if args.output:
        with open(args.output, "w") as fh:
            fh.write(body)
    else:
        sys.stdout.write(body)
    return EXIT_OK


def _read_config(path: str) -> str:
    if path == "-":
        return sys.stdin.read()
    with open(path) as fh:
        return fh.read()


# ---------------------------------------------------------------------
# subcommands


def _model_from_args(args) -> model.ModelParams:
    if getattr(args, "config", None):
        m = model.load_params(_read_config(args.config))
        if isinstance(m, model.PhysicalParams):
            m, _scales = model.derive_dimensionless(m)
        return m
    return model.ModelParams(delta=args.delta, sigma=args.sigma,
                             alpha=args.alpha, eta=args.eta, chi=args.chi,
                             Q=getattr(args, "Q", 0) or 0)


def cmd_params(args) -> int:
    p = model.load_params(_read_config(args.config))
    if not isinstance(p, model.PhysicalParams):
        raise ValueError("params expects a physical parameter record")
    m, scales = model.derive_dimensionless(p)
    payload = {
        "physical": {k: _show_num(v) for k, v in p.to_dict().items()},
        "model": {k: _show_num(getattr(m, k)) for k in
                  ("delta", "sigma", "alpha", "eta", "chi", "Q")},
        "scales": {k: _show_num(float(v) if k != "omega" else v)
                   for k, v in scales.items()},
    }
    lines = [f"{k} = {_show_num(getattr(m, k))}" for k in
             ("delta", "sigma", "alpha", "eta", "chi", "Q")]
    lines += [f"scale {k} = {_show_num(float(v))}"
              for k, v in scales.items()]
    return _emit(args, payload, lines)


def cmd_coeffs(args) -> int:
    m = _model_from_args(args)
    rc = model.reduced_coefficients(m)
    fields = ("a", "b", "c", "at", "bt", "ct", "dt", "st")
    payload = {"coeffs": {k: _show_num(getattr(rc, k)) for k in fields}}
    lines = [f"{k} = {_show_num(getattr(rc, k))}" for k in fields]
    return _emit(args, payload, lines)


def cmd_system(args) -> int:
    sys_ = model.build_system(args.kind)
    payload = {
        "kind": args.kind,
        "vars": list(sys_.varset.names),
        "elim_vars": list(sys_.elim_vars),
        "polys": {name: str(p) for name, p in sys_.polys},
    }
    lines = [f"vars: {' '.join(sys_.varset.names)}",
             f"eliminate: {' '.join(sys_.elim_vars)}"]
    lines += [f"{name} = {p}" for name, p in sys_.polys]
    return _emit(args, payload, lines)


def cmd_eliminate(args) -> int:
    sys_ = model.build_system("halftangent")
    p1 = sys_.poly("poly1")
    p2 = sys_.poly("poly2")
    res = sylvester_resultant(p1, p2, args.var)
    vs = res.vars
    t = Polynomial.variable(vs, "t")
    u = Polynomial.variable(vs, "u")
    known = [t, u, 1 + t * t, 1 + u * u]
    quot, mults = strip_known_factors(res, known)
    main = quot.primitive()
    stripped = [
        {"poly": str(k), "mult": m}
        for k, m in zip(known, mults) if m
    ]
    payload = {
        "kind": args.kind,
        "eliminated": args.var,
        "stripped": stripped,
        "main": {"terms": len(main), "poly": str(main)},
    }
    lines = [f"eliminated={args.var}"]
    lines += [f"stripped mult={s['mult']} poly={s['poly']}" for s in stripped]
    lines.append(f"terms={len(main)} poly={main}")
    return _emit(args, payload, lines)


def cmd_dixon(args) -> int:
    kind = "pmmr_bifurcation" if args.kind == "pmmr" else args.kind
    sys_ = model.build_system(kind)
    d = dixon_polynomial(sys_)
    aux = [v + "b" for v in sys_.elim_vars]
    mat = dixon_matrix(d, list(sys_.elim_vars), aux)
    seeds = analysis._corner_seeds(kind == "pmmr_bifurcation") \
        if args.seed_trivial else ()
    kw = {}
    if args.seed is not None:
        kw["rng_seed"] = args.seed
    fl = edf_determinant(mat, seeded_denominators=seeds, **kw)
    payload = {
        "kind": args.kind,
        "matrix": {"rows": len(mat.row_labels), "cols": len(mat.col_labels)},
        "pivot_rows": list(fl.rows),
        "pivot_cols": list(fl.cols),
        "term_counts": fl.term_counts(),
        "report": fl.to_json(),
    }
    lines = [f"matrix {len(mat.row_labels)}x{len(mat.col_labels)}",
             f"term_counts {' '.join(str(c) for c in fl.term_counts())}"]
    lines += fl.report().split("\n")
    return _emit(args, payload, lines)


def cmd_equilibria(args) -> int:
    m = _model_from_args(args)
    eqs = analysis.find_equilibria(m, args.Q)
    payload = {"Q": _show_num(args.Q),
               "equilibria": [e.to_dict() for e in eqs]}
    lines = []
    for e in eqs:
        lines.append(
            f"theta={_f17(e.config.theta)} phi={_f17(e.config.phi)} "
            f"class={e.class_} origin={e.origin} "
            f"omega_sq={_f17(e.omega_sq[0])},{_f17(e.omega_sq[1])}")
    csv_rows = ["theta,phi,residual,omega_sq_lo,omega_sq_hi,class,origin"]
    for e in eqs:
        csv_rows.append(",".join(
            [_f17(e.config.theta), _f17(e.config.phi), _f17(e.residual),
             _f17(e.omega_sq[0]), _f17(e.omega_sq[1]), e.class_, e.origin]))
    return _emit(args, payload, lines, "\n".join(csv_rows) + "\n")


def cmd_bif_q(args) -> int:
    m = model.ModelParams(delta=args.delta, sigma=args.sigma, chi=args.chi)
    vals = analysis.trivial_bifurcation_q(m, args.which)
    payload = {"which": args.which, "Q": [float(v) for v in vals]}
    lines = [f"Q = {_f17(v)}" for v in vals] or ["no bifurcation in [0, 1]"]
    return _emit(args, payload, lines)


def _parse_grid(spec: str):
    axes = []
    for part in spec.split(","):
        part = part.strip()
        if not part:
            continue
        try:
            name, rng = part.split("=", 1)
            lo, hi, count = rng.split(":")
            axes.append((name.strip(), float(rational(lo)),
                         float(rational(hi)), int(count)))
        except (ValueError, argparse.ArgumentTypeError) as exc:
            raise ValueError(
                f"bad grid axis {part!r}, want name=lo:hi:count") from exc
    if not axes:
        raise ValueError("empty grid spec")
    return axes


def cmd_scan(args) -> int:
    axes = _parse_grid(args.grid)
    sg = analysis.scan_surface(args.surface, axes, pmmr=args.pmmr,
                               threads=args.threads)
    payload = {
        "surface": args.surface,
        "pmmr": args.pmmr,
        "axes": [{"name": n, "lo": lo, "hi": hi, "count": c}
                 for n, lo, hi, c in sg.axes],
        "values": list(sg.values),
    }
    return _emit(args, payload, None, sg.to_csv())


def cmd_single(args) -> int:
    Q = float(args.Q)
    eqs = model.single_pendulum_equilibria(Q)
    rows = []
    for theta, cls in eqs:
        if theta == 0.0:
            eq_id = "zero"
        elif theta == math.pi:
            eq_id = "pi"
        else:
            eq_id = "nontrivial"
        kind, rate = model.single_pendulum_nmr(Q, eq_id)
        rows.append({"theta": theta, "class": cls,
                     "mode": kind, "rate": rate})
    payload = {"Q": _show_num(args.Q), "equilibria": rows}
    lines = [f"theta={_f17(r['theta'])} class={r['class']} "
             f"mode={r['mode']} rate={_f17(r['rate'])}" for r in rows]
    return _emit(args, payload, lines)


def cmd_simulate(args) -> int:
    m = model.load_params(_read_config(args.config))
    if isinstance(m, model.PhysicalParams):
        m, _scales = model.derive_dimensionless(m)
    Q = args.Q if args.Q is not None else m.Q
    state0 = tuple(float(x) for x in args.state0.split(","))
    if len(state0) != 4:
        raise ValueError("state0 needs four comma-separated numbers")
    tr = analysis.simulate(m, Q, state0, args.dt, args.steps)
    payload = {
        "Q": _show_num(Q),
        "dt": args.dt,
        "steps": args.steps,
        "state0": list(state0),
        "drift": tr.drift,
        "times": list(tr.times),
        "states": [list(s) for s in tr.states],
        "jacobi": list(tr.jacobi),
    }
    rows = ["time,theta,phi,theta_dot,phi_dot,jacobi"]
    for t, s, j in zip(tr.times, tr.states, tr.jacobi):
        rows.append(",".join([_f17(t)] + [_f17(x) for x in s] + [_f17(j)]))
    lines = [f"drift={_f17(tr.drift)}", f"samples={len(tr.times)}"]
    return _emit(args, payload, lines, "\n".join(rows) + "\n")


# ---------------------------------------------------------------------
# wiring


def _add_model_flags(sp, with_Q=True):
    sp.add_argument("--delta", type=rational, default=Fraction(0))
    sp.add_argument("--sigma", type=rational, default=Fraction(0))
    sp.add_argument("--alpha", type=rational, default=Fraction(0))
    sp.add_argument("--eta", type=rational, default=Fraction(0))
    sp.add_argument("--chi", type=rational, default=Fraction(0))
    sp.add_argument("--config", help="JSON parameter record instead of flags")
    if with_Q:
        sp.add_argument("--Q", type=rational, required=False)


def build_parser() -> _Parser:
    ap = _Parser(prog="rdp", description=__doc__)
    ap.add_argument("--format", choices=("json", "csv", "text"),
                    default=None)
    ap.add_argument("--output", help="write the report here, not stdout")
    ap.add_argument("--seed", type=int, default=None,
                    help="seed for randomized verification")
    ap.add_argument("--threads", type=int, default=1)
    ap.add_argument("--max-seconds", type=float, default=None)
    ap.add_argument("--max-mb", type=float, default=None)
    sub = ap.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("params", help="physical record to shape parameters")
    sp.add_argument("--config", required=True)
    sp.set_defaults(fn=cmd_params, default_format="json")

    sp = sub.add_parser("coeffs", help="shape parameters to reduced forms")
    _add_model_flags(sp)
    sp.set_defaults(fn=cmd_coeffs, default_format="json")

    sp = sub.add_parser("system", help="emit an exact polynomial system")
    sp.add_argument("--kind", required=True, choices=(
        "equilibrium", "bifurcation", "halftangent", "pmmr_bifurcation"))
    sp.add_argument("--emit", choices=("text", "json"), default=None)
    sp.set_defaults(fn=cmd_system, default_format="json")

    sp = sub.add_parser("eliminate",
                        help="resultant of the half-tangent pair")
    sp.add_argument("--kind", required=True, choices=("halftangent",))
    sp.add_argument("--var", required=True, choices=("t", "u", "qq"))
    sp.set_defaults(fn=cmd_eliminate, default_format="json")

    sp = sub.add_parser("dixon",
                        help="factored cancellation determinant")
    sp.add_argument("--kind", required=True,
                    choices=("bifurcation", "pmmr"))
    sp.add_argument("--seed-trivial", action="store_true",
                    help="divide the corner conditions out during the run")
    sp.set_defaults(fn=cmd_dixon, default_format="json")

    sp = sub.add_parser("equilibria", help="all equilibria at one Q")
    _add_model_flags(sp, with_Q=False)
    sp.add_argument("--Q", type=rational, required=True)
    sp.set_defaults(fn=cmd_equilibria, default_format="json")

    sp = sub.add_parser("bif-q",
                        help="strengths where a vertical corner degenerates")
    sp.add_argument("--delta", type=rational, required=True)
    sp.add_argument("--sigma", type=rational, required=True)
    sp.add_argument("--chi", type=rational, required=True)
    sp.add_argument("--which", required=True,
                    choices=("dd", "du", "ud", "uu"))
    sp.set_defaults(fn=cmd_bif_q, default_format="json")

    sp = sub.add_parser("scan", help="sample a bifurcation surface")
    sp.add_argument("--surface", required=True, choices=(
        "dd", "du", "ud", "uu", "resultant-factor"))
    sp.add_argument("--grid", required=True,
                    help="name=lo:hi:count[,name=lo:hi:count...]")
    sp.add_argument("--pmmr", action="store_true")
    sp.set_defaults(fn=cmd_scan, default_format="csv")

    sp = sub.add_parser("single", help="one-pendulum reference model")
    sp.add_argument("--Q", type=rational, required=True)
    sp.set_defaults(fn=cmd_single, default_format="json")

    sp = sub.add_parser("simulate", help="integrate the motion equations")
    sp.add_argument("--config", required=True)
    sp.add_argument("--Q", type=rational, default=None)
    sp.add_argument("--state0", default="0,0,0,0")
    sp.add_argument("--dt", type=float, required=True)
    sp.add_argument("--steps", type=int, required=True)
    sp.set_defaults(fn=cmd_simulate, default_format="json")

    return ap


def _install_budget(args):
    if args.max_seconds:
        def on_alarm(_sig, _frame):
            raise BudgetExceeded(f"time budget {args.max_seconds}s exceeded")
        signal.signal(signal.SIGALRM, on_alarm)
        signal.setitimer(signal.ITIMER_REAL, args.max_seconds)
    if args.max_mb:
        limit = int(args.max_mb * (1 << 20))
        soft, hard = resource.getrlimit(resource.RLIMIT_AS)
        resource.setrlimit(resource.RLIMIT_AS,
                           (limit, hard if hard != -1 else limit))


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    level = os.environ.get("RDP_LOG")
    if level:
        logging.basicConfig(level=getattr(logging, level.upper(),
                                          logging.WARNING))
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    args.argv = argv
    if args.format is None:
        args.format = getattr(args, "emit", None) or args.default_format
    elif getattr(args, "emit", None):
        args.format = args.emit
    _install_budget(args)
    try:
        return args.fn(args)
    except (BudgetExceeded, MemoryError) as exc:
        sys.stderr.write(f"rdp: budget: {exc}\n")
        return EXIT_BUDGET
    except (ValueError, ZeroDivisionError, OSError) as exc:
        sys.stderr.write(f"rdp: {exc}\n")
        return EXIT_INVALID
    finally:
        if args.max_seconds:
            signal.setitimer(signal.ITIMER_REAL, 0.0)


if __name__ == "__main__":
    sys.exit(main())
