"""Command-line interface: ``recur-ldp <command> [options]``.

Every command writes plain CSV/text files into ``--out``.  Each file starts
with comment lines carrying the package version, a hash of the effective
configuration and provenance flags.  Nothing time- or host-dependent is
written, so the same command line produces the same bytes.

Exit codes: 0 success, 2 invalid input, 3 enumeration budget exceeded,
4 numerical failure.
"""

import argparse
import hashlib
import json
import math
import os
import sys

import numpy as np

from . import __version__, decoupling, measures, montecarlo, presets, recurrence
from .convex import DEFAULT_STEP, Grid, default_alpha_grid
from .core import Bernoulli, Markov, parse_model
from .errors import AllZeroCounts, InstanceTooLarge, NumericalFailure, RecurLdpError, UnsupportedModel, ValidationError
from .pressure import build_report
from .rates import build_rates, convexity_verdict, rate_at, zero_set

EXIT_OK, EXIT_INVALID, EXIT_BUDGET, EXIT_NUMERIC = 0, 2, 3, 4
DEFAULT_SEED = 0


# --------------------------------------------------------------------------
# argument handling


def _int_list(text):
    try:
        vals = [int(t) for t in str(text).split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not vals:
        raise argparse.ArgumentTypeError("empty list")
    return vals


def _float_list(text):
    try:
        return [float(t) for t in str(text).split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _count(text):
    # accepts 1e6 style counts
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a count, got {text!r}") from None
    if v != int(v):
        raise argparse.ArgumentTypeError(f"expected an integer count, got {text!r}")
    return int(v)


def _common(sub):
    sub.add_argument("--p", required=True, help="model file, or preset:NAME")
    sub.add_argument("--q", help="second model (waiting times, pair pressures)")
    sub.add_argument("--out", default=".", help="output directory (default: current)")
    sub.add_argument("--seed", type=int, default=DEFAULT_SEED)
    sub.add_argument("--n", type=_int_list, help="comma-separated word lengths")


def _grids(sub):
    for var, default in (("alpha", None), ("s", None)):
        sub.add_argument(f"--{var}-min", type=float, default=default)
        sub.add_argument(f"--{var}-max", type=float, default=default)
        sub.add_argument(f"--{var}-step", type=float, default=default)


def build_parser():
    parser = argparse.ArgumentParser(prog="recur-ldp", description="Large deviations of return and waiting times.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    cmds = parser.add_subparsers(dest="command", required=True)

    sub = cmds.add_parser("pressure", help="pressure curves and scalar functionals")
    _common(sub)
    _grids(sub)

    sub = cmds.add_parser("rates", help="rate functions and the convexity verdict")
    _common(sub)
    _grids(sub)

    sub = cmds.add_parser("estimate", help="Monte Carlo rates, tail slope and pressures")
    _common(sub)
    sub.add_argument("--statistic", choices=montecarlo.STATISTICS, default="R")
    sub.add_argument("--M", type=_count, default=montecarlo.DEFAULT_M)
    sub.add_argument("--cap", type=_count)
    sub.add_argument("--eps", type=float, default=montecarlo.DEFAULT_EPS)
    sub.add_argument("--alpha", type=_float_list, default=[-2.0, -1.0, -0.5, 0.5],
                     help="alphas for empirical pressures")
    sub.add_argument("--law-test", action="store_true", help="also compare the W and V laws")

    sub = cmds.add_parser("oracle", help="exact laws by enumeration next to the toy laws")
    _common(sub)
    sub.add_argument("--k-max", type=int, default=8)

    sub = cmds.add_parser("verify", help="finite-n decoupling constants and psi-mixing")
    _common(sub)
    sub.add_argument("--tau", type=int, default=0)
    sub.add_argument("--n-max", type=int, default=decoupling.DEFAULT_N_MAX)
    sub.add_argument("--psi-tau-max", type=int, default=6)

    sub = cmds.add_parser("figure", help="curve data for one of the built-in figures")
    sub.add_argument("name", help="fig1 .. fig5")
    sub.add_argument("--out", default=".")
    sub.add_argument("--seed", type=int, default=DEFAULT_SEED)
    sub.add_argument("--s-step", type=float, default=DEFAULT_STEP)
    return parser


# --------------------------------------------------------------------------
# helpers


def _load(spec):
    if spec is None:
        return None, None
    if spec.startswith("preset:"):
        name = spec.split(":", 1)[1]
        if name not in presets.DOCUMENTS:
            raise ValidationError(f"unknown preset {name!r}; known: {', '.join(sorted(presets.DOCUMENTS))}")
        text = presets.DOCUMENTS[name]
    else:
        try:
            with open(spec, encoding="utf-8") as fh:
                text = fh.read()
        except OSError as exc:
            raise ValidationError(f"cannot read model file {spec!r}: {exc.strerror}") from None
    return parse_model(text), text


class Run:
    """Output sink shared by the commands: header lines plus file writes."""

    def __init__(self, args, documents):
        cfg = {k: v for k, v in sorted(vars(args).items()) if k != "out"}
        cfg["documents"] = documents
        blob = json.dumps(cfg, sort_keys=True, default=str).encode()
        self.config_hash = hashlib.sha256(blob).hexdigest()[:16]
        self.out = args.out
        self.command = args.command
        self.written = []
        os.makedirs(self.out, exist_ok=True)

    def header(self, provenance=None):
        """Comment lines for an output file; pass ``provenance`` unless the writer adds its own."""
        lines = [f"recur_ldp {__version__}", f"command={self.command} config={self.config_hash}"]
        return lines + ([f"provenance={provenance}"] if provenance else [])

    def write(self, name, body):
        path = os.path.join(self.out, name)
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(body)
        self.written.append(path)


def _fmt(v):
    v = float(v)
    if math.isnan(v):
        return "nan"
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return repr(v)


def _alpha_grid(args):
    d = default_alpha_grid()
    lo = d.start if args.alpha_min is None else args.alpha_min
    hi = d.stop if args.alpha_max is None else args.alpha_max
    step = d.step if args.alpha_step is None else args.alpha_step
    return Grid(lo, hi, step)


def _s_grid(args, p):
    if args.s_min is None and args.s_max is None and args.s_step is None:
        return None, args.s_step or DEFAULT_STEP
    step = args.s_step or DEFAULT_STEP
    lo = -0.5 if args.s_min is None else args.s_min
    hi = (min(5.0, -measures.gamma_minus(p) + 1.0) if args.s_max is None else args.s_max)
    grid = Grid(lo, hi, step)
    if abs(grid.points[grid.index(0.0)]) > step / 2 or lo > 0:
        raise ValidationError("the s-grid must contain 0 (start at or below 0 on a step multiple)")
    return grid, step


def _n_single(args, default=measures.DEFAULT_HMM_N):
    return args.n[0] if args.n else default


def _provenance(p, q=None):
    exact = all(isinstance(m, (Bernoulli, Markov)) for m in (p, q) if m is not None)
    return "analytic" if exact else "finite-n-approximation"


def _rates_csv(curves, header, names=("I_Q", "I_P", "I_W", "I_V", "I_R")):
    cols = [getattr(curves, k) for k in names]
    lines = [f"# {h}" for h in header]
    lines.append("s," + ",".join(names))
    for i, s in enumerate(cols[0].points):
        lines.append(f"{s:.10g}," + ",".join(_fmt(c.values[i]) for c in cols))
    return "\n".join(lines) + "\n"


def _pressure_csv(report, header, names=("q_Q", "q_P", "q_W", "q_V", "q_R")):
    lines = [f"# {h}" for h in header]
    lines.append("alpha," + ",".join(names))
    cols = [getattr(report, k).values for k in names]
    for i, a in enumerate(report.alpha_grid.points):
        lines.append(f"{a:.10g}," + ",".join(_fmt(c[i]) for c in cols))
    return "\n".join(lines) + "\n"


ZERO_TOL = 1e-6


def _points(p, curves, n=measures.DEFAULT_HMM_N):
    gp, gm = measures.gamma_plus(p, n=n), measures.gamma_minus(p, n=n)
    items = {
        "gamma_plus": gp,
        "gamma_minus": gm,
        "I_R_at_0": curves.I_R.at(0.0),
        "I_V_at_0": curves.I_V.at(0.0),
        "I_P_at_minus_gamma_minus": rate_at(p, -gm, n=n) if math.isfinite(gm) else math.nan,
        "zero_set_tol": ZERO_TOL,
    }
    for name in ("I_P", "I_W", "I_R"):
        z = zero_set(getattr(curves, name), tol=ZERO_TOL)
        if z is not None:
            items[f"{name}_zero_set"] = f"[{z.lo:.10g},{z.hi:.10g}]" + ("+" if z.right_saturated else "")
    return "".join(f"{k}={v if isinstance(v, str) else _fmt(v)}\n" for k, v in items.items())


# --------------------------------------------------------------------------
# commands


def cmd_pressure(args, run, p, q):
    n = _n_single(args)
    report = build_report(p, q, alpha_grid=_alpha_grid(args), n=n)
    head = run.header()
    run.write("pressure.csv", report.to_csv(head))
    run.write("pressure_scalars.txt", report.sidecar(head))


def cmd_rates(args, run, p, q):
    n = _n_single(args)
    grid, step = _s_grid(args, p)
    curves = build_rates(p, q, s_grid=grid, step=step, n=n)
    head = run.header(_provenance(p, q))
    run.write("rates.csv", _rates_csv(curves, head))
    run.write("rate_points.txt", "".join(f"# {h}\n" for h in head) + _points(p, curves, n))
    try:
        verdict = convexity_verdict(p, step=step)
        run.write("verdict.txt", "".join(f"# {h}\n" for h in head) + verdict.to_text())
    except UnsupportedModel as exc:
        run.write("verdict.txt", "".join(f"# {h}\n" for h in head) + f"skipped={exc}\n")


def _analytic_rate(p, q, statistic, centers, n):
    if not isinstance(p, (Bernoulli, Markov)) or (q is not None and not isinstance(q, (Bernoulli, Markov))):
        return None
    grid = Grid(-0.5, max(float(centers[-1]), 0.0) + 0.5, DEFAULT_STEP)
    curves = build_rates(p, q if statistic == "W" else None, s_grid=grid, n=n)
    curve = {"R": curves.I_R, "V": curves.I_V, "W": curves.I_W}[statistic]
    return np.array([curve.at(c) for c in centers])


def cmd_estimate(args, run, p, q):
    ns = args.n or [4, 8, 12]
    stat = args.statistic
    if stat == "W":
        top = measures.support_rate_interval(p, q if q is not None else None)[1]
    else:
        top = -measures.gamma_minus(p)
    top = min(top, 3.0) if math.isfinite(top) else 3.0
    head = run.header("monte-carlo")
    ldp = montecarlo.empirical_rate(p, stat, ns, epsilon=args.eps, M=args.M, cap=args.cap,
                                    seed=args.seed, q=q, s_max=top)
    body = ldp.to_csv(head)
    overlay = _analytic_rate(p, q, stat, ldp.centers, max(ns))
    if overlay is not None:
        body += "# analytic overlay\ns,analytic_rate\n"
        body += "".join(f"{c:.10g},{_fmt(v)}\n" for c, v in zip(ldp.centers, overlay))
    run.write("empirical_rates.csv", body)

    if stat == "R" and len(ns) >= 4:
        extra = []
        if isinstance(p, (Bernoulli, Markov)):
            extra.append(f"analytic gamma_plus={_fmt(measures.gamma_plus(p))}")
        try:
            fit = montecarlo.tail_slope(p, ns, M=args.M, seed=args.seed)
            run.write("tail_slope.csv", fit.to_csv(head + extra))
        except AllZeroCounts as exc:
            run.write("tail_slope.csv", "".join(f"# {h}\n" for h in head + extra)
                      + f"no_fit=event R_n < n never observed for some n\nupper_bound={_fmt(exc.upper_bound)}\n")

    n = max(ns)
    lines = [f"# {h}" for h in head]
    lines.append("alpha,n,value,se,censored_fraction,bias_bound,lower_bound_only,analytic")
    analytic = None
    if isinstance(p, (Bernoulli, Markov)):
        analytic = build_report(p, q if stat == "W" else None,
                                alpha_grid=Grid(min(args.alpha) - 0.001, max(args.alpha) + 0.001, 0.001))
    for a in args.alpha:
        est = montecarlo.empirical_pressure(p, stat, a, n, M=args.M, cap=args.cap, seed=args.seed, q=q)
        ref = math.nan
        if analytic is not None:
            curve = {"R": analytic.q_R, "V": analytic.q_V, "W": analytic.q_W}[stat]
            ref = curve.at(a)
        lines.append(f"{a:.10g},{n},{_fmt(est.value)},{_fmt(est.se)},{_fmt(est.censored_fraction)},"
                     f"{_fmt(est.bias_bound)},{int(est.lower_bound_only)},{_fmt(ref)}")
    run.write("empirical_pressure.csv", "\n".join(lines) + "\n")

    if args.law_test:
        test = montecarlo.law_equality_test(p, n, M=args.M, cap=args.cap, seed=args.seed)
        run.write("law_test.txt", "".join(f"# {h}\n" for h in head)
                  + f"statistic={_fmt(test.statistic)}\np_value={_fmt(test.p_value)}\ndof={test.dof}\n")


def cmd_oracle(args, run, p, q):
    n = _n_single(args, default=2)
    k_max = args.k_max
    qq = p if q is None else q
    R = recurrence.exact_return_law(p, n, k_max, check_period=True)
    V = recurrence.exact_nonoverlap_law(p, n, k_max)
    W = recurrence.exact_waiting_law(p, qq, n, k_max)
    ks = np.arange(1, k_max + 1)
    nu = recurrence.toy_nu(p, qq, n, ks)
    try:
        rho = recurrence.toy_rho(p, n, ks)
    except UnsupportedModel:
        rho = np.full(k_max, math.nan)
    head = run.header("exact-enumeration")
    lines = [f"# {h}" for h in head]
    lines.append(f"# n={n} period identity checked for every k < n")
    lines.append("k,R_exact,V_exact,W_exact,nu_toy,rho_toy")
    for i, k in enumerate(ks):
        lines.append(f"{k},{_fmt(R.mass[i])},{_fmt(V.mass[i])},{_fmt(W.mass[i])},{_fmt(nu[i])},{_fmt(rho[i])}")
    lines.append(f"tail,{_fmt(R.tail)},{_fmt(V.tail)},{_fmt(W.tail)},{_fmt(1 - nu.sum())},{_fmt(1 - rho.sum())}")
    run.write("oracle.csv", "\n".join(lines) + "\n")


def cmd_verify(args, run, p, q):
    report = decoupling.decoupling_report(p, q, n_max=args.n_max, tau=args.tau, psi_tau_max=args.psi_tau_max)
    head = run.header("exact-enumeration" if isinstance(p, (Bernoulli, Markov)) else "finite-n-enumeration")
    run.write("decoupling.csv", report.to_csv(head))
    run.write("psi.csv", report.psi_csv(head))
    if report.pa_witness is not None:
        run.write("pa_witness.txt", "".join(f"# {h}\n" for h in head) + report.pa_witness.to_text())


def cmd_figure(args, run):
    p, q, reproducible = presets.figure_models(args.name)
    prov = _provenance(p, q)
    head = run.header()
    tagged = run.header(prov)
    if not reproducible:
        run.write("NOT_REPRODUCIBLE.txt", "".join(f"# {h}\n" for h in tagged) + (
            "not-reproducible: the original example uses a countable hidden alphabet;\n"
            "the curves in this directory come from the nearest finite-hidden-alphabet preset\n"))
    report = build_report(p, q)
    curves = build_rates(p, q, step=args.s_step)
    if q is not None:
        run.write("rates_IQ_IW.csv", _rates_csv(curves, tagged, ("I_Q", "I_W")))
        run.write("pressures_qQ_qW.csv", _pressure_csv(report, tagged, ("q_Q", "q_W")))
        return
    run.write("rate_I_P.csv", curves.I_P.to_csv(head))
    run.write("rate_I_V.csv", curves.I_V.to_csv(head + ["I_W coincides with I_V when Q = P"]))
    run.write("rate_I_R.csv", curves.I_R.to_csv(head + ["differs from I_V only at s = 0"]))
    run.write("pressures.csv", _pressure_csv(report, tagged, ("q_P", "q_W", "q_V", "q_R")))
    run.write("points.txt", "".join(f"# {h}\n" for h in tagged) + _points(p, curves)
              + report.sidecar().split("\n", 1)[1])


COMMANDS = {
    "pressure": cmd_pressure,
    "rates": cmd_rates,
    "estimate": cmd_estimate,
    "oracle": cmd_oracle,
    "verify": cmd_verify,
}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "figure":
            run = Run(args, {})
            cmd_figure(args, run)
        else:
            p, p_doc = _load(args.p)
            q, q_doc = _load(args.q)
            if q is not None:
                p.check_alphabet(q)
            run = Run(args, {"p": p_doc, "q": q_doc})
            COMMANDS[args.command](args, run, p, q)
    except ValidationError as exc:
        print(f"recur-ldp: invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except ValueError as exc:
        print(f"recur-ldp: invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except InstanceTooLarge as exc:
        print(f"recur-ldp: instance too large: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except NumericalFailure as exc:
        print(f"recur-ldp: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except RecurLdpError as exc:  # pragma: no cover - every subclass is handled above
        print(f"recur-ldp: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    for path in run.written:
        print(path)
    return EXIT_OK


__all__ = ["main", "build_parser"]
