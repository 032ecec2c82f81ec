"""Command-line front end.

Every command writes a table (CSV or JSON) whose header embeds the resolved
configuration and the package version.  Exit codes: 0 success, 1 validation
failure, 2 usage error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys

import numpy as np

from . import __version__
from . import experiments as ex
from .distiller import ProtocolParams, distill
from .errors import InvalidParameter, NoTransitionError, NumericalError

EXIT_OK, EXIT_VALIDATION, EXIT_USAGE, EXIT_NUMERICAL = 0, 1, 2, 3

BASE_COLUMNS = [
    "index", "r", "r_prime", "T", "eta", "theta_a", "phi_a", "theta_b", "phi_b",
    "E_N", "p_succ", "fidelity", "n_max", "status",
]
OBJECTIVE_NAMES = {"en": "E_N", "psucc": "p_succ", "fidelity": "fidelity"}

FIGURE_DEFAULTS = {
    "fig2": {"r": 0.025, "T": 0.95, "eta": 1.0, "grid": (0.01, 0.20, 40)},
    "fig3": {"r": None, "T": 0.95, "eta": 0.5, "grid": (0.005, 0.4, 20)},
    "fig4": {"r": None, "T": 0.95, "eta": 1.0, "grid": (0.02, 0.4, 20)},
}


class UsageError(Exception):
    pass


# --------------------------------------------------------------------------
# argument types


def _grid(text):
    try:
        lo, hi, steps = text.split(":")
        return float(lo), float(hi), int(steps)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected lo:hi:steps, got {text!r}")


def _pair(text):
    try:
        lo, hi = text.split(":")
        return float(lo), float(hi)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected lo:hi, got {text!r}")


def _angles(text):
    try:
        vals = tuple(float(a) for a in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected four comma-separated angles, got {text!r}")
    if len(vals) != 4:
        raise argparse.ArgumentTypeError("expected four angles theta_a,phi_a,theta_b,phi_b")
    return vals


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--r", type=float, help="two-mode squeezing r")
    common.add_argument("--r-prime", type=float, help="local squeezing r'")
    common.add_argument("--T", type=float, help="photon-subtraction beam-splitter transmissivity")
    common.add_argument("--eta", type=float, help="channel transmissivity")
    common.add_argument("--angles", type=_angles, help="theta_a,phi_a,theta_b,phi_b of the local unitaries")
    common.add_argument("--nmax", type=int, help="fixed Fock truncation (default: converge automatically)")
    common.add_argument("--tol", type=float, default=ex.DEFAULT_TOL, help="truncation convergence tolerance")
    common.add_argument("--jobs", type=int, default=0, help="worker processes (default: all cores)")
    common.add_argument("--out", help="output file (default: standard output)")
    common.add_argument("--format", choices=("csv", "json"), default="csv")

    parser = argparse.ArgumentParser(prog="cvdistill", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("distill", parents=[common], help="evaluate a single protocol point")

    p = sub.add_parser("sweep", parents=[common], help="one-dimensional parameter sweep")
    p.add_argument("--vary", choices=ex.VARIABLES, default="r_prime")
    p.add_argument("--grid", type=_grid, default=(0.01, 0.20, 40))
    p.add_argument("--objective", choices=tuple(OBJECTIVE_NAMES), default="en")

    p = sub.add_parser("optimize", parents=[common], help="maximise an objective over r'")
    p.add_argument("--objective", choices=tuple(OBJECTIVE_NAMES), default="en")
    p.add_argument("--bracket", type=_pair, default=(0.0, 0.3))

    for name, help_ in (("fig2", "E_N and p_succ versus r'"), ("fig3", "lossy distillation with r' = r"),
                        ("fig4", "fidelity-optimal r' and the threshold")):
        p = sub.add_parser(name, parents=[common], help=help_)
        p.add_argument("--grid", type=_grid)
        p.add_argument("--steps", type=int, help="number of grid points (keeps the default range)")

    p = sub.add_parser("validate", parents=[common], help="compare against the brute-force Fock oracle")
    p.add_argument("--quick", action="store_true", help="reduced grid")
    p.add_argument("--inject-perturbation", type=float, default=0.0, help=argparse.SUPPRESS)

    p = sub.add_parser("search-unitaries", parents=[common], help="random local Gaussian unitaries")
    p.add_argument("--samples", type=int, default=500)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--magnitude", type=float, help="squeezing inside U(r, theta, phi) (default: r)")
    return parser


# --------------------------------------------------------------------------
# output


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, bool):
        return str(v).lower()
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        return f"{v:.9g}"
    return str(v)


def _json_value(v):
    if isinstance(v, float):
        return None if not math.isfinite(v) else float(f"{v:.9g}")
    return v


def render(records, config: dict, summary: dict, fmt: str = "csv") -> str:
    rows = [rec.row() for rec in records]
    columns = list(BASE_COLUMNS)
    for row in rows:
        columns += [k for k in row if k not in columns]
    if fmt == "json":
        doc = {
            "version": __version__,
            "config": {k: _json_value(v) for k, v in config.items()},
            "records": [{c: _json_value(row.get(c)) for c in columns} for row in rows],
            "summary": {k: _json_value(v) for k, v in summary.items()},
        }
        return json.dumps(doc, indent=2) + "\n"
    buf = io.StringIO()
    buf.write(f"# cvdistill {__version__}\n")
    for k, v in config.items():
        buf.write(f"# config {k}={_fmt(v)}\n")
    for k, v in summary.items():
        buf.write(f"# summary {k}={_fmt(v)}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_fmt(row.get(c)) for c in columns])
    return buf.getvalue()


def emit(args, records, config, summary):
    text = render(records, config, summary, args.format)
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


# --------------------------------------------------------------------------
# configuration


def _value(args, name, default):
    v = getattr(args, name, None)
    return default if v is None else v


def resolve_params(args, r_default=0.025) -> ProtocolParams:
    r = _value(args, "r", r_default)
    if r is None:
        raise UsageError("--r is required")
    rp = _value(args, "r_prime", 0.0)
    return ProtocolParams(r=r, r_prime_a=rp, r_prime_b=rp, T=_value(args, "T", 0.95),
                          eta=_value(args, "eta", 1.0), angles=args.angles)


def base_config(args, params: ProtocolParams = None) -> dict:
    cfg = {"command": args.command}
    if params is not None:
        angles = params.angles or (0.0, 0.0, 0.0, 0.0)
        cfg.update(r=params.r, r_prime=params.r_prime_a, T=params.T, eta=params.eta,
                   angles=",".join(_fmt(a) for a in angles))
    cfg.update(nmax=args.nmax, tol=args.tol, format=args.format)
    return cfg


def _check_common(args):
    if args.tol is not None and not args.tol > 0:
        raise UsageError("--tol must be positive")
    if args.nmax is not None and not 0 <= args.nmax <= 40:
        raise UsageError("--nmax must lie in [0, 40]")


def _figure_grid(args, name):
    lo, hi, steps = args.grid or FIGURE_DEFAULTS[name]["grid"]
    if args.steps is not None:
        steps = args.steps
    if steps < 2 or not lo < hi:
        raise UsageError("grid needs lo < hi and at least 2 steps")
    return lo, hi, steps


def _report(summary):
    for k, v in summary.items():
        print(f"{k} = {_fmt(v)}", file=sys.stderr)


# --------------------------------------------------------------------------
# commands


def cmd_distill(args) -> int:
    params = resolve_params(args)
    from .fock import converge_truncation, mixture_to_fock
    from .metrics import log_negativity_fock, teleport_fidelity_mixture

    mixture = distill(params)
    if args.nmax is None:
        conv = converge_truncation(mixture, args.tol)
        en, n_used = conv.log_negativity, conv.n_max
    else:
        en, n_used = log_negativity_fock(mixture_to_fock(mixture, args.nmax)).value, args.nmax
    fid = teleport_fidelity_mixture(mixture).value
    rec = ex.ExperimentRecord(0, params, en, mixture.p_succ, fid, n_used)
    print(f"E_N = {_fmt(en)}")
    print(f"p_succ = {_fmt(mixture.p_succ)}")
    print(f"F = {_fmt(fid)}")
    print(f"n_max = {n_used}")
    if args.out:
        emit(args, [rec], base_config(args, params), {})
    return EXIT_OK


def cmd_sweep(args) -> int:
    params = resolve_params(args)
    lo, hi, steps = args.grid
    spec = ex.SweepSpec(params, args.vary, lo, hi, steps, OBJECTIVE_NAMES[args.objective], args.tol, args.nmax)
    records = ex.sweep(spec, args.jobs)
    cfg = base_config(args, params)
    cfg.update(vary=args.vary, grid=f"{_fmt(lo)}:{_fmt(hi)}:{steps}", objective=spec.objective)
    good = [r for r in records if r.ok]
    summary = {"points": len(records), "failed": len(records) - len(good)}
    if good:
        best = max(good, key=lambda r: getattr(r, spec.objective))
        summary.update(best_index=best.index, best_value=getattr(best, spec.objective))
    emit(args, records, cfg, summary)
    _report(summary)
    return EXIT_OK


def cmd_optimize(args) -> int:
    params = resolve_params(args)
    objective = OBJECTIVE_NAMES[args.objective]
    res = ex.optimize_r_prime(params, objective, args.bracket, args.tol, n_max=args.nmax)
    rec = ex.evaluate_point(ex.with_r_prime(params, res.r_prime), 0, args.tol, args.nmax)
    cfg = base_config(args, params)
    cfg.update(objective=objective, bracket=f"{_fmt(args.bracket[0])}:{_fmt(args.bracket[1])}")
    summary = {"r_prime_opt": res.r_prime, "value": res.value, "optimum": res.flag}
    print(f"r_prime_opt = {_fmt(res.r_prime)}")
    print(f"{objective} = {_fmt(res.value)}")
    print(f"optimum = {res.flag}")
    print(f"E_N = {_fmt(rec.E_N)}")
    print(f"p_succ = {_fmt(rec.p_succ)}")
    print(f"F = {_fmt(rec.fidelity)}")
    print(f"n_max = {rec.n_max_used}")
    if args.out:
        emit(args, [rec], cfg, summary)
    return EXIT_OK if rec.ok else EXIT_NUMERICAL


def cmd_fig2(args) -> int:
    d = FIGURE_DEFAULTS["fig2"]
    params = resolve_params(args, d["r"])
    lo, hi, steps = _figure_grid(args, "fig2")
    spec = ex.SweepSpec(params, "r_prime", lo, hi, steps, "E_N", args.tol, args.nmax)
    records = ex.sweep(spec, args.jobs)
    opt = ex.optimize_r_prime(params, "E_N", (0.0, 0.3), args.tol, n_max=args.nmax)
    p_opt = distill(ex.with_r_prime(params, opt.r_prime)).p_succ
    p_vals = [r.p_succ for r in records]
    summary = {
        "r_prime_opt": opt.r_prime,
        "E_N_max": opt.value,
        "p_succ_opt": p_opt,
        "optimum": opt.flag,
        "p_succ_monotone": all(b > a for a, b in zip(p_vals, p_vals[1:])),
    }
    cfg = base_config(args, params)
    cfg.update(grid=f"{_fmt(lo)}:{_fmt(hi)}:{steps}")
    emit(args, records, cfg, summary)
    _report(summary)
    return EXIT_OK


def cmd_fig3(args) -> int:
    d = FIGURE_DEFAULTS["fig3"]
    T, eta = _value(args, "T", d["T"]), _value(args, "eta", d["eta"])
    ProtocolParams(r=0.0, T=T, eta=eta)
    lo, hi, steps = _figure_grid(args, "fig3")
    grid = [float(x) for x in np.linspace(lo, hi, steps)]
    records = ex.parallel_map(ex.enhanced_vs_plain, [(i, r, T, eta, args.tol) for i, r in enumerate(grid)], args.jobs)
    ok = [r for r in records if r.ok]
    summary = {
        "points": len(records),
        "failed": len(records) - len(ok),
        "enhanced_above_plain": sum(r.E_N >= r.extra["E_N_plain"] for r in ok),
        "plain_above_gaussian": sum(r.extra["E_N_plain"] >= r.extra["E_N_gaussian"] for r in ok),
    }
    cfg = {"command": "fig3", "T": T, "eta": eta, "r_prime": "r", "grid": f"{_fmt(lo)}:{_fmt(hi)}:{steps}",
           "tol": args.tol, "format": args.format}
    emit(args, records, cfg, summary)
    _report(summary)
    return EXIT_OK


def cmd_fig4(args) -> int:
    d = FIGURE_DEFAULTS["fig4"]
    T, eta = _value(args, "T", d["T"]), _value(args, "eta", d["eta"])
    ProtocolParams(r=0.0, T=T, eta=eta)
    lo, hi, steps = _figure_grid(args, "fig4")
    bracket = (0.0, 0.5)
    grid = [float(x) for x in np.linspace(lo, hi, steps)]
    tasks = [(i, r, T, eta, args.tol, bracket) for i, r in enumerate(grid)]
    records = ex.parallel_map(ex.fidelity_optimum, tasks, args.jobs)
    try:
        threshold = ex.find_threshold(eta, (lo, hi), T=T, bracket=bracket, tol=args.tol)
    except NoTransitionError:
        threshold = None
    summary = {"threshold": threshold if threshold is not None else "none"}
    cfg = {"command": "fig4", "T": T, "eta": eta, "grid": f"{_fmt(lo)}:{_fmt(hi)}:{steps}",
           "bracket": "0:0.5", "tol": args.tol, "format": args.format}
    emit(args, records, cfg, summary)
    _report(summary)
    return EXIT_OK


def cmd_validate(args) -> int:
    n_max = 10 if args.nmax is None else args.nmax
    results = ex.validate(ex.validation_grid(args.quick), n_max, args.inject_perturbation, args.jobs)
    records = [
        ex.ExperimentRecord(i, v.params, status="ok" if v.passed else (v.status if v.status != "ok" else "fail"),
                            extra={"p_rel_dev": v.p_rel_dev, "rho_max_dev": v.rho_max_dev})
        for i, v in enumerate(results)
    ]
    failed = sum(not v.passed for v in results)
    summary = {
        "points": len(results),
        "failed": failed,
        "max_p_rel_dev": max(v.p_rel_dev for v in results),
        "max_rho_dev": max(v.rho_max_dev for v in results),
        "tolerance": ex.VALIDATION_TOL,
    }
    cfg = {"command": "validate", "quick": args.quick, "nmax": n_max, "format": args.format}
    if args.out:
        emit(args, records, cfg, summary)
    for k, v in summary.items():
        print(f"{k} = {_fmt(v)}")
    print("PASS" if not failed else "FAIL")
    return EXIT_OK if not failed else EXIT_VALIDATION


def cmd_search_unitaries(args) -> int:
    if args.samples < 1:
        raise UsageError("--samples must be >= 1")
    r = _value(args, "r", 0.025)
    T, eta = _value(args, "T", 0.95), _value(args, "eta", 1.0)
    ProtocolParams(r=r, T=T, eta=eta)
    report = ex.random_unitary_search(r, T, args.samples, args.seed, args.magnitude, eta, args.nmax, args.tol,
                                      jobs=args.jobs)
    de, dp = report.excess()
    summary = {
        "baseline_E_N": report.baseline.E_N,
        "baseline_p_succ": report.baseline.p_succ,
        "max_E_N": report.max_E_N,
        "max_p_succ": report.max_p_succ,
        "E_N_excess": de,
        "p_succ_excess": dp,
        "verdict": report.verdict,
    }
    cfg = {"command": "search-unitaries", "r": r, "T": T, "eta": eta,
           "magnitude": r if args.magnitude is None else args.magnitude, "samples": args.samples,
           "seed": args.seed, "nmax": report.baseline.n_max_used, "tol": args.tol, "format": args.format,
           "rng": "numpy Philox"}
    emit(args, list(report.samples), cfg, summary)
    _report(summary)
    return EXIT_OK


COMMANDS = {
    "distill": cmd_distill,
    "sweep": cmd_sweep,
    "optimize": cmd_optimize,
    "fig2": cmd_fig2,
    "fig3": cmd_fig3,
    "fig4": cmd_fig4,
    "validate": cmd_validate,
    "search-unitaries": cmd_search_unitaries,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    try:
        _check_common(args)
        return COMMANDS[args.command](args)
    except (UsageError, InvalidParameter) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericalError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
