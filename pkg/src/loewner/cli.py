"""Command-line entry point.

Subcommands wire the driver grammar to the solver and the geometric
checks and write CSV/JSON artifacts, optional deterministic SVG, and
optional matplotlib PNG figures.  Exit codes: 0 success, 1 check
failure, 2 input error, 3 numerical failure.  Errors print one JSON
object to stderr.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import analysis, stochastic
from .drivers import PowerEnd, parse_driver_spec
from .errors import (
    AnalyticDerivativeUnavailable,
    CoverageError,
    DomainError,
    InsufficientDataError,
    IntegrationError,
    LoewnerError,
    ParameterError,
    PreconditionError,
)
from .solver import SolverConfig, compute_trace, hull_raster

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_INPUT = 2
EXIT_NUMERICAL = 3

_INPUT_ERRORS = (ParameterError, DomainError, CoverageError)
_NUMERICAL_ERRORS = (IntegrationError, InsufficientDataError,
                     PreconditionError, AnalyticDerivativeUnavailable)

CHECK_NAMES = ("capture", "height", "envelope", "simple", "curvature",
               "hypotheses")


def _atomic_write(path, text):
    tmp = f"{path}.tmp.{os.getpid()}"
    with open(tmp, "w") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _atomic_csv(path, header, rows):
    tmp = f"{path}.tmp.{os.getpid()}"
    with open(tmp, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)
    os.replace(tmp, path)


def _config_from_args(args):
    return SolverConfig(n_steps=args.steps, blowup_eps=args.eps)


def _parse_floats(text, n, flag):
    parts = text.split(",")
    if len(parts) != n:
        raise ParameterError(f"{flag} expects {n} comma-separated values")
    try:
        return [float(v) for v in parts]
    except ValueError as exc:
        raise ParameterError(f"{flag}: {exc}") from None


def _out_path(args, name):
    os.makedirs(args.out, exist_ok=True)
    return os.path.join(args.out, name)


# ---------------------------------------------------------------------------
# subcommands


def _cmd_trace(args):
    driver = parse_driver_spec(args.driver)
    config = _config_from_args(args)
    trace = compute_trace(driver, config, t_end=args.T,
                          n_samples=args.samples)
    rows = [(repr(float(t)), repr(float(z.real)), repr(float(z.imag)))
            for t, z in zip(trace.times, trace.points)]
    _atomic_csv(_out_path(args, "trace.csv"), ["t", "re", "im"], rows)
    if args.svg:
        from . import plotting
        _atomic_write(_out_path(args, "trace.svg"),
                      plotting.svg_polyline(trace.points))
    if args.plot:
        from . import plotting
        plotting.plot_trace(trace, _out_path(args, "trace.png"),
                            driver=driver, title=args.driver)
    return EXIT_OK


def _cmd_hull(args):
    driver = parse_driver_spec(args.driver)
    config = _config_from_args(args)
    T = args.T if args.T is not None else driver.T
    window = _parse_floats(args.window, 4, "--window")
    res = [int(v) for v in _parse_floats(args.res, 2, "--res")]
    raster = hull_raster(driver, T, window, res, config)
    _atomic_write(_out_path(args, "hull.json"), raster.to_json() + "\n")
    if args.svg:
        from . import plotting
        _atomic_write(_out_path(args, "hull.svg"), plotting.svg_raster(raster))
    if args.plot:
        from . import plotting
        plotting.plot_hull(raster, _out_path(args, "hull.png"),
                           title=args.driver)
    return EXIT_OK


def _run_check(name, args):
    config = SolverConfig(n_steps=args.steps, blowup_eps=args.eps)
    if name == "capture":
        return analysis.check_capture_interval(args.k, config)
    if name == "height":
        driver = parse_driver_spec(args.driver) if args.driver else None
        if driver is None:
            from .drivers import SqrtEnd
            driver = SqrtEnd(args.k, T=1.0)
        return analysis.check_height_bound(driver, args.k, config)
    if name == "envelope":
        driver = parse_driver_spec(args.driver)
        r = args.r if args.r is not None else getattr(driver, "r", None)
        if r is None:
            raise ParameterError("envelope check needs --r or a power driver")
        _, report = analysis.fit_tangential_exponent(driver, r, config)
        return report
    if name == "simple":
        driver = parse_driver_spec(args.driver)
        trace = compute_trace(driver, config)
        return analysis.check_simple_curve(trace)
    if name == "curvature":
        driver = parse_driver_spec(args.driver)
        return analysis.check_curvature_comparison(driver, args.t0, config)
    if name == "hypotheses":
        driver = parse_driver_spec(args.driver)
        return analysis.check_proposition_hypotheses(driver, args.delta,
                                                     config)
    raise ParameterError(
        f"unknown check {name!r} (known: {', '.join(CHECK_NAMES)})"
    )


def _cmd_check(args):
    reports = [_run_check(name, args) for name in args.name]
    text = "[" + ",".join(r.to_json() for r in reports) + "]\n"
    _atomic_write(_out_path(args, "checks.json"), text)
    for r in reports:
        status = "pass" if r.passed else "FAIL"
        print(f"{r.check_name}: {status}")
    return EXIT_OK if all(r.passed for r in reports) else EXIT_CHECK_FAILED


def _cmd_curvature(args):
    driver = parse_driver_spec(args.driver)
    ts = np.linspace(0.0, driver.T, args.samples, endpoint=False)
    lc = driver.loewner_curvature(ts)
    rows = [(repr(float(t)), repr(float(v))) for t, v in zip(ts, lc)]
    _atomic_csv(_out_path(args, "curvature.csv"), ["t", "LC"], rows)
    if args.plot:
        from . import plotting
        plotting.plot_curvature(ts, lc, _out_path(args, "curvature.png"),
                                title=args.driver)
    return EXIT_OK


def _cmd_subordinate(args):
    # grow the sampling horizon until the path covers [0, T]
    u_max = args.u_max
    for _ in range(60):
        S = stochastic.sample_subordinator(args.alpha, u_max, args.du,
                                           args.seed)
        if S.S_values[-1] > args.T:
            break
        u_max *= 2.0
    E = stochastic.invert_path(S, args.T, args.n_t)
    _atomic_csv(_out_path(args, "subordinator.csv"), ["u", "S"],
                [(repr(float(u)), repr(float(s)))
                 for u, s in zip(S.u_grid, S.S_values)])
    _atomic_csv(_out_path(args, "inverse.csv"), ["t", "E"],
                [(repr(float(t)), repr(float(e)))
                 for t, e in zip(E.t_grid, E.E_values)])
    if args.plot:
        from . import plotting
        plotting.plot_paths(S.u_grid, S.S_values, E.t_grid, E.E_values,
                            _out_path(args, "paths.png"),
                            title=f"alpha={args.alpha} seed={args.seed}")
    return EXIT_OK


def _sweep_one(job):
    """One sweep grid point; runs in a worker process."""
    name, point, steps, eps = job
    config = SolverConfig(n_steps=steps, blowup_eps=eps)
    if name == "capture":
        report = analysis.check_capture_interval(point["k"], config)
        tag = f"capture_k{point['k']:g}"
    else:  # hypotheses over an (a, r) grid
        driver = PowerEnd(point["a"], point["r"], T=1.0)
        delta = point["a"] * point["r"] / (1.0 - point["r"])
        report = analysis.check_proposition_hypotheses(driver, delta, config)
        tag = f"hypotheses_a{point['a']:g}_r{point['r']:g}"
    return tag, report.to_json(), report.passed


def _cmd_sweep(args):
    if args.name == "capture":
        if not args.k_values:
            raise ParameterError("capture sweep needs --k-values")
        points = [{"k": k} for k in
                  _parse_floats(args.k_values, len(args.k_values.split(",")),
                                "--k-values")]
    elif args.name == "hypotheses":
        if not (args.a_values and args.r_values):
            raise ParameterError("hypotheses sweep needs --a-values and "
                                 "--r-values")
        a_list = _parse_floats(args.a_values, len(args.a_values.split(",")),
                               "--a-values")
        r_list = _parse_floats(args.r_values, len(args.r_values.split(",")),
                               "--r-values")
        points = [{"a": a, "r": r} for a in a_list for r in r_list]
    else:
        raise ParameterError(
            f"sweep supports 'capture' and 'hypotheses', got {args.name!r}"
        )
    jobs = [(args.name, pt, args.steps, args.eps) for pt in points]
    os.makedirs(args.out, exist_ok=True)
    all_pass = True
    if args.jobs == 1:
        results = [_sweep_one(job) for job in jobs]
    else:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_sweep_one, jobs))
    for tag, text, passed in results:
        _atomic_write(os.path.join(args.out, f"{tag}.json"), text + "\n")
        print(f"{tag}: {'pass' if passed else 'FAIL'}")
        all_pass &= passed
    return EXIT_OK if all_pass else EXIT_CHECK_FAILED


# ---------------------------------------------------------------------------
# argument parsing


def _add_common(parser, driver_required=True):
    parser.add_argument("--driver", required=driver_required,
                        help="driver spec, e.g. power:a=4,r=0.3333,T=1 | "
                             "sqrt:k=5,T=1 | weier:b=3,r=0.3333,k=4,n=60 | "
                             "const:a=0 | linear:m=2,T=1 | "
                             "notrace:a=10,r=0.3333,n=4 | "
                             "timechange:k=1,alpha=0.7,seed=42,T=1")
    parser.add_argument("--steps", type=int, default=2000,
                        help="solver step count")
    parser.add_argument("--eps", type=float, default=1e-6,
                        help="swallow-detection distance threshold")
    parser.add_argument("--out", default=".", help="output directory")
    parser.add_argument("--svg", action="store_true",
                        help="also write a deterministic SVG")
    parser.add_argument("--plot", action="store_true",
                        help="also render a PNG figure")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="loewner",
        description="Chordal Loewner evolution: traces, hulls, swallow "
                    "times, curvature, and geometric checks.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("trace", help="trace curve to CSV")
    _add_common(p)
    p.add_argument("--T", type=float, default=None, help="end time")
    p.add_argument("--samples", type=int, default=None,
                   help="number of stored tip samples")
    p.set_defaults(func=_cmd_trace)

    p = sub.add_parser("hull", help="hull membership raster to JSON")
    _add_common(p)
    p.add_argument("--T", type=float, default=None, help="hull time")
    p.add_argument("--window", default="-3,3,0,3",
                   help="x0,x1,y0,y1 raster window")
    p.add_argument("--res", default="200,100", help="nx,ny resolution")
    p.set_defaults(func=_cmd_hull)

    p = sub.add_parser("check", help="run geometric checks "
                                     f"({', '.join(CHECK_NAMES)})")
    _add_common(p, driver_required=False)
    p.add_argument("--name", action="append", required=True,
                   choices=CHECK_NAMES, help="check to run (repeatable)")
    p.add_argument("--k", type=float, default=5.0,
                   help="sqrt-coefficient for capture/height")
    p.add_argument("--r", type=float, default=None,
                   help="power exponent for the envelope check")
    p.add_argument("--t0", type=float, default=0.0,
                   help="comparison start time for the curvature check")
    p.add_argument("--delta", type=float, default=1.0,
                   help="delta for the hypotheses check")
    p.set_defaults(func=_cmd_check)

    p = sub.add_parser("curvature", help="curvature samples to CSV")
    _add_common(p)
    p.add_argument("--samples", type=int, default=100)
    p.set_defaults(func=_cmd_curvature)

    p = sub.add_parser("subordinate", help="sample subordinator paths")
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--T", type=float, default=1.0)
    p.add_argument("--u-max", type=float, default=1.0)
    p.add_argument("--du", type=float, default=1e-3)
    p.add_argument("--n-t", type=int, default=4096)
    p.add_argument("--out", default=".")
    p.add_argument("--plot", action="store_true")
    p.set_defaults(func=_cmd_subordinate)

    p = sub.add_parser("sweep", help="run one check over a parameter grid")
    p.add_argument("--name", required=True, choices=("capture", "hypotheses"))
    p.add_argument("--k-values", default=None,
                   help="comma-separated k grid for capture")
    p.add_argument("--a-values", default=None,
                   help="comma-separated a grid for hypotheses")
    p.add_argument("--r-values", default=None,
                   help="comma-separated r grid for hypotheses")
    p.add_argument("--steps", type=int, default=2000)
    p.add_argument("--eps", type=float, default=1e-6)
    p.add_argument("--out", default=".")
    p.add_argument("--jobs", type=int, default=os.cpu_count() or 1,
                   help="parallel workers")
    p.set_defaults(func=_cmd_sweep)

    return parser


def _emit_error(exc, code):
    doc = {"error": type(exc).__name__, "message": str(exc), "exit": code}
    print(json.dumps(doc, sort_keys=True), file=sys.stderr)
    return code


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on bad input, matching our input-error code
        return int(exc.code or 0)
    try:
        return args.func(args)
    except _INPUT_ERRORS as exc:
        return _emit_error(exc, EXIT_INPUT)
    except _NUMERICAL_ERRORS as exc:
        return _emit_error(exc, EXIT_NUMERICAL)
    except LoewnerError as exc:
        return _emit_error(exc, EXIT_NUMERICAL)


if __name__ == "__main__":
    sys.exit(main())
