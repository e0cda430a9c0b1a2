"""Machine checks of quantitative hull geometry.

Each check measures one claim about a driver family (capture interval on
the real axis, hull height bound, tangential envelope exponent near the
left hull endpoint, simple-curve criterion, curvature-comparison
exclusion, trace-existence hypothesis margins) and packages the outcome
as a :class:`CheckReport`.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import ndimage

from .drivers import DrivingFunction, SqrtEnd
from .errors import InsufficientDataError, ParameterError, PreconditionError
from .solver import (
    HullRaster,
    SolverConfig,
    TracePath,
    compute_trace,
    downward_flow_batch,
    hull_left_endpoint,
    hull_raster,
    real_hull_interval,
    swallow_times_real,
)


@dataclass
class CheckReport:
    """Structured pass/fail result of one geometric check."""

    check_name: str
    params: dict
    measured: dict
    threshold: float
    passed: bool
    notes: str = ""
    solver_metadata: dict = field(default_factory=dict)

    def to_json(self, path=None):
        doc = {
            "check": self.check_name,
            "params": _plain(self.params),
            "measured": _plain(self.measured),
            "threshold": self.threshold,
            "pass": bool(self.passed),
            "notes": self.notes,
            "solver_metadata": _plain(self.solver_metadata),
        }
        text = json.dumps(doc, sort_keys=True, separators=(",", ":"))
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text + "\n")
        return text


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [_plain(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if obj is None or isinstance(obj, str):
        return obj
    return repr(obj)


def _config_meta(config: SolverConfig):
    return {
        "n_steps": config.n_steps,
        "blowup_eps": config.blowup_eps,
        "ode_substeps": config.ode_substeps,
        "max_step": config.max_step,
    }


@dataclass
class EnvelopeFit:
    """Power-law fit y ~ C (x - p)^exponent of the hull's upper boundary."""

    p: float
    exponent: float
    coefficient: float
    residual: float
    sample_window: tuple


def fit_envelope(xs, ys, p) -> EnvelopeFit:
    """Least-squares power-law fit in log-log coordinates.

    Only samples with x > p and y > 0 participate; at least four are
    required.
    """
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    ok = (xs > p) & (ys > 0)
    if np.count_nonzero(ok) < 4:
        raise InsufficientDataError(
            f"only {np.count_nonzero(ok)} usable boundary samples (need 4)"
        )
    lx = np.log(xs[ok] - p)
    ly = np.log(ys[ok])
    slope, intercept = np.polyfit(lx, ly, 1)
    resid = float(np.sqrt(np.mean((ly - (slope * lx + intercept)) ** 2)))
    return EnvelopeFit(p=float(p), exponent=float(slope),
                       coefficient=float(math.exp(intercept)), residual=resid,
                       sample_window=(float(np.min(xs[ok] - p)),
                                      float(np.max(xs[ok] - p))))


# ---------------------------------------------------------------------------
# capture interval (real points absorbed under k sqrt(1-t), k >= 4)


def capture_interval_endpoints(k):
    """Predicted swallowed real interval [(k - sqrt(k^2-16))/2, k]."""
    if k < 4:
        raise ParameterError(f"capture interval requires k >= 4, got {k}")
    return (k - math.sqrt(k * k - 16.0)) / 2.0, float(k)


def check_capture_interval(k, config: SolverConfig, n_interior=21,
                           tol=1e-3) -> CheckReport:
    """Measured swallowed real interval matches the predicted one.

    The left endpoint comes from separatrix shooting (forward bisection
    cannot resolve the marginal k = 4 case); the right endpoint from
    scan + bisection on the forward swallow oracle.  Interior points at
    a safe margin from both endpoints must all be swallowed.
    """
    left, right = capture_interval_endpoints(k)
    driver = SqrtEnd(k, 1.0)
    measured_left = hull_left_endpoint(driver, config)
    if measured_left is None:
        measured_left = math.nan
    interval = real_hull_interval(driver, config, left - 1.0, right + 1.0,
                                  tol=min(tol / 4, 1e-4))
    measured_right = interval[1] if interval else math.nan

    pad = 0.05 * (right - left)
    xs = np.linspace(left + pad, right - pad, n_interior)
    swt, amb = swallow_times_real(xs, driver, config)
    captured = np.isfinite(swt) | amb
    notes = ""
    if np.any(amb):
        notes = f"{np.count_nonzero(amb)} ambiguous-swallow interior points"
    err_left = abs(measured_left - left)
    err_right = abs(measured_right - right)
    passed = bool(err_left <= tol and err_right <= tol and np.all(captured))
    return CheckReport(
        check_name="capture_interval",
        params={"k": k, "n_interior": n_interior},
        measured={
            "predicted_left": left,
            "predicted_right": right,
            "measured_left": measured_left,
            "measured_right": measured_right,
            "error_left": err_left,
            "error_right": err_right,
            "fraction_swallowed": float(np.mean(captured)),
        },
        threshold=tol,
        passed=passed,
        notes=notes,
        solver_metadata=_config_meta(config),
    )


# ---------------------------------------------------------------------------
# height bound (hull stays below 26/k over (-inf, 2])


def _verify_sqrt_lower_bound(driver, k, n_grid=2048, tol=1e-9):
    if abs(driver.T - 1.0) > 1e-12:
        raise PreconditionError("height bound is stated for horizon T = 1")
    t = np.linspace(0.0, 1.0, n_grid)
    lam = driver.eval(t)
    if abs(lam[-1]) > 1e-7:
        raise PreconditionError(f"driver does not vanish at T: lam(1) = {lam[-1]}")
    bound = k * np.sqrt(1.0 - t)
    bad = lam < bound - tol
    if np.any(bad):
        t_bad = t[np.argmax(bad)]
        raise PreconditionError(
            f"driver falls below k*sqrt(1-t) at t = {t_bad}: "
            f"{lam[np.argmax(bad)]} < {bound[np.argmax(bad)]}"
        )


def check_height_bound(driver: DrivingFunction, k, config: SolverConfig,
                       window_left=-3.0, height=3.0,
                       resolution=(400, 200)) -> CheckReport:
    """No hull points in (-inf, 2] x [26/k, inf) at time 1.

    The driver must vanish at 1 and dominate k*sqrt(1-t); violations
    raise a precondition error naming the offending time.
    """
    _verify_sqrt_lower_bound(driver, k)
    y_bound = 26.0 / k
    trivial = y_bound >= 2.0
    raster = hull_raster(driver, 1.0, (window_left, 2.0, y_bound, height),
                         resolution, config)
    n_members = int(np.count_nonzero(raster.membership))
    notes = ""
    if trivial:
        notes = ("bound 26/k >= 2 is satisfied by the universal height "
                 "bound 2 at time 1")
    if raster.unknown_cells:
        notes += f"; {raster.unknown_cells} unknown cells"
    return CheckReport(
        check_name="height_bound",
        params={"k": k, "window_left": window_left, "height": height,
                "resolution": list(resolution)},
        measured={"member_cells": n_members, "y_bound": y_bound,
                  "unknown_cells": raster.unknown_cells},
        threshold=0.0,
        passed=bool(n_members == 0 and raster.unknown_cells == 0),
        notes=notes.lstrip("; "),
        solver_metadata=_config_meta(config),
    )


# ---------------------------------------------------------------------------
# tangential envelope exponent near the left hull endpoint


def _verify_power_lower_bound(driver, r, a_min=4.0, n_grid=2048):
    if abs(driver.eval(driver.T)) > 1e-7:
        raise PreconditionError("driver must vanish at its horizon")
    t = np.linspace(0.0, driver.T, n_grid, endpoint=False)
    lam = driver.eval(t)
    ratio = lam / (1.0 - t / driver.T) ** r
    a_emp = float(np.min(ratio))
    if a_emp < a_min - 1e-9:
        raise PreconditionError(
            f"driver is not bounded below by {a_min}*(1-t)^{r}: "
            f"empirical coefficient {a_emp}"
        )
    return a_emp


def locate_left_endpoint(driver: DrivingFunction, config: SolverConfig,
                         tol=1e-6):
    """Left endpoint of the swallowed real interval.

    Separatrix shooting where the driver has terminal capture structure,
    otherwise scan + bisection on the forward swallow oracle.
    """
    p = hull_left_endpoint(driver, config)
    if p is not None:
        return p
    lam0 = driver.eval(0.0)
    interval = real_hull_interval(driver, config, lam0 - max(3.0, lam0),
                                  lam0 + 1.0, tol=tol, n_scan=17)
    if interval is None:
        raise InsufficientDataError("no swallowed real points found")
    return interval[0]


def _boundary_heights(driver, config, xs, y_hi, tol=1e-6, rtol=5e-3):
    """Bisect in y for the hull boundary above each abscissa.

    Membership comes from the swallow oracle for the complex point
    x + iy; the boundary is the swallowed/surviving transition.  Each
    point stops at absolute tolerance `tol` or relative width `rtol`,
    whichever is reached first.
    """
    xs = np.asarray(xs, dtype=float)
    lo = np.zeros_like(xs)
    hi = np.full_like(xs, y_hi)
    # the top of the bracket must survive
    _, sw, _, amb, _ = downward_flow_batch(xs + 1j * hi, driver, config)
    if np.any(sw):
        raise InsufficientDataError("bracket top lies inside the hull")
    for _ in range(200):
        open_ = hi - lo > np.maximum(tol, rtol * lo)
        if not np.any(open_):
            break
        mid = 0.5 * (lo[open_] + hi[open_])
        _, sw, _, amb, _ = downward_flow_batch(
            xs[open_] + 1j * mid, driver, config)
        inside = sw | amb
        lo[open_] = np.where(inside, mid, lo[open_])
        hi[open_] = np.where(inside, hi[open_], mid)
    return 0.5 * (lo + hi)


def fit_tangential_exponent(driver: DrivingFunction, r, config: SolverConfig,
                            window=0.5, n_points=10, tol=0.15,
                            y_tol=1e-6):
    """Fit the envelope exponent of the hull boundary near its left tip.

    Samples the boundary at a geometric ladder of abscissae above the
    left endpoint and fits log-height against log-offset.  Passes when
    the fitted exponent is at least 2 - 2r minus `tol`.

    Returns (EnvelopeFit, CheckReport).
    """
    a_emp = _verify_power_lower_bound(driver, r)
    p = locate_left_endpoint(driver, config, tol=1e-5)
    # sqrt(2) spacing: steep envelopes reach the bisection noise floor in
    # few octaves, and a finer ladder keeps enough usable rungs above it
    xs_all = p + window * 2.0 ** (-0.5 * np.arange(2 * n_points, dtype=float))
    # descend the ladder until heights reach the bisection noise floor;
    # deeper rungs would be dropped anyway and cost the most.  Heights
    # decrease along the descent, so each rung brackets below its
    # predecessor.
    xs_list, ys_list = [], []
    y_hi = 2.2
    for x in xs_all:
        y = _boundary_heights(driver, config, np.array([x]), y_hi=y_hi,
                              tol=y_tol)[0]
        xs_list.append(x)
        ys_list.append(y)
        if y <= 10 * y_tol:
            break
        y_hi = min(2.2, 1.5 * y)
    xs = np.asarray(xs_list)
    ys = np.asarray(ys_list)
    # samples at the bisection noise floor carry no slope information
    usable = ys > 10 * y_tol
    fit = fit_envelope(xs[usable], ys[usable], p)
    target = 2.0 - 2.0 * r
    with np.errstate(invalid="ignore"):
        ratios = ys[usable] / (xs[usable] - p) ** fit.exponent
    envelope_coeff = float(np.max(ratios))
    enveloped = bool(np.all(ys[usable] <= 1.05 * envelope_coeff
                            * (xs[usable] - p) ** fit.exponent))
    passed = bool(fit.exponent >= target - tol and enveloped)
    report = CheckReport(
        check_name="tangential_exponent",
        params={"r": r, "window": window, "n_points": n_points,
                "driver": repr(driver)},
        measured={
            "p": fit.p,
            "exponent": fit.exponent,
            "target_exponent": target,
            "coefficient": fit.coefficient,
            "envelope_coefficient": envelope_coeff,
            "residual": fit.residual,
            "lower_bound_coefficient": a_emp,
            "n_samples": int(np.count_nonzero(usable)),
        },
        threshold=tol,
        passed=passed,
        solver_metadata=_config_meta(config),
    )
    return fit, report


# ---------------------------------------------------------------------------
# simple-curve scan


def _segment_pair_distance(p1, p2, q1, q2):
    """Minimum distance between 2D segments, vectorized over pairs."""
    def seg_point(a, b, p):
        ab = b - a
        denom = np.maximum(np.abs(ab) ** 2, 1e-300)
        t = np.clip(((p - a) * np.conj(ab)).real / denom, 0.0, 1.0)
        return np.abs(a + t * ab - p)

    d = np.minimum(
        np.minimum(seg_point(p1, p2, q1), seg_point(p1, p2, q2)),
        np.minimum(seg_point(q1, q2, p1), seg_point(q1, q2, p2)),
    )
    # proper crossings have distance zero
    def orient(a, b, c):
        return np.sign(((b - a).conjugate() * (c - a)).imag)

    cross = (orient(p1, p2, q1) * orient(p1, p2, q2) < 0) & \
            (orient(q1, q2, p1) * orient(q1, q2, p2) < 0)
    return np.where(cross, 0.0, d)


def check_simple_curve(trace: TracePath, tolerance=1e-9) -> CheckReport:
    """Self-intersection scan of the trace polyline.

    Non-adjacent segment pairs closer than `tolerance` count as
    intersections; candidate pairs come from a uniform spatial hash.
    """
    pts = np.asarray(trace.points, dtype=complex)
    if pts.size < 3:
        raise InsufficientDataError("trace too short for intersection scan")
    a, b = pts[:-1], pts[1:]
    n = len(a)
    lengths = np.abs(b - a)
    cell = max(float(np.median(lengths)) * 2.0, 4.0 * tolerance, 1e-12)

    buckets = {}
    mids = 0.5 * (a + b)
    ix = np.floor(mids.real / cell).astype(np.int64)
    iy = np.floor(mids.imag / cell).astype(np.int64)
    reach = np.ceil((0.5 * lengths + tolerance) / cell).astype(np.int64)
    for i in range(n):
        r = int(reach[i])
        for cx in range(ix[i] - r, ix[i] + r + 1):
            for cy in range(iy[i] - r, iy[i] + r + 1):
                buckets.setdefault((cx, cy), []).append(i)

    pa, pb = [], []
    for members in buckets.values():
        m = len(members)
        if m < 2:
            continue
        arr = np.asarray(members)
        ii, jj = np.triu_indices(m, k=1)
        pa.append(arr[ii])
        pb.append(arr[jj])
    n_hits = 0
    min_gap = math.inf
    if pa:
        ii = np.concatenate(pa)
        jj = np.concatenate(pb)
        keep = np.abs(ii - jj) > 1
        ii, jj = ii[keep], jj[keep]
        if ii.size:
            pairs = np.unique(ii * np.int64(n) + jj)
            ii, jj = pairs // n, pairs % n
            d = _segment_pair_distance(a[ii], b[ii], a[jj], b[jj])
            n_hits = int(np.count_nonzero(d < tolerance))
            min_gap = float(d.min())
    terminal_im = float(pts[-1].imag)
    passed = n_hits == 0
    trace.simple_flag = passed
    return CheckReport(
        check_name="simple_curve",
        params={"tolerance": tolerance, "n_points": int(pts.size)},
        measured={"n_intersections": n_hits, "min_nonadjacent_gap": min_gap,
                  "terminal_im": terminal_im},
        threshold=tolerance,
        passed=passed,
        notes=("terminates on the real axis" if terminal_im < 1e-2 else ""),
    )


# ---------------------------------------------------------------------------
# curvature comparison exclusion


def check_curvature_comparison(driver: DrivingFunction, t0,
                               config: SolverConfig,
                               resolution=(240, 120), n_grid=512,
                               trace=None) -> CheckReport:
    """Trace stays out of the interior of the matched constant-curvature hull.

    The comparison driver alpha + c sqrt(tau - t) matches value and first
    derivative at t0, with c^2/2 the infimum of the curvature from t0 on;
    that infimum must be at least 9.
    """
    T = driver.T
    ts = t0 + (T - t0) * np.linspace(0.0, 1.0, n_grid, endpoint=False)
    lc = driver.loewner_curvature(ts)
    if np.any(~np.isfinite(lc)) or np.any(lc < 9.0 - 1e-9):
        t_bad = ts[np.argmax(~np.isfinite(lc) | (lc < 9.0 - 1e-9))]
        raise PreconditionError(
            f"curvature hypothesis 9 <= LC < inf fails at t = {t_bad}"
        )
    inf_lc = float(np.min(lc))
    c = math.sqrt(2.0 * inf_lc)
    lp0 = float(driver.derivative(t0, 1))
    if lp0 == 0.0:
        raise PreconditionError("first derivative vanishes at t0")
    tau = c * c / (4.0 * lp0 * lp0)
    sigma = -math.copysign(1.0, lp0)
    alpha = float(driver.eval(t0)) - sigma * c * math.sqrt(tau)
    mu = SqrtEnd(c, tau).translated(alpha) if sigma > 0 else \
        SqrtEnd(c, tau).reflected().translated(alpha)

    mu0 = float(mu.eval(0.0))
    x_lo, x_hi = sorted((alpha, mu0))
    height = 2.0 * math.sqrt(tau)
    pad = 0.05 * max(x_hi - x_lo, height)
    # no near-boundary padding here: padding plus erosion would keep the
    # hull's boundary curve inside the "interior" mask
    raster = hull_raster(mu, tau, (x_lo - pad, x_hi + pad, 0.0, height + pad),
                         resolution, config, boundary_cells=False)
    interior = ndimage.binary_erosion(raster.membership)

    if trace is None:
        trace = compute_trace(driver, config,
                              n_samples=min(config.n_steps, 4000))
    sel = trace.times >= t0
    zz = trace.points[sel]
    x0w, x1w, y0w, y1w = raster.window
    nx, ny = raster.resolution
    jx = np.floor((zz.real - x0w) / (x1w - x0w) * nx).astype(int)
    jy = np.floor((zz.imag - y0w) / (y1w - y0w) * ny).astype(int)
    inside_window = (jx >= 0) & (jx < nx) & (jy >= 0) & (jy < ny)
    violations = 0
    if np.any(inside_window):
        violations = int(np.count_nonzero(
            interior[jy[inside_window], jx[inside_window]]))
    footprint_bound = c * math.sqrt(tau) / 2.0
    measured_interval = raster.real_interval
    footprint = (measured_interval[1] - measured_interval[0]
                 if measured_interval else 0.0)
    return CheckReport(
        check_name="curvature_comparison",
        params={"t0": t0, "resolution": list(resolution),
                "driver": repr(driver)},
        measured={
            "inf_curvature": inf_lc, "c": c, "tau": tau, "alpha": alpha,
            "trace_points_in_interior": violations,
            "comparison_footprint": float(footprint),
            "footprint_lower_bound": footprint_bound,
        },
        threshold=0.0,
        passed=bool(violations == 0),
        notes=("comparison hull real footprint below its lower bound"
               if footprint < footprint_bound - 1e-2 else ""),
        solver_metadata=_config_meta(config),
    )


# ---------------------------------------------------------------------------
# trace-existence hypothesis margins


def check_proposition_hypotheses(driver: DrivingFunction, delta,
                                 config: SolverConfig,
                                 n_grid=512) -> CheckReport:
    """Margins of the three trace-existence hypotheses on a grid.

    (1) |lam(T) - lam(t)| >= 4 sqrt(T - t);
    (2) 9 <= LC(t) < inf;
    (3) inf_{t >= s} LC(t) >= delta * sqrt(T - s) * |lam'(s)|.
    """
    T = driver.T
    ts = np.linspace(0.0, T, n_grid, endpoint=False)
    lam = driver.eval(ts)
    lam_T = driver.eval(T)

    gap = np.abs(lam_T - lam) - 4.0 * np.sqrt(T - ts)
    margin_drop = float(np.min(gap))

    lc = driver.loewner_curvature(ts)
    finite = np.all(np.isfinite(lc))
    margin_lc = float(np.min(lc) - 9.0) if finite else -math.inf

    lp = np.abs(driver.derivative(ts, 1))
    suffix_min = np.minimum.accumulate(lc[::-1])[::-1]
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = suffix_min / (np.sqrt(T - ts) * lp)
    ratio[~np.isfinite(ratio)] = math.inf
    delta_margin = float(np.min(ratio))

    # boundary-tight drivers sit exactly on the hypotheses; allow float slack
    slack = 1e-9
    passed = bool(margin_drop >= -slack and finite and margin_lc >= -slack
                  and delta_margin >= delta - slack)
    return CheckReport(
        check_name="proposition_hypotheses",
        params={"delta": delta, "n_grid": n_grid, "driver": repr(driver)},
        measured={
            "drop_margin": margin_drop,
            "curvature_margin": margin_lc,
            "delta_margin": delta_margin,
        },
        threshold=delta,
        passed=passed,
        solver_metadata=_config_meta(config),
    )


# ---------------------------------------------------------------------------
# terminal approach angle


def approach_angle(trace: TracePath, tail_fraction=0.05,
                   proximity_tol=1e-2) -> float:
    """Angle (radians) between the trace's terminal approach and its target.

    The target is the real axis when the endpoint lands on it, otherwise
    the earlier portion of the curve; the endpoint must come within
    `proximity_tol` of one of them.  Uses the median of secant
    directions over the last `tail_fraction` of samples.
    """
    pts = np.asarray(trace.points, dtype=complex)
    n = len(pts)
    tail_n = max(int(round(n * tail_fraction)), 3)
    if n < tail_n + 4:
        raise InsufficientDataError("trace too short for angle estimation")
    z_end = pts[-1]
    tail = pts[-(tail_n + 1):-1]

    if z_end.imag <= proximity_tol:
        dy = tail.imag - z_end.imag
        dx = np.abs(tail.real - z_end.real)
        angles = np.arctan2(dy, dx)
        return float(np.median(angles))

    head = pts[: n - 2 * tail_n]
    if len(head) < 2:
        raise InsufficientDataError("no earlier curve to compare against")
    a, b = head[:-1], head[1:]
    ab = b - a
    denom = np.maximum(np.abs(ab) ** 2, 1e-300)
    tproj = np.clip(((z_end - a) * np.conj(ab)).real / denom, 0.0, 1.0)
    dist = np.abs(a + tproj * ab - z_end)
    j = int(np.argmin(dist))
    if dist[j] > proximity_tol:
        raise PreconditionError(
            f"trace endpoint is {dist[j]:.3g} away from both the real axis "
            f"and the earlier curve (tolerance {proximity_tol})"
        )
    tangent = math.atan2(ab[j].imag, ab[j].real)
    sec = z_end - tail
    angles = np.arctan2(sec.imag, sec.real)
    phi = abs(float(np.median(angles)) - tangent) % math.pi
    return min(phi, math.pi - phi)
