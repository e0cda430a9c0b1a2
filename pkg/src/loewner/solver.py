"""Flows, traces, swallow times, and hull rasters for the chordal
Loewner equation.

Two discretizations live here:

* trace computation composes exact one-step vertical-slit maps with
  midpoint driver sampling (``compute_trace``), and
* point flows integrate the Loewner ODE with a classical 4th-order
  scheme whose step shrinks with the distance to the singularity
  (``downward_flow`` / ``upward_flow`` / ``swallow_time``).

Hull rasterization runs the same adaptive ODE over the whole grid at
once, tracking the log-derivative of the flow map so near-boundary cells
can be classified by their estimated distance to the hull.
"""

from __future__ import annotations

import base64
import csv
import math
import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import _kernels
from .drivers import DrivingFunction
from .errors import (
    AmbiguousSwallowError,
    DomainError,
    IntegrationError,
    ParameterError,
)

_H_MIN_FACTOR = 1e-14
_GAP_SAFETY = 0.05
_MAX_GLOBAL_ITERS = 400_000


@dataclass(frozen=True)
class SolverConfig:
    """Discretization knobs shared by the solver entry points."""

    n_steps: int = 2000
    blowup_eps: float = 1e-6
    ode_substeps: int = 1
    max_step: Optional[float] = None

    def __post_init__(self):
        if self.n_steps < 1:
            raise ParameterError("n_steps must be at least 1")
        if not (self.blowup_eps > 0):
            raise ParameterError("blowup_eps must be positive")
        if self.ode_substeps < 1:
            raise ParameterError("ode_substeps must be at least 1")

    def base_step(self, T):
        h = T / (self.n_steps * self.ode_substeps)
        if self.max_step is not None:
            h = min(h, self.max_step)
        return h


@dataclass
class FlowTrajectory:
    """Recorded samples of one point under the downward or upward flow."""

    times: np.ndarray
    points: np.ndarray
    swallow_time: Optional[float] = None

    def to_csv(self, path):
        _write_tri_csv(path, self.times, self.points)


@dataclass
class TracePath:
    """Ordered tip samples gamma(t_0..t_N) from slit-map composition."""

    times: np.ndarray
    points: np.ndarray
    simple_flag: Optional[bool] = None
    # step grid retained for driver recovery; not serialized
    step_centers: Optional[np.ndarray] = field(default=None, repr=False)
    step_dts: Optional[np.ndarray] = field(default=None, repr=False)
    step_index: Optional[np.ndarray] = field(default=None, repr=False)
    # side of each seed relative to its final map's center; the first
    # inverse map folds both sides onto the slit, so this bit cannot be
    # reconstructed from the tip samples alone
    seed_sides: Optional[np.ndarray] = field(default=None, repr=False)

    def to_csv(self, path):
        _write_tri_csv(path, self.times, self.points)


@dataclass
class HullRaster:
    """Grid membership of the hull at a fixed time plus its real footprint."""

    window: tuple  # (x0, x1, y0, y1)
    resolution: tuple  # (nx, ny)
    membership: np.ndarray  # bool, shape (ny, nx), row-major by y then x
    real_interval: Optional[tuple]  # (p, right) or None
    unknown_cells: int = 0

    def cell_size(self):
        x0, x1, y0, y1 = self.window
        nx, ny = self.resolution
        return (x1 - x0) / nx, (y1 - y0) / ny

    def to_json(self, path=None):
        bits = np.packbits(self.membership.astype(np.uint8).ravel())
        doc = {
            "window": [float(v) for v in self.window],
            "resolution": [int(v) for v in self.resolution],
            "membership_b64": base64.b64encode(bits.tobytes()).decode("ascii"),
            "real_interval": (None if self.real_interval is None
                              else [float(v) for v in self.real_interval]),
            "unknown_cells": int(self.unknown_cells),
        }
        text = json.dumps(doc, sort_keys=True, separators=(",", ":"))
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text + "\n")
        return text

    @classmethod
    def from_json(cls, text):
        doc = json.loads(text)
        nx, ny = doc["resolution"]
        bits = np.frombuffer(base64.b64decode(doc["membership_b64"]), dtype=np.uint8)
        membership = np.unpackbits(bits)[: nx * ny].astype(bool).reshape(ny, nx)
        ri = doc["real_interval"]
        return cls(tuple(doc["window"]), (nx, ny), membership,
                   None if ri is None else tuple(ri), doc["unknown_cells"])


def _write_tri_csv(path, times, points):
    points = np.asarray(points, dtype=complex)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", "re", "im"])
        for t, z in zip(times, points):
            writer.writerow([repr(float(t)), repr(float(z.real)),
                             repr(float(z.imag))])


# ---------------------------------------------------------------------------
# elementary slit maps


def elementary_inverse_slit(w, c, dt):
    """Inverse of the one-step map g(z) = c + sqrt((z-c)^2 + 4 dt).

    Branch chosen so the image lies in the closed upper half-plane and
    real inputs keep their side of c.
    """
    w_arr = np.asarray(w, dtype=complex)
    u = w_arr - c
    v = np.sqrt(u * u - 4.0 * dt)
    v = np.where(v.imag < 0.0, -v, v)
    real = v.imag == 0.0
    if np.any(real):
        v = np.where(real & (u.real < 0.0), -np.abs(v.real) + 0.0j, v)
    out = c + v
    return complex(out) if np.ndim(w) == 0 else out


def elementary_forward_slit(z, c, dt):
    """One-step map g(z) = c + sqrt((z-c)^2 + 4 dt), same branch rules."""
    z_arr = np.asarray(z, dtype=complex)
    u = z_arr - c
    v = np.sqrt(u * u + 4.0 * dt)
    v = np.where(v.imag < 0.0, -v, v)
    real = v.imag == 0.0
    if np.any(real):
        v = np.where(real & (u.real < 0.0), -np.abs(v.real) + 0.0j, v)
    out = c + v
    return complex(out) if np.ndim(z) == 0 else out


# ---------------------------------------------------------------------------
# trace computation


def _refine_grid(driver, times, threshold, min_dt):
    for _ in range(48):
        lam = driver.eval(times)
        ratio = np.abs(np.diff(lam)) / np.sqrt(np.diff(times))
        bad = (ratio > threshold) & (np.diff(times) > min_dt)
        if not np.any(bad):
            break
        mids = 0.5 * (times[:-1][bad] + times[1:][bad])
        times = np.sort(np.concatenate([times, mids]))
    return times


def compute_trace(driver: DrivingFunction, config: SolverConfig,
                  t_end=None, n_samples=None, refine_threshold=None) -> TracePath:
    """Trace via composition of inverse vertical-slit maps.

    gamma(t_n) = F_1 o ... o F_n(lam(t_n)) with the k-th map using the
    midpoint driver value on its subinterval.  ``n_samples`` limits how
    many tip samples are stored (the map composition itself always uses
    the full step grid).
    """
    T = driver.T if t_end is None else float(t_end)
    if not (0 < T <= driver.T + 1e-12):
        raise ParameterError(f"t_end must lie in (0, {driver.T}]")
    times = np.linspace(0.0, T, config.n_steps + 1)
    if refine_threshold is not None:
        times = _refine_grid(driver, times, refine_threshold, T * 1e-9)
    n = len(times) - 1
    dts = np.diff(times)
    centers = driver.eval(0.5 * (times[:-1] + times[1:]))

    if n_samples is None or n_samples >= n + 1:
        sample_idx = np.arange(n + 1)
    else:
        if n_samples < 2:
            raise ParameterError("need at least 2 samples")
        sample_idx = np.unique(np.round(np.linspace(0, n, n_samples)).astype(int))
    seeds = driver.eval(times[sample_idx]).astype(complex)
    # first sample whose composition includes map k (1-based)
    start = np.searchsorted(sample_idx, np.arange(1, n + 1))
    w = _kernels.compose_inverse(seeds, start, centers, dts)
    bad = ~np.isfinite(w)
    if np.any(bad):
        raise IntegrationError(
            "non-finite value during trace composition",
            step_index=int(sample_idx[np.argmax(bad)]),
        )
    w = np.where(w.imag < 0.0, w.real + 0.0j, w)
    sides = np.zeros(len(sample_idx))
    nz = sample_idx > 0
    sides[nz] = np.sign(seeds.real[nz] - centers[sample_idx[nz] - 1])
    return TracePath(times=times[sample_idx], points=w,
                     step_centers=centers, step_dts=dts,
                     step_index=sample_idx, seed_sides=sides)


def recover_driver(trace: TracePath) -> np.ndarray:
    """Push trace samples back through the forward maps.

    Returns the driver values at the sampled times implied by the stored
    composition; a consistency diagnostic for the trace discretization.
    The final map of each sample lands on the real axis, where only the
    stored seed side distinguishes the two preimage branches.
    """
    if trace.step_centers is None or trace.seed_sides is None:
        raise ParameterError("trace does not carry its step grid")
    n = len(trace.step_dts)
    # apply maps 1..k-1 for the sample built from k maps; the k-th map is
    # applied analytically below with the recorded side
    stop = np.searchsorted(trace.step_index, np.arange(2, n + 2))
    q = _kernels.compose_forward(trace.points, stop,
                                 trace.step_centers, trace.step_dts)
    rec = q.real.copy()
    nz = trace.step_index > 0
    c = trace.step_centers[trace.step_index[nz] - 1]
    dt = trace.step_dts[trace.step_index[nz] - 1]
    u = q[nz] - c
    a = np.abs(np.sqrt(u * u + 4.0 * dt))
    side = trace.seed_sides[nz]
    rec[nz] = c + side * a
    return rec


# ---------------------------------------------------------------------------
# adaptive ODE engine (downward and upward flows)


def _advance_down(z, t, t_end, driver, config, eps, real_axis=False,
                  track_deriv=False):
    """March a batch of points of the downward flow to ``t_end``.

    Returns (z, t, swallowed, swallow_times, ambiguous, log_deriv).
    Points are frozen as soon as |z - lam(t)| < eps; real-axis batches
    additionally detect sign crossings of z - lam.
    """
    z = np.array(z, dtype=float if real_axis else complex)
    t = np.array(np.broadcast_to(np.asarray(t, dtype=float), z.shape), dtype=float)
    m = z.size
    swallowed = np.zeros(m, dtype=bool)
    ambiguous = np.zeros(m, dtype=bool)
    swallow_times = np.full(m, np.nan)
    log_deriv = np.zeros(m) if track_deriv else None
    active = np.ones(m, dtype=bool)
    T = driver.T
    dt_base = config.base_step(T)
    h_min = _H_MIN_FACTOR * max(T, 1.0)
    # per-point step size, warm-started across iterations so the guard
    # loop below only has to halve a handful of times per step
    h_curr = np.full(m, dt_base)

    iters = 0
    while np.any(active):
        iters += 1
        if iters > _MAX_GLOBAL_ITERS:
            ambiguous[active] = True
            break
        idx = np.nonzero(active)[0]
        zi = z[idx]
        ti = t[idx]
        lam = driver.eval(ti)
        diff = zi - lam
        gap = np.abs(diff)

        hit = gap < eps
        if np.any(hit):
            j = idx[hit]
            swallowed[j] = True
            swallow_times[j] = t[j]
            active[j] = False
            idx, zi, ti, lam, diff, gap = (idx[~hit], zi[~hit], ti[~hit],
                                           lam[~hit], diff[~hit], gap[~hit])
            if idx.size == 0:
                continue

        rem = t_end - ti
        done = rem <= 1e-16 * max(T, 1.0)
        if np.any(done):
            active[idx[done]] = False
            idx, zi, ti, lam, diff, gap, rem = (
                idx[~done], zi[~done], ti[~done], lam[~done], diff[~done],
                gap[~done], rem[~done])
            if idx.size == 0:
                continue

        h = np.minimum(np.minimum(2.0 * h_curr[idx], dt_base), rem)
        # driver-variation guard: the driver must not move by more than a
        # fraction of the gap within one step (iterate because a linear
        # rescale underestimates the sweep of strongly curved drivers).
        # The exact slit step pushes every point at least 2*sqrt(h) away
        # from the frozen driving value, so a variation below 1.8*sqrt(h)
        # can never produce a spurious crossing and the bound need not
        # shrink with the gap.
        for _ in range(60):
            probe = np.minimum(ti + h, T)
            dlam = np.abs(driver.eval(probe) - lam)
            mask = (dlam > np.maximum(0.15 * gap, 1.8 * np.sqrt(h))) & (h > h_min)
            if not np.any(mask):
                break
            h = np.where(mask, 0.5 * h, h)
        h = np.maximum(h, h_min)
        h = np.minimum(h, rem)
        h_curr[idx] = h
        # classical step only while it resolves the singularity; closer
        # in, the exact frozen-driver slit step is unconditionally stable
        stiff = h > _GAP_SAFETY * gap * gap

        underflow = (h <= h_min) & (rem > 16 * h_min)
        if np.any(underflow & (gap < 4 * eps)):
            # effectively at the singularity: declare swallowed
            j = idx[underflow & (gap < 4 * eps)]
            swallowed[j] = True
            swallow_times[j] = t[j]
            active[j] = False
        hard = underflow & (gap >= 4 * eps)
        if np.any(hard):
            ambiguous[idx[hard]] = True
            active[idx[hard]] = False
        if np.any(underflow):
            keep = ~underflow
            idx, zi, ti, lam, diff, gap, h = (idx[keep], zi[keep], ti[keep],
                                              lam[keep], diff[keep], gap[keep],
                                              h[keep])
            if idx.size == 0:
                continue

        if np.any(underflow):
            stiff = stiff[keep]

        lam_mid = driver.eval(np.minimum(ti + 0.5 * h, T))
        lam_end = driver.eval(np.minimum(ti + h, T))
        k1 = 2.0 / diff
        k2 = 2.0 / (zi + 0.5 * h * k1 - lam_mid)
        k3 = 2.0 / (zi + 0.5 * h * k2 - lam_mid)
        k4 = 2.0 / (zi + h * k3 - lam_end)
        with np.errstate(over="ignore", invalid="ignore"):
            z_new = zi + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if track_deriv:
            # d/dt log g'(z) = -2/(g - lam)^2 = -k(z, t)^2 / 2
            ld_inc = np.real((h / 6.0) * (-0.5) *
                             (k1 * k1 + 2 * k2 * k2 + 2 * k3 * k3 + k4 * k4))
        st_step = ti + h
        if np.any(stiff):
            # exact step of dg/dt = 2/(g - c) with the driver frozen at its
            # midpoint value: (g - c)^2 grows linearly, so the square root
            # never overshoots the singularity no matter how small the gap
            u = zi - lam_mid
            if real_axis:
                v = np.sign(u) * np.sqrt(u * u + 4.0 * h)
                z_new = np.where(stiff, lam_mid + v, z_new)
            else:
                v = np.sqrt(u * u + 4.0 * h)
                v = np.where((v.imag < 0.0) |
                             ((v.imag == 0.0) & (u.real < 0.0)), -v, v)
                # a point horizontally within eps of the frozen value is
                # absorbed once (g - c)^2, which moves right at speed 4,
                # reaches the positive real axis
                h_star = 0.25 * (u.imag * u.imag - u.real * u.real)
                absorbed = stiff & (np.abs(u.real) <= eps) & (h_star <= h)
                if np.any(absorbed):
                    z_new = np.where(absorbed, np.nan, z_new)
                    st_step = np.where(absorbed,
                                       ti + np.clip(h_star, 0.0, None), st_step)
                z_new = np.where(stiff & ~absorbed, lam_mid + v, z_new)
            if track_deriv:
                with np.errstate(divide="ignore"):
                    ld_slit = np.log(np.abs(u)) - np.log(np.abs(v))
                ld_inc = np.where(stiff, ld_slit, ld_inc)

        if real_axis:
            crossed = np.sign(z_new - lam_end) != np.sign(diff)
        else:
            crossed = np.asarray(z_new).imag < 0.0
        bad = ~np.isfinite(z_new) | crossed
        if np.any(bad):
            # stepped across the singularity: the point belongs to the hull
            j = idx[bad]
            swallowed[j] = True
            swallow_times[j] = np.asarray(st_step)[bad]
            active[j] = False
            keep = ~bad
            idx, z_new, ti = idx[keep], z_new[keep], ti[keep]
            h = np.asarray(h)[keep]
            if track_deriv:
                ld_inc = ld_inc[keep]
            if idx.size == 0:
                continue

        if track_deriv:
            log_deriv[idx] += ld_inc

        z[idx] = z_new
        t[idx] = ti + h

    return z, t, swallowed, swallow_times, ambiguous, log_deriv


def _advance_up(z, t, t_end, xi_eval, config, s_total):
    """March a batch of points of the upward flow to ``t_end``.

    ``xi_eval`` evaluates the time-reversed driver; no swallowing can
    occur since points move away from the real axis.
    """
    z = np.array(z, dtype=complex)
    t = np.array(np.broadcast_to(np.asarray(t, dtype=float), z.shape), dtype=float)
    m = z.size
    active = np.ones(m, dtype=bool)
    dt_base = config.base_step(s_total)
    h_min = _H_MIN_FACTOR * max(s_total, 1.0)

    iters = 0
    while np.any(active):
        iters += 1
        if iters > _MAX_GLOBAL_ITERS:
            raise IntegrationError("upward flow failed to converge")
        idx = np.nonzero(active)[0]
        zi = z[idx]
        ti = t[idx]
        xi = xi_eval(ti)
        diff = zi - xi
        d = np.abs(diff)

        rem = t_end - ti
        done = rem <= 1e-16 * max(s_total, 1.0)
        if np.any(done):
            active[idx[done]] = False
            idx, zi, ti, xi, diff, d, rem = (
                idx[~done], zi[~done], ti[~done], xi[~done], diff[~done],
                d[~done], rem[~done])
            if idx.size == 0:
                continue

        h = np.minimum(dt_base, _GAP_SAFETY * d * d)
        h = np.minimum(h, rem)
        # iterated driver-variation guard, as in the downward march
        for _ in range(60):
            probe = np.minimum(ti + h, t_end)
            dxi = np.abs(xi_eval(probe) - xi)
            mask = (dxi > 0.3 * d) & (h > h_min)
            if not np.any(mask):
                break
            h = np.where(mask, 0.5 * h, h)
        h = np.maximum(h, h_min)
        h = np.minimum(h, rem)

        xi_mid = xi_eval(np.minimum(ti + 0.5 * h, t_end))
        xi_end = xi_eval(np.minimum(ti + h, t_end))
        k1 = -2.0 / diff
        k2 = -2.0 / (zi + 0.5 * h * k1 - xi_mid)
        k3 = -2.0 / (zi + 0.5 * h * k2 - xi_mid)
        k4 = -2.0 / (zi + h * k3 - xi_end)
        z_new = zi + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if np.any(~np.isfinite(z_new)):
            raise IntegrationError("non-finite value in upward flow")
        # exact upward dynamics never decrease the imaginary part
        z_new = np.where(z_new.imag < zi.imag, z_new.real + 1j * zi.imag, z_new)
        z[idx] = z_new
        t[idx] = ti + h

    return z


# ---------------------------------------------------------------------------
# public flow operations


def downward_flow(z0, driver: DrivingFunction, config: SolverConfig,
                  t_end=None, n_record=256) -> FlowTrajectory:
    """Integrate dg/dt = 2/(g - lam(t)) from g(0) = z0.

    Terminates early, with ``swallow_time`` set, once the state comes
    within ``blowup_eps`` of the driving value.
    """
    T = driver.T if t_end is None else float(t_end)
    z0 = complex(z0)
    if z0.imag < -1e-15:
        raise DomainError("initial point must lie in the closed upper half-plane")
    if abs(z0 - driver.eval(0.0)) <= config.blowup_eps:
        raise DomainError("initial point coincides with the driving value")
    real_axis = z0.imag <= 0.0
    record_times = np.linspace(0.0, T, min(n_record, config.n_steps) + 1)
    times = [0.0]
    points = [z0]
    z = np.array([z0.real if real_axis else z0])
    t = np.array([0.0])
    swallow_at = None
    for t_next in record_times[1:]:
        z, t, sw, swt, amb, _ = _advance_down(
            z, t, t_next, driver, config, config.blowup_eps, real_axis=real_axis)
        if amb[0]:
            raise AmbiguousSwallowError(
                "step size underflow before swallow could be declared",
                last_t=float(t[0]), last_z=complex(z[0]))
        if sw[0]:
            swallow_at = float(swt[0])
            break
        times.append(float(t[0]))
        points.append(complex(z[0]))
    return FlowTrajectory(times=np.array(times),
                          points=np.array(points, dtype=complex),
                          swallow_time=swallow_at)


def upward_flow(z0, driver: DrivingFunction, s, config: SolverConfig,
                n_record=256) -> FlowTrajectory:
    """Integrate df/dt = -2/(f - xi(t)) with xi(t) = lam(s - t) to time s.

    Approximates the inverse map of the downward flow at time s.
    """
    if not (0 < s <= driver.T + 1e-12):
        raise DomainError(f"s must lie in (0, {driver.T}]")
    s = float(min(s, driver.T))
    z0 = complex(z0)
    if z0.imag < -1e-15:
        raise DomainError("initial point must lie in the closed upper half-plane")

    def xi_eval(u):
        return driver.eval(np.clip(s - u, 0.0, driver.T))

    t0 = 0.0
    xi0 = float(driver.eval(s))
    if abs(z0 - xi0) < 1e-9 * max(s, 1.0):
        # bootstrap off the singular tip: locally the flow rises like the
        # constant-driver solution 2 sqrt(t)
        t0 = 1e-10 * s
        z0 = complex(z0.real, max(z0.imag, 0.0) + 2.0 * np.sqrt(t0))
    record_times = np.linspace(t0, s, min(n_record, config.n_steps) + 1)
    times = [t0]
    points = [z0]
    z = np.array([z0], dtype=complex)
    t = np.array([t0])
    for t_next in record_times[1:]:
        z = _advance_up(z, t, t_next, xi_eval, config, s)
        t = np.array([t_next])
        times.append(float(t_next))
        points.append(complex(z[0]))
    return FlowTrajectory(times=np.array(times),
                          points=np.array(points, dtype=complex),
                          swallow_time=None)


def upward_flow_batch(z0s, driver: DrivingFunction, s, config: SolverConfig):
    """Endpoint-only upward flow of many points; returns f_s(z0s)."""
    s = float(s)

    def xi_eval(u):
        return driver.eval(np.clip(s - u, 0.0, driver.T))

    z = np.asarray(z0s, dtype=complex)
    return _advance_up(z.copy(), np.zeros(z.shape), s, xi_eval, config, s)


def downward_flow_batch(z0s, driver: DrivingFunction, config: SolverConfig,
                        t_end=None, eps=None, track_deriv=False):
    """Endpoint-only downward flow of many points.

    Returns (final states, swallowed mask, swallow times, ambiguous mask,
    log |g'| estimates or None).
    """
    T = driver.T if t_end is None else float(t_end)
    eps = config.blowup_eps if eps is None else float(eps)
    z = np.asarray(z0s, dtype=complex)
    out = np.empty(z.shape, dtype=complex)
    swallowed = np.zeros(z.shape, dtype=bool)
    swt = np.full(z.shape, np.nan)
    amb = np.zeros(z.shape, dtype=bool)
    logd = np.zeros(z.shape) if track_deriv else None

    real_mask = z.imag <= 0.0
    if np.any(real_mask):
        zr, tr, sw, st, am, _ = _advance_down(
            z[real_mask].real, 0.0, T, driver, config, eps, real_axis=True)
        out[real_mask] = zr
        swallowed[real_mask] = sw
        swt[real_mask] = st
        amb[real_mask] = am
    if np.any(~real_mask):
        zc, tc, sw, st, am, ld = _advance_down(
            z[~real_mask], 0.0, T, driver, config, eps, real_axis=False,
            track_deriv=track_deriv)
        out[~real_mask] = zc
        swallowed[~real_mask] = sw
        swt[~real_mask] = st
        amb[~real_mask] = am
        if track_deriv:
            logd[~real_mask] = ld
    return out, swallowed, swt, amb, logd


def swallow_time(x, driver: DrivingFunction, config: SolverConfig,
                 t_end=None) -> Optional[float]:
    """First time the real point x is absorbed, or None if it survives."""
    x = float(x)
    if abs(x - driver.eval(0.0)) <= config.blowup_eps:
        raise DomainError("initial point coincides with the driving value")
    T = driver.T if t_end is None else float(t_end)
    z, t, sw, swt, amb, _ = _advance_down(
        np.array([x]), 0.0, T, driver, config, config.blowup_eps, real_axis=True)
    if amb[0]:
        raise AmbiguousSwallowError(
            "step size underflow before swallow could be declared",
            last_t=float(t[0]), last_z=float(z[0]))
    return float(swt[0]) if sw[0] else None


def swallow_times_real(xs, driver: DrivingFunction, config: SolverConfig,
                       t_end=None):
    """Batch swallow times over the real axis.

    Returns (times with NaN for survivors, ambiguous mask).
    """
    T = driver.T if t_end is None else float(t_end)
    xs = np.asarray(xs, dtype=float)
    _, _, sw, swt, amb, _ = _advance_down(
        xs, 0.0, T, driver, config, config.blowup_eps, real_axis=True)
    return swt, amb


# ---------------------------------------------------------------------------
# hull rasterization


def _bisect_real_boundary(driver, config, x_out, x_in, tol, t_end):
    """Bisect between a surviving and a swallowed abscissa."""
    for _ in range(200):
        if abs(x_in - x_out) <= tol:
            break
        mid = 0.5 * (x_in + x_out)
        swt, amb = swallow_times_real([mid], driver, config, t_end=t_end)
        if amb[0]:
            # treat ambiguity as membership: the point is at the singularity
            x_in = mid
        elif np.isfinite(swt[0]):
            x_in = mid
        else:
            x_out = mid
    return x_in


def real_hull_interval(driver: DrivingFunction, config: SolverConfig,
                       x_lo, x_hi, t_end=None, tol=1e-4, n_scan=129):
    """Swallowed real interval [p, right] inside [x_lo, x_hi] at time t_end.

    Located by a coarse scan followed by bisection on the swallow oracle.
    Returns None when no scanned point is swallowed.
    """
    T = driver.T if t_end is None else float(t_end)
    lam0 = driver.eval(0.0)
    xs = np.linspace(x_lo, x_hi, n_scan)
    xs = xs[np.abs(xs - lam0) > 10 * config.blowup_eps]
    swt, amb = swallow_times_real(xs, driver, config, t_end=T)
    member = np.isfinite(swt) | amb
    if not np.any(member):
        return None
    i_first, i_last = np.argmax(member), len(member) - 1 - np.argmax(member[::-1])
    p = xs[i_first]
    if i_first > 0:
        p = _bisect_real_boundary(driver, config, xs[i_first - 1], xs[i_first],
                                  tol, T)
    right = xs[i_last]
    if i_last < len(xs) - 1:
        right = _bisect_real_boundary(driver, config, xs[i_last + 1], xs[i_last],
                                      tol, T)
    return float(p), float(right)


def hull_raster(driver: DrivingFunction, T, window, resolution,
                config: SolverConfig, capture_eps=None,
                boundary_cells=True) -> HullRaster:
    """Classify grid cells as swallowed by time T.

    Cell centers run through the downward flow; cells whose estimated
    distance to the hull (imaginary part over flow-map derivative) is
    below half a cell diagonal are also marked, so the raster closes up
    to one-cell accuracy around slit-like hulls.
    """
    x0, x1, y0, y1 = (float(v) for v in window)
    if y1 <= 0:
        raise ParameterError("window must intersect the closed upper half-plane")
    y0 = max(y0, 0.0)
    nx, ny = (int(v) for v in resolution)
    dx, dy = (x1 - x0) / nx, (y1 - y0) / ny
    xs = x0 + (np.arange(nx) + 0.5) * dx
    ys = y0 + (np.arange(ny) + 0.5) * dy
    zz = (xs[None, :] + 1j * ys[:, None]).ravel()

    eps = capture_eps
    if eps is None:
        eps = max(config.blowup_eps, 1e-3 * min(dx, dy, 1.0))
    final, swallowed, _, amb, logd = downward_flow_batch(
        zz, driver, config, t_end=T, eps=eps, track_deriv=boundary_cells)
    member = swallowed.copy()
    if boundary_cells:
        lam_T = driver.eval(min(T, driver.T))
        dist = np.full(zz.shape, np.inf)
        ok = ~swallowed & ~amb & (logd != 0)
        with np.errstate(over="ignore", invalid="ignore"):
            dist[ok] = final[ok].imag / np.exp(logd[ok])
        near = dist <= 0.5 * np.hypot(dx, dy)
        member |= near
    member &= ~amb

    interval = real_hull_interval(driver, config, x0, x1, t_end=T)
    return HullRaster(window=(x0, x1, y0, y1), resolution=(nx, ny),
                      membership=member.reshape(ny, nx),
                      real_interval=interval,
                      unknown_cells=int(np.count_nonzero(amb)))


def _shoot_left_separatrix(driver, T, tau0, c0, h_cap):
    """Backward integration of the real flow from just below lam(T - tau0).

    Rides the marginal (separatrix) trajectory with terminal slope c0 back
    to time 0; points left of the result escape, points right of it are
    swallowed by time T.  Returns None when the trajectory collides with
    the driver (no terminal capture structure).
    """
    t = T - tau0
    x = float(driver.eval(t)) - c0 * math.sqrt(tau0)

    def rhs(tt, xx):
        return 2.0 / (xx - float(driver.eval(max(tt, 0.0))))

    iters = 0
    gap_floor = 1e-10 * max(abs(x), 1.0)
    while t > 0.0:
        gap = float(driver.eval(t)) - x
        if gap <= 0.0 or (gap <= gap_floor and t < T - 2.0 * tau0):
            # collided with the driver: no marginal trajectory survives
            return None
        h = min(_GAP_SAFETY * gap * gap, h_cap, t)
        while True:
            k1 = rhs(t, x)
            k2 = rhs(t - 0.5 * h, x - 0.5 * h * k1)
            k3 = rhs(t - 0.5 * h, x - 0.5 * h * k2)
            k4 = rhs(t - h, x - h * k3)
            xn = x - (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
            if float(driver.eval(t - h)) - xn > 0.5 * gap or h < 1e-15:
                break
            h *= 0.5
        x = xn
        t -= h
        iters += 1
        if iters > 500_000:
            return None
    return x


def hull_left_endpoint(driver: DrivingFunction, config: SolverConfig,
                       t_end=None, taus=(1e-8, 1e-11, 1e-14)):
    """Left endpoint of K_T on the real axis by separatrix shooting.

    Forward bisection cannot resolve the endpoint when the driver ends
    like c*sqrt(T - t) with c near 4 (marginal trajectories separate
    only after exp(-c/delta) time), so the endpoint is computed as the
    time-0 position of the backward marginal trajectory.  The terminal
    slope is seeded from the measured sqrt-coefficient of the driver and
    the residual O(1/log tau0) truncation removed by extrapolation over
    the tau0 ladder.  Returns None when the driver has no terminal
    capture structure (sqrt-coefficient below 4 and shot collides).
    """
    T = driver.T if t_end is None else float(t_end)
    lam_T = float(driver.eval(T))
    tk = 1e-8 * max(T, 1.0)
    kappa = abs(lam_T - float(driver.eval(T - tk))) / math.sqrt(tk)
    # the sqrt(tau) separatrix ansatz only applies when the terminal
    # sqrt-coefficient is scale-stable; power-like tails (r != 1/2) are
    # left to forward bisection, which is sharp for them
    kappa_coarse = abs(lam_T - float(driver.eval(T - 1e4 * tk))) \
        / math.sqrt(1e4 * tk)
    if abs(kappa - kappa_coarse) > 0.05 * max(kappa, kappa_coarse, 1e-12):
        return None
    if kappa >= 4.0:
        c0 = 0.5 * (kappa + math.sqrt(kappa * kappa - 16.0))
    else:
        c0 = 4.0
    h_cap = 5e-4 * T

    ps, us = [], []
    for tau0 in taus:
        p = _shoot_left_separatrix(driver, T, tau0 * T, c0, h_cap)
        if p is not None:
            ps.append(p)
            us.append(1.0 / math.log(1.0 / tau0))
    if not ps:
        return None
    if len(ps) < 2 or max(ps) - min(ps) < 1e-9:
        return ps[-1]
    return float(np.polyval(np.polyfit(us, ps, 1), 0.0))
