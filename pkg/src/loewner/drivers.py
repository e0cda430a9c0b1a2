"""Driving functions for the chordal Loewner equation.

A driving function is a continuous real-valued function on [0, T].  The
families implemented here are the ones used by the geometric checks in
:mod:`loewner.analysis`: constants, linear ramps, square-root and power-law
endings, lacunary cosine (Weierstrass) series, the piecewise
constant/linear staircase driver, and drivers run through a frozen
monotone time change.

All evaluation is vectorized: ``eval`` and ``derivative`` accept scalars
or numpy arrays of times.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    AnalyticDerivativeUnavailable,
    DomainError,
    ParameterError,
)

_DOMAIN_SLACK = 1e-12


def _as_time_array(t):
    arr = np.asarray(t, dtype=float)
    return arr, (arr.ndim == 0)


class DrivingFunction:
    """Base class: a real function on [0, T] with optional derivatives."""

    family = "base"

    # default step near the optimum eps**(1/4) for second differences
    def __init__(self, T, derivative_mode="analytic", fd_step_factor=1e-4):
        if not (T > 0):
            raise ParameterError(f"horizon must be positive, got {T}")
        if derivative_mode not in ("analytic", "finite_difference"):
            raise ParameterError(f"unknown derivative mode {derivative_mode!r}")
        self.T = float(T)
        self.derivative_mode = derivative_mode
        self.fd_step_factor = float(fd_step_factor)

    # -- evaluation ---------------------------------------------------

    def _eval(self, t):
        raise NotImplementedError

    def eval(self, t):
        arr, scalar = _as_time_array(t)
        slack = _DOMAIN_SLACK * max(self.T, 1.0)
        if np.any(arr < -slack) or np.any(arr > self.T + slack):
            raise DomainError(
                f"time outside [0, {self.T}]: "
                f"range [{arr.min()}, {arr.max()}]"
            )
        out = np.asarray(self._eval(np.clip(arr, 0.0, self.T)), dtype=float)
        if not np.all(np.isfinite(out)):
            raise DomainError("driver evaluated to a non-finite value")
        return float(out) if scalar else out

    __call__ = eval

    # -- derivatives --------------------------------------------------

    def _derivative(self, t, order):
        raise AnalyticDerivativeUnavailable(
            f"{self.family} has no closed-form derivative"
        )

    def derivative(self, t, order=1, mode=None):
        if order not in (1, 2):
            raise ParameterError(f"derivative order must be 1 or 2, got {order}")
        arr, scalar = _as_time_array(t)
        slack = _DOMAIN_SLACK * max(self.T, 1.0)
        if np.any(arr < -slack) or np.any(arr >= self.T):
            raise DomainError(f"derivative requires t in [0, T); T = {self.T}")
        mode = mode or self.derivative_mode
        if mode == "analytic":
            out = np.asarray(self._derivative(np.clip(arr, 0.0, self.T), order),
                             dtype=float)
        else:
            out = self._fd_derivative(arr, order)
        return float(out) if scalar else out

    def _fd_derivative(self, t, order):
        h = self.fd_step_factor * self.T
        # keep the central stencil inside [0, T]
        c = np.clip(t, h, self.T - h)
        lo, hi = self._eval(c - h), self._eval(c + h)
        if order == 1:
            return (hi - lo) / (2.0 * h)
        mid = self._eval(c)
        return (hi - 2.0 * mid + lo) / (h * h)

    # -- derived quantities -------------------------------------------

    def loewner_curvature(self, t, mode=None):
        """Cubed first derivative over second derivative; 0 when flat.

        Returns a signed infinity when the second derivative vanishes
        while the first does not.
        """
        lp = self.derivative(t, 1, mode=mode)
        lpp = self.derivative(t, 2, mode=mode)
        lp_arr, scalar = _as_time_array(lp)
        lpp_arr = np.asarray(lpp, dtype=float)
        out = np.empty_like(lp_arr)
        flat = lp_arr == 0.0
        sing = (~flat) & (lpp_arr == 0.0)
        rest = ~(flat | sing)
        out[flat] = 0.0
        out[sing] = np.sign(lp_arr[sing]) * np.inf
        with np.errstate(over="ignore"):
            out[rest] = lp_arr[rest] ** 3 / lpp_arr[rest]
        return float(out) if scalar else out

    def half_norm(self, grid_size):
        """Sup of |lam(t)-lam(s)|/sqrt|t-s| over a uniform grid.

        All O(n^2) pairs up to 4096 grid points; beyond that, pairs over a
        uniform 4096-point subsample plus all adjacent pairs of the full
        grid.  A lower bound to the true sup, nondecreasing under nested
        grid refinement.
        """
        if grid_size < 2:
            raise ParameterError("grid_size must be at least 2")
        t = np.linspace(0.0, self.T, grid_size)
        lam = self.eval(t)
        best = 0.0
        if grid_size > 4096:
            # adjacent pairs of the full grid
            dl = np.abs(np.diff(lam))
            dt = np.diff(t)
            best = float(np.max(dl / np.sqrt(dt)))
            idx = np.unique(np.round(np.linspace(0, grid_size - 1, 4096)).astype(int))
            t, lam = t[idx], lam[idx]
        n = len(t)
        chunk = max(1, 2 ** 22 // n)
        for i0 in range(0, n - 1, chunk):
            i1 = min(i0 + chunk, n - 1)
            ti = t[i0:i1, None]
            li = lam[i0:i1, None]
            dts = t[None, :] - ti
            with np.errstate(divide="ignore", invalid="ignore"):
                q = np.abs(lam[None, :] - li) / np.sqrt(np.abs(dts))
            q[~np.isfinite(q)] = 0.0
            best = max(best, float(q.max()))
        return best

    # -- transforms -----------------------------------------------------

    def translated(self, a):
        return _Translated(self, float(a))

    def scaled(self, k):
        if not (k > 0):
            raise ParameterError(f"scale factor must be positive, got {k}")
        return _Scaled(self, float(k))

    def reflected(self):
        return _Reflected(self)

    def concatenated_from(self, s):
        if not (0.0 < s < self.T):
            raise ParameterError(
                f"concatenation time must lie in (0, {self.T}), got {s}"
            )
        return _Shifted(self, float(s))

    def __repr__(self):
        items = ", ".join(f"{k}={v!r}" for k, v in self.params.items())
        return f"{type(self).__name__}({items}, T={self.T})"

    @property
    def params(self):
        return {}


# ---------------------------------------------------------------------------
# concrete families


class Constant(DrivingFunction):
    family = "constant"

    def __init__(self, a, T=1.0, **kw):
        super().__init__(T, **kw)
        self.a = float(a)

    def _eval(self, t):
        return np.full_like(np.asarray(t, dtype=float), self.a)

    def _derivative(self, t, order):
        return np.zeros_like(np.asarray(t, dtype=float))

    @property
    def params(self):
        return {"a": self.a}


class Linear(DrivingFunction):
    """lam(t) = m * t."""

    family = "linear"

    def __init__(self, m, T=1.0, **kw):
        super().__init__(T, **kw)
        self.m = float(m)

    def _eval(self, t):
        return self.m * np.asarray(t, dtype=float)

    def _derivative(self, t, order):
        t = np.asarray(t, dtype=float)
        return np.full_like(t, self.m) if order == 1 else np.zeros_like(t)

    @property
    def params(self):
        return {"m": self.m}


class SqrtEnd(DrivingFunction):
    """lam(t) = k * sqrt(T - t); vanishes exactly at t = T."""

    family = "sqrt_end"

    def __init__(self, k, T=1.0, **kw):
        super().__init__(T, **kw)
        self.k = float(k)

    def _eval(self, t):
        return self.k * np.sqrt(np.maximum(self.T - np.asarray(t, dtype=float), 0.0))

    def _derivative(self, t, order):
        s = self.T - np.asarray(t, dtype=float)
        if order == 1:
            return -self.k / (2.0 * np.sqrt(s))
        return -self.k / (4.0 * s ** 1.5)

    @property
    def params(self):
        return {"k": self.k}


class PowerEnd(DrivingFunction):
    """lam(t) = a * (T - t)**r for r in (0, 1); vanishes exactly at t = T."""

    family = "power_end"

    def __init__(self, a, r, T=1.0, **kw):
        super().__init__(T, **kw)
        if not (0.0 < r < 1.0):
            raise ParameterError(f"exponent must lie in (0, 1), got {r}")
        if a == 0:
            raise ParameterError("amplitude must be nonzero")
        self.a = float(a)
        self.r = float(r)

    def _eval(self, t):
        s = np.maximum(self.T - np.asarray(t, dtype=float), 0.0)
        return self.a * s ** self.r

    def _derivative(self, t, order):
        a, r = self.a, self.r
        s = self.T - np.asarray(t, dtype=float)
        if order == 1:
            return -a * r * s ** (r - 1.0)
        return a * r * (r - 1.0) * s ** (r - 2.0)

    @property
    def params(self):
        return {"a": self.a, "r": self.r}


def weierstrass_default_terms(k, b, r, tail=1e-10):
    """Smallest truncation with geometric tail bound below `tail`.

    The omitted tail of k * sum b**(-r n) cos(b**n t) is at most
    k * b**(-r N) / (1 - b**(-r)).
    """
    q = b ** (-r)
    n = math.ceil(math.log(abs(k) / (tail * (1.0 - q))) / (r * math.log(b)))
    return max(int(n), 1)


class Weierstrass(DrivingFunction):
    """Truncated lacunary cosine series k * sum_n b**(-r n) cos(b**n t)."""

    family = "weierstrass"

    def __init__(self, k, b, r, n_terms=None, T=1.0, **kw):
        super().__init__(T, **kw)
        if not (b > 1):
            raise ParameterError(f"frequency base must exceed 1, got {b}")
        if not (r > 0):
            raise ParameterError(f"decay exponent must be positive, got {r}")
        self.k = float(k)
        self.b = float(b)
        self.r = float(r)
        self.n_terms = int(n_terms) if n_terms else weierstrass_default_terms(k, b, r)
        n = np.arange(self.n_terms)
        self._amps = self.k * self.b ** (-self.r * n)
        self._freqs = self.b ** n

    @property
    def tail_bound(self):
        q = self.b ** (-self.r)
        return abs(self.k) * q ** self.n_terms / (1.0 - q)

    def _eval(self, t):
        t = np.atleast_1d(np.asarray(t, dtype=float))
        out = self._amps @ np.cos(np.outer(self._freqs, t))
        return out if out.size > 1 else out.reshape(())

    def _derivative(self, t, order):
        if self.r <= order:
            raise AnalyticDerivativeUnavailable(
                f"weierstrass series with r <= {order} is not termwise "
                f"differentiable to order {order}"
            )
        t = np.atleast_1d(np.asarray(t, dtype=float))
        if order == 1:
            out = -(self._amps * self._freqs) @ np.sin(np.outer(self._freqs, t))
        else:
            out = -(self._amps * self._freqs ** 2) @ np.cos(np.outer(self._freqs, t))
        return out if out.size > 1 else out.reshape(())

    @property
    def params(self):
        return {"k": self.k, "b": self.b, "r": self.r, "n_terms": self.n_terms}


class StaircaseDriver(DrivingFunction):
    """Monotone driver alternating plateaus and down-ramps on [0, 1].

    On each dyadic interval [1 - 2**-n, 1 - 2**-(n+1)], n < n_levels, the
    value sits at a * 2**(-n r) for the first `split` fraction, then ramps
    linearly down to a * 2**(-(n+1) r).  Past the last level it continues
    as a * (1 - t)**r, which closes continuously to 0 at t = 1.
    """

    family = "piecewise_no_trace"

    def __init__(self, a, r, n_levels, split, **kw):
        super().__init__(1.0, **kw)
        if not (0.0 < r < 0.5):
            raise ParameterError(f"exponent must lie in (0, 1/2), got {r}")
        a_min = 2.0 / (1.0 - 2.0 ** (-r))
        if a < a_min - 1e-12:
            raise ParameterError(
                f"amplitude {a} below the admissible bound {a_min}"
            )
        if n_levels < 1:
            raise ParameterError("need at least one level")
        if not (0.0 < split < 1.0):
            raise ParameterError(f"split must lie in (0, 1), got {split}")
        self.a = float(a)
        self.r = float(r)
        self.n_levels = int(n_levels)
        self.split = float(split)

    def _pieces(self, t):
        """Return (level index clipped to n_levels, in-level fraction)."""
        s = 1.0 - np.asarray(t, dtype=float)
        # level n: s in (2**-(n+1), 2**-n]
        with np.errstate(divide="ignore"):
            n = np.floor(-np.log2(np.maximum(s, 1e-300)))
        n = np.clip(n, 0, None)
        # guard against roundoff at dyadic boundaries
        n = np.where(s > 2.0 ** -(n + 0.0), n - 1, n)
        n = np.where(s <= 2.0 ** -(n + 1.0), n + 1, n).astype(int)
        return n, s

    def _eval(self, t):
        t = np.asarray(t, dtype=float)
        n, s = self._pieces(t)
        a, r, split = self.a, self.r, self.split
        tail = n >= self.n_levels
        nf = n.astype(float)
        width = 2.0 ** -(nf + 1.0)
        u = (t - (1.0 - 2.0 ** -nf)) / width  # position in [0, 1) within level
        lev_lo = a * 2.0 ** (-nf * r)
        lev_hi = a * 2.0 ** (-(nf + 1.0) * r)
        ramp = lev_lo + (lev_hi - lev_lo) * np.clip((u - split) / (1.0 - split), 0.0, 1.0)
        out = np.where(u <= split, lev_lo, ramp)
        out = np.where(tail, a * np.maximum(s, 0.0) ** r, out)
        return out

    def _derivative(self, t, order):
        t = np.asarray(t, dtype=float)
        n, s = self._pieces(t)
        a, r, split = self.a, self.r, self.split
        tail = n >= self.n_levels
        nf = n.astype(float)
        width = 2.0 ** -(nf + 1.0)
        u = (t - (1.0 - 2.0 ** -nf)) / width
        slope = (a * 2.0 ** (-(nf + 1.0) * r) - a * 2.0 ** (-nf * r)) / (
            width * (1.0 - split)
        )
        if order == 1:
            out = np.where(u <= split, 0.0, slope)
            out = np.where(tail, -a * r * np.maximum(s, 1e-300) ** (r - 1.0), out)
        else:
            out = np.zeros_like(t)
            out = np.where(
                tail, a * r * (r - 1.0) * np.maximum(s, 1e-300) ** (r - 2.0), out
            )
        return out

    @property
    def params(self):
        return {
            "a": self.a, "r": self.r,
            "n_levels": self.n_levels, "split": self.split,
        }


def make_no_trace_driver(a, r, n_levels, split=0.5):
    """Staircase driver bounded below by a multiple of (1-t)**r.

    The slopes that would force the trace back onto the real axis are not
    pinned down constructively; `split` is exposed as a free knob instead.
    """
    return StaircaseDriver(a, r, n_levels, split)


class TimeChangedSqrt(DrivingFunction):
    """k * sqrt(1 - E_t) against a frozen nondecreasing sampled path E.

    Evaluation interpolates E by previous value, which preserves the flat
    stretches of the sampled path.
    """

    family = "time_changed"

    def __init__(self, k, t_grid, E_values, clip=True, meta=None, **kw):
        t_grid = np.asarray(t_grid, dtype=float)
        E_values = np.asarray(E_values, dtype=float)
        if t_grid.ndim != 1 or t_grid.size < 2 or np.any(np.diff(t_grid) <= 0):
            raise ParameterError("time grid must be strictly increasing")
        if E_values.shape != t_grid.shape or np.any(np.diff(E_values) < 0):
            raise ParameterError("time-change values must be nondecreasing")
        if not clip and np.any(E_values > 1.0):
            raise ParameterError(
                "time-change path exceeds 1 and clipping is disabled"
            )
        super().__init__(float(t_grid[-1]), derivative_mode="finite_difference",
                         **{k_: v for k_, v in kw.items() if k_ != "derivative_mode"})
        self.k = float(k)
        self.t_grid = t_grid
        self.E_values = np.minimum(E_values, 1.0)
        self.meta = dict(meta or {})

    def _eval(self, t):
        t = np.asarray(t, dtype=float)
        idx = np.clip(np.searchsorted(self.t_grid, t, side="right") - 1,
                      0, len(self.t_grid) - 1)
        e = self.E_values[idx]
        return self.k * np.sqrt(np.maximum(1.0 - e, 0.0))

    @property
    def params(self):
        return {"k": self.k, **self.meta}


# ---------------------------------------------------------------------------
# transforms


@dataclass(frozen=True)
class TransformSpec:
    """One hull-covariant driver transform.

    kind:  translate(a) | scale(k) | reflect | concatenate_from(s)
    """

    kind: str
    parameter: float = 0.0


def transform(driver: DrivingFunction, spec: TransformSpec) -> DrivingFunction:
    if spec.kind == "translate":
        return driver.translated(spec.parameter)
    if spec.kind == "scale":
        return driver.scaled(spec.parameter)
    if spec.kind == "reflect":
        return driver.reflected()
    if spec.kind == "concatenate_from":
        return driver.concatenated_from(spec.parameter)
    raise ParameterError(f"unknown transform kind {spec.kind!r}")


class _Wrapped(DrivingFunction):
    family = "composite-transform"

    def __init__(self, base, T):
        super().__init__(T, derivative_mode=base.derivative_mode,
                         fd_step_factor=base.fd_step_factor)
        self.base = base


class _Translated(_Wrapped):
    def __init__(self, base, a):
        super().__init__(base, base.T)
        self.offset = a

    def _eval(self, t):
        return self.base._eval(t) + self.offset

    def _derivative(self, t, order):
        return self.base._derivative(t, order)

    @property
    def params(self):
        return {"base": self.base, "translate": self.offset}


class _Scaled(_Wrapped):
    """k * lam(t / k**2) on [0, k**2 T]; generates the hulls scaled by k."""

    def __init__(self, base, k):
        super().__init__(base, k * k * base.T)
        self.factor = k

    def _eval(self, t):
        k = self.factor
        return k * self.base._eval(np.asarray(t, dtype=float) / (k * k))

    def _derivative(self, t, order):
        k = self.factor
        inner = self.base._derivative(np.asarray(t, dtype=float) / (k * k), order)
        return inner / k if order == 1 else inner / k ** 3

    @property
    def params(self):
        return {"base": self.base, "scale": self.factor}


class _Reflected(_Wrapped):
    def __init__(self, base):
        super().__init__(base, base.T)

    def _eval(self, t):
        return -self.base._eval(t)

    def _derivative(self, t, order):
        return -self.base._derivative(t, order)

    @property
    def params(self):
        return {"base": self.base, "reflect": True}


class _Shifted(_Wrapped):
    """lam(s + t) on [0, T - s]."""

    def __init__(self, base, s):
        super().__init__(base, base.T - s)
        self.shift = s

    def _eval(self, t):
        return self.base._eval(np.asarray(t, dtype=float) + self.shift)

    def _derivative(self, t, order):
        return self.base._derivative(np.asarray(t, dtype=float) + self.shift, order)

    @property
    def params(self):
        return {"base": self.base, "concatenate_from": self.shift}


# ---------------------------------------------------------------------------
# CLI spec-string grammar: family:key=value,...


_FAMILY_KEYS = {
    "const": {"a", "T"},
    "linear": {"m", "T"},
    "sqrt": {"k", "T"},
    "power": {"a", "r", "T"},
    "weier": {"k", "b", "r", "n", "T"},
    "notrace": {"a", "r", "n", "split"},
    "timechange": {"k", "alpha", "seed", "T", "du"},
}


def parse_driver_spec(spec: str) -> DrivingFunction:
    """Build a driver from a string like ``power:a=4,r=0.3333,T=1``."""
    head, sep, tail = spec.partition(":")
    family = head.strip()
    if family not in _FAMILY_KEYS:
        raise ParameterError(
            f"unknown driver family {family!r} at position 0 in {spec!r} "
            f"(known: {', '.join(sorted(_FAMILY_KEYS))})"
        )
    kv = {}
    pos = len(head) + 1
    if sep and tail.strip():
        for item in tail.split(","):
            key, eq, val = item.partition("=")
            key = key.strip()
            if not eq or key not in _FAMILY_KEYS[family]:
                raise ParameterError(
                    f"bad parameter {item.strip()!r} at position {pos} in {spec!r}"
                )
            try:
                kv[key] = float(val)
            except ValueError:
                raise ParameterError(
                    f"non-numeric value {val!r} at position {pos} in {spec!r}"
                ) from None
            pos += len(item) + 1

    def need(*names):
        missing = [n for n in names if n not in kv]
        if missing:
            raise ParameterError(
                f"driver {family!r} is missing parameters: {', '.join(missing)}"
            )

    if family == "const":
        need("a")
        return Constant(kv["a"], T=kv.get("T", 1.0))
    if family == "linear":
        need("m")
        return Linear(kv["m"], T=kv.get("T", 1.0))
    if family == "sqrt":
        need("k")
        return SqrtEnd(kv["k"], T=kv.get("T", 1.0))
    if family == "power":
        need("a", "r")
        return PowerEnd(kv["a"], kv["r"], T=kv.get("T", 1.0))
    if family == "weier":
        need("k", "b", "r")
        n = int(kv["n"]) if "n" in kv else None
        return Weierstrass(kv["k"], kv["b"], kv["r"], n_terms=n, T=kv.get("T", 1.0))
    if family == "notrace":
        need("a", "r", "n")
        return make_no_trace_driver(kv["a"], kv["r"], int(kv["n"]),
                                    split=kv.get("split", 0.5))
    # timechange: sample a subordinator, invert it, wrap the sqrt driver
    need("k", "alpha", "seed")
    from . import stochastic

    return stochastic.time_changed_sqrt_driver(
        k=kv["k"], alpha=kv["alpha"], seed=int(kv["seed"]),
        T=kv.get("T", 1.0), du=kv.get("du", 1e-3),
    )
