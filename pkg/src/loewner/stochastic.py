"""Totally skewed stable subordinators and their inverses.

The sampled subordinator S and its right-continuous inverse E feed the
time-changed driving functions k * sqrt(1 - E_t).  Increments use the
single-uniform/single-exponential transform for positive stable variates
normalized so that E[exp(-s * S_1)] = exp(-s**alpha).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .drivers import TimeChangedSqrt
from .errors import CoverageError, ParameterError


def sample_one_sided_stable(alpha, size, rng):
    """Positive stable variates of index alpha in (0, 1).

    Chambers-Mallows-Stuck with skew 1: with U uniform on (-pi/2, pi/2)
    and W standard exponential,

        X = sin(a(U + pi/2)) / cos(U)^(1/a)
            * (cos(U - a(U + pi/2)) / W)^((1-a)/a)

    has Laplace transform exp(-s^a).
    """
    if not (0.0 < alpha < 1.0):
        raise ParameterError(f"stability index must lie in (0, 1), got {alpha}")
    u = rng.uniform(-np.pi / 2, np.pi / 2, size)
    w = rng.standard_exponential(size)
    a = alpha
    t1 = np.sin(a * (u + np.pi / 2)) / np.cos(u) ** (1.0 / a)
    t2 = (np.cos(u - a * (u + np.pi / 2)) / w) ** ((1.0 - a) / a)
    return t1 * t2


@dataclass(frozen=True)
class SubordinatorPath:
    """One sampled path of an alpha-stable subordinator on a uniform grid."""

    alpha: float
    u_grid: np.ndarray
    S_values: np.ndarray
    seed: int

    def __post_init__(self):
        if np.any(np.diff(self.S_values) < 0) or self.S_values[0] != 0.0:
            raise ParameterError("subordinator path must start at 0 and "
                                 "be nondecreasing")


@dataclass(frozen=True)
class InversePath:
    """Right-continuous inverse E_t = inf{u : S_u > t} on a time grid."""

    t_grid: np.ndarray
    E_values: np.ndarray
    source: SubordinatorPath = field(repr=False)

    def __post_init__(self):
        if self.E_values[0] != 0.0 or np.any(np.diff(self.E_values) < 0):
            raise ParameterError("inverse path must start at 0 and be "
                                 "nondecreasing")

    def flat_fraction(self):
        """Fraction of grid steps on which E does not move."""
        return float(np.mean(np.diff(self.E_values) == 0.0))


def sample_subordinator(alpha, u_max, du, seed) -> SubordinatorPath:
    """Sample S on {0, du, 2du, ...} up to u_max; deterministic in seed."""
    if not (du > 0):
        raise ParameterError(f"grid spacing must be positive, got {du}")
    if not (u_max > 0):
        raise ParameterError(f"u_max must be positive, got {u_max}")
    n = int(np.ceil(u_max / du))
    rng = np.random.default_rng(seed)
    x = sample_one_sided_stable(alpha, n, rng)
    incr = du ** (1.0 / alpha) * x
    s = np.concatenate([[0.0], np.cumsum(incr)])
    u = np.arange(n + 1) * du
    return SubordinatorPath(alpha=float(alpha), u_grid=u, S_values=s,
                            seed=int(seed))


def invert_path(S: SubordinatorPath, T, n_t) -> InversePath:
    """Evaluate the inverse subordinator on a uniform grid over [0, T]."""
    if S.S_values[-1] <= T:
        raise CoverageError(
            f"subordinator path tops out at {S.S_values[-1]}, below T={T}"
        )
    t = np.linspace(0.0, float(T), int(n_t))
    idx = np.searchsorted(S.S_values, t, side="right")
    # grid version of inf{u : S_u > t}, pinned to E_0 = 0
    e = S.u_grid[np.maximum(idx - 1, 0)]
    e[0] = 0.0
    return InversePath(t_grid=t, E_values=e, source=S)


def make_time_changed_driver(k, E: InversePath, clip=True) -> TimeChangedSqrt:
    """Driver k * sqrt(1 - E_t) over E's time grid."""
    meta = {"alpha": E.source.alpha, "seed": E.source.seed}
    return TimeChangedSqrt(k, E.t_grid, E.E_values, clip=clip, meta=meta)


def time_changed_sqrt_driver(k, alpha, seed, T=1.0, du=1e-3,
                             n_t=4096) -> TimeChangedSqrt:
    """Convenience constructor used by the CLI driver grammar.

    Grows u_max geometrically until the sampled path covers [0, T].
    """
    u_max = 1.0
    for _ in range(60):
        path = sample_subordinator(alpha, u_max, du, seed)
        if path.S_values[-1] > T:
            break
        u_max *= 2.0
    else:
        raise CoverageError("could not cover the requested horizon")
    E = invert_path(path, T, n_t)
    return make_time_changed_driver(k, E)
