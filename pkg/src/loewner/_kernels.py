"""Hot loops for the slit-map compositions.

The trace composition applies O(n_steps) elementary maps to O(n_samples)
seed points, which is the only genuinely quadratic cost in the package.
A numba kernel covers it when numba is importable; the numpy fallback is
identical in arithmetic.
"""

import numpy as np

try:
    from numba import njit

    _HAVE_NUMBA = True
except Exception:  # pragma: no cover - numba is a declared dependency
    _HAVE_NUMBA = False

    def njit(*a, **k):
        def deco(f):
            return f
        return deco


def _compose_inverse_numpy(seeds, start, c, dt):
    w = seeds.astype(complex).copy()
    n = len(c)
    for k in range(n, 0, -1):
        j = start[k - 1]
        u = w[j:] - c[k - 1]
        v = np.sqrt(u * u - 4.0 * dt[k - 1])
        v = np.where(v.imag < 0.0, -v, v)
        real = v.imag == 0.0
        if np.any(real):
            v = np.where(real & (u.real < 0.0), -np.abs(v.real), v)
        w[j:] = c[k - 1] + v
    return w


@njit(cache=True)
def _compose_inverse_numba(wr, wi, start, c, dt):  # pragma: no cover - jitted
    n = len(c)
    m = len(wr)
    for k in range(n, 0, -1):
        ck = c[k - 1]
        d4 = 4.0 * dt[k - 1]
        for j in range(start[k - 1], m):
            ur = wr[j] - ck
            ui = wi[j]
            v = np.sqrt(complex(ur * ur - ui * ui - d4, 2.0 * ur * ui))
            vr = v.real
            vi = v.imag
            if vi < 0.0:
                vr = -vr
                vi = -vi
            if vi == 0.0 and ur < 0.0:
                vr = -abs(vr)
            wr[j] = ck + vr
            wi[j] = vi
    return wr, wi


def compose_inverse(seeds, start, c, dt):
    """Apply F_1 o ... o F_n to the n-th seed for every seed.

    `start[k-1]` is the first seed index whose composition includes the
    k-th elementary map; seeds are ordered by their step index.
    """
    seeds = np.asarray(seeds, dtype=complex)
    start = np.ascontiguousarray(start, dtype=np.int64)
    c = np.ascontiguousarray(c, dtype=float)
    dt = np.ascontiguousarray(dt, dtype=float)
    if _HAVE_NUMBA:
        wr, wi = _compose_inverse_numba(seeds.real.copy(), seeds.imag.copy(),
                                        start, c, dt)
        return wr + 1j * wi
    return _compose_inverse_numpy(seeds, start, c, dt)


@njit(cache=True)
def _compose_forward_numba(wr, wi, stop, c, dt):  # pragma: no cover - jitted
    n = len(c)
    m = len(wr)
    for k in range(1, n + 1):
        ck = c[k - 1]
        d4 = 4.0 * dt[k - 1]
        for j in range(stop[k - 1], m):
            ur = wr[j] - ck
            ui = wi[j]
            v = np.sqrt(complex(ur * ur - ui * ui + d4, 2.0 * ur * ui))
            vr = v.real
            vi = v.imag
            if vi < 0.0:
                vr = -vr
                vi = -vi
            if vi == 0.0 and ur < 0.0:
                vr = -abs(vr)
            wr[j] = ck + vr
            wi[j] = vi
    return wr, wi


def _compose_forward_numpy(points, stop, c, dt):
    w = points.astype(complex).copy()
    n = len(c)
    for k in range(1, n + 1):
        j = stop[k - 1]
        u = w[j:] - c[k - 1]
        v = np.sqrt(u * u + 4.0 * dt[k - 1])
        v = np.where(v.imag < 0.0, -v, v)
        real = v.imag == 0.0
        if np.any(real):
            v = np.where(real & (u.real < 0.0), -np.abs(v.real), v)
        w[j:] = c[k - 1] + v
    return w


def compose_forward(points, stop, c, dt):
    """Apply the forward maps g_k in ascending k to recover driver values.

    `stop[k-1]` is the first point index whose composition includes the
    k-th map (points ordered by step index, same layout as compose_inverse).
    """
    points = np.asarray(points, dtype=complex)
    stop = np.ascontiguousarray(stop, dtype=np.int64)
    c = np.ascontiguousarray(c, dtype=float)
    dt = np.ascontiguousarray(dt, dtype=float)
    if _HAVE_NUMBA:
        wr, wi = _compose_forward_numba(points.real.copy(), points.imag.copy(),
                                        stop, c, dt)
        return wr + 1j * wi
    return _compose_forward_numpy(points, stop, c, dt)
