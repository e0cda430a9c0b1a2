"""Figure rendering for traces, hulls, curvature profiles, and paths.

Two output styles live here:

* matplotlib PNG figures for human inspection (Agg backend, no display
  required), and
* minimal hand-written SVG documents (polylines and rect cells with a
  fixed viewBox) whose bytes depend only on the input data, so runs are
  diffable.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .solver import HullRaster, TracePath

_FIG_DPI = 140


def _fmt(x):
    """Fixed short decimal for SVG attributes; deterministic across runs."""
    return f"{float(x):.6g}"


# ---------------------------------------------------------------------------
# minimal SVG writers


def _svg_open(width, height):
    return (
        '<?xml version="1.0" encoding="UTF-8"?>\n'
        f'<svg xmlns="http://www.w3.org/2000/svg" '
        f'viewBox="0 0 {_fmt(width)} {_fmt(height)}" '
        f'width="{_fmt(width)}" height="{_fmt(height)}">\n'
    )


def _data_window(points, window):
    if window is not None:
        x0, x1, y0, y1 = (float(v) for v in window)
    else:
        x0, x1 = float(np.min(points.real)), float(np.max(points.real))
        y0, y1 = float(np.min(points.imag)), float(np.max(points.imag))
        pad = 0.05 * max(x1 - x0, y1 - y0, 1e-9)
        x0, x1, y0, y1 = x0 - pad, x1 + pad, y0 - pad, y1 + pad
    return x0, x1, y0, y1


def svg_polyline(points, path=None, window=None, width=640, height=480,
                 stroke="#1f4e88"):
    """Trace polyline over half-plane axes; y increases upward.

    `points` is a complex array; `window` (x0, x1, y0, y1) defaults to the
    data bounds with 5% padding.
    """
    points = np.asarray(points, dtype=complex)
    x0, x1, y0, y1 = _data_window(points, window)
    sx = width / (x1 - x0)
    sy = height / (y1 - y0)
    coords = " ".join(
        f"{_fmt((z.real - x0) * sx)},{_fmt((y1 - z.imag) * sy)}"
        for z in points
    )
    parts = [_svg_open(width, height)]
    axis_y = (y1 - 0.0) * sy
    if y0 <= 0.0 <= y1:
        parts.append(
            f'<line x1="0" y1="{_fmt(axis_y)}" x2="{_fmt(width)}" '
            f'y2="{_fmt(axis_y)}" stroke="#888888" stroke-width="1"/>\n'
        )
    parts.append(
        f'<polyline points="{coords}" fill="none" stroke="{stroke}" '
        f'stroke-width="1.5"/>\n</svg>\n'
    )
    text = "".join(parts)
    if path is not None:
        with open(path, "w") as fh:
            fh.write(text)
    return text


def svg_raster(raster: HullRaster, path=None, width=640, fill="#b03030"):
    """Hull membership cells as SVG rects in data coordinates."""
    x0, x1, y0, y1 = raster.window
    nx, ny = raster.resolution
    height = width * (y1 - y0) / (x1 - x0)
    sx = width / (x1 - x0)
    sy = height / (y1 - y0)
    dx, dy = raster.cell_size()
    parts = [_svg_open(width, height)]
    rows, cols = np.nonzero(raster.membership)
    for j, i in zip(rows, cols):
        cx = (x0 + i * dx - x0) * sx
        cy = (y1 - (y0 + (j + 1) * dy)) * sy
        parts.append(
            f'<rect x="{_fmt(cx)}" y="{_fmt(cy)}" width="{_fmt(dx * sx)}" '
            f'height="{_fmt(dy * sy)}" fill="{fill}"/>\n'
        )
    parts.append("</svg>\n")
    text = "".join(parts)
    if path is not None:
        with open(path, "w") as fh:
            fh.write(text)
    return text


# ---------------------------------------------------------------------------
# matplotlib figures


def plot_trace(trace: TracePath, path, driver=None, title=None):
    """Trace curve in the upper half-plane, optionally with the driver."""
    fig, ax = plt.subplots(figsize=(6.4, 4.8))
    ax.plot(trace.points.real, trace.points.imag, lw=1.2, color="C0",
            label="trace")
    if driver is not None:
        lam = driver.eval(trace.times)
        ax.plot(trace.times, lam, lw=0.8, color="C1", alpha=0.7,
                label="driver (vs t)")
        ax.legend(loc="best", fontsize=8)
    ax.axhline(0.0, color="0.6", lw=0.8)
    ax.set_xlabel("Re")
    ax.set_ylabel("Im")
    ax.set_title(title or "Loewner trace")
    ax.set_aspect("equal", adjustable="datalim")
    fig.savefig(path, dpi=_FIG_DPI, bbox_inches="tight")
    plt.close(fig)


def plot_hull(raster: HullRaster, path, title=None):
    """Hull membership raster with the swallowed real interval marked."""
    x0, x1, y0, y1 = raster.window
    fig, ax = plt.subplots(figsize=(6.4, 4.8))
    ax.imshow(raster.membership, origin="lower", extent=(x0, x1, y0, y1),
              cmap="Reds", aspect="auto", interpolation="nearest")
    if raster.real_interval is not None:
        p, right = raster.real_interval
        ax.plot([p, right], [y0, y0], lw=3.0, color="C0",
                label=f"real interval [{p:.4g}, {right:.4g}]")
        ax.legend(loc="best", fontsize=8)
    ax.set_xlabel("Re")
    ax.set_ylabel("Im")
    ax.set_title(title or "hull membership")
    fig.savefig(path, dpi=_FIG_DPI, bbox_inches="tight")
    plt.close(fig)


def plot_curvature(times, values, path, title=None):
    """Curvature profile on a log scale where the values allow it."""
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    fig, ax = plt.subplots(figsize=(6.4, 4.8))
    ax.plot(times, values, lw=1.2, color="C2")
    finite = values[np.isfinite(values)]
    if finite.size and np.all(finite > 0):
        ax.set_yscale("log")
    ax.set_xlabel("t")
    ax.set_ylabel("curvature")
    ax.set_title(title or "Loewner curvature")
    fig.savefig(path, dpi=_FIG_DPI, bbox_inches="tight")
    plt.close(fig)


def plot_paths(u_grid, S_values, t_grid, E_values, path, title=None):
    """Subordinator and inverse-path pair, side by side."""
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9.6, 4.0))
    ax1.step(u_grid, S_values, where="post", lw=1.0, color="C0")
    ax1.set_xlabel("u")
    ax1.set_ylabel("S")
    ax1.set_title("subordinator")
    ax2.step(t_grid, E_values, where="post", lw=1.0, color="C3")
    ax2.set_xlabel("t")
    ax2.set_ylabel("E")
    ax2.set_title("inverse path")
    if title:
        fig.suptitle(title)
    fig.savefig(path, dpi=_FIG_DPI, bbox_inches="tight")
    plt.close(fig)
