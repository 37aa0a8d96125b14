"""Minimal SVG figures: XY paths, relative phases, localization and tracking errors."""
from __future__ import annotations

import math
import xml.etree.ElementTree as ET
from pathlib import Path

import numpy as np

from .engine import TrajectoryLog
from .logio import LogTables

PLOTS = ("trajectory", "phases", "loc_error", "tracking_error")

WIDTH, HEIGHT = 640, 440
MARGIN = 60
COLORS = ("#1f77b4", "#ff7f0e", "#2ca02c", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22")
LOG_FLOOR = 1e-16


class _Axes:
    def __init__(self, xs, ys, equal: bool = False):
        xs = np.concatenate([np.asarray(x, float)[np.isfinite(x)] for x in xs]) if xs else np.zeros(1)
        ys = np.concatenate([np.asarray(y, float)[np.isfinite(y)] for y in ys]) if ys else np.zeros(1)
        self.x0, self.x1 = _padded(xs)
        self.y0, self.y1 = _padded(ys)
        if equal:
            span = max(self.x1 - self.x0, self.y1 - self.y0)
            cx, cy = (self.x0 + self.x1) / 2, (self.y0 + self.y1) / 2
            self.x0, self.x1 = cx - span / 2, cx + span / 2
            self.y0, self.y1 = cy - span / 2, cy + span / 2

    def px(self, x, y):
        w, h = WIDTH - 2 * MARGIN, HEIGHT - 2 * MARGIN
        return (MARGIN + (x - self.x0) / (self.x1 - self.x0) * w,
                HEIGHT - MARGIN - (y - self.y0) / (self.y1 - self.y0) * h)


def _padded(v):
    lo, hi = (float(v.min()), float(v.max())) if v.size else (0.0, 1.0)
    if hi - lo < 1e-12:
        lo, hi = lo - 0.5, hi + 0.5
    pad = 0.05 * (hi - lo)
    return lo - pad, hi + pad


def _segments(x, y):
    ok = np.isfinite(x) & np.isfinite(y)
    start = None
    for n, flag in enumerate(ok):
        if flag and start is None:
            start = n
        elif not flag and start is not None:
            yield slice(start, n)
            start = None
    if start is not None:
        yield slice(start, len(ok))


def _figure(title: str, xlabel: str, ylabel: str, series, *, logy=False, equal=False, markers=()):
    """``series``: iterable of (label, x, y, color). ``markers``: (label, x, y, color) hollow circles."""
    tf = (lambda y: np.log10(np.maximum(y, LOG_FLOOR))) if logy else (lambda y: y)
    series = [(lab, np.asarray(x, float), tf(np.asarray(y, float)), c) for lab, x, y, c in series]
    ax = _Axes([s[1] for s in series], [s[2] for s in series], equal=equal)

    svg = ET.Element("svg", xmlns="http://www.w3.org/2000/svg", width=str(WIDTH), height=str(HEIGHT),
                     viewBox=f"0 0 {WIDTH} {HEIGHT}")
    ET.SubElement(svg, "title").text = title
    ET.SubElement(svg, "rect", x="0", y="0", width=str(WIDTH), height=str(HEIGHT), fill="white")
    g = ET.SubElement(svg, "g", {"class": "plot", "data-xrange": f"{ax.x0!r} {ax.x1!r}",
                                 "data-yrange": f"{ax.y0!r} {ax.y1!r}", "data-logy": str(int(logy))})
    x0, y0 = ax.px(ax.x0, ax.y0)
    x1, y1 = ax.px(ax.x1, ax.y1)
    ET.SubElement(g, "polyline", points=f"{x0:.2f},{y1:.2f} {x0:.2f},{y0:.2f} {x1:.2f},{y0:.2f}",
                  fill="none", stroke="black")
    for frac in (0.0, 0.5, 1.0):
        xv = ax.x0 + frac * (ax.x1 - ax.x0)
        yv = ax.y0 + frac * (ax.y1 - ax.y0)
        px, _ = ax.px(xv, ax.y0)
        _, py = ax.px(ax.x0, yv)
        ET.SubElement(g, "text", {"x": f"{px:.1f}", "y": str(HEIGHT - MARGIN + 16),
                                  "text-anchor": "middle"}).text = f"{xv:.3g}"
        ET.SubElement(g, "text", x=str(MARGIN - 6), y=f"{py:.1f}", **{"text-anchor": "end"}).text = (
            f"1e{yv:.1f}" if logy else f"{yv:.3g}")
    ET.SubElement(svg, "text", x=str(WIDTH // 2), y="24", **{"text-anchor": "middle"}).text = title
    ET.SubElement(svg, "text", x=str(WIDTH // 2), y=str(HEIGHT - 12), **{"text-anchor": "middle"}).text = xlabel
    ET.SubElement(svg, "text", x="14", y=str(HEIGHT // 2),
                  transform=f"rotate(-90 14 {HEIGHT // 2})", **{"text-anchor": "middle"}).text = ylabel

    for n, (lab, x, y, color) in enumerate(series):
        for sl in _segments(x, y):
            pts = " ".join("{:.3f},{:.3f}".format(*ax.px(a, b)) for a, b in zip(x[sl], y[sl]))
            ET.SubElement(g, "polyline", points=pts, fill="none", stroke=color, **{"stroke-width": "1.2",
                                                                                  "data-label": lab})
        ET.SubElement(g, "text", x=str(WIDTH - MARGIN + 4), y=str(MARGIN + 14 * n), fill=color,
                      **{"font-size": "11"}).text = lab
    for lab, x, y, color in markers:
        if np.isfinite(x) and np.isfinite(y):
            cx, cy = ax.px(x, tf(np.float64(y)))
            ET.SubElement(g, "circle", cx=f"{cx:.3f}", cy=f"{cy:.3f}", r="4", fill="none", stroke=color,
                          **{"data-label": lab})
    return ET.tostring(svg, encoding="unicode")


def _trajectory(tab: LogTables) -> str:
    series = [("target", tab.target[:, 0], tab.target[:, 1], "#d62728")]
    markers = [("target start", tab.target[0, 0], tab.target[0, 1], "#d62728")]
    for n, (i, xy) in enumerate(tab.uavs.items()):
        c = COLORS[n % len(COLORS)]
        series.append((f"uav{i}", xy[:, 0], xy[:, 1], c))
        first = np.flatnonzero(np.isfinite(xy[:, 0]))
        if first.size:
            markers.append((f"uav{i} start", xy[first[0], 0], xy[first[0], 1], c))
    centroid = np.nanmean(np.stack(list(tab.uavs.values())), axis=0) if tab.uavs else tab.target
    series.append(("centroid", centroid[:, 0], centroid[:, 1], "black"))
    return _figure("Agent and target paths", "x [m]", "y [m]", series, equal=True, markers=markers)


def _phases(tab: LogTables) -> str:
    T, omega = tab.meta_float("T"), tab.meta_float("omega")
    series = []
    for n, i in enumerate(tab.uavs):
        col = f"theta_{i}"
        if col not in tab.metrics:
            raise ValueError(f"metrics lack column {col}")
        rel = tab.metrics[col] - tab.k * T * omega
        series.append((f"uav{i}", tab.k, rel, COLORS[n % len(COLORS)]))
    return _figure("Relative phase theta_i - k T omega", "step k", "phase [rad]", series)


def _metric(tab: LogTables, col: str, title: str, ylabel: str) -> str:
    if col not in tab.metrics:
        raise ValueError(f"metrics lack column {col}")
    return _figure(title, "step k", ylabel, [(col, tab.k, tab.metrics[col], COLORS[0])], logy=True)


def emit_plots(log, out_dir, which=None) -> list[Path]:
    """Write the requested SVG figures; ``which`` is a name or a list of names from :data:`PLOTS`."""
    if isinstance(log, TrajectoryLog):
        if not log.records:
            raise ValueError("no records")
        tab = LogTables.from_log(log)
    else:
        tab = log
    if len(tab.k) == 0:
        raise ValueError("no records")
    names = PLOTS if which is None else ((which,) if isinstance(which, str) else tuple(which))
    bad = [w for w in names if w not in PLOTS]
    if bad:
        raise ValueError(f"unknown plot(s) {bad}; choose from {PLOTS}")
    builders = {
        "trajectory": lambda: _trajectory(tab),
        "phases": lambda: _phases(tab),
        "loc_error": lambda: _metric(tab, "max_rel_loc_error", "Max relative localization error", "error [m]"),
        "tracking_error": lambda: _metric(tab, "tracking_error", "Formation tracking error", "error [m]"),
    }
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for name in names:
        p = out / f"{name}.svg"
        p.write_text(builders[name]())
        paths.append(p)
    return paths
