"""Standalone SVG exports: trajectory plots and grouped bar charts.

Element conventions (tests count on them): obstacles and circular zones are
``<circle>``, boxes and walls are ``<rect>``, each agent path is one
``<polyline>``, start/end markers are ``<polygon>``, and every bar is a
``<rect class="bar">``.
"""

from __future__ import annotations

import json
import xml.etree.ElementTree as ET
from pathlib import Path

import numpy as np

from .scenarios import Box, Circle, resolve
from .traces import read_trace_csv

SVG_NS = "http://www.w3.org/2000/svg"
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf")
SIZE = 480
PAD = 24


def _svg(width, height):
    root = ET.Element("svg", xmlns=SVG_NS, width=str(width), height=str(height),
                      viewBox=f"0 0 {width} {height}")
    return root


def _fmt(v):
    return f"{v:.3f}".rstrip("0").rstrip(".")


class _Frame:
    """World-to-pixel map with y flipped and equal aspect."""

    def __init__(self, lo, hi):
        span = max(hi[0] - lo[0], hi[1] - lo[1], 1e-9)
        self.lo = lo
        self.hi = hi
        self.s = (SIZE - 2 * PAD) / span

    def xy(self, p):
        return PAD + (p[0] - self.lo[0]) * self.s, SIZE - PAD - (p[1] - self.lo[1]) * self.s

    def len(self, d):
        return d * self.s


def _bounds(scenario, paths):
    pts = [p for path in paths for p in path]
    g = scenario.geometry
    for c in g.obstacles + [z for z in g.zones if isinstance(z, Circle)]:
        pts += [np.subtract(c.center, c.radius), np.add(c.center, c.radius)]
    for b in g.walls + [z for z in g.zones if isinstance(z, Box)]:
        pts += [np.subtract(b.center, b.half_extents), np.add(b.center, b.half_extents)]
    pts = np.array(pts, dtype=float)
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    margin = 0.05 * max(hi - lo)
    return lo - margin, hi + margin


def _shape(parent, frame, s, fill, stroke, opacity):
    if isinstance(s, Circle):
        cx, cy = frame.xy(s.center)
        ET.SubElement(parent, "circle", cx=_fmt(cx), cy=_fmt(cy), r=_fmt(frame.len(s.radius)),
                      fill=fill, stroke=stroke, **{"fill-opacity": str(opacity)})
    else:
        x, y = frame.xy((s.center[0] - s.half_extents[0], s.center[1] + s.half_extents[1]))
        ET.SubElement(parent, "rect", x=_fmt(x), y=_fmt(y), width=_fmt(frame.len(2 * s.half_extents[0])),
                      height=_fmt(frame.len(2 * s.half_extents[1])), fill=fill, stroke=stroke,
                      **{"fill-opacity": str(opacity)})


def _marker(parent, frame, p, color, kind):
    x, y = frame.xy(p)
    r = 6.0
    if kind == "start":
        pts = [(x, y - r), (x + r, y + r), (x - r, y + r)]
    else:
        pts = [(x - r, y - r), (x + r, y - r), (x + r, y + r), (x - r, y + r)]
    ET.SubElement(parent, "polygon", points=" ".join(f"{_fmt(a)},{_fmt(b)}" for a, b in pts),
                  fill=color if kind == "start" else "white", stroke=color,
                  **{"class": f"marker-{kind}"})


def trajectory_svg(scenario, states, title: str | None = None) -> str:
    """2-D plot of every agent's path over the scenario geometry."""
    states = np.asarray(states, dtype=float)
    m = scenario.agents
    paths = [states[:, 4 * i:4 * i + 2] for i in range(m)]
    frame = _Frame(*_bounds(scenario, paths))
    root = _svg(SIZE, SIZE)
    ET.SubElement(root, "title").text = title or scenario.name
    g = scenario.geometry
    layer = ET.SubElement(root, "g", id="geometry")
    for w in g.walls:
        _shape(layer, frame, w, "#444444", "#222222", 0.9)
    for o in g.obstacles:
        _shape(layer, frame, o, "#888888", "#444444", 0.8)
    for z in g.zones:
        _shape(layer, frame, z, "#9fd89f", "#2e7d32", 0.4)
    for z in g.zones:
        x, y = frame.xy(z.center)
        ET.SubElement(layer, "text", x=_fmt(x), y=_fmt(y), **{"font-size": "10", "text-anchor": "middle"}).text = z.name
    agents = ET.SubElement(root, "g", id="agents")
    for i, path in enumerate(paths):
        color = PALETTE[i % len(PALETTE)]
        pts = " ".join(f"{_fmt(a)},{_fmt(b)}" for a, b in (frame.xy(p) for p in path))
        ET.SubElement(agents, "polyline", points=pts, fill="none", stroke=color,
                      **{"stroke-width": "1.5", "class": f"agent-{i}"})
        _marker(agents, frame, path[0], color, "start")
        _marker(agents, frame, path[-1], color, "end")
    return ET.tostring(root, encoding="unicode")


def bar_chart_svg(rows, title: str = "benchmark") -> str:
    """Grouped bars per scenario: mean robustness and satisfaction rate for each method.

    ``rows`` are dicts (or objects) with scenario, method, mean_robustness and
    satisfaction_rate.
    """
    rows = [r if isinstance(r, dict) else vars(r) for r in rows]
    scenarios = list(dict.fromkeys(r["scenario"] for r in rows))
    methods = list(dict.fromkeys(r["method"] for r in rows))
    lookup = {(r["scenario"], r["method"]): r for r in rows}
    metrics = ("mean_robustness", "satisfaction_rate")
    panel_h, gap = 200, 40
    width = max(SIZE, 80 + len(scenarios) * (len(methods) * 18 + 30))
    height = len(metrics) * (panel_h + gap) + 40
    root = _svg(width, height)
    ET.SubElement(root, "title").text = title
    for k, metric in enumerate(metrics):
        vals = [lookup[(s, m)][metric] if (s, m) in lookup else float("nan") for s in scenarios for m in methods]
        finite = [v for v in vals if np.isfinite(v)] or [0.0]
        lo, hi = min(0.0, min(finite)), max(0.0, max(finite))
        if hi - lo < 1e-12:
            hi = lo + 1.0
        top = 20 + k * (panel_h + gap)
        scale = (panel_h - 20) / (hi - lo)
        y0 = top + (hi - 0.0) * scale
        panel = ET.SubElement(root, "g", id=metric)
        ET.SubElement(panel, "text", x="10", y=_fmt(top - 4), **{"font-size": "12"}).text = metric
        ET.SubElement(panel, "line", x1="60", x2=str(width - 10), y1=_fmt(y0), y2=_fmt(y0), stroke="black")
        x = 70.0
        for s in scenarios:
            for j, m in enumerate(methods):
                v = lookup[(s, m)][metric] if (s, m) in lookup else float("nan")
                if (s, m) in lookup:
                    v = v if np.isfinite(v) else 0.0
                    y, h = (y0 - v * scale, v * scale) if v >= 0 else (y0, -v * scale)
                    bar = ET.SubElement(panel, "rect", x=_fmt(x), y=_fmt(y), width="14", height=_fmt(h),
                                        fill=PALETTE[j % len(PALETTE)], **{"class": "bar"})
                    ET.SubElement(bar, "title").text = f"{s} / {m}: {v:.4g}"
                x += 18
            ET.SubElement(panel, "text", x=_fmt(x - 9 * len(methods)), y=_fmt(top + panel_h + 12),
                          **{"font-size": "10", "text-anchor": "middle"}).text = s
            x += 30
    legend = ET.SubElement(root, "g", id="legend")
    for j, m in enumerate(methods):
        ET.SubElement(legend, "text", x=str(70 + 90 * j), y=str(height - 8),
                      fill=PALETTE[j % len(PALETTE)], **{"font-size": "11"}).text = m
    return ET.tostring(root, encoding="unicode")


def export_plots(in_dir, out_dir) -> list:
    """Trajectory plot per (scenario, method) best run and one bar chart per report."""
    in_dir, out_dir = Path(in_dir), Path(out_dir)
    report = json.loads((in_dir / "report.json").read_text())
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for row in report["rows"]:
        if row.get("best_trace") is None:
            continue
        sc = resolve(row["scenario"])
        states = read_trace_csv(in_dir / row["best_trace"])
        dest = out_dir / f"{row['scenario']}_{row['method']}.svg"
        dest.write_text(trajectory_svg(sc, states, f"{row['scenario']} / {row['method']} (seed {row['best_seed']})"))
        written.append(dest)
    dest = out_dir / "bars.svg"
    dest.write_text(bar_chart_svg(report["rows"]))
    written.append(dest)
    return written
