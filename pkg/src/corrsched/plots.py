"""Minimal SVG output for frontier curves, scatter plots and pdm-lite scenes."""

from __future__ import annotations

import math
from xml.sax.saxutils import escape

import numpy as np

COLORS = {
    "terminal": "#888888",
    "stepwise": "#222222",
    "periodic": "#1f77b4",
    "adaptive": "#d62728",
}


class Canvas:
    """Data-to-pixel mapping plus a list of SVG elements."""

    def __init__(self, xlim, ylim, width=480, height=320, margin=(50, 20, 20, 45)):
        self.width, self.height = width, height
        self.left, self.top, self.right, self.bottom = margin
        self.xlim = self._pad(xlim)
        self.ylim = self._pad(ylim)
        self.items: list[str] = []

    @staticmethod
    def _pad(lim):
        lo, hi = float(lim[0]), float(lim[1])
        if not hi > lo:
            lo, hi = lo - 0.5, hi + 0.5
        return lo, hi

    def px(self, x):
        lo, hi = self.xlim
        return self.left + (x - lo) / (hi - lo) * (self.width - self.left - self.right)

    def py(self, y):
        lo, hi = self.ylim
        return self.height - self.bottom - (y - lo) / (hi - lo) * (self.height - self.top - self.bottom)

    def polyline(self, xs, ys, color, width=1.5, dash=None):
        pts = " ".join(f"{self.px(x):.2f},{self.py(y):.2f}" for x, y in zip(xs, ys)
                       if math.isfinite(x) and math.isfinite(y))
        extra = f' stroke-dasharray="{dash}"' if dash else ""
        self.items.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="{width}"{extra}/>')

    def line(self, x0, y0, x1, y1, color="#000", width=1.0):
        self.items.append(
            f'<line x1="{self.px(x0):.2f}" y1="{self.py(y0):.2f}" x2="{self.px(x1):.2f}" '
            f'y2="{self.py(y1):.2f}" stroke="{color}" stroke-width="{width}"/>'
        )

    def circle(self, x, y, r_px=None, color="#000", fill="none", r_data=None):
        r = r_px if r_data is None else abs(self.px(x + r_data) - self.px(x))
        self.items.append(f'<circle cx="{self.px(x):.2f}" cy="{self.py(y):.2f}" r="{r:.2f}" '
                          f'stroke="{color}" fill="{fill}"/>')

    def text(self, x_px, y_px, s, size=11, anchor="start", color="#000"):
        self.items.append(f'<text x="{x_px:.1f}" y="{y_px:.1f}" font-size="{size}" font-family="sans-serif" '
                          f'text-anchor="{anchor}" fill="{color}">{escape(s)}</text>')

    def axes(self, xlabel, ylabel, title=None, ticks=5):
        x0, x1 = self.xlim
        y0, y1 = self.ylim
        self.line(x0, y0, x1, y0)
        self.line(x0, y0, x0, y1)
        for k in range(ticks + 1):
            xv = x0 + (x1 - x0) * k / ticks
            yv = y0 + (y1 - y0) * k / ticks
            self.text(self.px(xv), self.py(y0) + 14, f"{xv:.3g}", 10, "middle")
            self.text(self.px(x0) - 4, self.py(yv) + 3, f"{yv:.3g}", 10, "end")
        self.text((self.left + self.width - self.right) / 2, self.height - 8, xlabel, 11, "middle")
        self.items.append(f'<text transform="translate(12,{self.height / 2:.1f}) rotate(-90)" font-size="11" '
                          f'font-family="sans-serif" text-anchor="middle">{escape(ylabel)}</text>')
        if title:
            self.text(self.width / 2, 14, title, 12, "middle")

    def legend(self, entries, x_px=None, y_px=None):
        x_px = self.width - self.right - 90 if x_px is None else x_px
        y_px = self.top + 10 if y_px is None else y_px
        for i, (name, color) in enumerate(entries):
            y = y_px + 14 * i
            self.items.append(f'<line x1="{x_px}" y1="{y}" x2="{x_px + 16}" y2="{y}" stroke="{color}" stroke-width="2"/>')
            self.text(x_px + 20, y + 4, name, 10)

    def render(self) -> str:
        body = "\n".join(self.items)
        return (f'<svg xmlns="http://www.w3.org/2000/svg" width="{self.width}" height="{self.height}" '
                f'viewBox="0 0 {self.width} {self.height}">\n'
                f'<rect width="100%" height="100%" fill="white"/>\n{body}\n</svg>\n')


def frontier_svg(domain: str, curves: dict[str, tuple[list, list, list]]) -> str:
    """NEPE against B/T. ``curves`` maps schedule to (fractions, means, standard errors)."""
    ys = [v for _, m, s in curves.values() for v, e in zip(m, s)
          for v in (v - (e if math.isfinite(e) else 0), v + (e if math.isfinite(e) else 0)) if math.isfinite(v)]
    cv = Canvas((0.0, 1.0), (min([0.0, *ys]), max([1.0, *ys])))
    cv.axes("budget fraction B/T", "NEPE (mean)", f"budget frontier: {domain}")
    cv.line(0, 1, 1, 1, COLORS["terminal"])
    cv.line(0, 0, 1, 0, COLORS["stepwise"])
    for arm, (fr, mean, se) in curves.items():
        cv.polyline(fr, mean, COLORS[arm])
        for x, m, e in zip(fr, mean, se):
            if math.isfinite(m) and math.isfinite(e) and e > 0:
                cv.line(x, m - e, x, m + e, COLORS[arm], 0.8)
    cv.legend([("terminal", COLORS["terminal"]), ("stepwise", COLORS["stepwise"])]
              + [(a, COLORS[a]) for a in curves])
    return cv.render()


def scatter_svg(points, xlabel, ylabel, title, labels=None) -> str:
    labels = list(labels) if labels else [None] * len(points)
    keep = [(x, y, lab) for (x, y), lab in zip(points, labels) if math.isfinite(x) and math.isfinite(y)]
    pts = [(x, y) for x, y, _ in keep]
    xs = [p[0] for p in pts] or [0.0]
    ys = [p[1] for p in pts] or [0.0]
    cv = Canvas((min(xs), max(xs)), (min(0.0, *ys), max(ys)))
    cv.axes(xlabel, ylabel, title)
    for x, y, lab in keep:
        cv.circle(x, y, 3, "#1f77b4", "#1f77b4")
        if lab:
            cv.text(cv.px(x) + 5, cv.py(y) - 4, lab, 9)
    return cv.render()


def pdm_scene_svg(obstacles, paths: dict[str, np.ndarray], events: dict[str, list[int]], horizon: int,
                  title: str = "") -> str:
    """Obstacles, one path per arm and a rug of correction times per arm."""
    allpts = np.concatenate([np.asarray(p) for p in paths.values()])
    c, r = obstacles.center_array, obstacles.radius_array
    xlo = min(allpts[:, 0].min(), (c[:, 0] - r).min()) - 0.2
    xhi = max(allpts[:, 0].max(), (c[:, 0] + r).max()) + 0.2
    ylo = min(allpts[:, 1].min(), (c[:, 1] - r).min()) - 0.2
    yhi = max(allpts[:, 1].max(), (c[:, 1] + r).max()) + 0.2
    width = 640
    plot_h = int(round((width - 70) * (yhi - ylo) / (xhi - xlo))) + 65
    rug_h = 16 * len(events) + 30
    cv = Canvas((xlo, xhi), (ylo, yhi), width, plot_h + rug_h, margin=(50, 20, 20, 45 + rug_h))
    cv.axes("x", "y", title)
    for (cx, cy), rad in zip(c, r):
        cv.circle(cx, cy, color="#555", fill="#ddd", r_data=rad)
    for arm, p in paths.items():
        p = np.asarray(p)
        cv.polyline(p[:, 0], p[:, 1], COLORS.get(arm, "#000"), 1.5)
    cv.legend([(a, COLORS.get(a, "#000")) for a in paths])
    # rug: one row per arm, one tick per correction step
    x0 = cv.left
    span = cv.width - cv.left - cv.right
    base = plot_h + 10
    for i, (arm, ev) in enumerate(events.items()):
        y = base + 16 * i
        cv.text(x0 - 4, y + 4, arm, 9, "end")
        cv.items.append(f'<line x1="{x0}" y1="{y}" x2="{x0 + span}" y2="{y}" stroke="#ccc"/>')
        for t in ev:
            xp = x0 + span * (t + 0.5) / horizon
            cv.items.append(f'<line x1="{xp:.2f}" y1="{y - 5}" x2="{xp:.2f}" y2="{y + 5}" '
                            f'stroke="{COLORS.get(arm, "#000")}"/>')
    cv.text(x0 + span / 2, base + 16 * len(events) + 6, "correction step t", 10, "middle")
    return cv.render()
