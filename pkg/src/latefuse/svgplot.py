"""Minimal self-contained SVG line charts for the report figures."""

from __future__ import annotations

from dataclasses import dataclass
from html import escape
from typing import Sequence

import numpy as np

WIDTH, HEIGHT = 560, 440
LEFT, RIGHT, TOP, BOTTOM = 70, 20, 40, 60


@dataclass
class Series:
    x: Sequence[float]
    y: Sequence[float]
    label: str
    color: str = "black"
    dash: str | None = None
    width: float = 2.0


@dataclass
class Band:
    x: Sequence[float]
    lower: Sequence[float]
    upper: Sequence[float]
    color: str = "red"
    opacity: float = 0.2


def _fmt(v: float) -> str:
    return f"{v:.2f}"


class _Axes:
    def __init__(self, xlim, ylim):
        self.x0, self.x1 = xlim
        self.y0, self.y1 = ylim
        self.pw = WIDTH - LEFT - RIGHT
        self.ph = HEIGHT - TOP - BOTTOM

    def px(self, x):
        return LEFT + (x - self.x0) / (self.x1 - self.x0) * self.pw

    def py(self, y):
        y = min(max(y, self.y0), self.y1)
        return TOP + (self.y1 - y) / (self.y1 - self.y0) * self.ph


def _ticks(lo: float, hi: float, n: int = 5) -> list[float]:
    return [lo + (hi - lo) * i / n for i in range(n + 1)]


def line_chart(
    series: Sequence[Series],
    title: str,
    xlabel: str,
    ylabel: str,
    xlim: tuple[float, float] = (0.0, 1.0),
    ylim: tuple[float, float] = (0.0, 1.0),
    bands: Sequence[Band] = (),
) -> str:
    ax = _Axes(xlim, ylim)
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH / 2:.1f}" y="22" text-anchor="middle" font-size="15">{escape(title)}</text>',
    ]
    for t in _ticks(*xlim):
        x = ax.px(t)
        out.append(f'<line x1="{_fmt(x)}" y1="{TOP}" x2="{_fmt(x)}" y2="{HEIGHT - BOTTOM}" stroke="#e5e5e5"/>')
        out.append(f'<text x="{_fmt(x)}" y="{HEIGHT - BOTTOM + 16}" text-anchor="middle">{t:.2f}</text>')
    for t in _ticks(*ylim):
        y = ax.py(t)
        out.append(f'<line x1="{LEFT}" y1="{_fmt(y)}" x2="{WIDTH - RIGHT}" y2="{_fmt(y)}" stroke="#e5e5e5"/>')
        out.append(f'<text x="{LEFT - 6}" y="{_fmt(y + 4)}" text-anchor="end">{t:.2f}</text>')
    out.append(
        f'<rect x="{LEFT}" y="{TOP}" width="{ax.pw}" height="{ax.ph}" fill="none" stroke="black"/>'
    )
    out.append(f'<text x="{LEFT + ax.pw / 2:.1f}" y="{HEIGHT - 18}" text-anchor="middle">{escape(xlabel)}</text>')
    out.append(
        f'<text x="18" y="{TOP + ax.ph / 2:.1f}" text-anchor="middle" '
        f'transform="rotate(-90 18 {TOP + ax.ph / 2:.1f})">{escape(ylabel)}</text>'
    )

    for b in bands:
        upper = [f"{_fmt(ax.px(x))},{_fmt(ax.py(y))}" for x, y in zip(b.x, b.upper)]
        lower = [f"{_fmt(ax.px(x))},{_fmt(ax.py(y))}" for x, y in zip(b.x, b.lower)]
        pts = " ".join(upper + lower[::-1])
        out.append(f'<polygon points="{pts}" fill="{b.color}" fill-opacity="{b.opacity}" stroke="none"/>')

    for s in series:
        pts = " ".join(
            f"{_fmt(ax.px(x))},{_fmt(ax.py(y))}"
            for x, y in zip(s.x, s.y)
            if np.isfinite(x) and np.isfinite(y)
        )
        dash = f' stroke-dasharray="{s.dash}"' if s.dash else ""
        out.append(
            f'<polyline points="{pts}" fill="none" stroke="{s.color}" stroke-width="{s.width}"{dash}/>'
        )

    ly = TOP + 14
    for s in series:
        dash = f' stroke-dasharray="{s.dash}"' if s.dash else ""
        lx = WIDTH - RIGHT - 190
        out.append(f'<line x1="{lx}" y1="{ly - 4}" x2="{lx + 24}" y2="{ly - 4}" stroke="{s.color}" stroke-width="2"{dash}/>')
        out.append(f'<text x="{lx + 30}" y="{ly}">{escape(s.label)}</text>')
        ly += 16
    out.append("</svg>")
    return "\n".join(out) + "\n"


def roc_svg(band: dict, auroc: float, ci: tuple[float, float], label: str, others: Sequence[Series] = ()) -> str:
    series = list(others) + [
        Series(band["fpr"], band["mean_tpr"], f"{label} AUROC {auroc:.2f} [{ci[0]:.2f}, {ci[1]:.2f}]", "red"),
        Series([0, 1], [0, 1], "random (AUROC 0.5)", "black", "6,4", 1.0),
    ]
    return line_chart(
        series, "ROC curve", "False positive rate", "True positive rate",
        bands=[Band(band["fpr"], band["lower"], band["upper"])],
    )


def reliability_svg(report, label: str) -> str:
    xs = [b.mean_predicted for b in report.bins if b.count]
    ys = [b.observed_frequency for b in report.bins if b.count]
    return line_chart(
        [
            Series(xs, ys, f"{label} (ECE {report.ece:.3f})", "red"),
            Series([0, 1], [0, 1], "perfect calibration", "black", None, 1.0),
        ],
        "Calibration curve", "Mean predicted probability", "Observed frequency",
    )


def dca_svg(curve, label: str) -> str:
    t = curve.thresholds
    lo = float(min(-0.05, np.min(curve.nb_model), np.min(curve.nb_treat_all)))
    hi = float(max(curve.prevalence, np.max(curve.nb_model))) + 0.05
    lo = max(lo, -0.5)
    return line_chart(
        [
            Series(t, curve.nb_model, label, "black", "6,4"),
            Series(t, curve.nb_treat_all, "treat all", "blue", "6,4"),
            Series(t, curve.nb_treat_none, "treat none", "red", "6,4"),
        ],
        "Decision curve", "Threshold probability", "Net benefit",
        xlim=(float(t[0]), float(t[-1])), ylim=(lo, hi),
    )
