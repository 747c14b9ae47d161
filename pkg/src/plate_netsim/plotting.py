"""Plot-ready CSV files and small hand-written SVG charts."""

from __future__ import annotations

import csv
from html import escape
from pathlib import Path
from typing import Sequence

import numpy as np

from .analysis import ecdf_export

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b")


def one_period(trace: np.ndarray, period: float, k: int) -> np.ndarray:
    """Rows of ``trace`` with ``k*period <= t < (k+1)*period``."""
    t = trace[:, 0]
    return trace[(t >= k * period) & (t < (k + 1) * period)]


def histogram(samples: Sequence[float], bins: int = 30) -> tuple[np.ndarray, np.ndarray]:
    counts, edges = np.histogram(np.asarray(samples, dtype=float), bins=bins)
    return counts, edges


def write_csv(path: Path, header: Sequence[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _nice_range(lo: float, hi: float) -> tuple[float, float]:
    if not np.isfinite(lo) or not np.isfinite(hi):
        return 0.0, 1.0
    if hi - lo < 1e-15:
        pad = abs(lo) * 0.05 or 1.0
        return lo - pad, hi + pad
    pad = (hi - lo) * 0.05
    return lo - pad, hi + pad


def svg_lines(series, title: str = "", xlabel: str = "", ylabel: str = "",
              width: int = 720, height: int = 420, step: bool = False) -> str:
    """Line chart. ``series`` is a list of ``(label, xs, ys)``; ``step`` draws post-steps."""
    ml, mr, mt, mb = 70, 160, 40, 50
    pw, ph = width - ml - mr, height - mt - mb
    all_x = np.concatenate([np.asarray(s[1], float) for s in series]) if series else np.zeros(1)
    all_y = np.concatenate([np.asarray(s[2], float) for s in series]) if series else np.zeros(1)
    x0, x1 = _nice_range(all_x.min(), all_x.max())
    y0, y1 = _nice_range(all_y.min(), all_y.max())

    def sx(v):
        return ml + (v - x0) / (x1 - x0) * pw

    def sy(v):
        return mt + ph - (v - y0) / (y1 - y0) * ph

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'font-family="sans-serif" font-size="12">',
           f'<rect x="{ml}" y="{mt}" width="{pw}" height="{ph}" fill="none" stroke="#333"/>',
           f'<text x="{ml + pw / 2}" y="{mt - 14}" text-anchor="middle" font-size="14">'
           f'{escape(title)}</text>',
           f'<text x="{ml + pw / 2}" y="{height - 12}" text-anchor="middle">{escape(xlabel)}</text>',
           f'<text x="16" y="{mt + ph / 2}" text-anchor="middle" '
           f'transform="rotate(-90 16 {mt + ph / 2})">{escape(ylabel)}</text>']
    for frac in np.linspace(0, 1, 5):
        xv, yv = x0 + frac * (x1 - x0), y0 + frac * (y1 - y0)
        out.append(f'<text x="{sx(xv):.1f}" y="{mt + ph + 16}" text-anchor="middle">{xv:.4g}</text>')
        out.append(f'<text x="{ml - 6}" y="{sy(yv) + 4:.1f}" text-anchor="end">{yv:.4g}</text>')
    for i, (label, xs, ys) in enumerate(series):
        xs, ys = np.asarray(xs, float), np.asarray(ys, float)
        if step and len(xs):
            xs = np.repeat(xs, 2)[1:]
            ys = np.repeat(ys, 2)[:-1]
        pts = " ".join(f"{sx(a):.2f},{sy(b):.2f}" for a, b in zip(xs, ys))
        color = PALETTE[i % len(PALETTE)]
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{pts}"/>')
        ly = mt + 16 * (i + 1)
        out.append(f'<line x1="{ml + pw + 10}" y1="{ly - 4}" x2="{ml + pw + 30}" y2="{ly - 4}" '
                   f'stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{ml + pw + 36}" y="{ly}">{escape(label)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def write_one_period(out_dir: Path, trace: np.ndarray, period: float, k: int,
                     svg: bool = True) -> np.ndarray:
    rows = one_period(trace, period, k)
    write_csv(out_dir / "one_period.csv", ["time_s", "ref_x_m", "ball_x_m", "ref_y_m", "ball_y_m"],
              ([f"{r[0]:.9f}", f"{r[1]:.9f}", f"{r[3]:.9f}", f"{r[2]:.9f}", f"{r[4]:.9f}"]
               for r in rows))
    if svg:
        t = rows[:, 0]
        series = [("ref x", t, rows[:, 1]), ("ball x", t, rows[:, 3]),
                  ("ref y", t, rows[:, 2]), ("ball y", t, rows[:, 4])]
        (out_dir / "one_period.svg").write_text(
            svg_lines(series, f"Ball position, period {k}", "time [s]", "position [m]"))
    return rows


def write_histogram(out_dir: Path, samples: Sequence[float], bins: int = 30) -> np.ndarray:
    counts, edges = histogram(samples, bins)
    write_csv(out_dir / "histogram.csv", ["bin_left", "bin_right", "count"],
              ([f"{lo:.9g}", f"{hi:.9g}", int(c)] for lo, hi, c in zip(edges[:-1], edges[1:], counts)))
    return counts


def write_ecdf(out_dir: Path, named_samples: dict[str, Sequence[float]], svg: bool = True) -> dict:
    curves = {name: ecdf_export(s) for name, s in named_samples.items()}
    write_csv(out_dir / "ecdf.csv", ["sample", "value", "cdf"],
              ([name, f"{v:.9g}", f"{f:.9g}"] for name, pts in curves.items() for v, f in pts))
    if svg:
        series = [(name, [v for v, _ in pts], [f for _, f in pts]) for name, pts in curves.items()]
        (out_dir / "ecdf.svg").write_text(
            svg_lines(series, "Empirical CDF of per-period error", "error [m]", "F(error)", step=True))
    return curves
