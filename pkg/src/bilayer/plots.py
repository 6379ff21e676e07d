"""Minimal SVG charts for sweep results; no plotting library involved."""

from __future__ import annotations

import math
from pathlib import Path
from xml.sax.saxutils import escape

from .experiment import FitResult, ResultRow, fit_rows

WIDTH, HEIGHT = 640, 420
MARGIN = dict(left=70, right=170, top=30, bottom=50)
COLOURS = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf"]


class PlotError(ValueError):
    pass


class _Axes:
    def __init__(self, xlo, xhi, ylo, yhi, logy=False):
        if logy:
            ylo, yhi = math.log10(ylo), math.log10(yhi)
        if xhi == xlo:
            xlo, xhi = xlo - 1, xhi + 1
        if yhi == ylo:
            ylo, yhi = ylo - 1, yhi + 1
        self.xlo, self.xhi, self.ylo, self.yhi, self.logy = xlo, xhi, ylo, yhi, logy
        self.pw = WIDTH - MARGIN["left"] - MARGIN["right"]
        self.ph = HEIGHT - MARGIN["top"] - MARGIN["bottom"]

    def x(self, v: float) -> float:
        return MARGIN["left"] + (v - self.xlo) / (self.xhi - self.xlo) * self.pw

    def y(self, v: float) -> float:
        if self.logy:
            v = math.log10(v)
        return MARGIN["top"] + (1 - (v - self.ylo) / (self.yhi - self.ylo)) * self.ph

    def frame(self, xlabel: str, ylabel: str) -> list[str]:
        l, t = MARGIN["left"], MARGIN["top"]
        out = [f'<rect x="{l}" y="{t}" width="{self.pw}" height="{self.ph}" fill="none" stroke="black"/>']
        for k in range(5):
            xv = self.xlo + k * (self.xhi - self.xlo) / 4
            out.append(f'<text x="{self.x(xv):.1f}" y="{t + self.ph + 18}" font-size="11" '
                       f'text-anchor="middle">{xv:.4g}</text>')
            yv = self.ylo + k * (self.yhi - self.ylo) / 4
            label = f"{10 ** yv:.2g}" if self.logy else f"{yv:.3g}"
            yy = MARGIN["top"] + (1 - k / 4) * self.ph
            out.append(f'<text x="{l - 6}" y="{yy + 4:.1f}" font-size="11" text-anchor="end">{label}</text>')
        out.append(f'<text x="{l + self.pw / 2}" y="{HEIGHT - 10}" font-size="13" '
                   f'text-anchor="middle">{escape(xlabel)}</text>')
        out.append(f'<text x="16" y="{t + self.ph / 2}" font-size="13" text-anchor="middle" '
                   f'transform="rotate(-90 16 {t + self.ph / 2})">{escape(ylabel)}</text>')
        return out


def _svg(body: list[str]) -> str:
    head = (f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
            f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif">')
    return "\n".join([head, '<rect width="100%" height="100%" fill="white"/>', *body, "</svg>"]) + "\n"


def _legend(entries: list[tuple[str, str]]) -> list[str]:
    x0 = WIDTH - MARGIN["right"] + 12
    out = []
    for i, (label, colour) in enumerate(entries):
        y = MARGIN["top"] + 12 + 18 * i
        out.append(f'<rect x="{x0}" y="{y - 9}" width="10" height="10" fill="{colour}"/>')
        out.append(f'<text x="{x0 + 15}" y="{y}" font-size="11">{escape(label)}</text>')
    return out


def plog_vs_rounds(rows: list[ResultRow], fits: list[FitResult] | None = None) -> str:
    """Measured ``p_log`` per code against ``t`` with the fitted curve overlaid."""
    if not rows:
        raise PlotError("no result rows to plot")
    fits = fits if fits is not None else fit_rows(rows)
    t_max = max(r.t for r in rows)
    y_max = max(max(r.p_log + r.stderr for r in rows), 1e-12) * 1.1
    ax = _Axes(0, t_max, 0, y_max)
    body = ax.frame("rounds t", "logical failure rate p_log")
    legend = []
    for i, fit in enumerate(fits):
        col = COLOURS[i % len(COLOURS)]
        pts = [r for r in rows if r.code == fit.code]
        curve = " ".join(f"{ax.x(t):.1f},{ax.y(1 - (1 - fit.epsilon) ** t):.1f}"
                         for t in [t_max * s / 40 for s in range(41)])
        body.append(f'<polyline points="{curve}" fill="none" stroke="{col}" stroke-dasharray="4 3"/>')
        body.append('<polyline points="' + " ".join(f"{ax.x(r.t):.1f},{ax.y(r.p_log):.1f}" for r in pts)
                    + f'" fill="none" stroke="{col}"/>')
        for r in pts:
            body.append(f'<line x1="{ax.x(r.t):.1f}" x2="{ax.x(r.t):.1f}" y1="{ax.y(max(r.p_log - r.stderr, 0)):.1f}" '
                        f'y2="{ax.y(r.p_log + r.stderr):.1f}" stroke="{col}"/>')
            body.append(f'<circle cx="{ax.x(r.t):.1f}" cy="{ax.y(r.p_log):.1f}" r="3" fill="{col}"/>')
        legend.append((f"{fit.code} eps={fit.epsilon:.2e}", col))
    return _svg(body + _legend(legend))


def epsilon_vs_qubits(rows: list[ResultRow], fits: list[FitResult] | None = None) -> str:
    """Fitted per-round rate against total qubit count, log scale."""
    if not rows:
        raise PlotError("no result rows to plot")
    fits = fits if fits is not None else fit_rows(rows)
    qubits = {r.code: r.qubits for r in rows}
    pts = [(qubits[f.code], f.epsilon, f.code) for f in fits if f.epsilon > 0]
    if not pts:
        raise PlotError("every fitted rate is zero; nothing to show on a log axis")
    ys = [e for _, e, _ in pts]
    ax = _Axes(0, max(q for q, _, _ in pts) * 1.1, min(ys) / 2, max(ys) * 2, logy=True)
    body = ax.frame("total qubits", "logical error per round eps_L")
    legend = []
    for i, (q, e, code) in enumerate(pts):
        col = COLOURS[i % len(COLOURS)]
        marker = "rect" if code.startswith("surface") else "circle"
        if marker == "rect":
            body.append(f'<rect x="{ax.x(q) - 4:.1f}" y="{ax.y(e) - 4:.1f}" width="8" height="8" fill="{col}"/>')
        else:
            body.append(f'<circle cx="{ax.x(q):.1f}" cy="{ax.y(e):.1f}" r="5" fill="{col}"/>')
        legend.append((code, col))
    return _svg(body + _legend(legend))


def emit_plots(rows: list[ResultRow], out_dir: str | Path) -> list[Path]:
    """Write both charts; raises :class:`PlotError` on an empty result set."""
    if not rows:
        raise PlotError("no result rows to plot")
    fits = fit_rows(rows)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files = [out / "plog_vs_t.svg", out / "eps_vs_qubits.svg"]
    files[0].write_text(plog_vs_rounds(rows, fits))
    try:
        files[1].write_text(epsilon_vs_qubits(rows, fits))
    except PlotError:
        files.pop()
    return files
