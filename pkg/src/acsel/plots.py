"""Minimal SVG rendering of benchmark and sweep outputs.

Every figure is built from the CSV files the CLI writes, so plots can be
regenerated from a results directory alone (``acsel replot``).  Output is plain
SVG text with fixed number formatting, hence byte-stable for identical input.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

from .simbench import read_csv_rows, read_mask_log, replicate_metrics

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
           "#bcbd22", "#17becf")
PANEL_W, PANEL_H = 320, 240
MARGIN_L, MARGIN_R, MARGIN_T, MARGIN_B = 52, 12, 28, 40


def _n(v: float) -> str:
    return f"{v:.2f}"


@dataclass
class Series:
    label: str
    x: np.ndarray
    y: np.ndarray
    lo: np.ndarray | None = None
    hi: np.ndarray | None = None
    markers: bool = True
    dashed: bool = False


@dataclass
class Panel:
    title: str
    xlabel: str
    ylabel: str
    series: list = field(default_factory=list)
    bars: list = field(default_factory=list)  # (left, right, height)
    xlim: tuple | None = None
    ylim: tuple | None = None
    reverse_x: bool = False
    legend: bool = True


def _ticks(lo: float, hi: float, n: int = 5) -> np.ndarray:
    if hi <= lo:
        return np.array([lo])
    raw = (hi - lo) / n
    mag = 10 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 2.5, 5, 10) if m * mag >= raw), default=raw)
    start = math.ceil(lo / step - 1e-9) * step
    return np.arange(start, hi + step * 1e-6, step)


def _limits(values: list[np.ndarray], pad: float = 0.0) -> tuple[float, float]:
    finite = np.concatenate([np.asarray(v, float)[np.isfinite(v)] for v in values if len(v)] or [np.zeros(1)])
    if finite.size == 0:
        return 0.0, 1.0
    lo, hi = float(finite.min()), float(finite.max())
    if hi - lo < 1e-12:
        lo, hi = lo - 0.5, hi + 0.5
    span = hi - lo
    return lo - pad * span, hi + pad * span


def _render_panel(p: Panel, ox: float, oy: float) -> list[str]:
    xs = [s.x for s in p.series] + [np.array([b[0] for b in p.bars] + [b[1] for b in p.bars])]
    ys = [s.y for s in p.series] + [s.lo for s in p.series if s.lo is not None] \
        + [s.hi for s in p.series if s.hi is not None] + [np.array([0.0] + [b[2] for b in p.bars])]
    x0, x1 = p.xlim or _limits(xs)
    y0, y1 = p.ylim or _limits(ys, 0.05)
    w = PANEL_W - MARGIN_L - MARGIN_R
    h = PANEL_H - MARGIN_T - MARGIN_B
    left, top = ox + MARGIN_L, oy + MARGIN_T

    def sx(v):
        f = (v - x0) / (x1 - x0)
        return left + (1 - f if p.reverse_x else f) * w

    def sy(v):
        return top + (1 - (v - y0) / (y1 - y0)) * h

    out = [f'<rect x="{_n(left)}" y="{_n(top)}" width="{_n(w)}" height="{_n(h)}" fill="none" stroke="#000"/>',
           f'<text x="{_n(left + w / 2)}" y="{_n(oy + 18)}" text-anchor="middle" font-size="12">{escape(p.title)}</text>',
           f'<text x="{_n(left + w / 2)}" y="{_n(top + h + 32)}" text-anchor="middle" font-size="11">'
           f'{escape(p.xlabel)}</text>',
           f'<text x="{_n(ox + 12)}" y="{_n(top + h / 2)}" text-anchor="middle" font-size="11" '
           f'transform="rotate(-90 {_n(ox + 12)} {_n(top + h / 2)})">{escape(p.ylabel)}</text>']
    for t in _ticks(x0, x1):
        out.append(f'<line x1="{_n(sx(t))}" y1="{_n(top + h)}" x2="{_n(sx(t))}" y2="{_n(top + h + 4)}" stroke="#000"/>')
        out.append(f'<text x="{_n(sx(t))}" y="{_n(top + h + 15)}" text-anchor="middle" font-size="9">{t:g}</text>')
    for t in _ticks(y0, y1):
        out.append(f'<line x1="{_n(left - 4)}" y1="{_n(sy(t))}" x2="{_n(left)}" y2="{_n(sy(t))}" stroke="#000"/>')
        out.append(f'<text x="{_n(left - 6)}" y="{_n(sy(t) + 3)}" text-anchor="end" font-size="9">{t:g}</text>')

    for a, b, height in p.bars:
        xa, xb = sorted((sx(a), sx(b)))
        out.append(f'<rect x="{_n(xa)}" y="{_n(sy(height))}" width="{_n(xb - xa)}" '
                   f'height="{_n(sy(y0) - sy(height))}" fill="#9ecae1" stroke="#3182bd"/>')

    for i, s in enumerate(p.series):
        color = PALETTE[i % len(PALETTE)]
        ok = np.isfinite(s.x) & np.isfinite(s.y)
        if s.lo is not None and s.hi is not None:
            band = ok & np.isfinite(s.lo) & np.isfinite(s.hi)
            if band.sum() >= 2:
                pts = [(sx(a), sy(b)) for a, b in zip(s.x[band], s.hi[band])]
                pts += [(sx(a), sy(b)) for a, b in zip(s.x[band][::-1], s.lo[band][::-1])]
                out.append(f'<polygon points="{" ".join(f"{_n(a)},{_n(b)}" for a, b in pts)}" '
                           f'fill="{color}" fill-opacity="0.18" stroke="none"/>')
        pts = [(sx(a), sy(b)) for a, b in zip(s.x[ok], s.y[ok])]
        dash = ' stroke-dasharray="5,3"' if s.dashed else ""
        if len(pts) >= 2:
            out.append(f'<polyline points="{" ".join(f"{_n(a)},{_n(b)}" for a, b in pts)}" fill="none" '
                       f'stroke="{color}" stroke-width="1.5"{dash}/>')
        if s.markers or len(pts) == 1:
            out.extend(f'<circle cx="{_n(a)}" cy="{_n(b)}" r="2.5" fill="{color}"/>' for a, b in pts)
    if p.legend:
        for i, s in enumerate(p.series[:10]):
            if not s.label:
                continue
            color = PALETTE[i % len(PALETTE)]
            ly = top + 10 + 12 * i
            out.append(f'<line x1="{_n(left + w - 70)}" y1="{_n(ly - 3)}" x2="{_n(left + w - 58)}" '
                       f'y2="{_n(ly - 3)}" stroke="{color}" stroke-width="2"/>')
            out.append(f'<text x="{_n(left + w - 55)}" y="{_n(ly)}" font-size="9">{escape(s.label)}</text>')
    return out


def render(panels: list[Panel], cols: int | None = None) -> str:
    """One SVG document holding ``panels`` on a grid."""
    cols = cols or len(panels)
    rows = math.ceil(len(panels) / cols)
    width, height = cols * PANEL_W, rows * PANEL_H
    body = []
    for i, p in enumerate(panels):
        body.extend(_render_panel(p, (i % cols) * PANEL_W, (i // cols) * PANEL_H))
    return (f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
            f'viewBox="0 0 {width} {height}" font-family="sans-serif">\n'
            f'<rect width="{width}" height="{height}" fill="#fff"/>\n' + "\n".join(body) + "\n</svg>\n")


def save(path: str | Path, panels: list[Panel], cols: int | None = None) -> Path:
    path = Path(path)
    path.write_text(render(panels, cols), encoding="utf-8")
    return path


def _safe(name: str) -> str:
    return "".join(ch if ch.isalnum() else "_" for ch in name)


def _f(v: str) -> float:
    return float(v) if v not in ("", "nan") else float("nan")


# ------------------------------------------------------------ benchmarks ---

def _metric_rows(rows: list[dict], selector: str, method: str, metric: str):
    sel = [r for r in rows if r["selector"] == selector and r["method"] == method and r["metric"] == metric]
    sel.sort(key=lambda r: -_f(r["c0"]) if r["c0"] else 0.0)
    return (np.array([_f(r["c0"]) for r in sel]), np.array([_f(r["value"]) for r in sel]),
            np.array([_f(r["lo95"]) for r in sel]), np.array([_f(r["hi95"]) for r in sel]))


def metric_curves(rows: list[dict], selector: str) -> list[Panel]:
    """Four indicators against c0 (AcSel and naive AcSel) with bootstrap bands."""
    panels = []
    for metric in ("precision", "recall", "fscore", "emptiness"):
        p = Panel(metric, "c0", metric, ylim=(0.0, 1.0), reverse_x=True)
        for method in ("acsel", "naive"):
            c0, v, lo, hi = _metric_rows(rows, selector, method, metric)
            if c0.size:
                p.series.append(Series(method, c0, v, lo, hi, dashed=method == "naive"))
        panels.append(p)
    return panels


def precision_histograms(masks_path: Path, selector: str) -> list[Panel]:
    """Per-replicate precision at the highest, middle and lowest c0 of the grid."""
    log = read_mask_log(masks_path)
    grid = log.grid
    picks = sorted({0, len(grid) // 2, len(grid) - 1})
    bins = np.linspace(0.0, 1.0, 11)
    panels = []
    for i in picks:
        per = replicate_metrics(log.truth, log.masks(selector, "acsel", grid[i]))
        vals = per["precision"][per["emptiness"] == 0]
        counts, _ = np.histogram(vals, bins=bins)
        panels.append(Panel(f"c0 = {grid[i]:g}", "precision", "replicates",
                            bars=[(bins[k], bins[k + 1], float(counts[k])) for k in range(len(counts))],
                            xlim=(0.0, 1.0), legend=False))
    return panels


def precision_vs_emptiness(rows: list[dict], selector: str) -> Panel:
    p = Panel(f"{selector}: precision against emptiness", "emptiness", "precision", ylim=(0.0, 1.0))
    for method in ("acsel", "naive", "stability"):
        _, prec, _, _ = _metric_rows(rows, selector, method, "precision")
        _, empt, _, _ = _metric_rows(rows, selector, method, "emptiness")
        if prec.size:
            p.series.append(Series(method, empt, prec, dashed=method == "naive"))
    lims = _limits([s.x for s in p.series], 0.05)
    p.xlim = (min(lims[0], 0.0), max(lims[1], 0.05))
    return p


def confidence_panel(rows: list[dict], selector: str) -> Panel:
    sel = sorted((r for r in rows if r["selector"] == selector), key=lambda r: _f(r["gamma"]))
    g = np.array([_f(r["gamma"]) for r in sel])
    frac = np.array([_f(r["fraction_true"]) for r in sel])
    return Panel(f"{selector}: confidence calibration", "confidence indicator", "fraction truly relevant",
                 series=[Series("acsel", g, frac)], ylim=(0.0, 1.0), legend=False)


def bench_figures(out_dir: str | Path) -> list[Path]:
    """Every benchmark figure derivable from ``results.csv``, ``confidence.csv`` and ``masks.csv``."""
    out = Path(out_dir)
    rows = read_csv_rows(out / "results.csv")
    conf = read_csv_rows(out / "confidence.csv") if (out / "confidence.csv").exists() else []
    written = []
    for selector in sorted({r["selector"] for r in rows}):
        tag = _safe(selector)
        written.append(save(out / f"metrics_{tag}.svg", metric_curves(rows, selector), cols=2))
        written.append(save(out / f"precision_hist_{tag}.svg", precision_histograms(out / "masks.csv", selector)))
        written.append(save(out / f"precision_vs_emptiness_{tag}.svg", [precision_vs_emptiness(rows, selector)]))
        if any(r["selector"] == selector for r in conf):
            written.append(save(out / f"confidence_{tag}.svg", [confidence_panel(conf, selector)]))
    return written


# ------------------------------------------------------------------ sweep ---

def zeta_panel(rows: list[dict], top: int = 10) -> Panel:
    """Selection frequency against c0 for the variables kept longest."""
    names = list(dict.fromkeys(r["variable"] for r in rows))
    c0 = np.array(sorted({_f(r["c0"]) for r in rows}, reverse=True))
    z = {n: np.full(c0.size, np.nan) for n in names}
    pos = {c: i for i, c in enumerate(c0)}
    for r in rows:
        z[r["variable"]][pos[_f(r["c0"])]] = _f(r["zeta"])
    # rank by the area under the zeta curve, ties broken by input order
    order = sorted(names, key=lambda n: -np.nansum(z[n]))[:top]
    p = Panel("selection frequency", "c0", "zeta", ylim=(0.0, 1.0), reverse_x=True)
    p.series = [Series(n, c0, z[n]) for n in order]
    return p


def path_panel(rows: list[dict], top: int = 10) -> Panel:
    """Standardized Lasso coefficients against log10(lambda)."""
    lam = np.array(sorted({_f(r["lambda"]) for r in rows}, reverse=True))
    names = list(dict.fromkeys(r["variable"] for r in rows))
    coef = {n: np.zeros(lam.size) for n in names}
    pos = {v: i for i, v in enumerate(lam)}
    for r in rows:
        coef[r["variable"]][pos[_f(r["lambda"])]] = _f(r["coef"])
    order = sorted(names, key=lambda n: -np.abs(coef[n]).max())
    p = Panel("coefficient path", "log10(lambda)", "coefficient", reverse_x=True)
    # the legend lists the ``top`` largest coefficients first
    p.series = [Series(n, np.log10(lam), coef[n], markers=False) for n in order if np.any(coef[n])]
    p.series = p.series[:top] + [replace(s, label="") for s in p.series[top:]]
    return p


def sweep_figures(out_dir: str | Path) -> list[Path]:
    out = Path(out_dir)
    written = [save(out / "sweep_zeta.svg", [zeta_panel(read_csv_rows(out / "sweep.csv"))])]
    if (out / "path.csv").exists():
        written.append(save(out / "coef_path.svg", [path_panel(read_csv_rows(out / "path.csv"))]))
    return written


def replot(out_dir: str | Path) -> list[Path]:
    """Regenerate whichever figure families the CSVs in ``out_dir`` support."""
    out = Path(out_dir)
    written = []
    if (out / "results.csv").exists() and (out / "masks.csv").exists():
        written += bench_figures(out)
    if (out / "sweep.csv").exists():
        written += sweep_figures(out)
    return written
