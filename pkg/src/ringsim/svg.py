"""Minimal deterministic SVG line plots for sweep results.

Standalone SVG 1.1 documents with no external references; byte-stable for
identical input rows.  Rows with non-finite values are excluded and counted
in a legend note.
"""

from __future__ import annotations

from typing import Sequence

from .experiments import ResultRow

WIDTH, HEIGHT = 640, 420
MARGIN_L, MARGIN_R, MARGIN_T, MARGIN_B = 72, 20, 42, 52
PALETTE = ("#8c1a6a", "#76b041", "#1f77b4", "#e07b00", "#3b3b3b",
           "#00a0a0", "#c02942", "#6a51a3", "#a0892c", "#444e86")

_AXIS_ATTR = {"phi": "phi", "kappa": "kappa", "theta": "theta", "r": "r",
              "L": "L", "alpha": "alpha", "delta": "delta",
              "epsilon_x": "eps_x", "epsilon_zz": "eps_zz"}


def _axis_value(row: ResultRow, axis: str) -> float:
    v = getattr(row, _AXIS_ATTR[axis])
    if v is None:
        raise ValueError(f"rows carry no value for axis {axis!r}")
    return float(v.real) if isinstance(v, complex) else float(v)


def _fmt_num(v: float) -> str:
    return f"{v:.6g}"


def _series_key_attrs(rows: Sequence[ResultRow], axis: str) -> list[str]:
    """Attributes (other than the axis) that vary across rows, plus the index."""
    attrs = []
    for name, attr in _AXIS_ATTR.items():
        if name == axis:
            continue
        vals = {getattr(r, attr) for r in rows}
        if len(vals) > 1:
            attrs.append(name)
    if len({r.index for r in rows}) > 1:
        attrs.append("index")
    return attrs


def emit_svg(rows: Sequence[ResultRow], axis: str, observable: str) -> str | None:
    """SVG document plotting `observable` against the sweep `axis`.

    One polyline per combination of the remaining varying parameters (and
    per site/bond index).  Returns None when fewer than two distinct axis
    values are present; raises ValueError on an empty selection.
    """
    if axis not in _AXIS_ATTR:
        raise ValueError(f"unknown axis {axis!r}")
    sel = [r for r in rows if r.observable == observable]
    if not sel:
        raise ValueError(f"no rows for observable {observable!r}")
    finite = [r for r in sel if r.value == r.value and abs(r.value) != float("inf")]
    n_excluded = len(sel) - len(finite)
    if len({_axis_value(r, axis) for r in finite}) < 2:
        return None

    key_attrs = _series_key_attrs(finite, axis)

    def key_of(r: ResultRow):
        parts = []
        for name in key_attrs:
            v = r.index if name == "index" else getattr(r, _AXIS_ATTR[name])
            parts.append((name, v))
        return tuple(parts)

    series: dict[tuple, list[tuple[float, float]]] = {}
    for r in finite:
        series.setdefault(key_of(r), []).append((_axis_value(r, axis), float(r.value)))
    for pts in series.values():
        pts.sort(key=lambda p: p[0])

    xs = [p[0] for pts in series.values() for p in pts]
    ys = [p[1] for pts in series.values() for p in pts]
    xmin, xmax = min(xs), max(xs)
    ymin, ymax = min(ys), max(ys)
    if ymax == ymin:
        pad = abs(ymax) * 0.1 or 1.0
        ymin, ymax = ymin - pad, ymax + pad
    else:
        pad = (ymax - ymin) * 0.06
        ymin, ymax = ymin - pad, ymax + pad

    px_w = WIDTH - MARGIN_L - MARGIN_R
    px_h = HEIGHT - MARGIN_T - MARGIN_B

    def to_px(x: float, y: float) -> tuple[float, float]:
        fx = (x - xmin) / (xmax - xmin)
        fy = (y - ymin) / (ymax - ymin)
        return MARGIN_L + fx * px_w, MARGIN_T + (1.0 - fy) * px_h

    out: list[str] = []
    out.append('<?xml version="1.0" encoding="UTF-8"?>')
    out.append(f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" '
               f'width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">')
    out.append(f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="#ffffff"/>')
    out.append(f'<text x="{WIDTH // 2}" y="24" font-family="monospace" font-size="14" '
               f'text-anchor="middle">{observable} vs {axis}</text>')
    # frame
    x0, y0 = MARGIN_L, MARGIN_T
    x1, y1 = WIDTH - MARGIN_R, HEIGHT - MARGIN_B
    out.append(f'<rect x="{x0}" y="{y0}" width="{px_w}" height="{px_h}" '
               f'fill="none" stroke="#000000" stroke-width="1"/>')
    # ticks
    for i in range(5):
        xv = xmin + (xmax - xmin) * i / 4.0
        px, _ = to_px(xv, ymin)
        out.append(f'<line x1="{px:.2f}" y1="{y1}" x2="{px:.2f}" y2="{y1 + 5}" stroke="#000000"/>')
        out.append(f'<text x="{px:.2f}" y="{y1 + 18}" font-family="monospace" font-size="11" '
                   f'text-anchor="middle">{_fmt_num(xv)}</text>')
        yv = ymin + (ymax - ymin) * i / 4.0
        _, py = to_px(xmin, yv)
        out.append(f'<line x1="{x0 - 5}" y1="{py:.2f}" x2="{x0}" y2="{py:.2f}" stroke="#000000"/>')
        out.append(f'<text x="{x0 - 8}" y="{py + 4:.2f}" font-family="monospace" font-size="11" '
                   f'text-anchor="end">{_fmt_num(yv)}</text>')
    out.append(f'<text x="{(x0 + x1) // 2}" y="{HEIGHT - 14}" font-family="monospace" '
               f'font-size="12" text-anchor="middle">{axis}</text>')
    # polylines
    for i, (key, pts) in enumerate(sorted(series.items(), key=lambda kv: repr(kv[0]))):
        color = PALETTE[i % len(PALETTE)]
        coords = " ".join(f"{to_px(x, y)[0]:.2f},{to_px(x, y)[1]:.2f}" for x, y in pts)
        out.append(f'<polyline points="{coords}" fill="none" stroke="{color}" stroke-width="1.5"/>')
    # legend
    legend: list[str] = []
    keys = sorted(series.keys(), key=repr)
    for i, key in enumerate(keys[:10]):
        label = " ".join(f"{n}={_fmt_num(v) if isinstance(v, (int, float)) else v}"
                         for n, v in key) or "series"
        legend.append(f'<text x="{x0 + 8}" y="{y0 + 16 + 14 * i}" font-family="monospace" '
                      f'font-size="11" fill="{PALETTE[i % len(PALETTE)]}">{label}</text>')
    if len(keys) > 10:
        legend.append(f'<text x="{x0 + 8}" y="{y0 + 16 + 14 * 10}" font-family="monospace" '
                      f'font-size="11" fill="#000000">(+{len(keys) - 10} more series)</text>')
    if n_excluded:
        legend.append(f'<text x="{x1 - 8}" y="{y0 + 16}" font-family="monospace" font-size="11" '
                      f'fill="#c00000" text-anchor="end">{n_excluded} non-finite points excluded</text>')
    out.extend(legend)
    out.append("</svg>")
    return "\n".join(out) + "\n"
