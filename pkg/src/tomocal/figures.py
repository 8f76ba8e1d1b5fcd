"""Static SVG figures written directly, without a plotting library.

* Bloch-sphere maps in the Hammer equal-area projection, one colored mark per
  state (class ``mark``).  Purity maps use a linear color scale from the
  ensemble minimum to 1, or to the maximum when values exceed 1.
* Landscape heatmaps with linear or logarithmic color normalization; the log
  scale spans ``[max(vmin, 1e-12 vmax), vmax]``.
* Line plots for one-dimensional scans such as the polarimeter Delta D curve.

The color map interpolates five viridis-like anchors.
"""

from __future__ import annotations

import math
from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

SQRT2 = math.sqrt(2.0)
_ANCHORS = np.array([
    [68, 1, 84], [59, 82, 139], [33, 145, 140], [94, 201, 98], [253, 231, 37],
], dtype=float)


def hammer_project(theta: float, phi: float) -> tuple[float, float]:
    """Hammer equal-area coordinates of the Bloch point (colatitude, longitude).

    Latitude is ``pi/2 - theta`` and the longitude is wrapped to ``(-pi, pi]``.
    """
    if not -1e-12 <= theta <= math.pi + 1e-12:
        raise ValueError(f"colatitude {theta} outside [0, pi]")
    lat = math.pi / 2 - theta
    lon = math.remainder(phi, 2 * math.pi)
    if lon == -math.pi:
        lon = math.pi
    den = math.sqrt(1.0 + math.cos(lat) * math.cos(lon / 2))
    return (2 * SQRT2 * math.cos(lat) * math.sin(lon / 2) / den, SQRT2 * math.sin(lat) / den)


def normalize(values, vmin: float, vmax: float, log: bool = False) -> np.ndarray:
    """Map values into [0, 1] linearly or on a log10 scale."""
    v = np.asarray(values, dtype=float)
    if log:
        vmax = max(vmax, 1e-300)
        vmin = max(vmin, vmax * 1e-12)
        v = np.log10(np.clip(v, vmin, None))
        vmin, vmax = math.log10(vmin), math.log10(vmax)
    if vmax <= vmin:
        return np.zeros_like(v)
    return np.clip((v - vmin) / (vmax - vmin), 0.0, 1.0)


def color(t: float) -> str:
    """Hex color for ``t`` in [0, 1]."""
    x = float(np.clip(t, 0.0, 1.0)) * (len(_ANCHORS) - 1)
    k = min(int(x), len(_ANCHORS) - 2)
    rgb = _ANCHORS[k] + (x - k) * (_ANCHORS[k + 1] - _ANCHORS[k])
    return "#{:02x}{:02x}{:02x}".format(*(int(round(c)) for c in rgb))


def _svg(width: int, height: int, body: list[str], title: str) -> str:
    head = (f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
            f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">')
    return "\n".join([head, f"<title>{escape(title)}</title>",
                      f'<rect width="{width}" height="{height}" fill="white"/>',
                      f'<text x="{width / 2:.1f}" y="18" text-anchor="middle">{escape(title)}</text>',
                      *body, "</svg>", ""])


def _colorbar(x: float, y: float, h: float, vmin: float, vmax: float, log: bool) -> list[str]:
    out = []
    steps = 32
    for k in range(steps):
        y0 = y + h * (1 - (k + 1) / steps)
        out.append(f'<rect class="colorbar" x="{x:.1f}" y="{y0:.2f}" width="14" '
                   f'height="{h / steps + 0.5:.2f}" fill="{color((k + 0.5) / steps)}"/>')
    fmt = "{:.3g}"
    out.append(f'<text x="{x + 18:.1f}" y="{y + 4:.1f}">{fmt.format(vmax)}</text>')
    out.append(f'<text x="{x + 18:.1f}" y="{y + h + 4:.1f}">{fmt.format(vmin)}</text>')
    if log:
        out.append(f'<text x="{x:.1f}" y="{y + h + 20:.1f}">log scale</text>')
    return out


def bloch_map_svg(points, title: str, vmin: float | None = None, vmax: float | None = None,
                  log: bool = False) -> str:
    """Hammer-projected sphere with one colored mark per ``(theta, phi, value)`` row."""
    pts = np.asarray(points, dtype=float).reshape(-1, 3)
    vals = pts[:, 2]
    vmin = float(vals.min()) if vmin is None else vmin
    vmax = max(1.0, float(vals.max())) if vmax is None else vmax
    scale, cx, cy = 110.0, 340.0, 190.0
    body = [f'<ellipse cx="{cx}" cy="{cy}" rx="{2 * SQRT2 * scale:.2f}" ry="{SQRT2 * scale:.2f}" '
            'fill="#f4f4f4" stroke="black"/>']
    # graticule: equator and central meridian
    body.append(f'<line x1="{cx - 2 * SQRT2 * scale:.2f}" y1="{cy}" x2="{cx + 2 * SQRT2 * scale:.2f}" '
                f'y2="{cy}" stroke="#bbbbbb"/>')
    body.append(f'<line x1="{cx}" y1="{cy - SQRT2 * scale:.2f}" x2="{cx}" y2="{cy + SQRT2 * scale:.2f}" '
                'stroke="#bbbbbb"/>')
    t = normalize(vals, vmin, vmax, log)
    for (theta, phi, v), tk in zip(pts, t):
        u, w = hammer_project(min(max(theta, 0.0), math.pi), phi)
        body.append(f'<circle class="mark" cx="{cx + scale * u:.2f}" cy="{cy - scale * w:.2f}" r="5" '
                    f'fill="{color(tk)}" stroke="black" stroke-width="0.4">'
                    f'<title>{v:.6g}</title></circle>')
    body += _colorbar(680.0, 80.0, 220.0, vmin, vmax, log)
    return _svg(760, 370, body, title)


def heatmap_svg(names, axes, values, title: str, log: bool = True) -> str:
    """Two-dimensional grid as colored cells; the minimum node is outlined."""
    vals = np.asarray(values, dtype=float)
    xs, ys = (np.asarray(a, dtype=float) for a in axes)
    nx, ny = vals.shape
    x0, y0, w, h = 70.0, 40.0, 400.0, 400.0
    cw, ch = w / nx, h / ny
    vmin, vmax = float(vals.min()), float(vals.max())
    t = normalize(vals, vmin, vmax, log)
    body = []
    for i in range(nx):
        for j in range(ny):
            body.append(f'<rect class="cell" x="{x0 + i * cw:.2f}" y="{y0 + h - (j + 1) * ch:.2f}" '
                        f'width="{cw + 0.05:.2f}" height="{ch + 0.05:.2f}" fill="{color(t[i, j])}"/>')
    i, j = np.unravel_index(int(np.argmin(vals)), vals.shape)
    body.append(f'<rect x="{x0 + i * cw:.2f}" y="{y0 + h - (j + 1) * ch:.2f}" width="{cw:.2f}" '
                f'height="{ch:.2f}" fill="none" stroke="red" stroke-width="1.5"/>')
    body.append(f'<text x="{x0 + w / 2:.1f}" y="{y0 + h + 34:.1f}" text-anchor="middle">'
                f'{escape(names[0])}: {xs[0]:.4g} .. {xs[-1]:.4g}</text>')
    body.append(f'<text x="20" y="{y0 + h / 2:.1f}" transform="rotate(-90 20 {y0 + h / 2:.1f})" '
                f'text-anchor="middle">{escape(names[1])}: {ys[0]:.4g} .. {ys[-1]:.4g}</text>')
    body += _colorbar(x0 + w + 20, y0, h, vmin, vmax, log)
    return _svg(580, 490, body, title)


def curve_svg(x, y, title: str, xlabel: str, ylabel: str, mark_min: bool = True) -> str:
    """Polyline plot with the extremal node marked."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    x0, y0, w, h = 70.0, 40.0, 460.0, 300.0
    xl, xh = float(x.min()), float(x.max())
    yl, yh = float(y.min()), float(y.max())
    if yh <= yl:
        yh = yl + 1.0
    if xh <= xl:
        xh = xl + 1.0

    def px(a, b):
        return x0 + w * (a - xl) / (xh - xl), y0 + h - h * (b - yl) / (yh - yl)

    coords = " ".join("{:.2f},{:.2f}".format(*px(a, b)) for a, b in zip(x, y))
    body = [f'<rect x="{x0}" y="{y0}" width="{w}" height="{h}" fill="none" stroke="black"/>',
            f'<polyline class="curve" points="{coords}" fill="none" stroke="#3b528b" stroke-width="1.5"/>']
    k = int(np.argmin(y)) if mark_min else int(np.argmax(y))
    mx, my = px(x[k], y[k])
    body.append(f'<circle cx="{mx:.2f}" cy="{my:.2f}" r="4" fill="red"/>')
    body.append(f'<text x="{mx + 6:.2f}" y="{my - 6:.2f}">{x[k]:.4g}</text>')
    body.append(f'<text x="{x0 + w / 2:.1f}" y="{y0 + h + 34:.1f}" text-anchor="middle">'
                f'{escape(xlabel)}</text>')
    body.append(f'<text x="20" y="{y0 + h / 2:.1f}" transform="rotate(-90 20 {y0 + h / 2:.1f})" '
                f'text-anchor="middle">{escape(ylabel)}</text>')
    for val, yy in ((yl, y0 + h), (yh, y0)):
        body.append(f'<text x="{x0 - 4:.1f}" y="{yy + 4:.1f}" text-anchor="end">{val:.3g}</text>')
    for val, xx in ((xl, x0), (xh, x0 + w)):
        body.append(f'<text x="{xx:.1f}" y="{y0 + h + 16:.1f}" text-anchor="middle">{val:.4g}</text>')
    return _svg(580, 400, body, title)


def write_figures(result, out_dir) -> list[Path]:
    """Every figure of a scenario result, as SVG files in ``out_dir``."""
    out = Path(out_dir)
    written = []

    def save(name, text):
        path = out / f"{name}.svg"
        path.write_text(text, encoding="utf-8", newline="\n")
        written.append(path)

    for name, pts in result.maps.items():
        label = name.replace("_", " ")
        save(name, bloch_map_svg(pts, f"{result.scenario}: {label}"))
    for name, grid in result.landscapes.items():
        if len(grid.axes) == 2:
            log = grid.quantity != "pmin"
            save(name, heatmap_svg(grid.names, grid.axes, grid.values,
                                   f"{result.scenario}: {grid.quantity}", log=log))
    for name, (x, y, xlabel, ylabel) in result.curves.items():
        save(name, curve_svg(x, y, f"{result.scenario}: {ylabel}", xlabel, ylabel,
                             mark_min=not name.startswith("pmin")))
    return written
