"""Deterministic SVG rendering of P1 fields."""
from __future__ import annotations

from pathlib import Path
from typing import Optional, Union

import numpy as np

from .fem import NodalField


def _diverging(t: float) -> str:
    # t in [-1, 1]: blue -> white -> red
    t = max(-1.0, min(1.0, t))
    if t >= 0:
        r, g, b = 1.0, 1.0 - 0.85 * t, 1.0 - 0.85 * t
    else:
        r, g, b = 1.0 + 0.85 * t, 1.0 + 0.85 * t, 1.0
    return "#{:02x}{:02x}{:02x}".format(round(255 * r), round(255 * g), round(255 * b))


def zero_level_segments(f: NodalField) -> np.ndarray:
    """Segments of the zero set of the P1 interpolant, shape (n, 2, 2)."""
    tris = f.mesh.triangles
    v = f.values[tris]
    x = f.mesh.vertices[tris]
    bnd = f.mesh.boundary[tris]
    segs = []
    for t in range(v.shape[0]):
        if not np.any(v[t]):
            continue
        pts = []
        for a, b in ((0, 1), (1, 2), (2, 0)):
            va, vb = v[t, a], v[t, b]
            if va == 0.0 and not bnd[t, a]:
                pts.append(x[t, a])
            if (va < 0 < vb) or (vb < 0 < va):
                s = va / (va - vb)
                pts.append(x[t, a] + s * (x[t, b] - x[t, a]))
        if len(pts) == 2:
            segs.append(pts)
    return np.array(segs).reshape(-1, 2, 2)


def render_svg(f: NodalField, size: int = 600, title: Optional[str] = None) -> str:
    """Filled triangles on a symmetric diverging scale plus the nodal line."""
    mesh = f.mesh
    lo = mesh.vertices.min(axis=0)
    hi = mesh.vertices.max(axis=0)
    span = float(max(hi - lo)) or 1.0
    pad = 10.0
    scale = (size - 2 * pad) / span

    def xy(p):
        return pad + (p[0] - lo[0]) * scale, size - pad - (p[1] - lo[1]) * scale

    vmax = float(np.abs(f.values).max()) or 1.0
    means = f.values[mesh.triangles].mean(axis=1) / vmax
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" '
        f'viewBox="0 0 {size} {size}">'
    ]
    if title:
        out.append(f"<title>{title}</title>")
    out.append('<g stroke-width="0.3">')
    for tri, m in zip(mesh.triangles, means):
        c = _diverging(float(m))
        pts = " ".join("{:.3f},{:.3f}".format(*xy(mesh.vertices[i])) for i in tri)
        out.append(f'<polygon points="{pts}" fill="{c}" stroke="{c}"/>')
    out.append("</g>")
    out.append('<g stroke="#000000" stroke-width="1.5" fill="none">')
    for a, b in zero_level_segments(f):
        (x1, y1), (x2, y2) = xy(a), xy(b)
        out.append(f'<line x1="{x1:.3f}" y1="{y1:.3f}" x2="{x2:.3f}" y2="{y2:.3f}"/>')
    out.append("</g></svg>")
    return "\n".join(out) + "\n"


def write_svg(f: NodalField, path: Union[str, Path], **kw) -> None:
    Path(path).write_text(render_svg(f, **kw))
