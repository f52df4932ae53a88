"""Deterministic SVG rendering of demonstrations, reproductions, and the
velocity field. No plotting library: byte-identical output for identical
inputs is part of the contract, so the file is assembled from formatted
strings only."""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np

from .dynamics import StabilizedDS
from .gains import radial_gate

_DEMO_COLOR = "#8b4513"
_ROLLOUT_COLOR = "#111111"
_ARROW_COLOR = "#4169e1"


def field_arrows(ds: StabilizedDS, bounds, grid_n: int = 15):
    """Full-tank velocity arrows on a regular grid over ``bounds``.

    Returns (points, vectors); the vector at the goal is exactly zero.
    """
    (x_lo, x_hi), (y_lo, y_hi) = bounds
    xs = np.linspace(x_lo, x_hi, grid_n)
    ys = np.linspace(y_lo, y_hi, grid_n)
    pts = np.array([[x, y] for y in ys for x in xs])
    rel = pts - ds.goal
    f_vals = np.atleast_2d(ds.model.predict(rel))
    gates = np.array(
        [radial_gate(float(np.linalg.norm(p)), ds.params.sharpness) for p in rel]
    )
    vecs = -rel + gates[:, None] * f_vals
    return pts, vecs


def _svg_bounds(demos, rollouts):
    stacks = [d.positions for d in demos]
    stacks += [r.states for r in rollouts if len(r.states)]
    allpts = np.vstack(stacks)
    lo = allpts.min(axis=0)
    hi = allpts.max(axis=0)
    span = np.maximum(hi - lo, 1e-9)
    lo = lo - 0.08 * span
    hi = hi + 0.08 * span
    return (float(lo[0]), float(hi[0])), (float(lo[1]), float(hi[1]))


def plot_motion_svg(demos, rollouts, ds: StabilizedDS, path,
                    grid_n: int = 15, width: int = 640) -> None:
    """Write an SVG overlay: field arrows, demo points, reproductions.

    Only 2-D motions are drawn; other dimensions are skipped with a notice
    file so batch runs keep going.
    """
    path = Path(path)
    if demos and demos[0].dim != 2:
        path.with_suffix(".txt").write_text(
            f"plot skipped: motion is {demos[0].dim}-D, plots are 2-D only\n",
            encoding="utf-8",
        )
        return
    (x_lo, x_hi), (y_lo, y_hi) = _svg_bounds(demos, rollouts)
    span_x, span_y = x_hi - x_lo, y_hi - y_lo
    height = int(round(width * span_y / span_x)) if span_x > 0 else width
    scale = width / span_x

    def sx(v: float) -> str:
        return f"{(v - x_lo) * scale:.3f}"

    def sy(v: float) -> str:
        return f"{(y_hi - v) * scale:.3f}"  # svg y grows downward

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
        f'height="{height}" viewBox="0 0 {width} {height}">',
        '<rect width="100%" height="100%" fill="white"/>',
    ]

    pts, vecs = field_arrows(ds, ((x_lo, x_hi), (y_lo, y_hi)), grid_n)
    norms = np.linalg.norm(vecs, axis=1)
    vmax = float(norms.max()) if len(norms) else 0.0
    cell = min(span_x, span_y) / grid_n
    parts.append(f'<g stroke="{_ARROW_COLOR}" stroke-width="1" opacity="0.6">')
    for p, v, n in zip(pts, vecs, norms):
        if vmax <= 0.0 or n <= 1e-12 * max(vmax, 1.0):
            continue
        tip = p + v * (0.8 * cell / vmax)
        parts.append(
            f'<line x1="{sx(p[0])}" y1="{sy(p[1])}" '
            f'x2="{sx(tip[0])}" y2="{sy(tip[1])}"/>'
        )
    parts.append("</g>")

    parts.append(f'<g fill="{_DEMO_COLOR}" opacity="0.7">')
    for demo in demos:
        for p in demo.positions:
            parts.append(f'<circle cx="{sx(p[0])}" cy="{sy(p[1])}" r="2"/>')
    parts.append("</g>")

    parts.append(
        f'<g stroke="{_ROLLOUT_COLOR}" stroke-width="1.5" fill="none">'
    )
    for roll in rollouts:
        if len(roll.states) == 0:
            continue
        coords = " ".join(
            f"{sx(p[0])},{sy(p[1])}" for p in roll.states
        )
        parts.append(f'<polyline points="{coords}"/>')
    parts.append("</g>")

    gx, gy = float(ds.goal[0]), float(ds.goal[1])
    parts.append(
        f'<circle cx="{sx(gx)}" cy="{sy(gy)}" r="5" fill="none" '
        f'stroke="#c02020" stroke-width="2"/>'
    )
    parts.append("</svg>")
    path.write_text("\n".join(parts) + "\n", encoding="utf-8")
