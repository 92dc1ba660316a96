"""Deterministic software rasterizer for screen-space triangles.

Fill convention (shared contract for the engine and any reimplementation
that must agree pixel-for-pixel):

- Coordinates are 24.8 fixed point, x right, y down.  The pixel (px, py)
  is sampled at its center, fixed-point (px*256+128, py*256+128).
- For vertices a, b and sample p the edge function is
  w = (bx-ax)*(py-ay) - (by-ay)*(px-ax), evaluated in exact integers.
- Triangles are normalized so the doubled signed area
  area2 = (x1-x0)*(y2-y0) - (y1-y0)*(x2-x0) is positive by swapping v1
  and v2 when negative; zero-area triangles never cover pixels.
- A sample is covered when every edge satisfies w >= 1, except top and
  left edges which admit w >= 0.  An edge a->b is "top or left" when
  (ay == by and bx > ax) or (by < ay).
- Depth is interpolated as (w12*z0 + w20*z1 + w01*z2) / area2 in IEEE
  float64, with each weight converted to float64 first and the terms
  accumulated left to right (w12 is the edge function of v1->v2, the
  barycentric weight of v0, and so on).
- The depth test keeps the incoming fragment when z <= stored depth, so
  on exactly equal depth the later triangle in submission order wins.
  The depth buffer starts at +infinity.
"""

from __future__ import annotations

import numpy as np

from .stream import FP_ONE, FP_SHIFT, DrawCall

_HALF = FP_ONE // 2


def _top_left(ax: int, ay: int, bx: int, by: int) -> bool:
    return (ay == by and bx > ax) or (by < ay)


def rasterize_triangles(
    verts_fp: np.ndarray,
    depths: np.ndarray,
    width: int,
    height: int,
) -> tuple[np.ndarray, np.ndarray]:
    """Rasterize triangles in order; later triangles win depth ties.

    ``verts_fp``: (T, 3, 2) int32 fixed point, ``depths``: (T, 3).
    Returns (winner, zbuf): winner is (H, W) int32 holding the index of
    the visible triangle (-1 where uncovered), zbuf its float64 depth.
    """
    winner = np.full((height, width), -1, dtype=np.int32)
    zbuf = np.full((height, width), np.inf, dtype=np.float64)
    if len(verts_fp) == 0:
        return winner, zbuf

    v = np.asarray(verts_fp, dtype=np.int64)
    for t in range(v.shape[0]):
        (x0, y0), (x1, y1), (x2, y2) = v[t]
        z0, z1, z2 = (float(z) for z in depths[t])
        area2 = (x1 - x0) * (y2 - y0) - (y1 - y0) * (x2 - x0)
        if area2 == 0:
            continue
        if area2 < 0:
            x1, y1, x2, y2 = x2, y2, x1, y1
            z1, z2 = z2, z1
            area2 = -area2

        xmin = max(0, (min(x0, x1, x2) - _HALF + FP_ONE - 1) >> FP_SHIFT)
        xmax = min(width - 1, (max(x0, x1, x2) - _HALF) >> FP_SHIFT)
        ymin = max(0, (min(y0, y1, y2) - _HALF + FP_ONE - 1) >> FP_SHIFT)
        ymax = min(height - 1, (max(y0, y1, y2) - _HALF) >> FP_SHIFT)
        if xmin > xmax or ymin > ymax:
            continue

        cx = (np.arange(xmin, xmax + 1, dtype=np.int64) << FP_SHIFT) + _HALF
        cy = (np.arange(ymin, ymax + 1, dtype=np.int64) << FP_SHIFT) + _HALF
        cx = cx[None, :]
        cy = cy[:, None]

        w01 = (x1 - x0) * (cy - y0) - (y1 - y0) * (cx - x0)
        w12 = (x2 - x1) * (cy - y1) - (y2 - y1) * (cx - x1)
        w20 = (x0 - x2) * (cy - y2) - (y0 - y2) * (cx - x2)

        b01 = 0 if _top_left(x0, y0, x1, y1) else 1
        b12 = 0 if _top_left(x1, y1, x2, y2) else 1
        b20 = 0 if _top_left(x2, y2, x0, y0) else 1
        covered = (w01 >= b01) & (w12 >= b12) & (w20 >= b20)
        if not covered.any():
            continue

        z = (
            w12.astype(np.float64) * z0
            + w20.astype(np.float64) * z1
            + w01.astype(np.float64) * z2
        ) / float(area2)

        zslice = zbuf[ymin : ymax + 1, xmin : xmax + 1]
        wslice = winner[ymin : ymax + 1, xmin : xmax + 1]
        take = covered & (z <= zslice)
        zslice[take] = z[take]
        wslice[take] = t

    return winner, zbuf


def rasterize_draws(
    draws: list[DrawCall], width: int, height: int
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Rasterize the triangles of several draws in submission order.

    Returns (tri_winner, zbuf, tri_to_draw): tri_winner indexes the
    concatenated triangle list (-1 uncovered) and tri_to_draw maps those
    indices back to positions in ``draws``.
    """
    if draws:
        verts = np.concatenate([d.verts_fp for d in draws])
        depths = np.concatenate([d.depths for d in draws])
        tri_to_draw = np.concatenate(
            [np.full(d.triangle_count, i, dtype=np.int32) for i, d in enumerate(draws)]
        )
    else:
        verts = np.zeros((0, 3, 2), dtype=np.int32)
        depths = np.zeros((0, 3), dtype=np.float32)
        tri_to_draw = np.zeros(0, dtype=np.int32)
    winner, zbuf = rasterize_triangles(verts, depths, width, height)
    return winner, zbuf, tri_to_draw
