"""
Even-odd containment, scanline rasterization and mask IoU.

Masks are ``(H, W)`` uint8 arrays holding 0 (background) and 1 (foreground).
Pixel ``(row, col)`` is represented by its center
``((col + 0.5) / W, (row + 0.5) / H)``.

An edge crosses the horizontal ray through ``py`` iff exactly one endpoint
has ``y > py`` (half-open vertex rule); the crossing abscissa is always
computed as ``xi + (py - yi) * (xj - xi) / (yj - yi)`` so the scalar oracle,
the vectorized variant and the scanline fill agree bit for bit.
"""

import numpy as np

from ..errors import GeometryError, ShapeError
from .contour import as_contour


def point_in_polygon(point, contour) -> bool:
    """
    Even-odd ray cast of a single point against a polygon.

    :param point: ``(x, y)`` in normalized coordinates; clamped to ``[0, 1]``.
    :param contour: Polygon vertices, ``(K, 2)``.
    :return: True if the point is inside.
    """
    px = min(max(float(point[0]), 0.0), 1.0)
    py = min(max(float(point[1]), 0.0), 1.0)
    vertices = as_contour(contour).tolist()

    inside = False
    xj, yj = vertices[-1]
    for xi, yi in vertices:
        if (yi > py) != (yj > py):
            x_cross = xi + (py - yi) * (xj - xi) / (yj - yi)
            if px < x_cross:
                inside = not inside
        xj, yj = xi, yi
    return inside


def points_in_polygon(points: np.ndarray, contour) -> np.ndarray:
    """
    Vectorized :func:`point_in_polygon` over ``(M, 2)`` points.

    :return: Boolean array of length ``M``.
    """
    c = as_contour(contour)
    pts = np.clip(np.asarray(points, dtype=np.float64).reshape(-1, 2), 0.0, 1.0)
    px, py = pts[:, :1], pts[:, 1:]
    xi, yi = c[:, 0][None, :], c[:, 1][None, :]
    xj, yj = np.roll(c[:, 0], 1)[None, :], np.roll(c[:, 1], 1)[None, :]

    crosses = (yi > py) != (yj > py)
    with np.errstate(divide="ignore", invalid="ignore"):
        x_cross = xi + (py - yi) * (xj - xi) / (yj - yi)
    hits = crosses & (px < x_cross)
    return hits.sum(axis=1) % 2 == 1


def rasterize_polygon(contour, height: int, width: int) -> np.ndarray:
    """
    Scanline even-odd fill of a polygon into an ``(H, W)`` mask.

    For each pixel row the crossings of the row's center line with the
    polygon edges are sorted once; a pixel center is inside iff an odd
    number of crossings lies strictly to its right.

    :raises GeometryError: If ``height`` or ``width`` is below 1.
    """
    if height < 1 or width < 1:
        raise GeometryError(f"raster size must be at least 1x1, got {height}x{width}")
    c = as_contour(contour)
    xi, yi = c[:, 0], c[:, 1]
    xj, yj = np.roll(xi, 1), np.roll(yi, 1)
    centers_x = (np.arange(width) + 0.5) / width
    centers_y = (np.arange(height) + 0.5) / height

    mask = np.zeros((height, width), dtype=np.uint8)
    for row, py in enumerate(centers_y):
        active = (yi > py) != (yj > py)
        if not active.any():
            continue
        a_xi, a_yi, a_xj, a_yj = xi[active], yi[active], xj[active], yj[active]
        crossings = np.sort(a_xi + (py - a_yi) * (a_xj - a_xi) / (a_yj - a_yi))
        right_of_center = crossings.size - np.searchsorted(crossings, centers_x, side="right")
        mask[row] = right_of_center % 2
    return mask


def mask_iou(a: np.ndarray, b: np.ndarray) -> float:
    """
    Intersection over union of two binary masks.

    Two empty masks agree perfectly and score 1.0.

    :raises ShapeError: If the masks differ in size.
    """
    if a.shape != b.shape:
        raise ShapeError(f"mask shapes differ: {a.shape} vs {b.shape}")
    a, b = a.astype(bool), b.astype(bool)
    union = np.logical_or(a, b).sum()
    if union == 0:
        return 1.0
    return float(np.logical_and(a, b).sum() / union)
