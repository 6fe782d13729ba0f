"""
Contour helpers in normalized image coordinates.

A contour is a ``(K, 2)`` float64 array of ``(x, y)`` rows in ``[0, 1]``,
x to the right and y downward. Under that convention the shoelace sum is
positive for a clockwise contour, which is the orientation used everywhere.
"""

from typing import Sequence, Tuple

import numpy as np

from ..errors import GeometryError, ShapeError

INITIAL_CENTER = (0.5, 0.5)
INITIAL_RADIUS = 0.35


def as_contour(points) -> np.ndarray:
    """
    Validates and converts ``points`` to a ``(K, 2)`` float64 contour.

    :raises ShapeError: If the array is not ``(K, 2)``.
    :raises GeometryError: If ``K < 3``.
    """
    contour = np.asarray(points, dtype=np.float64)
    if contour.ndim != 2 or contour.shape[1] != 2:
        raise ShapeError(f"contour must be (K, 2), got {contour.shape}")
    if contour.shape[0] < 3:
        raise GeometryError(f"contour needs at least 3 vertices, got {contour.shape[0]}")
    return contour


def clamp01(points: np.ndarray) -> np.ndarray:
    return np.clip(points, 0.0, 1.0)


def signed_area(contour) -> float:
    """
    Half the shoelace sum ``sum(x_i * y_{i+1} - x_{i+1} * y_i)`` over cyclic indices.

    Positive means clockwise on screen (y pointing down).
    """
    c = as_contour(contour)
    x, y = c[:, 0], c[:, 1]
    x_next, y_next = np.roll(x, -1), np.roll(y, -1)
    return float(0.5 * np.sum(x * y_next - x_next * y))


def perimeter(contour) -> float:
    c = as_contour(contour)
    return float(np.hypot(*(np.roll(c, -1, axis=0) - c).T).sum())


def polygon_centroid(contour) -> Tuple[float, float]:
    """Area centroid of a non-degenerate polygon."""
    c = as_contour(contour)
    area = signed_area(c)
    if area == 0.0:
        raise GeometryError("centroid of a zero-area polygon is undefined")
    x, y = c[:, 0], c[:, 1]
    x_next, y_next = np.roll(x, -1), np.roll(y, -1)
    cross = x * y_next - x_next * y
    return float(np.sum((x + x_next) * cross) / (6.0 * area)), float(np.sum((y + y_next) * cross) / (6.0 * area))


def resample_contour(contour, num_points: int) -> np.ndarray:
    """
    Resamples a closed polyline to ``num_points`` points at equal arc-length spacing.

    The first output point is vertex 0 and the traversal direction is kept,
    so orientation is preserved. Repeated vertices are skipped naturally
    because zero-length segments are never selected.

    :param contour: Closed polyline, ``(K, 2)``.
    :param num_points: Number of output points, at least 3.
    :return: ``(num_points, 2)`` contour.
    :raises GeometryError: If ``num_points < 3`` or the perimeter is zero.
    """
    c = as_contour(contour)
    if num_points < 3:
        raise GeometryError(f"cannot resample to {num_points} points, need at least 3")
    closed = np.vstack([c, c[:1]])
    segments = np.hypot(*np.diff(closed, axis=0).T)
    cumulative = np.concatenate([[0.0], np.cumsum(segments)])
    total = cumulative[-1]
    if not total > 0.0:
        raise GeometryError("cannot resample a contour with zero perimeter")

    targets = np.arange(num_points) * (total / num_points)
    index = np.clip(np.searchsorted(cumulative, targets, side="right") - 1, 0, len(segments) - 1)
    fraction = (targets - cumulative[index]) / segments[index]
    return closed[index] + fraction[:, None] * (closed[index + 1] - closed[index])


def densify_contour(contour, max_step: float) -> np.ndarray:
    """
    Subdivides every edge into pieces no longer than ``max_step``.

    Original vertices are kept in place, so the polygon region is unchanged.
    """
    c = as_contour(contour)
    if max_step <= 0:
        raise GeometryError(f"max_step must be positive, got {max_step}")
    nxt = np.roll(c, -1, axis=0)
    pieces = []
    for start, end in zip(c, nxt):
        count = max(1, int(np.ceil(np.hypot(*(end - start)) / max_step)))
        t = np.arange(count)[:, None] / count
        pieces.append(start + t * (end - start))
    return np.vstack(pieces)


def initial_contour(num_vertices: int, center: Sequence[float] = INITIAL_CENTER, radius: float = INITIAL_RADIUS) -> np.ndarray:
    """
    Circle of ``num_vertices`` points, clockwise, starting at the topmost point.

    :raises GeometryError: If ``num_vertices < 3``.
    """
    if num_vertices < 3:
        raise GeometryError(f"initial contour needs at least 3 vertices, got {num_vertices}")
    angles = -0.5 * np.pi + 2.0 * np.pi * np.arange(num_vertices) / num_vertices
    return np.stack([center[0] + radius * np.cos(angles), center[1] + radius * np.sin(angles)], axis=1)


def shift_contour(contour, shift: int) -> np.ndarray:
    """Cyclically re-indexes ``contour`` so that vertex ``shift`` comes first."""
    c = as_contour(contour)
    return np.roll(c, -shift, axis=0)
