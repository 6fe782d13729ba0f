import numpy as np
import pytest
from src.errors import GeometryError, ShapeError
from src.geometry import (
    densify_contour,
    initial_contour,
    perimeter,
    polygon_centroid,
    resample_contour,
    shift_contour,
    signed_area,
)

UNIT_SQUARE = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])

# 1. Signed area

def test_signed_area_clockwise_square():
    assert signed_area(UNIT_SQUARE) == 1.0

def test_signed_area_reversed():
    assert signed_area(UNIT_SQUARE[::-1]) == -1.0

def test_signed_area_collinear():
    assert signed_area([[0.0, 0.0], [0.5, 0.5], [1.0, 1.0]]) == 0.0

def test_signed_area_needs_three_vertices():
    with pytest.raises(GeometryError):
        signed_area([[0.0, 0.0], [1.0, 1.0]])

def test_contour_must_be_pairs():
    with pytest.raises(ShapeError):
        perimeter(np.zeros((4, 3)))


# 2. Resampling

def test_resample_square_to_corners():
    assert np.allclose(resample_contour(UNIT_SQUARE, 4), UNIT_SQUARE, rtol=0, atol=1e-12)

def test_resample_square_to_midpoints():
    expected = [[0, 0], [0.5, 0], [1, 0], [1, 0.5], [1, 1], [0.5, 1], [0, 1], [0, 0.5]]
    assert np.allclose(resample_contour(UNIT_SQUARE, 8), expected, rtol=0, atol=1e-12)

def test_resample_fixed_point():
    contour = resample_contour(UNIT_SQUARE, 8)
    assert np.allclose(resample_contour(contour, 8), contour, rtol=0, atol=1e-12)

def test_resample_keeps_orientation():
    circle = initial_contour(30)
    assert signed_area(resample_contour(circle, 7)) > 0

def test_resample_zero_perimeter():
    with pytest.raises(GeometryError):
        resample_contour(np.full((4, 2), 0.5), 4)

def arc_positions(contour, points):
    start, end = contour, np.roll(contour, -1, axis=0)
    lengths = np.hypot(*(end - start).T)
    offsets = np.concatenate([[0.0], np.cumsum(lengths)[:-1]])
    positions = []
    for point in points:
        t = np.clip(np.einsum("ij,ij->i", point - start, end - start) / lengths**2, 0.0, 1.0)
        gaps = np.hypot(*(start + t[:, None] * (end - start) - point).T)
        on_edge = gaps < 1e-12
        positions.append(np.min(offsets[on_edge] + t[on_edge] * lengths[on_edge]))
    return np.array(positions), lengths.sum()

@pytest.mark.parametrize("seed", range(10))
def test_resample_equal_arc_length_gaps(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(3, 40))
    angles = np.sort(rng.uniform(0.0, 2.0 * np.pi, n))
    contour = 0.5 + rng.uniform(0.1, 0.4, (n, 1)) * np.stack([np.cos(angles), np.sin(angles)], axis=1)
    k = int(rng.integers(3, 80))
    positions, total = arc_positions(contour, resample_contour(contour, k))
    assert positions[0] == 0.0
    gaps = np.diff(np.append(positions, total))
    assert np.abs(gaps - total / k).max() < 1e-9

def test_densify_keeps_vertices():
    dense = densify_contour(UNIT_SQUARE, 0.3)
    assert len(dense) == 16
    for vertex in UNIT_SQUARE:
        assert np.any(np.all(dense == vertex, axis=1))
    assert signed_area(dense) == pytest.approx(1.0)


# 3. Initial contour and helpers

def test_initial_contour_four_points():
    expected = [[0.5, 0.15], [0.85, 0.5], [0.5, 0.85], [0.15, 0.5]]
    assert np.allclose(initial_contour(4), expected, rtol=0, atol=1e-12)

@pytest.mark.parametrize("k", [3, 8, 20, 60])
def test_initial_contour_radius_and_orientation(k):
    contour = initial_contour(k)
    assert np.allclose(np.hypot(*(contour - 0.5).T), 0.35, rtol=0, atol=1e-12)
    assert signed_area(contour) > 0

def test_initial_contour_too_small():
    with pytest.raises(GeometryError):
        initial_contour(2)

def test_centroid_of_square():
    assert polygon_centroid(UNIT_SQUARE) == pytest.approx((0.5, 0.5))

def test_shift_contour_moves_start():
    assert np.array_equal(shift_contour(UNIT_SQUARE, 1)[0], UNIT_SQUARE[1])
