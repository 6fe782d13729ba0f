import math

import numpy as np
import pytest
from src.errors import ConfigError, ShapeError
from src.geometry import initial_contour, point_in_polygon, rasterize_polygon
from src.model import (
    RendererConfig,
    RenderPointBatch,
    classify_points,
    grid_offsets,
    init_renderer_params,
    pixel_writes,
    point_targets,
    render_mask,
    renderer_loss,
    sample_test_grid,
    sample_train_points,
)
from src.numerics import ParamStore

SQUARE = np.array([[0.3, 0.3], [0.7, 0.3], [0.7, 0.7], [0.3, 0.7]])

# 1. Configuration

def test_default_renderer_config():
    cfg = RendererConfig()
    assert (cfg.train_samples_per_vertex, cfg.test_grid_side) == (3, 15)
    assert (cfg.test_square_size, cfg.fg_threshold) == (0.09, 0.3)

@pytest.mark.parametrize(
    "field, value",
    [("test_grid_side", 0), ("test_square_size", 1.5), ("fg_threshold", 1.0), ("target_source", "both")],
)
def test_invalid_renderer_config(field, value):
    with pytest.raises(ConfigError):
        RendererConfig(**{field: value})


# 2. Point sampling

def test_train_points_count():
    points = sample_train_points(initial_contour(20), 3, 0.09, np.random.default_rng(0))
    assert points.shape == (60, 2)

def test_train_points_within_offset_bound():
    contour = np.random.default_rng(1).uniform(0.0, 1.0, size=(20, 2))
    points = sample_train_points(contour, 3, 0.09, np.random.default_rng(2)).reshape(20, 3, 2)
    assert np.all(np.abs(points - contour[:, None, :]) <= 0.09 + 1e-15)
    assert np.all((points >= 0.0) & (points <= 1.0))

def test_train_points_zero_range():
    contour = initial_contour(5)
    points = sample_train_points(contour, 2, 0.0, np.random.default_rng(3))
    assert np.array_equal(points, np.repeat(contour, 2, axis=0))

def test_train_points_deterministic():
    a = sample_train_points(initial_contour(8), 3, 0.09, np.random.default_rng(4))
    b = sample_train_points(initial_contour(8), 3, 0.09, np.random.default_rng(4))
    assert np.array_equal(a, b)

def test_test_grid_default_constants():
    contour = initial_contour(20)
    points = sample_test_grid(contour, 15, 0.09).reshape(20, 225, 2)
    offsets = points[0] - contour[0]
    xs = np.unique(np.round(offsets[:, 0], 12))
    assert len(xs) == 15
    assert np.allclose(np.diff(np.sort(offsets[:15, 0])), 0.09 / 14, rtol=0, atol=1e-12)
    assert np.allclose(points[:, 112], contour, rtol=0, atol=1e-15)

def test_test_grid_two_by_two():
    points = sample_test_grid(np.array([[0.5, 0.5], [0.2, 0.5], [0.5, 0.2]]), 2, 0.1)[:4]
    assert np.allclose(points, [[0.45, 0.45], [0.55, 0.45], [0.45, 0.55], [0.55, 0.55]], rtol=0, atol=1e-12)

def test_test_grid_single_point_is_vertex():
    contour = initial_contour(6)
    assert np.array_equal(sample_test_grid(contour, 1, 0.5), contour)

def test_grid_offsets_invalid():
    with pytest.raises(ConfigError):
        grid_offsets(0, 0.1)


# 3. Classification and targets

def test_zero_head_gives_half():
    params = ParamStore()
    init_renderer_params(4, params)
    scores = classify_points(np.random.default_rng(5).normal(size=(7, 4)), params)
    batch = RenderPointBatch(np.zeros((7, 2)), np.zeros((7, 4)), scores)
    assert scores.shape == (7, 2)
    assert np.allclose(batch.fg_probs, 0.5)

def test_hand_set_head():
    params = ParamStore()
    init_renderer_params(2, params)
    params.set_value("renderer.head.weight", np.eye(2))
    scores = classify_points(np.array([[1.0, 3.0]]), params)
    batch = RenderPointBatch(np.zeros((1, 2)), np.zeros((1, 2)), scores)
    assert np.array_equal(scores, [[1.0, 3.0]])
    assert batch.fg_probs[0] == pytest.approx(math.exp(3) / (math.exp(1) + math.exp(3)), abs=1e-12)

def test_head_width_mismatch():
    params = ParamStore()
    init_renderer_params(4, params)
    with pytest.raises(ShapeError):
        classify_points(np.zeros((3, 5)), params)

def test_batch_alignment_checked():
    with pytest.raises(ShapeError):
        RenderPointBatch(np.zeros((3, 2)), np.zeros((2, 4)), np.zeros((3, 2)))

def test_targets_centroid_and_corner():
    labels = point_targets(np.array([[0.5, 0.5], [0.0, 0.0]]), SQUARE)
    assert list(labels) == [1, 0]

def test_targets_match_oracle():
    rng = np.random.default_rng(6)
    contour = 0.5 + 0.3 * np.stack([np.cos(np.linspace(0, 6, 9)), np.sin(np.linspace(0, 6, 9))], axis=1)
    points = rng.uniform(size=(1000, 2))
    expected = [int(point_in_polygon(p, contour)) for p in points]
    assert list(point_targets(points, contour)) == expected

def test_targets_from_mask():
    mask = rasterize_polygon(SQUARE, 10, 10)
    labels = point_targets(np.array([[0.5, 0.5], [0.05, 0.05], [1.0, 1.0]]), mask=mask)
    assert list(labels) == [1, 0, 0]

def test_integer_contour_is_still_a_contour():
    contour = np.array([[0, 0], [1, 0], [1, 1], [0, 1]])
    labels = point_targets(np.array([[0.25, 0.1], [0.5, 0.5]]), contour)
    assert list(labels) == [1, 1]

def test_targets_need_exactly_one_region():
    mask = rasterize_polygon(SQUARE, 10, 10)
    with pytest.raises(ShapeError):
        point_targets(np.array([[0.5, 0.5]]))
    with pytest.raises(ShapeError):
        point_targets(np.array([[0.5, 0.5]]), SQUARE, mask=mask)


# 4. Loss

def test_loss_confident_and_uniform():
    loss, _ = renderer_loss(np.array([[50.0, -50.0], [-50.0, 50.0]]), np.array([0, 1]))
    assert loss == pytest.approx(0.0, abs=1e-12)
    loss, _ = renderer_loss(np.zeros((3, 2)), np.array([0, 1, 1]))
    assert loss == pytest.approx(math.log(2.0), abs=1e-12)

def test_loss_is_mean_of_point_losses():
    rng = np.random.default_rng(7)
    scores = rng.normal(size=(9, 2))
    labels = rng.integers(0, 2, 9)
    per_point = [
        -scores[m, labels[m]] + math.log(math.exp(scores[m, 0]) + math.exp(scores[m, 1])) for m in range(9)
    ]
    loss, _ = renderer_loss(scores, labels)
    assert loss == pytest.approx(sum(per_point) / 9, abs=1e-12)


# 5. Pasting

def test_render_without_points_is_raster():
    expected = rasterize_polygon(SQUARE, 12, 12)
    assert np.array_equal(render_mask(SQUARE, np.zeros((0, 2)), np.zeros(0), 0.3, 12, 12), expected)

def test_render_threshold_is_strict():
    outside = np.array([[0.0, 0.0], [1.0, 0.0]])
    mask = render_mask(SQUARE, outside, np.array([0.31, 0.3]), 0.3, 11, 11)
    assert mask[0, 0] == 1
    assert mask[0, 10] == 0

def test_render_background_point_clears_pixel():
    mask = render_mask(SQUARE, np.array([[0.5, 0.5]]), np.array([0.1]), 0.3, 11, 11)
    assert mask[5, 5] == 0

def test_render_last_point_wins():
    points = np.array([[0.5, 0.5], [0.5, 0.5], [0.0, 0.0], [0.0, 0.0]])
    mask = render_mask(SQUARE, points, np.array([0.9, 0.1, 0.1, 0.9]), 0.3, 11, 11)
    assert mask[5, 5] == 0
    assert mask[0, 0] == 1

def test_pixel_writes_mapping():
    pixels, winners = pixel_writes(np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 0.0]]), 5, 4)
    assert list(pixels) == [3, 16]
    assert list(winners) == [2, 1]

@pytest.mark.parametrize("seed", range(10))
def test_render_changes_only_hit_pixels(seed):
    rng = np.random.default_rng(seed)
    contour = sample_train_points(initial_contour(12), 1, 0.05, rng)
    points = rng.uniform(size=(rng.integers(1, 80), 2))
    probs = rng.uniform(size=len(points))
    height, width = (int(v) for v in rng.integers(5, 40, size=2))
    changed = render_mask(contour, points, probs, 0.3, height, width) != rasterize_polygon(contour, height, width)
    hit = np.zeros(height * width, dtype=bool)
    hit[pixel_writes(points, height, width)[0]] = True
    assert not (changed.reshape(-1) & ~hit).any()
