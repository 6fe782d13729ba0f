"""
Contour renderer: samples points around the predicted contour, classifies
them from backbone features with a per-point linear head, and pastes the
classes onto the rasterized contour mask.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..errors import ConfigError, ShapeError
from ..geometry import as_contour, points_in_polygon, rasterize_polygon
from ..numerics import ParamStore, linear_forward, softmax, softmax_cross_entropy

TARGET_SOURCES = ("ground_truth", "prediction")


@dataclass(frozen=True)
class RendererConfig:
    """
    Point sampling and classification settings.

    :param train_samples_per_vertex: Random points ``n`` per vertex during training.
    :param train_offset_range: Offset bound ``r``; offsets are uniform in ``[-r, r]``.
    :param test_grid_side: Grid side ``N`` per vertex at test time.
    :param test_square_size: Side ``s`` of the square the test grid covers.
    :param fg_threshold: Foreground probability a point must exceed to paint foreground.
    :param loss_weight: Weight ``lambda`` of the renderer loss in the training objective.
    :param target_source: Region labelling training points: ``ground_truth`` or ``prediction``.
    """

    train_samples_per_vertex: int = 3
    train_offset_range: float = 0.09
    test_grid_side: int = 15
    test_square_size: float = 0.09
    fg_threshold: float = 0.3
    loss_weight: float = 1.0
    target_source: str = "ground_truth"

    def __post_init__(self):
        if self.train_samples_per_vertex < 0:
            raise ConfigError(f"train_samples_per_vertex must be >= 0, got {self.train_samples_per_vertex}")
        if self.train_offset_range < 0:
            raise ConfigError(f"train_offset_range must be >= 0, got {self.train_offset_range}")
        if self.test_grid_side < 1:
            raise ConfigError(f"test_grid_side must be >= 1, got {self.test_grid_side}")
        if not 0.0 <= self.test_square_size <= 1.0:
            raise ConfigError(f"test_square_size must be in [0, 1], got {self.test_square_size}")
        if not 0.0 < self.fg_threshold < 1.0:
            raise ConfigError(f"fg_threshold must be in (0, 1), got {self.fg_threshold}")
        if self.loss_weight < 0:
            raise ConfigError(f"loss_weight must be >= 0, got {self.loss_weight}")
        if self.target_source not in TARGET_SOURCES:
            raise ConfigError(f"target_source must be one of {TARGET_SOURCES}, got {self.target_source!r}")


@dataclass
class RenderPointBatch:
    """
    Points around a contour together with their features and class scores.

    :param points: ``(M, 2)`` sampled positions, clamped to ``[0, 1]``.
    :param features: ``(M, C_b)`` backbone features at the points.
    :param scores: ``(M, 2)`` background/foreground logits.
    :param labels: Optional ``M`` training labels.
    """

    points: np.ndarray
    features: np.ndarray
    scores: np.ndarray
    labels: Optional[np.ndarray] = None

    def __post_init__(self):
        count = len(self.points)
        if len(self.features) != count or len(self.scores) != count:
            raise ShapeError(
                f"render batch misaligned: {count} points, {len(self.features)} features, {len(self.scores)} scores"
            )
        if self.labels is not None and len(self.labels) != count:
            raise ShapeError(f"render batch misaligned: {count} points, {len(self.labels)} labels")

    @property
    def fg_probs(self) -> np.ndarray:
        return softmax(self.scores)[:, 1] if len(self.scores) else np.zeros(0)


def init_renderer_params(backbone_channels: int, params: ParamStore) -> None:
    """Zero-initialized point head, so every point starts at probability 0.5."""
    params.add("renderer.head.weight", np.zeros((2, backbone_channels)))
    params.add("renderer.head.bias", np.zeros(2))


def sample_train_points(contour, n: int, r: float, rng: np.random.Generator) -> np.ndarray:
    """
    ``n`` randomly offset points per vertex, offsets uniform in ``[-r, r]`` per axis.

    Points are returned vertex-major and clamped to ``[0, 1]``.

    :return: ``(K * n, 2)`` array.
    """
    c = as_contour(contour)
    offsets = rng.uniform(-r, r, size=(len(c), n, 2))
    return np.clip(c[:, None, :] + offsets, 0.0, 1.0).reshape(-1, 2)


def grid_offsets(n: int, s: float) -> np.ndarray:
    """
    Offsets of an ``n x n`` grid covering an ``s x s`` square centered on zero.

    Rows follow y, columns follow x (x varies fastest); ``n = 1`` is the center only.
    """
    if n < 1:
        raise ConfigError(f"grid side must be at least 1, got {n}")
    if n == 1:
        return np.zeros((1, 2))
    steps = (np.arange(n) / (n - 1) - 0.5) * s
    xs, ys = np.meshgrid(steps, steps, indexing="xy")
    return np.stack([xs.reshape(-1), ys.reshape(-1)], axis=1)


def sample_test_grid(contour, n: int, s: float) -> np.ndarray:
    """
    Dense ``n x n`` grid of points centered on every contour vertex, gap ``s / (n - 1)``.

    :return: ``(K * n * n, 2)`` array, vertex-major then grid row-major, clamped to ``[0, 1]``.
    """
    c = as_contour(contour)
    return np.clip(c[:, None, :] + grid_offsets(n, s)[None, :, :], 0.0, 1.0).reshape(-1, 2)


def classify_points(features: np.ndarray, params: ParamStore) -> np.ndarray:
    """
    Per-point linear head mapping ``C_b`` features to background/foreground logits.

    :return: ``(M, 2)`` logits.
    :raises ShapeError: If the feature width does not match the head.
    """
    return linear_forward(features, params["renderer.head.weight"], params["renderer.head.bias"])


def point_targets(
    points: np.ndarray, contour: Optional[np.ndarray] = None, *, mask: Optional[np.ndarray] = None
) -> np.ndarray:
    """
    Labels points 1 inside the ground-truth region and 0 outside.

    Pass either ``contour``, a ``(K, 2)`` polygon of any dtype tested with
    even-odd containment, or ``mask=``, an ``(H, W)`` array where each point
    takes the pixel whose area contains it.

    :raises ShapeError: Unless exactly one of ``contour`` and ``mask`` is given.
    """
    if (contour is None) == (mask is None):
        raise ShapeError("point_targets takes exactly one of a contour or a mask")
    points = np.clip(np.asarray(points, dtype=np.float64).reshape(-1, 2), 0.0, 1.0)
    if contour is not None:
        return points_in_polygon(points, as_contour(contour)).astype(np.int64)
    mask = np.asarray(mask)
    if mask.ndim != 2:
        raise ShapeError(f"mask must be (H, W), got shape {mask.shape}")
    height, width = mask.shape
    cols = np.minimum((points[:, 0] * width).astype(np.intp), width - 1)
    rows = np.minimum((points[:, 1] * height).astype(np.intp), height - 1)
    return (mask[rows, cols] > 0).astype(np.int64)


def renderer_loss(scores: np.ndarray, labels: np.ndarray):
    """Cross entropy over the sampled points; returns ``(loss, dscores)``."""
    return softmax_cross_entropy(scores, labels)


def pixel_writes(points: np.ndarray, height: int, width: int):
    """
    Pixels hit by ``points`` and the index of the last point landing on each.

    Point ``(x, y)`` lands on pixel ``(round(y * (H - 1)), round(x * (W - 1)))``.

    :return: ``(flat_pixels, point_indices)``, both sorted by pixel.
    """
    points = np.clip(np.asarray(points, dtype=np.float64).reshape(-1, 2), 0.0, 1.0)
    cols = np.rint(points[:, 0] * (width - 1)).astype(np.intp)
    rows = np.rint(points[:, 1] * (height - 1)).astype(np.intp)
    pixels = rows * width + cols
    # last write wins: first occurrence in the reversed order
    unique, first_reversed = np.unique(pixels[::-1], return_index=True)
    return unique, len(pixels) - 1 - first_reversed


def render_mask(
    contour, points: np.ndarray, fg_probs: np.ndarray, threshold: float, height: int, width: int
) -> np.ndarray:
    """
    Pastes point classes onto the rasterized contour.

    Each point sets its pixel (see :func:`pixel_writes`) to 1 if its
    foreground probability is strictly above ``threshold``, else 0. Later
    points overwrite earlier ones.

    :return: ``(H, W)`` uint8 mask.
    """
    mask = rasterize_polygon(contour, height, width)
    points = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    fg_probs = np.asarray(fg_probs, dtype=np.float64).reshape(-1)
    if len(points) != len(fg_probs):
        raise ShapeError(f"{len(points)} points but {len(fg_probs)} probabilities")
    if not len(points):
        return mask

    pixels, winners = pixel_writes(points, height, width)
    mask.flat[pixels] = (fg_probs[winners] > threshold).astype(np.uint8)
    return mask
