"""
Synthetic single-object images with ground-truth contours.

Eight shape categories stand in for the object classes of a real
segmentation benchmark. Every object is centered near the image center and
stored as a dense clockwise polygon whose rasterization is the mask.
"""

import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, List

import numpy as np
from tqdm import tqdm

from ..errors import DatasetError
from ..geometry import densify_contour, perimeter, polygon_centroid, rasterize_polygon, signed_area

logger = logging.getLogger(__name__)

CATEGORIES = ("triangle", "rectangle", "ellipse", "star", "blob", "notched", "L-shape", "ring-cut")
CONVEX_CATEGORIES = ("triangle", "rectangle", "ellipse")
SPLIT_NAMES = ("train", "val", "test")
MIN_IMAGE_SIZE = 16
DENSE_POINTS = 96
NOISE_SIGMA = 0.02


@dataclass
class Sample:
    """
    One synthetic example.

    :param id: Unique identifier, e.g. ``"train-00012"``.
    :param category: One of :data:`CATEGORIES`.
    :param image: ``(3, S, S)`` float image in ``[0, 1]``.
    :param gt_contour: Dense clockwise ground-truth polygon.
    :param gt_mask: ``rasterize_polygon(gt_contour, S, S)``.
    :param seed: Generation seed.
    """

    id: str
    category: str
    image: np.ndarray
    gt_contour: np.ndarray
    gt_mask: np.ndarray
    seed: int


@dataclass
class DatasetSplit:
    seed: int
    image_size: int
    train: List[Sample] = field(default_factory=list)
    val: List[Sample] = field(default_factory=list)
    test: List[Sample] = field(default_factory=list)

    def split(self, name: str) -> List[Sample]:
        if name not in SPLIT_NAMES:
            raise DatasetError(f"unknown split {name!r}, expected one of {SPLIT_NAMES}")
        return getattr(self, name)

    def counts(self) -> Dict[str, int]:
        return {name: len(self.split(name)) for name in SPLIT_NAMES}


# 1. Shape outlines around the origin, roughly unit radius


def _radial(angles: np.ndarray, radii: np.ndarray) -> np.ndarray:
    return np.stack([radii * np.cos(angles), radii * np.sin(angles)], axis=1)


def _triangle(rng: np.random.Generator) -> np.ndarray:
    angles = np.arange(3) * (2.0 * np.pi / 3.0) + rng.uniform(-0.25, 0.25, 3)
    return _radial(angles, rng.uniform(0.8, 1.0, 3))


def _rectangle(rng: np.random.Generator) -> np.ndarray:
    aspect = rng.uniform(0.5, 1.0)
    return np.array([[-1.0, -aspect], [1.0, -aspect], [1.0, aspect], [-1.0, aspect]])


def _ellipse(rng: np.random.Generator) -> np.ndarray:
    angles = np.linspace(0.0, 2.0 * np.pi, 48, endpoint=False)
    return np.stack([np.cos(angles), rng.uniform(0.45, 1.0) * np.sin(angles)], axis=1)


def _star(rng: np.random.Generator) -> np.ndarray:
    spikes = int(rng.integers(5, 8))
    angles = np.arange(2 * spikes) * (np.pi / spikes)
    radii = np.where(np.arange(2 * spikes) % 2 == 0, 1.0, rng.uniform(0.45, 0.6))
    return _radial(angles, radii)


def _blob(rng: np.random.Generator) -> np.ndarray:
    angles = np.linspace(0.0, 2.0 * np.pi, 32, endpoint=False)
    radii = np.ones_like(angles)
    for harmonic in (2, 3, 4):
        radii += rng.uniform(0.0, 0.12) * np.cos(harmonic * angles + rng.uniform(0.0, 2.0 * np.pi))
    return _radial(angles, radii)


def _notched(rng: np.random.Generator) -> np.ndarray:
    half_h = rng.uniform(0.6, 1.0)
    center = rng.uniform(-0.3, 0.3)
    half_w = rng.uniform(0.2, 0.4)
    depth = rng.uniform(0.4, 0.8) * half_h
    return np.array(
        [
            [-1.0, -half_h],
            [center - half_w, -half_h],
            [center - half_w, -half_h + depth],
            [center + half_w, -half_h + depth],
            [center + half_w, -half_h],
            [1.0, -half_h],
            [1.0, half_h],
            [-1.0, half_h],
        ]
    )


def _l_shape(rng: np.random.Generator) -> np.ndarray:
    cut_x, cut_y = rng.uniform(-0.3, 0.3, 2)
    return np.array([[-1.0, -1.0], [cut_x, -1.0], [cut_x, cut_y], [1.0, cut_y], [1.0, 1.0], [-1.0, 1.0]])


def _ring_cut(rng: np.random.Generator) -> np.ndarray:
    inner = rng.uniform(0.45, 0.65)
    gap = rng.uniform(0.5, 1.0)
    outer_arc = np.linspace(gap / 2.0, 2.0 * np.pi - gap / 2.0, 24)
    inner_arc = np.linspace(2.0 * np.pi - gap / 2.0, gap / 2.0, 16)
    return np.vstack([_radial(outer_arc, np.ones(24)), _radial(inner_arc, np.full(16, inner))])


_OUTLINES: Dict[str, Callable[[np.random.Generator], np.ndarray]] = {
    "triangle": _triangle,
    "rectangle": _rectangle,
    "ellipse": _ellipse,
    "star": _star,
    "blob": _blob,
    "notched": _notched,
    "L-shape": _l_shape,
    "ring-cut": _ring_cut,
}


# 2. Samples


def gen_sample(seed: int, category: str, size: int, sample_id: str = "") -> Sample:
    """
    Draws one image with a single centered object of ``category``.

    The outline is rotated, scaled so its farthest vertex is 0.22-0.38 from
    its area centroid, and moved so the centroid sits within 0.05 of the
    image center on each axis. The dense contour is rounded to 9 decimals
    before rasterizing, so a dataset roundtrip reproduces the mask exactly.

    :param seed: Seed of the sample's random stream.
    :param category: One of :data:`CATEGORIES`.
    :param size: Image side ``S``; at least 16.
    :raises DatasetError: For an unknown category or too small image.
    """
    if category not in _OUTLINES:
        raise DatasetError(f"unknown category {category!r}, expected one of {CATEGORIES}")
    if size < MIN_IMAGE_SIZE:
        raise DatasetError(f"image size must be at least {MIN_IMAGE_SIZE}, got {size}")
    rng = np.random.default_rng(seed)

    outline = _OUTLINES[category](rng)
    angle = rng.uniform(0.0, 2.0 * np.pi)
    rotation = np.array([[np.cos(angle), -np.sin(angle)], [np.sin(angle), np.cos(angle)]])
    outline = outline @ rotation.T
    outline = outline - polygon_centroid(outline)
    outline *= rng.uniform(0.22, 0.38) / np.hypot(*outline.T).max()
    outline += 0.5 + rng.uniform(-0.05, 0.05, 2)
    if signed_area(outline) < 0:
        outline = outline[::-1]

    contour = np.round(densify_contour(outline, perimeter(outline) / DENSE_POINTS), 9)
    mask = rasterize_polygon(contour, size, size)

    background = rng.uniform(0.0, 1.0, 3)
    foreground = rng.uniform(0.0, 1.0, 3)
    while np.abs(foreground - background).max() < 0.35:
        foreground = rng.uniform(0.0, 1.0, 3)
    image = np.where(mask[None, :, :] == 1, foreground[:, None, None], background[:, None, None])
    image = np.clip(image + rng.normal(0.0, NOISE_SIGMA, image.shape), 0.0, 1.0)
    return Sample(sample_id or f"{category}-{seed}", category, image, contour, mask, seed)


def sample_seed(seed: int, split_index: int, index: int) -> int:
    """Independent per-sample seed, disjoint across splits."""
    return int(np.random.SeedSequence([seed, split_index, index]).generate_state(1)[0])


def generate_split(name: str, count: int, seed: int, size: int, progress: bool = False) -> List[Sample]:
    """``count`` samples cycling through the categories in fixed order."""
    split_index = SPLIT_NAMES.index(name)
    samples = []
    for index in tqdm(range(count), desc=f"gen {name}", disable=not progress):
        category = CATEGORIES[index % len(CATEGORIES)]
        samples.append(gen_sample(sample_seed(seed, split_index, index), category, size, f"{name}-{index:05d}"))
    return samples


def generate_dataset(
    seed: int = 0,
    size: int = 64,
    train: int = 500,
    val: int = 100,
    test: int = 200,
    progress: bool = False,
) -> DatasetSplit:
    """Generates all three splits from one seed."""
    dataset = DatasetSplit(seed, size)
    for name, count in zip(SPLIT_NAMES, (train, val, test)):
        setattr(dataset, name, generate_split(name, count, seed, size, progress))
    logger.info("generated dataset seed=%d size=%d counts=%s", seed, size, dataset.counts())
    return dataset
