"""
Single-image inference writing the contour, both masks and the point overlay.
"""

import json
import logging
from pathlib import Path
from typing import NamedTuple, Union

import numpy as np

from .checkpoint import Checkpoint
from .data import read_image_ppm, write_image_ppm, write_mask_pgm
from .errors import ImageFormatError
from .model import ContourRend, RenderResult, pixel_writes

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]
FOREGROUND_COLOR = (1.0, 0.0, 0.0)
BACKGROUND_COLOR = (0.0, 0.0, 1.0)


class InferenceArtifacts(NamedTuple):
    contour_json: Path
    contour_mask: Path
    rendered_mask: Path
    points_overlay: Path


def point_overlay(image: np.ndarray, points: np.ndarray, fg_probs: np.ndarray, threshold: float) -> np.ndarray:
    """
    Paints every rendered point on a copy of ``image``: red when classified
    foreground, blue otherwise. Pixels follow the same mapping and overwrite
    order as the rendered mask.
    """
    overlay = np.array(image, dtype=np.float64)
    _, height, width = overlay.shape
    if not len(points):
        return overlay
    pixels, winners = pixel_writes(points, height, width)
    rows, cols = np.unravel_index(pixels, (height, width))
    colors = np.where((fg_probs[winners] > threshold)[:, None], FOREGROUND_COLOR, BACKGROUND_COLOR)
    overlay[:, rows, cols] = colors.T
    return overlay


def render_image(model: ContourRend, image: np.ndarray) -> RenderResult:
    size = model.generator_cfg.image_size
    expected = (model.generator_cfg.in_channels, size, size)
    if image.shape != expected:
        raise ImageFormatError(f"image has shape {image.shape}, model expects {expected}")
    return model.render(image)


def infer(checkpoint: Checkpoint, image_path: PathLike, out_dir: PathLike) -> InferenceArtifacts:
    """
    Runs the model on one PPM image and writes its four artifacts to ``out_dir``.

    ``contour.json`` holds the ``K`` contour vertices, the rendered points
    and their foreground probabilities at full precision, so the rendered
    mask can be recomputed from it.

    :raises ImageFormatError: For an unreadable image or one whose size the model was not built for.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    model = checkpoint.model()
    image = read_image_ppm(image_path)
    result = render_image(model, image)
    fg_probs = result.batch.fg_probs
    threshold = model.renderer_cfg.fg_threshold

    artifacts = InferenceArtifacts(
        out / "contour.json", out / "contour_mask.pgm", out / "rendered_mask.pgm", out / "points_overlay.ppm"
    )
    payload = {
        "image": str(image_path),
        "image_size": model.generator_cfg.image_size,
        "threshold": threshold,
        "contour": result.contour.tolist(),
        "points": result.batch.points.tolist(),
        "fg_probs": fg_probs.tolist(),
    }
    artifacts.contour_json.write_text(json.dumps(payload) + "\n")
    write_mask_pgm(result.contour_mask, artifacts.contour_mask)
    write_mask_pgm(result.rendered_mask, artifacts.rendered_mask)
    write_image_ppm(point_overlay(image, result.batch.points, fg_probs, threshold), artifacts.points_overlay)
    logger.info("wrote inference artifacts for %s to %s", image_path, out)
    return artifacts
