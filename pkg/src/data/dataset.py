"""
Dataset directories: ``meta.json``, one JSON-lines index per split and PPM images.

::

    <root>/meta.json            {"seed": ..., "image_size": ..., "counts": {...}}
    <root>/train.jsonl          {"id", "category", "image_file", "contour", "seed"} per line
    <root>/images/<id>.ppm
"""

import json
import logging
from pathlib import Path
from typing import List, Union

import numpy as np

from ..errors import DatasetError
from ..geometry import rasterize_polygon
from .image_io import read_image_ppm, write_image_ppm
from .synthetic import SPLIT_NAMES, DatasetSplit, Sample

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]
REQUIRED_KEYS = ("id", "category", "image_file", "contour")


def write_dataset(dataset: DatasetSplit, path: PathLike) -> None:
    """
    Writes every split of ``dataset`` under ``path``.

    Contours keep full precision (generated ones are already rounded to 9
    decimals); images are quantized to 8 bits.
    """
    root = Path(path)
    (root / "images").mkdir(parents=True, exist_ok=True)
    meta = {"seed": dataset.seed, "image_size": dataset.image_size, "counts": dataset.counts()}
    (root / "meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")

    for name in SPLIT_NAMES:
        with open(root / f"{name}.jsonl", "w") as index:
            for sample in dataset.split(name):
                image_file = f"images/{sample.id}.ppm"
                write_image_ppm(sample.image, root / image_file)
                record = {
                    "id": sample.id,
                    "category": sample.category,
                    "image_file": image_file,
                    "contour": sample.gt_contour.tolist(),
                    "seed": sample.seed,
                }
                index.write(json.dumps(record) + "\n")
    logger.info("wrote dataset to %s (%s)", root, meta["counts"])


def read_dataset(path: PathLike) -> DatasetSplit:
    """
    Reads a directory written by :func:`write_dataset`.

    Masks are rebuilt by rasterizing the stored contours.

    :raises DatasetError: For a malformed line (with its line number) or a missing image file.
    """
    root = Path(path)
    meta_file = root / "meta.json"
    if not meta_file.is_file():
        raise DatasetError(f"missing dataset metadata file {meta_file}")
    meta = json.loads(meta_file.read_text())
    dataset = DatasetSplit(int(meta["seed"]), int(meta["image_size"]))
    for name in SPLIT_NAMES:
        index = root / f"{name}.jsonl"
        if index.is_file():
            setattr(dataset, name, read_split(index, root, dataset.image_size))
    return dataset


def read_split(index: Path, root: Path, image_size: int) -> List[Sample]:
    samples = []
    with open(index) as handle:
        for line_number, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
                if not isinstance(record, dict):
                    raise ValueError("record is not a JSON object")
                missing = [key for key in REQUIRED_KEYS if key not in record]
                if missing:
                    raise ValueError(f"missing keys {missing}")
                contour = np.asarray(record["contour"], dtype=np.float64)
                if contour.ndim != 2 or contour.shape[1] != 2 or len(contour) < 3:
                    raise ValueError("contour must be a list of at least 3 [x, y] pairs")
            except ValueError as exc:
                raise DatasetError(f"{index}: line {line_number}: malformed record ({exc})") from exc

            image_file = root / record["image_file"]
            if not image_file.is_file():
                raise DatasetError(f"{index}: line {line_number}: missing image file {image_file}")
            image = read_image_ppm(image_file)
            if image.shape[1:] != (image_size, image_size):
                raise DatasetError(
                    f"{image_file} has size {image.shape[1:]}, dataset declares {image_size}x{image_size}"
                )
            samples.append(
                Sample(
                    record["id"],
                    record["category"],
                    image,
                    contour,
                    rasterize_polygon(contour, image_size, image_size),
                    int(record.get("seed", 0)),
                )
            )
    return samples
