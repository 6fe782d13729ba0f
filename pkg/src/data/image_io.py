"""
Binary PPM (P6) and PGM (P5) files through Pillow.

Images are ``(3, H, W)`` float arrays in ``[0, 1]``, quantized as
``round(v * 255)`` on write; masks are ``(H, W)`` arrays in ``{0, 1}``
written as 0/255.
"""

from pathlib import Path
from typing import Union

import numpy as np
from PIL import Image, UnidentifiedImageError

from ..errors import ImageFormatError

PathLike = Union[str, Path]


def write_image_ppm(image: np.ndarray, path: PathLike) -> None:
    """
    Writes a ``(3, H, W)`` image as binary PPM with maxval 255.

    :raises ImageFormatError: If the array is not ``(3, H, W)``.
    """
    if image.ndim != 3 or image.shape[0] != 3:
        raise ImageFormatError(f"expected a (3, H, W) image, got shape {image.shape}")
    pixels = np.rint(np.clip(image, 0.0, 1.0) * 255.0).astype(np.uint8)
    Image.fromarray(np.ascontiguousarray(pixels.transpose(1, 2, 0))).save(path, format="PPM")


def read_image_ppm(path: PathLike) -> np.ndarray:
    """
    Reads a binary PPM into a ``(3, H, W)`` float64 array in ``[0, 1]``.

    :raises ImageFormatError: On a bad magic number or undecodable pixel data.
    """
    pixels = _read_netpbm(path, b"P6", "RGB")
    return pixels.transpose(2, 0, 1).astype(np.float64) / 255.0


def write_mask_pgm(mask: np.ndarray, path: PathLike) -> None:
    """Writes a binary mask as PGM, foreground 255."""
    if mask.ndim != 2:
        raise ImageFormatError(f"expected an (H, W) mask, got shape {mask.shape}")
    Image.fromarray((mask > 0).astype(np.uint8) * 255).save(path, format="PPM")


def read_mask_pgm(path: PathLike) -> np.ndarray:
    """Reads a PGM mask back to ``{0, 1}`` uint8."""
    return (_read_netpbm(path, b"P5", "L") > 127).astype(np.uint8)


def _read_netpbm(path: PathLike, magic: bytes, mode: str) -> np.ndarray:
    with open(path, "rb") as handle:
        head = handle.read(2)
    if head != magic:
        raise ImageFormatError(f"bad magic {head!r} in {path}, expected {magic!r}")
    try:
        with Image.open(path) as img:
            img.load()
            if img.mode != mode:
                raise ImageFormatError(f"{path} decodes to mode {img.mode}, expected {mode}")
            return np.asarray(img).copy()
    except UnidentifiedImageError as exc:
        raise ImageFormatError(f"bad header or dimensions in {path}") from exc
    except OSError as exc:
        raise ImageFormatError(f"cannot decode {path}: {exc}") from exc
