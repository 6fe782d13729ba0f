from .image_io import read_image_ppm, read_mask_pgm, write_image_ppm, write_mask_pgm
from .synthetic import (
    CATEGORIES,
    CONVEX_CATEGORIES,
    SPLIT_NAMES,
    DatasetSplit,
    Sample,
    gen_sample,
    generate_dataset,
    generate_split,
)
from .dataset import read_dataset, write_dataset
