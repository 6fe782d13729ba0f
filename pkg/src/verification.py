"""
Gradient check of the full training objective on a tiny model.
"""

import logging
import sys
from typing import Any, Dict, Mapping, Optional, TextIO

import numpy as np

from .config import TrainConfig, parse_config, read_config_file
from .data import gen_sample
from .model import ContourRend
from .numerics import ParamStore, gradcheck_per_parameter

logger = logging.getLogger(__name__)

TOLERANCE = 1e-3
STEP = 1e-5
TINY_OVERRIDES: Dict[str, Any] = {
    "image_size": 16,
    "grid_size": 4,
    "backbone_channels": 4,
    "fused_channels": 4,
    "branch_channels": 4,
    "k_vertices": 8,
    "gcn_layers": 2,
    "gcn_hidden": 8,
    "refine_iterations": 2,
    "supervise_branches": True,
}
# zero-initialized heads get small random values so every path carries gradient
PERTURBED_PREFIXES = ("renderer.head.",)
PERTURBED_MARKER = ".offset."
PERTURB_SCALE = 0.05


def tiny_config(path=None, overrides: Optional[Mapping[str, Any]] = None) -> TrainConfig:
    """:data:`TINY_OVERRIDES`, then the optional config file, then explicit overrides."""
    values = dict(TINY_OVERRIDES)
    if path is not None:
        values.update(read_config_file(path))
    return parse_config(None, {**values, **(overrides or {})})


def _perturb_heads(params: ParamStore, rng: np.random.Generator) -> None:
    for name in params:
        if name.startswith(PERTURBED_PREFIXES) or PERTURBED_MARKER in name:
            params.set_value(name, rng.normal(0.0, PERTURB_SCALE, params[name].shape))


def gradcheck_command(
    config: Optional[TrainConfig] = None, max_entries: int = 6, stream: Optional[TextIO] = None
) -> int:
    """
    Checks the gradient of the total loss for every parameter tensor.

    A few entries of each tensor are compared with central differences on
    one synthetic sample. Prints one line per tensor and the worst one.

    :return: 0 if every relative error is below :data:`TOLERANCE`, else 1.
    """
    config = config if config is not None else tiny_config()
    stream = stream if stream is not None else sys.stdout
    size = config.generator.image_size

    model = ContourRend.initialize(config.generator, config.renderer, seed=config.seed)
    _perturb_heads(model.params, np.random.default_rng([config.seed, 3]))
    sample = gen_sample(config.seed, "ellipse", size)

    def objective(params: ParamStore) -> float:
        params.zero_grad()
        rng = np.random.default_rng([config.seed, 2])
        return model.loss_and_grad(sample.image, sample.gt_contour, rng).total

    report = gradcheck_per_parameter(
        objective, model.params, h=STEP, max_entries=max_entries, rng=np.random.default_rng(config.seed)
    )
    width = max(len(name) for name in report)
    for name, error in report.items():
        status = "ok" if error < TOLERANCE else "FAIL"
        print(f"{name:<{width}}  {error:.3e}  {status}", file=stream)
    worst = max(report, key=report.get)
    print(f"worst: {worst} relative error {report[worst]:.3e} (tolerance {TOLERANCE:g})", file=stream)

    failed = [name for name, error in report.items() if not error < TOLERANCE]
    if failed:
        logger.error("gradient check failed for %d of %d parameters", len(failed), len(report))
        return 1
    return 0
