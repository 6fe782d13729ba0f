"""
End-to-end training loop and the renderer-loss ablation.
"""

import logging
import math
from dataclasses import dataclass, replace
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np
import pandas as pd
from tqdm import tqdm

from .checkpoint import Checkpoint
from .config import TrainConfig
from .data import CATEGORIES, DatasetSplit, Sample
from .errors import TrainingError
from .evaluation import MODES, evaluate
from .model import ContourRend
from .numerics import OptimizerState, adamw_step, step_decay_lr

logger = logging.getLogger(__name__)

METRIC_COLUMNS = ["epoch", "loss_match", "loss_render", "val_miou_contour", "val_miou_rendered"]
ABLATION_ROWS = ("Contour Generator", "ContourRend-ablation", "ContourRend")


@dataclass
class TrainResult:
    """
    :param checkpoint: Final parameters and optimizer state.
    :param metrics: One row per epoch with :data:`METRIC_COLUMNS`.
    """

    checkpoint: Checkpoint
    metrics: pd.DataFrame

    @property
    def model(self) -> ContourRend:
        return self.checkpoint.model()


def balanced_order(samples: Sequence[Sample], rng: np.random.Generator) -> List[int]:
    """
    Epoch order that interleaves categories round-robin.

    Each category's samples are shuffled, then one sample per category is
    taken in turn until all are used, so every batch mixes categories.
    """
    groups: Dict[str, List[int]] = {}
    for index, sample in enumerate(samples):
        groups.setdefault(sample.category, []).append(index)
    ordered = [c for c in CATEGORIES if c in groups] + sorted(c for c in groups if c not in CATEGORIES)
    queues = [[groups[c][i] for i in rng.permutation(len(groups[c]))] for c in ordered]

    order = []
    for position in range(max(len(queue) for queue in queues)):
        order.extend(queue[position] for queue in queues if position < len(queue))
    return order


def train(
    config: TrainConfig,
    dataset: DatasetSplit,
    progress: bool = False,
    on_epoch: Optional[Callable[[dict], None]] = None,
) -> TrainResult:
    """
    Trains generator and renderer jointly on ``dataset.train``.

    Each example contributes the matching loss plus the weighted renderer
    loss; batch gradients are the mean of the per-example gradients. The
    learning rate follows the step decay schedule per epoch. When the
    dataset has a validation split, both evaluation modes are scored after
    every epoch. Everything random derives from ``config.seed``.

    :param on_epoch: Called with each metrics row as soon as the epoch ends.
    :raises TrainingError: On an empty train split or a non-finite loss.
    """
    if not dataset.train:
        raise TrainingError("cannot train on an empty train split")
    size = config.generator.image_size
    if dataset.image_size != size:
        raise TrainingError(f"dataset image size {dataset.image_size} does not match config image_size {size}")

    model = ContourRend.initialize(config.generator, config.renderer, seed=config.seed)
    state = OptimizerState.for_params(model.params, lr=config.lr, weight_decay=config.weight_decay)
    order_rng = np.random.default_rng([config.seed, 1])
    point_rng = np.random.default_rng([config.seed, 2])

    rows = []
    for epoch in range(config.epochs):
        state.lr = step_decay_lr(config.lr, epoch, config.lr_decay, config.lr_decay_every)
        order = balanced_order(dataset.train, order_rng)
        batches = [order[i : i + config.batch_size] for i in range(0, len(order), config.batch_size)]

        match_sum = render_sum = 0.0
        bar = tqdm(batches, desc=f"epoch {epoch}", disable=not progress, leave=False)
        for step, batch in enumerate(bar):
            model.params.zero_grad()
            scale = 1.0 / len(batch)
            for index in batch:
                sample = dataset.train[index]
                losses = model.loss_and_grad(sample.image, sample.gt_contour, point_rng, scale)
                if not math.isfinite(losses.total):
                    raise TrainingError(
                        f"non-finite loss {losses.total} at epoch {epoch} step {step} (sample {sample.id})"
                    )
                match_sum += losses.match
                render_sum += losses.render
            adamw_step(model.params, state)
            logger.debug("epoch %d step %d lr %g last loss %.5f", epoch, step, state.lr, losses.total)

        row = {
            "epoch": epoch,
            "loss_match": match_sum / len(order),
            "loss_render": render_sum / len(order),
            "val_miou_contour": float("nan"),
            "val_miou_rendered": float("nan"),
        }
        if dataset.val:
            report = evaluate(model, dataset.val, MODES, workers=config.eval_workers)
            row["val_miou_contour"] = report.mean("contour_only")
            row["val_miou_rendered"] = report.mean("rendered")
        logger.info(
            "epoch %d lr %g loss_match %.4f loss_render %.4f val mIoU contour %.4f rendered %.4f",
            epoch,
            state.lr,
            row["loss_match"],
            row["loss_render"],
            row["val_miou_contour"],
            row["val_miou_rendered"],
        )
        rows.append(row)
        if on_epoch is not None:
            on_epoch(row)

    metrics = pd.DataFrame(rows, columns=METRIC_COLUMNS)
    return TrainResult(Checkpoint(config, model.params, state, config.epochs), metrics)


def run_ablation(config: TrainConfig, dataset: DatasetSplit, split: str = "test", progress: bool = False):
    """
    Trains without and with the renderer loss from the same seed and compares them.

    Rows: ``Contour Generator`` (renderer loss off, contour-only masks),
    ``ContourRend-ablation`` (renderer loss on, contour-only masks) and
    ``ContourRend`` (renderer loss on, rendered masks).

    :return: ``(table, results)`` with the table indexed by :data:`ABLATION_ROWS`
        and the two :class:`TrainResult` keyed ``"generator_only"`` and ``"full"``.
    """
    samples = dataset.split(split)
    generator_only = replace(config, renderer=replace(config.renderer, loss_weight=0.0))
    results = {
        "generator_only": train(generator_only, dataset, progress),
        "full": train(config, dataset, progress),
    }
    base = evaluate(results["generator_only"].model, samples, ("contour_only",), workers=config.eval_workers)
    full = evaluate(results["full"].model, samples, MODES, workers=config.eval_workers)
    table = pd.DataFrame(
        [base.table.loc["contour_only"], full.table.loc["contour_only"], full.table.loc["rendered"]],
        index=list(ABLATION_ROWS),
    )
    table.index.name = "model"
    return table, results
