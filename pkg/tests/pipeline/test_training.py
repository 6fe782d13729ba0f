import math
from functools import lru_cache

import numpy as np
import pytest
from src.checkpoint import encode_checkpoint
from src.config import parse_config
from src.data import CATEGORIES, generate_dataset
from src.errors import TrainingError
from src.model import ContourRend, LossBreakdown
from src.training import ABLATION_ROWS, METRIC_COLUMNS, balanced_order, run_ablation, train

TINY = {
    "image_size": 16,
    "grid_size": 4,
    "backbone_channels": 4,
    "fused_channels": 4,
    "branch_channels": 4,
    "k_vertices": 8,
    "gcn_layers": 2,
    "gcn_hidden": 8,
}


def small_config(**overrides):
    return parse_config(overrides={**TINY, **overrides})

# 1. Epoch order

def test_balanced_order_interleaves_categories():
    samples = generate_dataset(seed=0, size=16, train=16, val=0, test=0).train
    order = balanced_order(samples, np.random.default_rng(0))
    assert sorted(order) == list(range(16))
    assert [samples[i].category for i in order[:8]] == list(CATEGORIES)
    assert [samples[i].category for i in order[8:]] == list(CATEGORIES)

def test_balanced_order_uneven_counts():
    samples = generate_dataset(seed=0, size=16, train=10, val=0, test=0).train
    order = balanced_order(samples, np.random.default_rng(1))
    assert sorted(order) == list(range(10))
    assert [samples[i].category for i in order[8:]] == ["triangle", "rectangle"]


# 2. Training loop

def test_learning_rate_decays_per_epoch():
    dataset = generate_dataset(seed=0, size=16, train=4, val=0, test=0)
    result = train(small_config(epochs=3, lr_decay_every=1), dataset)
    assert result.checkpoint.optimizer.lr == pytest.approx(3e-4 * 0.01)
    assert result.checkpoint.optimizer.step == 3
    assert result.checkpoint.epoch == 3

def test_metrics_rows():
    dataset = generate_dataset(seed=1, size=16, train=8, val=4, test=0)
    seen = []
    result = train(small_config(epochs=2), dataset, on_epoch=seen.append)
    assert list(result.metrics.columns) == METRIC_COLUMNS
    assert list(result.metrics["epoch"]) == [0, 1]
    assert len(seen) == 2
    assert result.metrics[["val_miou_contour", "val_miou_rendered"]].stack().between(0.0, 1.0).all()

def test_no_val_split_leaves_nan():
    dataset = generate_dataset(seed=1, size=16, train=8, val=0, test=0)
    result = train(small_config(epochs=1), dataset)
    assert math.isnan(result.metrics["val_miou_contour"][0])

def test_training_is_deterministic():
    dataset = generate_dataset(seed=2, size=16, train=12, val=4, test=0)
    config = small_config(epochs=2, seed=7)
    first, second = train(config, dataset), train(config, dataset)
    assert first.metrics.equals(second.metrics)
    assert encode_checkpoint(first.checkpoint) == encode_checkpoint(second.checkpoint)

@pytest.mark.parametrize("seed", [0, 1, 2])
def test_loss_decreases_over_five_epochs(seed):
    dataset = generate_dataset(seed=seed, size=16, train=50, val=0, test=0)
    metrics = train(small_config(epochs=5, lr=1e-3, seed=seed), dataset).metrics
    total = metrics["loss_match"] + metrics["loss_render"]
    assert total.iloc[-1] < total.iloc[0]

def test_matching_loss_decreases_without_renderer_loss():
    dataset = generate_dataset(seed=3, size=16, train=50, val=0, test=0)
    metrics = train(small_config(epochs=5, lr=1e-3, renderer_loss_weight=0.0), dataset).metrics
    assert metrics["loss_match"].iloc[-1] < metrics["loss_match"].iloc[0]


# 3. Errors

def test_empty_train_split():
    with pytest.raises(TrainingError):
        train(small_config(), generate_dataset(seed=0, size=16, train=0, val=2, test=0))

def test_image_size_mismatch():
    with pytest.raises(TrainingError):
        train(small_config(), generate_dataset(seed=0, size=32, train=2, val=0, test=0))

def test_non_finite_loss_names_epoch_and_step(monkeypatch):
    def exploding(self, image, gt_contour, rng, scale=1.0):
        return LossBreakdown(float("nan"), 0.0, 0.0, float("nan"), 0)

    monkeypatch.setattr(ContourRend, "loss_and_grad", exploding)
    dataset = generate_dataset(seed=0, size=16, train=4, val=0, test=0)
    with pytest.raises(TrainingError) as excinfo:
        train(small_config(epochs=1), dataset)
    assert "epoch 0 step 0" in str(excinfo.value)


# 4. Ablation

def test_ablation_table_layout():
    dataset = generate_dataset(seed=4, size=16, train=8, val=0, test=8)
    table, results = run_ablation(small_config(epochs=1), dataset)
    assert list(table.index) == list(ABLATION_ROWS)
    assert table.index.name == "model"
    assert table.shape == (3, len(CATEGORIES) + 1)
    assert set(results) == {"generator_only", "full"}
    assert results["generator_only"].checkpoint.config.renderer.loss_weight == 0.0
    assert results["full"].checkpoint.config.renderer.loss_weight == 1.0


# 5. Full schedule

@lru_cache(maxsize=None)
def full_scale_ablation(seed):
    config = parse_config(overrides={"seed": seed})
    dataset = generate_dataset(seed=seed, size=64, train=500, val=0, test=200)
    table, _ = run_ablation(config, dataset)
    return table

@pytest.mark.slow
def test_full_training_reaches_target_iou():
    table = full_scale_ablation(0)
    assert table.loc["ContourRend-ablation", "Mean"] >= 0.75

@pytest.mark.slow
@pytest.mark.parametrize("seed", [0, 1, 2])
def test_renderer_loss_does_not_hurt_contours(seed):
    table = full_scale_ablation(seed)
    assert table.loc["ContourRend-ablation", "Mean"] >= table.loc["Contour Generator", "Mean"] - 0.01

@pytest.mark.slow
def test_rendering_improves_concave_categories():
    table = full_scale_ablation(0)
    contour, rendered = table.loc["ContourRend-ablation"], table.loc["ContourRend"]
    assert rendered["Mean"] >= contour["Mean"] - 0.005
    for category in ("notched", "L-shape", "ring-cut"):
        assert rendered[category] > contour[category]
