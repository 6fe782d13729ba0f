import math
from dataclasses import replace

import numpy as np
import pytest
from src.data import CATEGORIES, gen_sample
from src.geometry import initial_contour, rasterize_polygon, resample_contour
from src.model import (
    ContourRend,
    GeneratorConfig,
    RendererConfig,
    classify_points,
    matching_loss,
    point_targets,
    render_mask,
    renderer_loss,
    sample_train_points,
)
from src.numerics import OptimizerState, adamw_step, bilinear_sample, finite_diff_gradcheck

TINY = GeneratorConfig(
    image_size=16,
    grid_size=4,
    backbone_channels=4,
    fused_channels=4,
    branch_channels=4,
    num_vertices=8,
    gcn_layers=2,
    gcn_hidden=8,
)


def perturbed_model(generator_cfg=TINY, renderer_cfg=RendererConfig(), seed=0):
    model = ContourRend.initialize(generator_cfg, renderer_cfg, seed=seed)
    rng = np.random.default_rng(seed + 100)
    for name in model.params.names():
        if ".offset." in name or name.startswith("renderer.head."):
            model.params.set_value(name, rng.normal(0.0, 0.05, model.params[name].shape))
    return model

# 1. Initialization

def test_same_seed_same_parameters():
    a = ContourRend.initialize(TINY, RendererConfig(), seed=3)
    b = ContourRend.initialize(TINY, RendererConfig(), seed=3)
    assert a.params.names() == b.params.names()
    assert all(np.array_equal(a.params[name], b.params[name]) for name in a.params)

def test_renderer_head_registered_after_generator():
    model = ContourRend.initialize(TINY, RendererConfig())
    assert model.params.names()[-2:] == ["renderer.head.weight", "renderer.head.bias"]


# 2. Training objective

def test_initial_loss_is_matching_plus_ln2():
    model = ContourRend.initialize(TINY, RendererConfig())
    sample = gen_sample(4, "ellipse", 16)
    losses = model.loss_and_grad(sample.image, sample.gt_contour, np.random.default_rng(0))
    expected = matching_loss(initial_contour(8), resample_contour(sample.gt_contour, 8)).loss
    assert losses.match == pytest.approx(expected, abs=1e-12)
    assert losses.render == pytest.approx(math.log(2.0), abs=1e-12)
    assert losses.total == pytest.approx(expected + math.log(2.0), abs=1e-12)

def test_renderer_weight_zero_leaves_head_gradient_empty():
    model = ContourRend.initialize(TINY, RendererConfig(loss_weight=0.0))
    sample = gen_sample(5, "star", 16)
    losses = model.loss_and_grad(sample.image, sample.gt_contour, np.random.default_rng(0))
    assert losses.total == losses.match
    assert not model.params.grad("renderer.head.weight").any()

def test_scale_multiplies_gradient():
    sample = gen_sample(6, "blob", 16)
    model = perturbed_model()
    model.loss_and_grad(sample.image, sample.gt_contour, np.random.default_rng(1))
    full = model.params.grad("backbone.conv1.weight").copy()
    model.params.zero_grad()
    model.loss_and_grad(sample.image, sample.gt_contour, np.random.default_rng(1), scale=0.25)
    assert np.allclose(model.params.grad("backbone.conv1.weight"), 0.25 * full, rtol=1e-12, atol=0)

@pytest.mark.parametrize("seed", range(10))
def test_one_adamw_step_lowers_matching_loss(seed):
    model = ContourRend.initialize(TINY, RendererConfig(loss_weight=0.0), seed=seed)
    sample = gen_sample(seed, CATEGORIES[seed % len(CATEGORIES)], 16)
    target = resample_contour(sample.gt_contour, TINY.num_vertices)
    before = model.loss_and_grad(sample.image, sample.gt_contour, np.random.default_rng(seed)).match
    adamw_step(model.params, OptimizerState.for_params(model.params, lr=1e-4))
    after = matching_loss(model.predict(sample.image).contour, target).loss
    assert after < before

def test_renderer_loss_alone_reaches_backbone():
    sample = gen_sample(11, "L-shape", 16)
    grads = {}
    for weight in (0.0, 1.0):
        model = perturbed_model(renderer_cfg=RendererConfig(loss_weight=weight))
        model.loss_and_grad(sample.image, sample.gt_contour, np.random.default_rng(4))
        grads[weight] = {name: model.params.grad(name).copy() for name in model.params.names()}
    render_only = {name: grads[1.0][name] - grads[0.0][name] for name in grads[0.0]}
    for name in ("backbone.down0.weight", "backbone.conv1.weight", "backbone.conv1.bias"):
        assert np.abs(render_only[name]).max() > 1e-10

@pytest.mark.parametrize("supervise", [False, True])
def test_total_loss_gradcheck(supervise):
    generator_cfg = replace(TINY, supervise_branches=supervise, refine_iterations=2)
    model = perturbed_model(generator_cfg)
    sample = gen_sample(7, "rectangle", 16)

    def objective(params):
        params.zero_grad()
        return model.loss_and_grad(sample.image, sample.gt_contour, np.random.default_rng(2)).total

    error = finite_diff_gradcheck(objective, model.params, h=1e-5, max_entries=4)
    assert error < 1e-3


# 3. Rendering

def test_render_shapes_and_consistency():
    model = perturbed_model()
    sample = gen_sample(8, "triangle", 16)
    result = model.render(sample.image)
    assert result.contour.shape == (8, 2)
    assert len(result.batch.points) == 8 * 15 * 15
    assert np.array_equal(result.contour_mask, rasterize_polygon(result.contour, 16, 16))
    expected = render_mask(result.contour, result.batch.points, result.batch.fg_probs, 0.3, 16, 16)
    assert np.array_equal(result.rendered_mask, expected)

def test_render_given_contour():
    model = perturbed_model()
    sample = gen_sample(9, "ellipse", 16)
    result = model.render(sample.image, sample.gt_contour)
    assert np.array_equal(result.contour, sample.gt_contour)

def test_prediction_target_source_labels_by_predicted_contour():
    model = perturbed_model(renderer_cfg=RendererConfig(target_source="prediction"))
    sample = gen_sample(10, "notched", 16)
    losses = model.loss_and_grad(sample.image, sample.gt_contour, np.random.default_rng(3))

    output = model.predict(sample.image)
    points = sample_train_points(output.contour, 3, 0.09, np.random.default_rng(3))
    scores = classify_points(bilinear_sample(output.backbone_fm, points), model.params)
    expected, _ = renderer_loss(scores, point_targets(points, output.contour))
    assert losses.render == expected
