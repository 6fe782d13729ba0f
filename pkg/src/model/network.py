"""
The end-to-end model: generator and renderer sharing one parameter store.
"""

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..geometry import rasterize_polygon, resample_contour
from ..numerics import (
    ParamStore,
    bilinear_sample,
    bilinear_sample_backward,
    linear_backward,
    sigmoid_binary_cross_entropy,
)
from .generator import (
    GeneratorConfig,
    GeneratorOutput,
    GeneratorTrace,
    backbone_forward,
    branch_targets,
    generator_backward,
    generator_forward,
    init_generator_params,
    matching_loss,
    predict_contour,
)
from .renderer import (
    RendererConfig,
    RenderPointBatch,
    classify_points,
    init_renderer_params,
    point_targets,
    render_mask,
    renderer_loss,
    sample_test_grid,
    sample_train_points,
)

logger = logging.getLogger(__name__)


@dataclass
class LossBreakdown:
    """
    Per-example training objective.

    ``total = match + loss_weight * render + branch``.
    """

    match: float
    render: float
    branch: float
    total: float
    shift: int


@dataclass
class RenderResult:
    contour: np.ndarray
    contour_mask: np.ndarray
    rendered_mask: np.ndarray
    batch: RenderPointBatch


class ContourRend:
    """
    Generator + renderer over a shared :class:`ParamStore`.

    Forward passes only read the parameters, so :meth:`predict` and
    :meth:`render` may run concurrently; :meth:`loss_and_grad` accumulates
    into the parameter gradients and must be serialized.

    :param generator_cfg: Generator sizes.
    :param renderer_cfg: Renderer sampling settings.
    :param params: Parameter store holding both networks.
    """

    def __init__(self, generator_cfg: GeneratorConfig, renderer_cfg: RendererConfig, params: ParamStore):
        self.generator_cfg = generator_cfg
        self.renderer_cfg = renderer_cfg
        self.params = params

    @classmethod
    def initialize(cls, generator_cfg: GeneratorConfig, renderer_cfg: RendererConfig, seed: int = 0) -> "ContourRend":
        """Builds a freshly initialized model; identical seeds give identical parameters."""
        rng = np.random.default_rng(seed)
        params = ParamStore()
        init_generator_params(generator_cfg, params, rng)
        init_renderer_params(generator_cfg.backbone_channels, params)
        logger.debug("initialized %d parameter tensors (%d values)", len(params), params.num_values())
        return cls(generator_cfg, renderer_cfg, params)

    def predict(self, image: np.ndarray) -> GeneratorOutput:
        return predict_contour(image, self.params, self.generator_cfg)

    def render(self, image: np.ndarray, contour: Optional[np.ndarray] = None) -> RenderResult:
        """
        Test-time rendering: dense grid points around the contour, classified and pasted.

        :param image: ``(C, S, S)`` input image.
        :param contour: Contour to render around; the model's prediction when omitted.
        """
        if contour is None:
            output = self.predict(image)
            contour, backbone_fm = output.contour, output.backbone_fm
        else:
            backbone_fm = backbone_forward(image, self.params, self.generator_cfg)
        cfg = self.renderer_cfg
        size = self.generator_cfg.image_size

        points = sample_test_grid(contour, cfg.test_grid_side, cfg.test_square_size)
        features = bilinear_sample(backbone_fm, points)
        batch = RenderPointBatch(points, features, classify_points(features, self.params))
        rendered = render_mask(contour, points, batch.fg_probs, cfg.fg_threshold, size, size)
        return RenderResult(contour, rasterize_polygon(contour, size, size), rendered, batch)

    def loss_and_grad(
        self, image: np.ndarray, gt_contour: np.ndarray, rng: np.random.Generator, scale: float = 1.0
    ) -> LossBreakdown:
        """
        Evaluates the training objective on one example and accumulates ``scale`` times its gradient.

        The matching loss compares the prediction with the ground truth
        resampled to ``K`` points. Renderer points are drawn around the
        predicted vertices with ``rng``; their gradient reaches the backbone
        through the sampled features and the vertices through the sample
        positions.
        """
        gcfg, rcfg = self.generator_cfg, self.renderer_cfg
        trace = GeneratorTrace()
        output = generator_forward(image, self.params, gcfg, trace)
        match = matching_loss(output.contour, resample_contour(gt_contour, gcfg.num_vertices))
        d_contour = match.grad * scale

        render_value, d_backbone_fm = 0.0, None
        if rcfg.train_samples_per_vertex > 0:
            points = sample_train_points(output.contour, rcfg.train_samples_per_vertex, rcfg.train_offset_range, rng)
            region = gt_contour if rcfg.target_source == "ground_truth" else output.contour
            features = bilinear_sample(output.backbone_fm, points)
            scores = classify_points(features, self.params)
            render_value, d_scores = renderer_loss(scores, point_targets(points, region))
            if rcfg.loss_weight > 0:
                d_scores = d_scores * (rcfg.loss_weight * scale)
                d_features, d_weight, d_bias = linear_backward(d_scores, features, self.params["renderer.head.weight"])
                self.params.accumulate("renderer.head.weight", d_weight)
                self.params.accumulate("renderer.head.bias", d_bias)
                d_backbone_fm, d_points = bilinear_sample_backward(d_features, output.backbone_fm, points)
                d_points = d_points * ((points > 0.0) & (points < 1.0))
                d_contour = d_contour + d_points.reshape(gcfg.num_vertices, -1, 2).sum(axis=1)

        branch_value, d_branch_logits = 0.0, None
        if gcfg.supervise_branches:
            d_branch_logits = {}
            for branch, target in branch_targets(gt_contour, gcfg).items():
                value, d_logits = sigmoid_binary_cross_entropy(trace.branches[branch].logits, target)
                branch_value += value
                d_branch_logits[branch] = d_logits * scale

        generator_backward(trace, self.params, gcfg, d_contour, d_backbone_fm, d_branch_logits)
        total = match.loss + rcfg.loss_weight * render_value + branch_value
        return LossBreakdown(match.loss, render_value, branch_value, total, match.shift)
