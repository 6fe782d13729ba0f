from .generator import (
    GeneratorConfig,
    GeneratorOutput,
    GeneratorTrace,
    MatchingLoss,
    RingGraph,
    backbone_forward,
    branch_targets,
    branches_forward,
    fuse_features,
    gcn_layer,
    gcn_layer_backward,
    generator_backward,
    generator_forward,
    init_generator_params,
    matching_loss,
    predict_contour,
    ring_adjacency,
)
from .renderer import (
    RendererConfig,
    RenderPointBatch,
    classify_points,
    grid_offsets,
    init_renderer_params,
    pixel_writes,
    point_targets,
    render_mask,
    renderer_loss,
    sample_test_grid,
    sample_train_points,
)
from .network import ContourRend, LossBreakdown, RenderResult
