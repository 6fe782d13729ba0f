"""
Contour generator: a small CNN backbone, edge and vertex branches, feature
fusion and a ring-graph GCN that regresses vertex offsets from a circle.

The forward functions optionally record intermediates into a
:class:`GeneratorTrace`; :func:`generator_backward` walks that trace in
reverse and accumulates gradients into the :class:`ParamStore`.
"""

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Dict, List, NamedTuple, Optional, Tuple

import numpy as np

from ..errors import ConfigError, ShapeError
from ..geometry import as_contour, initial_contour, rasterize_polygon, resample_contour
from ..numerics import (
    ParamStore,
    bilinear_sample,
    bilinear_sample_backward,
    conv2d_backward,
    conv2d_forward,
    glorot_uniform,
    linear_backward,
    linear_forward,
    relu,
    relu_backward,
    sigmoid,
    sigmoid_backward,
)

BRANCHES = ("edge", "vertex")


@dataclass(frozen=True)
class GeneratorConfig:
    """
    Sizes of the contour generator.

    :param image_size: Side ``S`` of the square input image.
    :param in_channels: Image channels.
    :param grid_size: Side ``G`` of the feature grid; ``S / G`` must be a power of two.
    :param backbone_channels: Channels ``C_b`` of the backbone feature map.
    :param fused_channels: Channels ``C_f`` of the fused feature map.
    :param branch_channels: Channels of the 3x3 convolution inside each branch.
    :param num_vertices: Contour vertices ``K``.
    :param gcn_layers: GCN layers ``L`` per refinement iteration.
    :param gcn_hidden: GCN hidden width ``D``.
    :param refine_iterations: Refinement iterations ``T``.
    :param supervise_branches: Train the edge/vertex branches with binary cross entropy.
    """

    image_size: int = 64
    in_channels: int = 3
    grid_size: int = 16
    backbone_channels: int = 32
    fused_channels: int = 24
    branch_channels: int = 16
    num_vertices: int = 20
    gcn_layers: int = 3
    gcn_hidden: int = 64
    refine_iterations: int = 1
    supervise_branches: bool = False

    def __post_init__(self):
        for name in (
            "image_size",
            "in_channels",
            "backbone_channels",
            "fused_channels",
            "branch_channels",
            "gcn_layers",
            "gcn_hidden",
            "refine_iterations",
        ):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be at least 1, got {getattr(self, name)}")
        if self.num_vertices < 3:
            raise ConfigError(f"num_vertices must be at least 3, got {self.num_vertices}")
        if self.grid_size < 2:
            raise ConfigError(f"grid_size must be at least 2, got {self.grid_size}")
        ratio, remainder = divmod(self.image_size, self.grid_size)
        if remainder or ratio & (ratio - 1):
            raise ConfigError(
                f"image_size ({self.image_size}) must be grid_size ({self.grid_size}) times a power of two"
            )

    @property
    def stride_stages(self) -> int:
        return int(math.log2(self.image_size // self.grid_size))

    def backbone_layers(self) -> List[Tuple[str, int, int, int]]:
        """
        ``(name, in_channels, out_channels, stride)`` for every backbone convolution.

        Stride-2 stages widen towards ``C_b`` and two stride-1 convolutions
        at ``C_b`` follow.
        """
        layers = []
        channels = self.in_channels
        for stage in range(self.stride_stages):
            width = max(4, self.backbone_channels >> (self.stride_stages - stage))
            layers.append((f"down{stage}", channels, width, 2))
            channels = width
        for index in range(2):
            layers.append((f"conv{index}", channels, self.backbone_channels, 1))
            channels = self.backbone_channels
        return layers


@dataclass(frozen=True)
class RingGraph:
    """
    Fixed cyclic topology: node ``i`` links to ``i +- 1`` and ``i +- 2`` (mod K).

    :param num_nodes: Number of contour vertices.
    :param neighbors: Neighbor indices per node, deduplicated.
    :param mean: Read-only row-normalized adjacency, built once by :func:`ring_adjacency`.
    """

    num_nodes: int
    neighbors: Tuple[Tuple[int, ...], ...]
    mean: np.ndarray = field(compare=False, repr=False)

    def mean_matrix(self) -> np.ndarray:
        """Row-normalized adjacency; ``mean_matrix() @ h`` averages neighbor features."""
        return self.mean


@lru_cache(maxsize=None)
def ring_adjacency(num_nodes: int) -> RingGraph:
    """
    Builds the ring graph used by the GCN.

    >>> sorted(ring_adjacency(8).neighbors[0])
    [1, 2, 6, 7]

    :raises ConfigError: If ``num_nodes < 3``.
    """
    if num_nodes < 3:
        raise ConfigError(f"ring graph needs at least 3 nodes, got {num_nodes}")
    neighbors = []
    mean = np.zeros((num_nodes, num_nodes))
    for node in range(num_nodes):
        nbrs: List[int] = []
        for offset in (-2, -1, 1, 2):
            other = (node + offset) % num_nodes
            if other != node and other not in nbrs:
                nbrs.append(other)
        neighbors.append(tuple(nbrs))
        mean[node, nbrs] = 1.0 / len(nbrs)
    mean.flags.writeable = False
    return RingGraph(num_nodes, tuple(neighbors), mean)


@dataclass
class GeneratorOutput:
    contour: np.ndarray
    backbone_fm: np.ndarray
    fused_fm: np.ndarray
    edge_map: np.ndarray
    vertex_map: np.ndarray


@dataclass
class ConvRecord:
    name: str
    stride: int
    x: np.ndarray
    pre: np.ndarray


@dataclass
class BranchRecord:
    conv: ConvRecord
    flat: np.ndarray
    logits: np.ndarray
    out: np.ndarray


@dataclass
class RefineRecord:
    vertices: np.ndarray
    layer_inputs: List[np.ndarray]
    hidden: np.ndarray
    raw: np.ndarray


@dataclass
class GeneratorTrace:
    backbone: List[ConvRecord] = field(default_factory=list)
    branches: Dict[str, BranchRecord] = field(default_factory=dict)
    fusion: List[ConvRecord] = field(default_factory=list)
    refinements: List[RefineRecord] = field(default_factory=list)
    output: Optional[GeneratorOutput] = None


class MatchingLoss(NamedTuple):
    loss: float
    shift: int
    grad: np.ndarray


# 1. Parameters


def init_generator_params(cfg: GeneratorConfig, params: ParamStore, rng: np.random.Generator) -> None:
    """
    Registers all generator parameters.

    Weights are Glorot-uniform, biases zero; the offset head of every
    refinement iteration starts at zero so the first prediction is the
    initial circle.
    """
    for name, c_in, c_out, _ in cfg.backbone_layers():
        params.add(f"backbone.{name}.weight", glorot_uniform((c_out, c_in, 3, 3), rng))
        params.add(f"backbone.{name}.bias", np.zeros(c_out))

    cells = cfg.grid_size * cfg.grid_size
    for branch in BRANCHES:
        params.add(
            f"{branch}_branch.conv.weight",
            glorot_uniform((cfg.branch_channels, cfg.backbone_channels, 3, 3), rng),
        )
        params.add(f"{branch}_branch.conv.bias", np.zeros(cfg.branch_channels))
        params.add(f"{branch}_branch.fc.weight", glorot_uniform((cells, cfg.branch_channels * cells), rng))
        params.add(f"{branch}_branch.fc.bias", np.zeros(cells))

    params.add(
        "fusion.conv.weight", glorot_uniform((cfg.fused_channels, cfg.backbone_channels + 2, 3, 3), rng)
    )
    params.add("fusion.conv.bias", np.zeros(cfg.fused_channels))

    for step in range(cfg.refine_iterations):
        width = 2 + cfg.fused_channels
        for layer in range(cfg.gcn_layers):
            prefix = f"gcn.{step}.layer{layer}"
            params.add(f"{prefix}.w_self", glorot_uniform((cfg.gcn_hidden, width), rng))
            params.add(f"{prefix}.w_neighbor", glorot_uniform((cfg.gcn_hidden, width), rng))
            params.add(f"{prefix}.bias", np.zeros(cfg.gcn_hidden))
            width = cfg.gcn_hidden
        params.add(f"gcn.{step}.offset.weight", np.zeros((2, width)))
        params.add(f"gcn.{step}.offset.bias", np.zeros(2))


# 2. CNN stages


def _conv_relu(x: np.ndarray, name: str, params: ParamStore, stride: int, records: Optional[list]) -> np.ndarray:
    pre = conv2d_forward(x, params[f"{name}.weight"], params[f"{name}.bias"], stride)
    if records is not None:
        records.append(ConvRecord(name, stride, x, pre))
    return relu(pre)


def _conv_relu_backward(dout: np.ndarray, records: List[ConvRecord], params: ParamStore) -> np.ndarray:
    grad = dout
    for record in reversed(records):
        dpre = relu_backward(grad, record.pre)
        grad, dkernel, dbias = conv2d_backward(dpre, record.x, params[f"{record.name}.weight"], record.stride)
        params.accumulate(f"{record.name}.weight", dkernel)
        params.accumulate(f"{record.name}.bias", dbias)
    return grad


def backbone_forward(
    image: np.ndarray, params: ParamStore, cfg: GeneratorConfig, trace: Optional[GeneratorTrace] = None
) -> np.ndarray:
    """
    Runs the backbone CNN on a ``(C, S, S)`` image.

    :return: Backbone feature map of shape ``(C_b, G, G)``.
    :raises ShapeError: If the image does not match the configured size.
    """
    expected = (cfg.in_channels, cfg.image_size, cfg.image_size)
    if image.shape != expected:
        raise ShapeError(f"image shape {image.shape} does not match configured shape {expected}")
    records = trace.backbone if trace is not None else None
    x = image
    for name, _, _, stride in cfg.backbone_layers():
        x = _conv_relu(x, f"backbone.{name}", params, stride, records)
    return x


def branches_forward(
    backbone_fm: np.ndarray, params: ParamStore, cfg: GeneratorConfig, trace: Optional[GeneratorTrace] = None
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Edge and vertex branches: 3x3 conv + ReLU, fully connected layer, sigmoid.

    :return: ``(edge_map, vertex_map)``, each ``(1, G, G)`` with values in ``(0, 1)``.
    """
    grid = cfg.grid_size
    maps = []
    for branch in BRANCHES:
        records: List[ConvRecord] = []
        hidden = _conv_relu(backbone_fm, f"{branch}_branch.conv", params, 1, records)
        flat = hidden.reshape(1, -1)
        logits = linear_forward(flat, params[f"{branch}_branch.fc.weight"], params[f"{branch}_branch.fc.bias"])
        out = sigmoid(logits).reshape(1, grid, grid)
        if trace is not None:
            trace.branches[branch] = BranchRecord(records[0], flat, logits, out)
        maps.append(out)
    return maps[0], maps[1]


def _branch_backward(
    dout: np.ndarray, record: BranchRecord, params: ParamStore, dlogits_extra: Optional[np.ndarray]
) -> np.ndarray:
    name = record.conv.name.rsplit(".", 1)[0]
    dlogits = sigmoid_backward(dout.reshape(1, -1), record.out.reshape(1, -1))
    if dlogits_extra is not None:
        dlogits = dlogits + dlogits_extra
    dflat, dweight, dbias = linear_backward(dlogits, record.flat, params[f"{name}.fc.weight"])
    params.accumulate(f"{name}.fc.weight", dweight)
    params.accumulate(f"{name}.fc.bias", dbias)
    return _conv_relu_backward(dflat.reshape(record.conv.pre.shape), [record.conv], params)


def fuse_features(
    backbone_fm: np.ndarray,
    edge_map: np.ndarray,
    vertex_map: np.ndarray,
    params: ParamStore,
    trace: Optional[GeneratorTrace] = None,
) -> np.ndarray:
    """
    Concatenates the backbone map with both branch maps and applies a 3x3 conv + ReLU.

    :return: Fused feature map of shape ``(C_f, G, G)``.
    :raises ShapeError: If the spatial sizes differ.
    """
    for branch_map in (edge_map, vertex_map):
        if branch_map.shape != (1,) + backbone_fm.shape[1:]:
            raise ShapeError(
                f"branch map shape {branch_map.shape} does not match backbone shape {backbone_fm.shape}"
            )
    stacked = np.concatenate([backbone_fm, edge_map, vertex_map], axis=0)
    return _conv_relu(stacked, "fusion.conv", params, 1, trace.fusion if trace is not None else None)


# 3. Graph convolution


def _gcn_pre(
    node_feats: np.ndarray, graph: RingGraph, w_self: np.ndarray, w_neighbor: np.ndarray, bias: np.ndarray
) -> Tuple[np.ndarray, np.ndarray]:
    if node_feats.ndim != 2 or node_feats.shape[0] != graph.num_nodes:
        raise ShapeError(f"node features {node_feats.shape} do not match a graph of {graph.num_nodes} nodes")
    neighbor_mean = graph.mean_matrix() @ node_feats
    pre = linear_forward(node_feats, w_self, bias) + linear_forward(
        neighbor_mean, w_neighbor, np.zeros(w_neighbor.shape[0])
    )
    return neighbor_mean, pre


def gcn_layer(
    node_feats: np.ndarray, graph: RingGraph, w_self: np.ndarray, w_neighbor: np.ndarray, bias: np.ndarray
) -> np.ndarray:
    """
    ``h'_i = ReLU(W0 h_i + W1 mean_{j in N(i)} h_j + b)``.

    :param node_feats: ``(K, Din)`` node features.
    :param graph: Ring topology over the ``K`` nodes.
    :return: ``(K, Dout)`` node features.
    """
    return relu(_gcn_pre(node_feats, graph, w_self, w_neighbor, bias)[1])


def gcn_layer_backward(
    dout: np.ndarray,
    node_feats: np.ndarray,
    graph: RingGraph,
    w_self: np.ndarray,
    w_neighbor: np.ndarray,
    bias: np.ndarray,
) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """
    Gradients of :func:`gcn_layer`.

    :return: ``(dnode_feats, dw_self, dw_neighbor, dbias)``.
    """
    neighbor_mean, pre = _gcn_pre(node_feats, graph, w_self, w_neighbor, bias)
    dpre = relu_backward(dout, pre)
    dfeats, dw_self, dbias = linear_backward(dpre, node_feats, w_self)
    dmean, dw_neighbor, _ = linear_backward(dpre, neighbor_mean, w_neighbor)
    return dfeats + graph.mean_matrix().T @ dmean, dw_self, dw_neighbor, dbias


# 4. Full forward / backward


def generator_forward(
    image: np.ndarray, params: ParamStore, cfg: GeneratorConfig, trace: Optional[GeneratorTrace] = None
) -> GeneratorOutput:
    """
    Runs the whole generator and regresses the contour from the initial circle.

    Each refinement iteration samples the fused map at the current vertices,
    prepends the vertex coordinates, runs the GCN stack and adds the
    predicted offsets; vertices are clamped to ``[0, 1]`` afterwards.
    """
    backbone_fm = backbone_forward(image, params, cfg, trace)
    edge_map, vertex_map = branches_forward(backbone_fm, params, cfg, trace)
    fused_fm = fuse_features(backbone_fm, edge_map, vertex_map, params, trace)

    graph = ring_adjacency(cfg.num_vertices)
    vertices = initial_contour(cfg.num_vertices)
    for step in range(cfg.refine_iterations):
        hidden = np.concatenate([vertices, bilinear_sample(fused_fm, vertices)], axis=1)
        layer_inputs = []
        for layer in range(cfg.gcn_layers):
            prefix = f"gcn.{step}.layer{layer}"
            layer_inputs.append(hidden)
            hidden = gcn_layer(
                hidden, graph, params[f"{prefix}.w_self"], params[f"{prefix}.w_neighbor"], params[f"{prefix}.bias"]
            )
        offsets = linear_forward(hidden, params[f"gcn.{step}.offset.weight"], params[f"gcn.{step}.offset.bias"])
        raw = vertices + offsets
        if trace is not None:
            trace.refinements.append(RefineRecord(vertices, layer_inputs, hidden, raw))
        vertices = np.clip(raw, 0.0, 1.0)

    output = GeneratorOutput(vertices, backbone_fm, fused_fm, edge_map, vertex_map)
    if trace is not None:
        trace.output = output
    return output


def predict_contour(image: np.ndarray, params: ParamStore, cfg: GeneratorConfig) -> GeneratorOutput:
    """Inference-only :func:`generator_forward`; reads ``params`` without mutating them."""
    return generator_forward(image, params, cfg)


def generator_backward(
    trace: GeneratorTrace,
    params: ParamStore,
    cfg: GeneratorConfig,
    d_contour: np.ndarray,
    d_backbone_fm: Optional[np.ndarray] = None,
    d_branch_logits: Optional[Dict[str, np.ndarray]] = None,
) -> None:
    """
    Back-propagates gradients into every generator parameter.

    :param trace: Trace filled by :func:`generator_forward`.
    :param d_contour: Gradient w.r.t. the final ``(K, 2)`` contour.
    :param d_backbone_fm: Extra gradient w.r.t. the backbone map (from the renderer).
    :param d_branch_logits: Extra gradients w.r.t. branch logits, keyed by branch name.
    """
    output = trace.output
    graph = ring_adjacency(cfg.num_vertices)
    d_fused = np.zeros_like(output.fused_fm)
    d_vertices = d_contour
    for step in reversed(range(len(trace.refinements))):
        record = trace.refinements[step]
        d_raw = d_vertices * ((record.raw >= 0.0) & (record.raw <= 1.0))
        d_hidden, dweight, dbias = linear_backward(d_raw, record.hidden, params[f"gcn.{step}.offset.weight"])
        params.accumulate(f"gcn.{step}.offset.weight", dweight)
        params.accumulate(f"gcn.{step}.offset.bias", dbias)
        for layer in reversed(range(cfg.gcn_layers)):
            prefix = f"gcn.{step}.layer{layer}"
            d_hidden, dw_self, dw_neighbor, dbias = gcn_layer_backward(
                d_hidden,
                record.layer_inputs[layer],
                graph,
                params[f"{prefix}.w_self"],
                params[f"{prefix}.w_neighbor"],
                params[f"{prefix}.bias"],
            )
            params.accumulate(f"{prefix}.w_self", dw_self)
            params.accumulate(f"{prefix}.w_neighbor", dw_neighbor)
            params.accumulate(f"{prefix}.bias", dbias)
        d_fm_part, d_points = bilinear_sample_backward(d_hidden[:, 2:], output.fused_fm, record.vertices)
        d_fused += d_fm_part
        d_vertices = d_raw + d_hidden[:, :2] + d_points

    d_stacked = _conv_relu_backward(d_fused, trace.fusion, params)
    channels = cfg.backbone_channels
    d_branch_logits = d_branch_logits or {}
    d_backbone = d_stacked[:channels].copy()
    for offset, branch in enumerate(BRANCHES):
        d_backbone += _branch_backward(
            d_stacked[channels + offset : channels + offset + 1],
            trace.branches[branch],
            params,
            d_branch_logits.get(branch),
        )
    if d_backbone_fm is not None:
        d_backbone += d_backbone_fm
    _conv_relu_backward(d_backbone, trace.backbone, params)


# 5. Losses


def matching_loss(pred, target) -> MatchingLoss:
    """
    Point matching loss: minimum over cyclic shifts ``j`` of
    ``sum_i ||pred_i - target_{(i + j) % K}||``.

    The gradient follows the best shift only (smallest ``j`` on ties) and is
    zero for coincident point pairs.

    :return: ``MatchingLoss(loss, shift, grad)`` with ``grad`` shaped like ``pred``.
    :raises ShapeError: If the vertex counts differ.
    """
    pred, target = as_contour(pred), as_contour(target)
    if pred.shape != target.shape:
        raise ShapeError(f"matching loss needs equal vertex counts, got {len(pred)} and {len(target)}")
    count = len(pred)
    index = (np.arange(count)[:, None] + np.arange(count)[None, :]) % count
    diff = pred[None, :, :] - target[index]
    dist = np.sqrt((diff**2).sum(axis=2))
    totals = dist.sum(axis=1)
    shift = int(np.argmin(totals))

    best = dist[shift]
    safe = np.where(best > 0.0, best, 1.0)
    grad = np.where(best[:, None] > 0.0, diff[shift] / safe[:, None], 0.0)
    return MatchingLoss(float(totals[shift]), shift, grad)


def branch_targets(gt_contour, cfg: GeneratorConfig) -> Dict[str, np.ndarray]:
    """
    Supervision maps for the edge and vertex branches on the ``G x G`` grid.

    The edge target marks foreground cells of the rasterized ground truth
    with at least one background 4-neighbour; the vertex target marks cells
    holding one of the ``K`` resampled ground-truth vertices.
    """
    grid = cfg.grid_size
    region = rasterize_polygon(gt_contour, grid, grid).astype(bool)
    padded = np.pad(region, 1)
    interior = region & padded[:-2, 1:-1] & padded[2:, 1:-1] & padded[1:-1, :-2] & padded[1:-1, 2:]
    edge = (region & ~interior).astype(np.float64)

    vertices = resample_contour(gt_contour, cfg.num_vertices)
    cells = np.minimum((vertices * grid).astype(np.intp), grid - 1)
    vertex = np.zeros((grid, grid))
    vertex[cells[:, 1], cells[:, 0]] = 1.0
    return {"edge": edge.reshape(1, -1), "vertex": vertex.reshape(1, -1)}
