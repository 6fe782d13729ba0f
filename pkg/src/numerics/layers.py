"""
Dense layer primitives with hand-written backward passes.

Every forward function takes plain float64 ``numpy`` arrays and returns the
output array; the matching ``*_backward`` function receives the upstream
gradient together with the forward inputs and returns the input gradients.
Nothing is cached between calls, so forward passes are safe to run from
several threads on shared read-only parameters.
"""

from typing import Tuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..errors import ContourRendError, ShapeError

SUPPORTED_KERNELS = (1, 3)
SUPPORTED_STRIDES = (1, 2)


# 1. Fully connected


def linear_forward(x: np.ndarray, weight: np.ndarray, bias: np.ndarray) -> np.ndarray:
    """
    Applies ``y[m] = W . x[m] + b`` row by row.

    Every row goes through its own vector-matrix product, so ``y[m]`` is
    bit-identical to calling the layer on ``x[m]`` alone whatever ``M`` is.

    :param x: Input of shape ``(M, Din)``.
    :param weight: Weight of shape ``(Dout, Din)``.
    :param bias: Bias of shape ``(Dout,)``.
    :return: Output of shape ``(M, Dout)``.
    :raises ShapeError: If the shapes are not compatible.
    """
    if x.ndim != 2 or weight.ndim != 2 or x.shape[1] != weight.shape[1]:
        raise ShapeError(f"linear input shape {x.shape} does not match weight shape {weight.shape}")
    if bias.shape != (weight.shape[0],):
        raise ShapeError(f"linear bias shape {bias.shape} does not match weight shape {weight.shape}")
    return np.matmul(x[:, None, :], weight.T)[:, 0, :] + bias


def linear_backward(
    dy: np.ndarray, x: np.ndarray, weight: np.ndarray
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Gradients of :func:`linear_forward`.

    :return: ``(dx, dweight, dbias)``.
    """
    return dy @ weight, dy.T @ x, dy.sum(axis=0)


# 2. Convolution


def _check_conv(x: np.ndarray, kernel: np.ndarray, bias: np.ndarray, stride: int) -> int:
    if kernel.ndim != 4 or kernel.shape[2] != kernel.shape[3]:
        raise ShapeError(f"conv kernel must be (Cout, C, k, k), got {kernel.shape}")
    k = kernel.shape[2]
    if k not in SUPPORTED_KERNELS:
        raise ShapeError(f"unsupported conv kernel size {k}, expected one of {SUPPORTED_KERNELS}")
    if stride not in SUPPORTED_STRIDES:
        raise ShapeError(f"unsupported conv stride {stride}, expected one of {SUPPORTED_STRIDES}")
    if x.ndim != 3 or x.shape[0] != kernel.shape[1]:
        raise ShapeError(f"conv input shape {x.shape} does not match kernel shape {kernel.shape}")
    if bias.shape != (kernel.shape[0],):
        raise ShapeError(f"conv bias shape {bias.shape} does not match kernel shape {kernel.shape}")
    return k


def _im2col(x: np.ndarray, k: int, stride: int) -> Tuple[np.ndarray, int, int]:
    pad = k // 2
    padded = np.pad(x, ((0, 0), (pad, pad), (pad, pad))) if pad else x
    windows = sliding_window_view(padded, (k, k), axis=(1, 2))[:, ::stride, ::stride]
    channels, out_h, out_w = windows.shape[:3]
    cols = windows.transpose(1, 2, 0, 3, 4).reshape(out_h * out_w, channels * k * k)
    return cols, out_h, out_w


def conv2d_forward(
    x: np.ndarray, kernel: np.ndarray, bias: np.ndarray, stride: int = 1
) -> np.ndarray:
    """
    Zero-padded cross-correlation of a ``(C, H, W)`` input.

    The padding is ``k // 2`` so a stride-1 convolution keeps the spatial
    size; stride 2 halves it (rounding up). The patch matrix is multiplied
    through :func:`linear_forward`, which makes a 1x1 convolution the same
    computation as a per-pixel linear layer.

    :param x: Input of shape ``(C, H, W)``.
    :param kernel: Kernel of shape ``(Cout, C, k, k)`` with ``k`` in ``{1, 3}``.
    :param bias: Bias of shape ``(Cout,)``.
    :param stride: 1 or 2.
    :return: Output of shape ``(Cout, Hout, Wout)``.
    """
    k = _check_conv(x, kernel, bias, stride)
    cols, out_h, out_w = _im2col(x, k, stride)
    out = linear_forward(cols, kernel.reshape(kernel.shape[0], -1), bias)
    return out.T.reshape(kernel.shape[0], out_h, out_w)


def conv2d_backward(
    dy: np.ndarray, x: np.ndarray, kernel: np.ndarray, stride: int = 1
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Gradients of :func:`conv2d_forward`.

    :return: ``(dx, dkernel, dbias)``.
    """
    c_out, channels, k, _ = kernel.shape
    pad = k // 2
    cols, out_h, out_w = _im2col(x, k, stride)
    dy_flat = dy.reshape(c_out, out_h * out_w).T
    dcols, dweight, dbias = linear_backward(dy_flat, cols, kernel.reshape(c_out, -1))

    dcols = dcols.reshape(out_h, out_w, channels, k, k)
    _, height, width = x.shape
    dpadded = np.zeros((channels, height + 2 * pad, width + 2 * pad))
    for ky in range(k):
        for kx in range(k):
            rows = slice(ky, ky + stride * (out_h - 1) + 1, stride)
            cols_ = slice(kx, kx + stride * (out_w - 1) + 1, stride)
            dpadded[:, rows, cols_] += dcols[:, :, :, ky, kx].transpose(2, 0, 1)
    dx = dpadded[:, pad : pad + height, pad : pad + width]
    return dx, dweight.reshape(kernel.shape), dbias


# 3. Activations


def relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0.0)


def relu_backward(dy: np.ndarray, x: np.ndarray) -> np.ndarray:
    # subgradient 0 at exactly 0
    return dy * (x > 0.0)


def sigmoid(x: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def sigmoid_backward(dy: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Gradient of :func:`sigmoid` given its *output* ``y``."""
    return dy * y * (1.0 - y)


# 4. Bilinear sampling


def bilinear_sample(fm: np.ndarray, points: np.ndarray) -> np.ndarray:
    """
    Samples a ``(C, G, G)`` feature map at normalized ``(x, y)`` positions.

    Position ``u`` maps to the continuous grid index ``u * (G - 1)``, so the
    four corners of the unit square return the corner cells exactly. Points
    are expected to be clamped to ``[0, 1]`` by the caller.

    :param fm: Feature map of shape ``(C, G, G)``.
    :param points: Array of shape ``(M, 2)`` holding ``(x, y)`` rows.
    :return: Sampled features of shape ``(M, C)``.
    """
    x0, y0, fx, fy = _bilinear_cells(fm, points)
    f00, f01 = fm[:, y0, x0], fm[:, y0, x0 + 1]
    f10, f11 = fm[:, y0 + 1, x0], fm[:, y0 + 1, x0 + 1]
    top = (1.0 - fx) * f00 + fx * f01
    bottom = (1.0 - fx) * f10 + fx * f11
    return ((1.0 - fy) * top + fy * bottom).T


def bilinear_sample_backward(
    dout: np.ndarray, fm: np.ndarray, points: np.ndarray
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Gradients of :func:`bilinear_sample` for the feature map and the points.

    :return: ``(dfm, dpoints)`` with the shapes of ``fm`` and ``points``.
    """
    x0, y0, fx, fy = _bilinear_cells(fm, points)
    _, grid_h, grid_w = fm.shape
    dout_t = dout.T

    dfm = np.zeros_like(fm)
    corners = (
        (y0, x0, (1.0 - fy) * (1.0 - fx)),
        (y0, x0 + 1, (1.0 - fy) * fx),
        (y0 + 1, x0, fy * (1.0 - fx)),
        (y0 + 1, x0 + 1, fy * fx),
    )
    for rows, cols, weight in corners:
        np.add.at(dfm, (slice(None), rows, cols), dout_t * weight)

    f00, f01 = fm[:, y0, x0], fm[:, y0, x0 + 1]
    f10, f11 = fm[:, y0 + 1, x0], fm[:, y0 + 1, x0 + 1]
    grad_u = (1.0 - fy) * (f01 - f00) + fy * (f11 - f10)
    grad_v = (1.0 - fx) * (f10 - f00) + fx * (f11 - f01)
    dpoints = np.stack(
        [(dout_t * grad_u).sum(axis=0) * (grid_w - 1), (dout_t * grad_v).sum(axis=0) * (grid_h - 1)],
        axis=1,
    )
    return dfm, dpoints


def _bilinear_cells(fm: np.ndarray, points: np.ndarray):
    if fm.ndim != 3:
        raise ShapeError(f"feature map must be (C, G, G), got {fm.shape}")
    _, grid_h, grid_w = fm.shape
    if grid_h < 2 or grid_w < 2:
        raise ShapeError(f"bilinear sampling needs a grid of at least 2x2, got {fm.shape}")
    if points.ndim != 2 or points.shape[1] != 2:
        raise ShapeError(f"points must be (M, 2), got {points.shape}")
    u = points[:, 0] * (grid_w - 1)
    v = points[:, 1] * (grid_h - 1)
    x0 = np.clip(np.floor(u).astype(np.intp), 0, grid_w - 2)
    y0 = np.clip(np.floor(v).astype(np.intp), 0, grid_h - 2)
    return x0, y0, u - x0, v - y0


# 5. Losses


def softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    exp = np.exp(shifted)
    return exp / exp.sum(axis=1, keepdims=True)


def softmax_cross_entropy(logits: np.ndarray, targets) -> Tuple[float, np.ndarray]:
    """
    Mean two-class cross entropy over ``M`` rows of logits.

    :param logits: Array of shape ``(M, 2)``; column 0 is background, column 1 foreground.
    :param targets: ``M`` labels in ``{0, 1}``.
    :return: ``(loss, dlogits)`` where ``dlogits = (softmax - onehot) / M``.
    """
    targets = np.asarray(targets)
    if logits.ndim != 2 or logits.shape[1] != 2 or logits.shape[0] < 1:
        raise ShapeError(f"logits must be (M, 2) with M >= 1, got {logits.shape}")
    if targets.shape != (logits.shape[0],):
        raise ShapeError(f"targets shape {targets.shape} does not match logits shape {logits.shape}")
    invalid = targets[(targets != 0) & (targets != 1)]
    if invalid.size:
        raise ContourRendError(f"labels must be 0 or 1, got {invalid[0]!r}")

    count = logits.shape[0]
    labels = targets.astype(np.intp)
    shifted = logits - logits.max(axis=1, keepdims=True)
    log_probs = shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    rows = np.arange(count)
    loss = -log_probs[rows, labels].mean()

    dlogits = np.exp(log_probs)
    dlogits[rows, labels] -= 1.0
    return float(loss), dlogits / count


def sigmoid_binary_cross_entropy(logits: np.ndarray, targets: np.ndarray) -> Tuple[float, np.ndarray]:
    """
    Mean binary cross entropy of ``sigmoid(logits)`` against ``targets`` in ``[0, 1]``.

    Evaluated in the log-sum-exp form so large logits stay finite.

    :return: ``(loss, dlogits)``.
    """
    if logits.shape != targets.shape:
        raise ShapeError(f"logits shape {logits.shape} does not match targets shape {targets.shape}")
    loss = np.maximum(logits, 0.0) - logits * targets + np.log1p(np.exp(-np.abs(logits)))
    return float(loss.mean()), (sigmoid(logits) - targets) / logits.size
