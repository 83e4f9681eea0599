"""Plaintext fixed-point layers (client-side and public-mode middle).

All activations and parameters are ring tensors at scale 2^f.  Products
accumulate exactly in the ring and are truncated once per output
element, so a layer's output matches the real-arithmetic reference
within the accumulated truncation error.
"""

from __future__ import annotations

import numpy as np

from ..errors import ShapeMismatch
from ..ring import FixedConfig, FixedTensor, _mask, ring_matmul, to_signed, trunc


def _conv_indices(h: int, w: int, kh: int, kw: int, stride: int):
    out_h = (h - kh) // stride + 1
    out_w = (w - kw) // stride + 1
    ki = np.repeat(np.arange(kh), kw)
    kj = np.tile(np.arange(kw), kh)
    oi = stride * np.repeat(np.arange(out_h), out_w)
    oj = stride * np.tile(np.arange(out_w), out_h)
    rows = ki[:, None] + oi[None, :]  # [kh*kw, out_h*out_w]
    cols = kj[:, None] + oj[None, :]
    return out_h, out_w, rows, cols


def im2col(x: np.ndarray, kh: int, kw: int, stride: int):
    """[B,C,H,W] -> ([B*oh*ow, C*kh*kw], oh, ow, rows, cols)."""
    b, c, h, w = x.shape
    out_h, out_w, rows, cols = _conv_indices(h, w, kh, kw, stride)
    patches = x[:, :, rows, cols]  # [B, C, kh*kw, oh*ow]
    mat = patches.transpose(0, 3, 1, 2).reshape(b * out_h * out_w, c * kh * kw)
    return np.ascontiguousarray(mat), out_h, out_w, rows, cols


def conv2d_forward(x: FixedTensor, w: FixedTensor, bias: FixedTensor, stride: int = 1):
    """Valid-padding 2-D convolution; returns (y, cache)."""
    if x.data.ndim != 4 or w.data.ndim != 4 or x.shape[1] != w.shape[1]:
        raise ShapeMismatch(f"conv2d {x.shape} with kernel {w.shape}")
    cfg = x.cfg
    b = x.shape[0]
    out_ch, _, kh, kw = w.shape
    cols, out_h, out_w, rows, cidx = im2col(x.data, kh, kw, stride)
    w_mat = w.data.reshape(out_ch, -1).T  # [C*kh*kw, O]
    prod = ring_matmul(cols, w_mat, cfg)
    y = _mask(trunc(prod, cfg) + bias.data[None, :], cfg)
    y = y.reshape(b, out_h, out_w, out_ch).transpose(0, 3, 1, 2)
    cache = {
        "cols": cols, "w_mat": w_mat, "x_shape": x.shape, "stride": stride,
        "rows": rows, "cidx": cidx, "kernel": (out_ch, x.shape[1], kh, kw),
    }
    return FixedTensor(np.ascontiguousarray(y), cfg), cache


def conv2d_backward(grad_y: FixedTensor, cache):
    """Gradients w.r.t. input, weights and bias of conv2d_forward."""
    cfg = grad_y.cfg
    b, out_ch, out_h, out_w = grad_y.shape
    g = np.ascontiguousarray(grad_y.data.transpose(0, 2, 3, 1)).reshape(-1, out_ch)
    cols, w_mat = cache["cols"], cache["w_mat"]
    grad_w = trunc(ring_matmul(cols.T, g, cfg), cfg)
    o, c, kh, kw = cache["kernel"]
    grad_w = np.ascontiguousarray(grad_w.reshape(c, kh * kw, o).transpose(2, 0, 1)).reshape(o, c, kh, kw)
    grad_b = _mask(g.sum(axis=0, dtype=np.uint64), cfg)
    grad_cols = trunc(ring_matmul(g, w_mat.T, cfg), cfg)  # [B*oh*ow, C*kh*kw]
    bsz, csz, h, w = cache["x_shape"]
    patches = grad_cols.reshape(b, out_h * out_w, csz, kh * kw).transpose(0, 2, 3, 1)
    grad_x = np.zeros((bsz, csz, h, w), dtype=np.uint64)
    np.add.at(grad_x, (slice(None), slice(None), cache["rows"], cache["cidx"]), patches)
    grad_x = _mask(grad_x, cfg)
    return (
        FixedTensor(grad_x, cfg),
        FixedTensor(grad_w, cfg),
        FixedTensor(grad_b, cfg),
    )


def maxpool2x2_forward(x: FixedTensor):
    """2x2 max pooling with stride 2; ties go to the first window index
    in row-major order."""
    b, c, h, w = x.shape
    if h % 2 or w % 2:
        raise ShapeMismatch(f"maxpool2x2 needs even spatial dims, got {x.shape}")
    cfg = x.cfg
    win = x.data.reshape(b, c, h // 2, 2, w // 2, 2).transpose(0, 1, 2, 4, 3, 5)
    win = np.ascontiguousarray(win).reshape(b, c, h // 2, w // 2, 4)
    idx = np.argmax(to_signed(win, cfg), axis=-1)
    y = np.take_along_axis(win, idx[..., None], axis=-1)[..., 0]
    cache = {"idx": idx, "in_shape": x.shape}
    return FixedTensor(y, cfg), cache


def maxpool2x2_backward(grad_y: FixedTensor, cache):
    cfg = grad_y.cfg
    b, c, h, w = cache["in_shape"]
    scatter = np.zeros((b, c, h // 2, w // 2, 4), dtype=np.uint64)
    np.put_along_axis(scatter, cache["idx"][..., None], grad_y.data[..., None], axis=-1)
    grad_x = scatter.reshape(b, c, h // 2, w // 2, 2, 2).transpose(0, 1, 2, 4, 3, 5)
    return FixedTensor(np.ascontiguousarray(grad_x).reshape(b, c, h, w), cfg)


def relu_plain_forward(x: FixedTensor):
    cfg = x.cfg
    sign = (to_signed(x.data, cfg) >= 0).astype(np.uint64)
    y = _mask(x.data * sign, cfg)
    return FixedTensor(y, cfg), {"sign": sign}


def relu_plain_backward(grad_y: FixedTensor, cache):
    return FixedTensor(_mask(grad_y.data * cache["sign"], grad_y.cfg), grad_y.cfg)


def fc_plain_forward(x: FixedTensor, w: FixedTensor, bias: FixedTensor):
    """Affine layer; flattens non-2D input and remembers the shape."""
    cfg = x.cfg
    in_shape = x.shape
    flat = x.data.reshape(in_shape[0], -1)
    if flat.shape[1] != w.shape[0]:
        raise ShapeMismatch(f"fc {flat.shape} @ {w.shape}")
    y = _mask(trunc(ring_matmul(flat, w.data, cfg), cfg) + bias.data[None, :], cfg)
    return FixedTensor(y, cfg), {"x": flat, "w": w.data, "in_shape": in_shape}


def fc_plain_backward(grad_y: FixedTensor, cache):
    cfg = grad_y.cfg
    g = grad_y.data
    grad_x = trunc(ring_matmul(g, cache["w"].T, cfg), cfg).reshape(cache["in_shape"])
    grad_w = trunc(ring_matmul(cache["x"].T, g, cfg), cfg)
    grad_b = _mask(g.sum(axis=0, dtype=np.uint64), cfg)
    return FixedTensor(grad_x, cfg), FixedTensor(grad_w, cfg), FixedTensor(grad_b, cfg)
