"""Plaintext execution of a network segment (client front/output, and
the whole middle in public modes)."""

from __future__ import annotations

import numpy as np

from ..nn import layers as L
from ..nn.loss import sgd_update
from ..ring import FixedConfig, FixedTensor
from ..nn.specs import NetworkSpec, init_layer_params
from .session import DOMAIN_WEIGHTS, derive_rng


def init_segment_params(net: NetworkSpec, indices, cfg: FixedConfig, seed: int) -> dict:
    """Per-layer generators keyed by layer index, so every role derives
    identical initial weights for the layers it holds."""
    params = {}
    for idx in indices:
        init = init_layer_params(net, idx, cfg, derive_rng(seed, DOMAIN_WEIGHTS, idx))
        if init is not None:
            params[idx] = init
    return params


_FORWARD = {
    "conv2d": lambda x, p: L.conv2d_forward(x, p[0], p[1]),
    "maxpool2x2": lambda x, p: L.maxpool2x2_forward(x),
    "relu": lambda x, p: L.relu_plain_forward(x),
    "fc": lambda x, p: L.fc_plain_forward(x, p[0], p[1]),
}


def segment_forward(net: NetworkSpec, indices, params: dict, x: FixedTensor):
    """Run the given layer indices in order; returns (y, caches)."""
    caches = {}
    for idx in indices:
        layer = net.layers[idx]
        x, caches[idx] = _FORWARD[layer.kind](x, params.get(idx))
    return x, caches


def segment_backward(net: NetworkSpec, indices, params: dict, caches: dict, grad: FixedTensor):
    """Reverse pass; returns (grad wrt segment input, {idx: (gw, gb)})."""
    grads = {}
    for idx in reversed(list(indices)):
        layer = net.layers[idx]
        if layer.kind == "conv2d":
            grad, gw, gb = L.conv2d_backward(grad, caches[idx])
            grads[idx] = (gw, gb)
        elif layer.kind == "maxpool2x2":
            grad = L.maxpool2x2_backward(grad, caches[idx])
        elif layer.kind == "relu":
            grad = L.relu_plain_backward(grad, caches[idx])
        else:
            grad, gw, gb = L.fc_plain_backward(grad, caches[idx])
            grads[idx] = (gw, gb)
    return grad, grads


def apply_sgd(params: dict, grads: dict, eta_enc: int):
    for idx, (gw, gb) in grads.items():
        w, b = params[idx]
        params[idx] = (sgd_update(w, gw, eta_enc), sgd_update(b, gb, eta_enc))


def one_hot(labels: np.ndarray, classes: int, cfg: FixedConfig) -> FixedTensor:
    eye = np.zeros((labels.shape[0], classes), dtype=np.float64)
    eye[np.arange(labels.shape[0]), labels] = 1.0
    return FixedTensor.encode(eye, cfg)
